"""命令模块：每个模块提供 collect_*(config) 与 main(config, output_dir)"""
