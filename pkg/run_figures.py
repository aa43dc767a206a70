import logging
import os
import sys
from typing import List, Optional

from config import settings
from sense_commands.common import OUTPUT_DIR, run_command

logger = logging.getLogger(__name__)


def run_all_recipes(output_dir: Optional[str] = None, workers: Optional[int] = None,
                    names: Optional[List[str]] = None) -> List[str]:
    """依次运行全部配方，单个配方失败时记录并继续；返回失败的配方名"""
    output_dir = output_dir or OUTPUT_DIR
    os.makedirs(output_dir, exist_ok=True)
    recipes = settings.load_recipes()
    failures = []
    for name in names or list(recipes):
        command = recipes.get(name, {}).get("command")
        try:
            logger.info("运行配方: %s -> %s", name, command)
            overrides = {"recipe": name}
            if workers is not None:
                overrides["workers"] = workers
            path = run_command(command, overrides, output_dir)
            logger.info("配方 %s 完成: %s", name, path)
        except Exception as e:
            logger.error("配方 %s 运行失败: %s", name, e)
            failures.append(name)
    if failures:
        logger.error("失败的配方: %s", ", ".join(failures))
    return failures


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    sys.exit(1 if run_all_recipes(sys.argv[1] if len(sys.argv) > 1 else None) else 0)
