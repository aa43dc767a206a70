import csv
import json
import logging
import math
import os
import re
import tempfile
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

UNITS = "omega = 1; times in 1/omega; rates in omega"
FORMATS = ("csv", "json")
METADATA_PREFIX = "# "
_INT_PATTERN = re.compile(r"^-?\d+$")


def build_metadata(config: Dict[str, Any], seed: Optional[int], columns: Sequence[str],
                   summary: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """ 输出文件自带的元数据：完整配置、种子、单位约定、列名、汇总 """
    metadata = {"config": config, "seed": seed, "units": UNITS, "columns": list(columns)}
    if summary is not None:
        metadata["summary"] = summary
    return metadata


# ------------------------------
# 数值转换
# ------------------------------
def _jsonable(value: Any) -> Any:
    """numpy 类型转为内置类型，非有限浮点数转为字符串"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _from_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _from_json(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_from_json(v) for v in value]
    if value in ("inf", "-inf", "nan"):
        return float(value)
    return value


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT_PATTERN.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


# ------------------------------
# 原子写入
# ------------------------------
def _atomic_write(filename: str, text: str) -> None:
    """先写同目录临时文件，完整写完后再改名，失败时不留下半截文件"""
    directory = os.path.dirname(os.path.abspath(filename))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, filename)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def render_json(rows: List[Dict[str, Any]], metadata: Dict[str, Any]) -> str:
    document = {"metadata": _jsonable(metadata), "rows": _jsonable(rows)}
    return json.dumps(document, indent=4, ensure_ascii=False) + "\n"


def render_csv(rows: List[Dict[str, Any]], metadata: Dict[str, Any]) -> str:
    columns = list(metadata.get("columns") or (rows[0].keys() if rows else []))
    lines = [METADATA_PREFIX + json.dumps({key: _jsonable(value)}, ensure_ascii=False)
             for key, value in metadata.items()]

    class _Buffer(list):
        def write(self, s):
            self.append(s)

    buffer = _Buffer()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(c)) for c in columns])
    return "\n".join(lines) + "\n" + "".join(buffer)


def export_to_json(rows: List[Dict[str, Any]], filename: str, metadata: Dict[str, Any]) -> str:
    """导出数据到 JSON 文件"""
    try:
        _atomic_write(filename, render_json(rows, metadata))
        logger.info("数据已导出到: %s", filename)
    except Exception as e:
        logger.error("导出 JSON 失败: %s", e)
        raise
    return filename


def export_to_csv(rows: List[Dict[str, Any]], filename: str, metadata: Dict[str, Any]) -> str:
    """导出数据到 CSV 文件，文件头为 '# ' 开头的 JSON 行元数据"""
    try:
        _atomic_write(filename, render_csv(rows, metadata))
        logger.info("数据已导出到: %s", filename)
    except Exception as e:
        logger.error("导出 CSV 失败: %s", e)
        raise
    return filename


def export_results(rows: List[Dict[str, Any]], output_dir: str, name: str, fmt: str,
                   metadata: Dict[str, Any]) -> str:
    """ 按格式写入 output_dir/name.{csv,json} """
    if fmt not in FORMATS:
        raise ValueError(f"unknown output format {fmt!r}; expected one of {FORMATS}")
    filename = os.path.join(output_dir, f"{name}.{fmt}")
    if fmt == "json":
        return export_to_json(rows, filename, metadata)
    return export_to_csv(rows, filename, metadata)


# ------------------------------
# 读取
# ------------------------------
def read_json_result(filename: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    with open(filename, "r", encoding="utf-8") as f:
        document = json.load(f)
    return _from_json(document["metadata"]), _from_json(document["rows"])


def read_csv_result(filename: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    metadata: Dict[str, Any] = {}
    with open(filename, "r", encoding="utf-8", newline="") as f:
        lines = f.read().split("\n")
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith(METADATA_PREFIX):
            body_start = i
            break
        metadata.update(_from_json(json.loads(line[len(METADATA_PREFIX):])))
    reader = csv.reader(lines[body_start:])
    rows: List[Dict[str, Any]] = []
    header: List[str] = []
    for record in reader:
        if not record:
            continue
        if not header:
            header = record
            continue
        rows.append({c: _parse_cell(v) for c, v in zip(header, record)})
    return metadata, rows
