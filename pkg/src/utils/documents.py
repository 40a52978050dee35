"""YAML and CSV document helpers.

Documents are dumped canonically: sorted keys and floats printed with 17
significant digits, so the same data always yields the same bytes and
every float reads back to the identical value.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from src.config import FLOAT_DIGITS

_BaseDumper = getattr(yaml, "CSafeDumper", yaml.SafeDumper)
_BaseLoader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)


def format_float(value: float) -> str:
    """Shortest-safe YAML float text for value (always readable as a float)."""
    value = float(value)
    if math.isnan(value):
        return ".nan"
    if math.isinf(value):
        return ".inf" if value > 0 else "-.inf"
    text = f"{value:.{FLOAT_DIGITS}g}"
    if "e" in text:
        mantissa, exponent = text.split("e")
        if "." not in mantissa:
            mantissa += ".0"
        return f"{mantissa}e{exponent}"
    if "." not in text:
        text += ".0"
    return text


class CanonicalDumper(_BaseDumper):
    pass


def _represent_float(dumper: yaml.SafeDumper, value: float):
    return dumper.represent_scalar("tag:yaml.org,2002:float", format_float(value))


CanonicalDumper.add_representer(float, _represent_float)


def to_plain(value: Any) -> Any:
    """Convert numpy containers and scalars into plain Python objects."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dump_yaml(data: Any) -> str:
    return yaml.dump(
        to_plain(data),
        Dumper=CanonicalDumper,
        sort_keys=True,
        default_flow_style=None,
        allow_unicode=True,
        width=120,
    )


def load_yaml(text: str) -> Any:
    return yaml.load(text, Loader=_BaseLoader)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_yaml(path: Path, data: Any) -> Path:
    return atomic_write_text(path, dump_yaml(data))


def read_yaml(path: Path) -> Any:
    return load_yaml(Path(path).read_text(encoding="utf-8"))


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{FLOAT_DIGITS}g}"
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a numeric CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))
