"""Tabular scan results and their CSV/JSON emission."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class ScanResult:
    """Ordered named columns of equal length plus free-form metadata."""

    columns: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns differ in length: {sorted(lengths)}")
        self.metadata.setdefault("tool_version", __version__)

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def flat_columns(self) -> dict[str, np.ndarray]:
        """Real-valued view: complex columns split into ``<name>_re`` and ``<name>_im``."""
        out = {}
        for name, col in self.columns.items():
            if np.iscomplexobj(col):
                out[f"{name}_re"] = col.real.astype(float)
                out[f"{name}_im"] = col.imag.astype(float)
            else:
                out[name] = col.astype(float)
        return out


def _fmt(x: float) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(x))


def _json_value(x):
    x = float(x)
    return x if math.isfinite(x) else None


def to_csv(result: ScanResult) -> str:
    flat = result.flat_columns()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(flat.keys())
    for row in zip(*flat.values()):
        writer.writerow(_fmt(x) for x in row)
    return buf.getvalue()


def to_json(result: ScanResult) -> str:
    doc = {
        "metadata": result.metadata,
        "columns": {k: [_json_value(x) for x in v] for k, v in result.flat_columns().items()},
    }
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def emit(result: ScanResult, fmt: str = "csv", destination=None) -> str:
    """Render ``result`` as csv or json; write it to ``destination`` if given.

    ``destination`` may be a path or an open text stream. The rendered text
    is returned either way.
    """
    if fmt == "csv":
        text = to_csv(result)
    elif fmt == "json":
        text = to_json(result)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if destination is None:
        return text
    if hasattr(destination, "write"):
        destination.write(text)
        return text
    path = Path(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def read_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
