"""JSON persistence for converged states, plus the number formatting shared by all outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import StateFileError
from .umps import UniformMPS

FORMAT_VERSION = 1
JSON_DIGITS = 17
CSV_DIGITS = 10


# --------------------------------------------------------------------------
# formatting


def fmt_float(x, digits=JSON_DIGITS):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, f".{digits}g")


def _encode(obj, digits, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj, digits)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, digits, indent, level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        # keep numeric leaves on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in seq):
            return "[" + ", ".join(_encode(v, digits, None, 0) for v in seq) + "]"
        items = [pad + _encode(v, digits, indent, level + 1) for v in seq]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, digits=JSON_DIGITS, indent=1) -> str:
    """JSON text with every float printed to ``digits`` significant digits."""
    return _encode(obj, digits, indent, 0) + "\n"


# --------------------------------------------------------------------------
# atomic file io


def atomic_write(path, data):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def text_hash(text) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()


# --------------------------------------------------------------------------
# state files


def state_to_dict(state: UniformMPS, model: str, params: dict, energy_density, gradient_norm) -> dict:
    A = np.asarray(state.A, dtype=complex)
    nested = np.stack([A.real, A.imag], axis=-1).tolist()
    return {
        "model": model,
        "params": {"J": float(params.get("J", 1.0)), "h": float(params.get("h", 1.0))},
        "D": state.D,
        "d": state.d,
        "energy_density": float(energy_density),
        "gradient_norm": float(gradient_norm),
        "A": nested,
        "format_version": FORMAT_VERSION,
    }


def write_state(path, state: UniformMPS, model: str, params: dict, energy_density, gradient_norm):
    atomic_write(path, dumps(state_to_dict(state, model, params, energy_density, gradient_norm)))


def read_state(path, normalize=False):
    """Load a state file; returns ``(state, meta)`` where meta has the scalar fields.

    The tensor is used exactly as stored; fixed points are recomputed.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise StateFileError(path, f"cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StateFileError(path, f"parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise StateFileError(path, "top level is not an object")
    missing = {"model", "params", "D", "d", "energy_density", "gradient_norm", "A", "format_version"} - set(raw)
    if missing:
        raise StateFileError(path, f"missing fields {sorted(missing)}")
    if raw["format_version"] != FORMAT_VERSION:
        raise StateFileError(path, f"unsupported format_version {raw['format_version']}")
    try:
        arr = np.asarray(raw["A"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFileError(path, f"malformed tensor: {exc}") from exc
    D, d = int(raw["D"]), int(raw["d"])
    if arr.shape != (D, d, D, 2):
        raise StateFileError(path, f"tensor shape {arr.shape} does not match D={D}, d={d}")
    A = arr[..., 0] + 1j * arr[..., 1]
    if not np.all(np.isfinite(A)):
        raise StateFileError(path, "tensor has non-finite entries")
    state = UniformMPS.from_tensor(A, normalize=normalize)
    meta = {k: raw[k] for k in ("model", "params", "D", "d", "energy_density", "gradient_norm")}
    return state, meta


def _csv_cell(v, digits):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v, digits)
    return "" if v is None else str(v)


def write_csv(path, header, rows, digits=CSV_DIGITS):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_csv_cell(v, digits) for v in row] for row in rows)
    atomic_write(path, buf.getvalue())


def _parse_cell(cell):
    if cell in ("true", "false"):
        return cell == "true"
    try:
        return float(cell)
    except ValueError:
        return cell if cell else None


def read_csv(path):
    """``(header, rows)`` with numeric cells converted to float where possible."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse_cell(c) for c in row] for row in reader]
    return header, rows
