"""Deterministic text output: 17-significant-digit floats, atomic file writes."""
from __future__ import annotations

import os
import tempfile


def fmt17(x) -> str:
    """Format a number with 17 significant digits (round-trip safe for float64)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _json_fragment(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return "null"  # JSON has no NaN/Infinity
        return fmt17(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, dict):
        items = ", ".join(f"{_json_fragment(str(k))}: {_json_fragment(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_fragment(v) for v in obj) + "]"
    # numpy scalars and arrays
    if hasattr(obj, "item") and getattr(obj, "ndim", None) == 0:
        return _json_fragment(obj.item())
    if hasattr(obj, "tolist"):
        return _json_fragment(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj)!r}")


def json_dumps(obj) -> str:
    """JSON text with floats at 17 significant digits and insertion-ordered keys.

    Byte-identical output for identical input; non-finite floats become null.
    """
    return _json_fragment(obj) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename so concurrent readers never see partial files."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt17(v) if not isinstance(v, str) else v for v in row))
    return "\n".join(lines) + "\n"
