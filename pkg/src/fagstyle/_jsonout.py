"""Deterministic JSON emission with floats at 17 significant digits.

The stdlib encoder prints shortest-repr floats; the CLI contract pins the
format to %.17g (which round-trips every binary64 exactly), so this tiny
writer owns float formatting and key order (insertion order, never sorted).
"""

from __future__ import annotations

import json
import math


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite value {x!r} in JSON output")
    return format(x, ".17g")


def dumps(obj, indent: int | None = None) -> str:
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out)


def _emit(obj, out, indent, level):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj))
    elif isinstance(obj, dict):
        _emit_seq(obj.items(), out, indent, level, "{", "}", True)
    elif isinstance(obj, (list, tuple)):
        _emit_seq(obj, out, indent, level, "[", "]", False)
    else:
        # numpy scalars and similar duck-typed numbers
        if hasattr(obj, "item"):
            _emit(obj.item(), out, indent, level)
        else:
            raise TypeError(f"cannot serialize {type(obj)!r}")


def _emit_seq(items, out, indent, level, open_ch, close_ch, is_map):
    items = list(items)
    if not items:
        out.append(open_ch + close_ch)
        return
    pad = "" if indent is None else "\n" + " " * indent * (level + 1)
    end_pad = "" if indent is None else "\n" + " " * indent * level
    sep = "," + pad
    out.append(open_ch + pad)
    for i, item in enumerate(items):
        if i:
            out.append(sep)
        if is_map:
            key, value = item
            out.append(json.dumps(str(key)))
            out.append(": " if indent is not None else ":")
            _emit(value, out, indent, level + 1)
        else:
            _emit(item, out, indent, level + 1)
    out.append(end_pad + close_ch)
