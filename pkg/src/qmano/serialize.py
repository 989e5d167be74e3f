"""JSON helpers: complex numbers travel as ``[re, im]`` pairs."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import numpy as np

from .errors import QDomainError


def cjson(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def cparse(v) -> complex:
    """Accept ``[re, im]``, a bare number, or ``{"re":..,"im":..}``."""
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict) and "re" in v:
        return complex(float(v["re"]), float(v.get("im", 0.0)))
    raise QDomainError(f"cannot read a complex number from {v!r}")


def to_jsonable(obj: Any):
    """Recursively convert complex / numpy values into JSON-friendly types."""
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, (complex, np.complexfloating)):
        return cjson(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
