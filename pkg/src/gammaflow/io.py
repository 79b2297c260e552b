"""JSON currents, CSV tables and run manifests.

Floats are written with ``repr`` (shortest round-trip form), so parsing a
file and writing it again reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence, Union

from .currents import BoxDomain, OneCurrent, ZeroCurrent

PathLike = Union[str, Path]


def current_to_json(T: Union[ZeroCurrent, OneCurrent], source: str = None) -> dict:
    """``{"dim", "atoms", "segments"}``; exactly one of the lists is non-empty in practice."""
    out = {"dim": T.dim, "atoms": [], "segments": []}
    if isinstance(T, ZeroCurrent):
        out["atoms"] = [{"x": list(x), "m": int(m)} for x, m in T]
    else:
        out["segments"] = [{"a": list(a), "b": list(b), "m": int(m)} for a, b, m in T]
    if source is not None:
        out["source"] = source
    return out


def current_from_json(obj: dict) -> Union[ZeroCurrent, OneCurrent]:
    dim = obj.get("dim")
    atoms = obj.get("atoms", [])
    segs = obj.get("segments", [])
    if atoms and segs:
        raise ValueError("a current is either atoms or segments")
    for a in atoms:
        if int(a["m"]) != a["m"]:
            raise ValueError("multiplicities must be integers")
    if segs:
        return OneCurrent([(tuple(s["a"]), tuple(s["b"]), int(s["m"])) for s in segs], dim=dim)
    return ZeroCurrent([(tuple(a["x"]), int(a["m"])) for a in atoms], dim=dim)


def domain_from_json(obj: dict) -> BoxDomain:
    return BoxDomain.from_json(obj)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows))
    return path


def read_csv(path: PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        r = list(csv.reader(f))
    return r[0], r[1:]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n"


def write_json(path: PathLike, obj) -> Path:
    path = Path(path)
    path.write_text(json_text(obj))
    return path


def sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
