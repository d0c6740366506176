"""JSON encodings of point sets, distance results, shift plans and gadget specs.

Bases are written as a list of basis vectors (rows in the file, columns in
memory).  Infinite distances are stored as the string "inf".
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .bottleneck import BottleneckResult, IsometryParams, Matching
from .geometry import FinitePointSet, Lattice, PeriodicPointSet, RadiusInterval
from .transport import ShiftPlan, ShiftStep


class FormatError(ValueError):
    def __init__(self, message: str, source: str = "<input>", line: int | None = None,
                 column: int | None = None):
        self.source, self.line, self.column = source, line, column
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")


def _where(text: str, fragment: str) -> tuple[int | None, int | None]:
    """Line and column of the first occurrence of a JSON key, for schema errors."""
    pos = text.find(f'"{fragment}"')
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    column = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, column


def parse_json(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, source, exc.lineno, exc.colno) from None


def read_json(path) -> tuple[object, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", str(path)) from None
    return parse_json(text, str(path)), text


_FLAT_ARRAY = re.compile(r"\[\s+([^\[\]{}]*?)\s+\]")


def dumps(obj) -> str:
    """Indented JSON with innermost arrays of scalars kept on one line."""
    text = json.dumps(obj, indent=2)
    return _FLAT_ARRAY.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text) + "\n"


def _real(x) -> float | str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unreal(x) -> float:
    if isinstance(x, str):
        if x in ("inf", "-inf"):
            return float(x)
        raise ValueError(f"expected a number or 'inf', got {x!r}")
    return float(x)


def _matrix(obj, rows: int | None, cols: int | None, name: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (ValueError, TypeError):
        raise ValueError(f"'{name}' must be a rectangular array of numbers") from None
    if arr.size == 0 and rows is None and cols is not None:
        arr = arr.reshape(0, cols)
    if arr.ndim != 2 or (rows is not None and arr.shape[0] != rows) or (cols is not None and arr.shape[1] != cols):
        raise ValueError(f"'{name}' must be a {rows or 'n'} x {cols or 'n'} array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"'{name}' has non-finite entries")
    return arr


# ---- point sets


def pps_to_dict(x) -> dict:
    if isinstance(x, Lattice):
        x = PeriodicPointSet.from_lattice(x)
    return {"dim": x.dim, "basis": np.array(x.lattice.basis).T.tolist(), "motif": np.array(x.motif).tolist()}


def pps_from_dict(obj) -> PeriodicPointSet:
    if not isinstance(obj, dict):
        raise ValueError("point set record must be an object")
    for key in ("dim", "basis"):
        if key not in obj:
            raise ValueError(f"missing key '{key}'")
    d = obj["dim"]
    if not isinstance(d, int) or d < 1:
        raise ValueError("'dim' must be a positive integer")
    basis = _matrix(obj["basis"], d, d, "basis").T
    motif = _matrix(obj.get("motif", [[0.0] * d]), None, d, "motif")
    return PeriodicPointSet(Lattice(basis), motif)


def finite_to_dict(x: FinitePointSet) -> dict:
    return {"dim": x.dim, "points": np.array(x.points).tolist()}


def finite_from_dict(obj) -> FinitePointSet:
    if "dim" not in obj or "points" not in obj:
        raise ValueError("finite point set needs 'dim' and 'points'")
    return FinitePointSet(_matrix(obj["points"], None, obj["dim"], "points"), dim=obj["dim"])


def point_set_from_dict(obj):
    """A periodic set when the record has a basis, else a finite set."""
    if isinstance(obj, dict) and "basis" in obj:
        return pps_from_dict(obj)
    if isinstance(obj, dict) and "points" in obj:
        return finite_from_dict(obj)
    raise ValueError("record is neither a periodic nor a finite point set")


def load_point_set(path):
    obj, text = read_json(path)
    try:
        return point_set_from_dict(obj)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        key = msg.split("'")[1] if msg.count("'") >= 2 else ""
        line, column = _where(text, key) if key else (None, None)
        raise FormatError(msg, str(path), line, column) from None


# ---- results


def result_to_dict(res: BottleneckResult) -> dict:
    iso = None
    if res.isometry is not None:
        iso = {"orthogonal": res.isometry.orthogonal.tolist(),
               "translation": res.isometry.translation.tolist()}
    witness = None if res.witness is None else [list(p) for p in res.witness.pairs]
    out = {"lower": _real(res.lower), "upper": _real(res.upper), "witness": witness, "isometry": iso}
    if res.truncated:
        out["truncated"] = True
    return out


def result_from_dict(obj) -> BottleneckResult:
    lower, upper = _unreal(obj["lower"]), _unreal(obj["upper"])
    witness = None
    if obj.get("witness") is not None:
        pairs = tuple((int(i), int(j)) for i, j in obj["witness"])
        witness = Matching(pairs, upper)
    iso = None
    if obj.get("isometry") is not None:
        iso = IsometryParams(np.array(obj["isometry"]["orthogonal"], dtype=float),
                             np.array(obj["isometry"]["translation"], dtype=float))
    return BottleneckResult(RadiusInterval(lower, upper), witness, iso, bool(obj.get("truncated", False)))


# ---- shift plans


def plan_to_dict(plan: ShiftPlan) -> dict:
    steps = [{"v": s.v.tolist(), "w": s.w.tolist(),
              "basis_before": s.basis_before.T.tolist(), "basis_after": s.basis_after.T.tolist()}
             for s in plan.steps]
    return {"source": np.array(plan.source).T.tolist(), "target": np.array(plan.target).T.tolist(),
            "steps": steps, "bound": plan.bound}


def plan_from_dict(obj) -> ShiftPlan:
    steps = [ShiftStep(np.array(s["v"], dtype=float), np.array(s["w"], dtype=float),
                       np.array(s["basis_before"], dtype=float).T, np.array(s["basis_after"], dtype=float).T)
             for s in obj["steps"]]
    if "source" in obj:
        source = np.array(obj["source"], dtype=float).T
        target = np.array(obj["target"], dtype=float).T
    elif steps:
        source, target = steps[0].basis_before, steps[-1].basis_after
    else:
        raise ValueError("empty plan needs 'source' and 'target'")
    return ShiftPlan(source, target, steps)
