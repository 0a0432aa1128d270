"""Instance files and reports.

Instance files are JSON.  Elements are referred to by name everywhere;
objective tables list ``[sorted member names, value]`` pairs.  Floats are
written with 17 significant digits so reports are reproducible byte for
byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import LatticeDRError
from .functions import CostFunction, Instance, ObjectiveOracle, make_coverage, make_concave_modular, make_modular, make_table
from .poset import Poset, build

SCHEMA_VERSION = 1


class ParseError(LatticeDRError):
    """Malformed instance file; ``location`` points at the offending entry."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


# --- canonical JSON writer -----------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float in output")
    if x == int(x) and abs(x) < 1e16:
        return f"{int(x)}.0"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# --- instance files ----------------------------------------------------------------

def _require(d, key, loc):
    if not isinstance(d, dict) or key not in d:
        raise ParseError(f"missing field {key!r}", loc)
    return d[key]


def _names_to_set(names, index, loc):
    out = set()
    for nm in names:
        if nm not in index:
            raise ParseError(f"unknown element {nm!r}", loc)
        out.add(index[nm])
    return frozenset(out)


def _by_name(vals, names, loc) -> list[float]:
    if isinstance(vals, dict):
        missing = [n for n in names if n not in vals]
        extra = [k for k in vals if k not in names]
        if missing or extra:
            raise ParseError(f"names missing {missing} / unknown {extra}", loc)
        return [float(vals[n]) for n in names]
    if isinstance(vals, list) and len(vals) == len(names):
        return [float(v) for v in vals]
    raise ParseError("expected a name->value map or a list with one value per element", loc)


def instance_from_dict(doc: dict, validate: bool = True, cap: int = 4096) -> tuple[Instance, dict | None]:
    ver = _require(doc, "schema_version", "$")
    if ver != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {ver}", "$.schema_version")
    pos = _require(doc, "poset", "$")
    names = list(_require(pos, "elements", "$.poset"))
    if len(set(names)) != len(names) or not all(isinstance(n, str) for n in names):
        raise ParseError("element names must be distinct strings", "$.poset.elements")
    index = {n: i for i, n in enumerate(names)}
    covers = []
    for k, pair in enumerate(_require(pos, "covers", "$.poset")):
        loc = f"$.poset.covers[{k}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ParseError("cover must be a [lower, upper] pair", loc)
        a, b = pair
        if a not in index or b not in index:
            raise ParseError(f"unknown element in cover {pair}", loc)
        covers.append((index[a], index[b]))
    P = build(len(names), covers, names)

    obj = _require(doc, "objective", "$")
    f = objective_from_dict(obj, P, names, index)

    cons = []
    for k, c in enumerate(_require(doc, "constraints", "$")):
        loc = f"$.constraints[{k}]"
        w = _by_name(_require(c, "weights", loc), names, loc + ".weights")
        try:
            cons.append(CostFunction(w, float(_require(c, "budget", loc)), c.get("label", f"c{k}")))
        except ValueError as e:
            raise ParseError(str(e), loc) from None
    fixture = doc.get("fixture")
    return Instance(P, f, cons, validate=validate, cap=cap), fixture


def objective_from_dict(obj: dict, P: Poset, names, index) -> ObjectiveOracle:
    fam = _require(obj, "family", "$.objective")
    loc = "$.objective"
    if fam == "modular":
        return make_modular(_by_name(_require(obj, "weights", loc), names, loc + ".weights"))
    if fam == "concave_modular":
        w = _by_name(_require(obj, "weights", loc), names, loc + ".weights")
        return make_concave_modular(w, obj.get("phi", "sqrt"), float(obj.get("param", 1.0)))
    if fam == "coverage":
        universe = {str(k): float(v) for k, v in _require(obj, "universe", loc).items()}
        sensors = _require(obj, "sensors", loc)
        if not isinstance(sensors, dict) or set(sensors) != set(names):
            raise ParseError("sensors must map every element name to an item list", loc + ".sensors")
        try:
            return make_coverage(universe, [sensors[n] for n in names], P)
        except ValueError as e:
            raise ParseError(str(e), loc) from None
    if fam == "table":
        values = {}
        for k, entry in enumerate(_require(obj, "values", loc)):
            eloc = f"{loc}.values[{k}]"
            if not (isinstance(entry, list) and len(entry) == 2):
                raise ParseError("table entry must be [names, value]", eloc)
            values[_names_to_set(entry[0], index, eloc)] = float(entry[1])
        return make_table(values)
    raise ParseError(f"unknown objective family {fam!r}", loc + ".family")


def objective_to_dict(f: ObjectiveOracle, P: Poset) -> dict:
    d = f.descriptor
    names = [P.name(p) for p in range(P.n)]
    fam = d.get("family")
    if fam == "modular":
        return {"family": "modular", "weights": dict(zip(names, map(float, d["weights"])))}
    if fam == "concave_modular":
        return {"family": "concave_modular", "weights": dict(zip(names, map(float, d["weights"]))),
                "phi": d["phi"], "param": float(d["param"])}
    if fam == "coverage":
        return {"family": "coverage", "universe": {k: float(v) for k, v in d["universe"].items()},
                "sensors": {nm: list(s) for nm, s in zip(names, d["sensors"])}}
    if fam == "table":
        rows = sorted(d["values"].items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
        return {"family": "table", "values": [[names_of(P, X), float(v)] for X, v in rows]}
    raise ValueError(f"objective family {fam!r} cannot be written to an instance file")


def names_of(P: Poset, X) -> list[str]:
    return [P.name(p) for p in sorted(X)]


def instance_to_dict(inst: Instance, fixture: dict | None = None) -> dict:
    P = inst.poset
    names = [P.name(p) for p in range(P.n)]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "poset": {"elements": names, "covers": [[names[p], names[q]] for p, q in P.covers]},
        "objective": objective_to_dict(inst.objective, P),
        "constraints": [{"label": c.label, "budget": float(c.budget),
                         "weights": dict(zip(names, map(float, c.weights)))} for c in inst.constraints],
    }
    if fixture is not None:
        doc["fixture"] = fixture
    return doc


def load_instance(path, validate: bool = True, cap: int = 4096):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read file: {e.strerror}", str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"{path}:{e.lineno}:{e.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", str(path))
    try:
        return instance_from_dict(doc, validate=validate, cap=cap)
    except (TypeError, ValueError, AttributeError) as e:
        raise ParseError(str(e), str(path)) from None


def save_instance(inst: Instance, path, fixture: dict | None = None) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst, fixture)) + "\n")
