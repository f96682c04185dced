"""Problem files: JSON descriptions of a named benchmark or a custom network."""

from __future__ import annotations

import json

import jsonschema

from .assembly import NEUMANN, Dirichlet, ModelSpec
from .cases import ManufacturedCase, get_case
from .geometry import build_fracture_graph
from .mesh import SIDES

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "case": {"enum": ["example1", "example2", "example3"]},
        "extra_fracture": {"type": "boolean"},
        "domain": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
        "nodes": {"type": "array", "items": _POINT},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["points"],
                "properties": {
                    "points": {"type": "array", "items": _POINT, "minItems": 2},
                    "a_gamma": {"type": "number", "minimum": 0},
                    "endpoints": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "a": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "a_gamma": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "f": _NUM,
        "f_gamma": _NUM,
        "bc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                side: {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["dirichlet", "neumann"]},
                        "value": {"oneOf": [_NUM, {"const": "exact"}]},
                    },
                }
                for side in SIDES
            },
        },
        "parameters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0},
                "beta_gamma": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 2},
                "n0": {"type": "integer", "minimum": 2},
                "levels": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer"},
            },
        },
    },
}


class ProblemError(ValueError):
    """Malformed or inconsistent problem file; ``details`` is JSON-serializable."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


def parse_problem(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ProblemError(f"schema violation at '{path}': {exc.message}", path=path) from None
    return data


def load_problem(path):
    with open(path) as fh:
        return parse_problem(fh.read())


def build_case(data) -> tuple[ManufacturedCase, dict]:
    """Case and run parameters from a validated problem dictionary."""
    params = dict(data.get("parameters", {}))
    if "case" in data:
        custom = {"domain", "nodes", "edges", "a", "f", "bc"} & set(data)
        if custom:
            raise ProblemError(f"named cases fix their own {sorted(custom)}", keys=sorted(custom))
        k = int(data["case"][-1])
        kwargs = {}
        if data.get("extra_fracture"):
            if k == 3:
                raise ProblemError("example3 has no extra fracture option")
            kwargs["extra_fracture"] = True
        if "f_gamma" in data:
            if k != 2:
                raise ProblemError("f_gamma can only be set for example2")
            kwargs["f_gamma"] = float(data["f_gamma"])
        case = get_case(k, **kwargs)
        if "a_gamma" in data:
            case = _with_a_gamma(case, data["a_gamma"])
        return case, params

    missing = [key for key in ("domain", "nodes", "edges", "a") if key not in data]
    if missing:
        raise ProblemError(f"custom problems need {missing}", missing=missing)
    if "extra_fracture" in data:
        raise ProblemError("extra_fracture applies to named cases only")
    raw_edges = [{"points": e["points"], "a_gamma": e.get("a_gamma", 0.0),
                  **({"endpoints": e["endpoints"]} if "endpoints" in e else {})} for e in data["edges"]]
    domain = tuple(data["domain"])
    graph = build_fracture_graph(data["nodes"], raw_edges, domain=domain)
    n_sub = graph.subdomains.n_subdomains
    if len(data["a"]) != n_sub:
        raise ProblemError(f"network has {n_sub} subdomains but {len(data['a'])} permeabilities given",
                           subdomains=n_sub)
    bc = {}
    for side in SIDES:
        entry = data.get("bc", {}).get(side, {"type": "dirichlet", "value": 0.0})
        if entry["type"] == "neumann":
            bc[side] = NEUMANN
        elif entry.get("value") == "exact":
            raise ProblemError("'exact' boundary values need a named case", side=side)
        else:
            bc[side] = Dirichlet(float(entry.get("value", 0.0)))
    model = ModelSpec(a=tuple(data["a"]), f=float(data.get("f", 0.0)),
                      f_gamma=float(data.get("f_gamma", 0.0)), bc=bc)
    case = ManufacturedCase("custom", domain, model, lambda _n: graph)
    if "a_gamma" in data:
        case = _with_a_gamma(case, data["a_gamma"])
    return case, params


def _with_a_gamma(case, values):
    n_edges = len(case.graph.edges)
    if len(values) != n_edges:
        raise ProblemError(f"a_gamma needs {n_edges} values, got {len(values)}", edges=n_edges)
    return case.with_overrides(a_gamma=values)


def example_problem(k):
    """Problem file for benchmark k with its default parameters spelled out."""
    k = int(k)
    if k not in (1, 2, 3):
        raise ProblemError(f"unknown example {k}")
    case = get_case(k)
    data = {
        "case": f"example{k}",
        "a_gamma": [e.a_gamma for e in case.graph.edges],
        "parameters": {"gamma": case.model.gamma, "n": 32, "n0": 8, "levels": 5, "seed": 0},
    }
    if k == 2:
        data["f_gamma"] = 1.0
    return data
