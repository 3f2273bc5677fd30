"""
Scenario files: YAML documents describing agents, beings, maps, an
influence graph, a simulation block and a list of analyses.

Parsing runs in three passes. YAML syntax errors raise :class:`ParseError`.
The document is then checked against ``schema/scenario.schema.json`` and
finally against the cross-reference and dimension rules below. Every
problem found in the last two passes is collected, tagged with the line it
came from, and raised together as one :class:`ScenarioValidationError`.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import yaml

from .agents import AbstractBeing, Agent, ValuationFunction, ValueSpace
from .errors import IoFailure, MissingMap, ParseError, ScenarioValidationError, ValueSpaceError
from .interpretation import InterpretationMap
from .network import Edge, InfluenceGraph, SimulationConfig

FORMAT_VERSION = "1"


def _load_schema() -> dict:
    text = resources.files("valuespace").joinpath("schema/scenario.schema.json").read_text("utf-8")
    return json.loads(text)


SCHEMA = _load_schema()


# ----------------------------------------------------------------------------
# line bookkeeping

def _line_index(node, path=(), out=None) -> dict[tuple, int]:
    """Map every document path to the 1-based line where its node starts."""
    out = {} if out is None else out
    if node is None:
        return out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            k = key.value
            out.setdefault(path + (k,), key.start_mark.line + 1)
            _line_index(value, path + (k,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_index(item, path + (i,), out)
    return out


def _line_for(lines: dict, path) -> int | None:
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def _fmt_path(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


class _Problems:
    def __init__(self, lines):
        self.lines = lines
        self.items: list[tuple[int | None, str, str]] = []

    def add(self, path, message):
        self.items.append((_line_for(self.lines, path), _fmt_path(path), message))


# ----------------------------------------------------------------------------
# analysis parameter table
#
# Each analysis kind lists its parameters with a type tag; a trailing "?"
# marks an optional parameter. References are checked against the
# scenario's agents and beings.

AGENT, BEING, AGENTS, VEC, MAT, MATS, NUM, INT, STR, VECMAP, NUMMAP, PAIRS, PROTO = (
    "agent", "being", "agents", "vector", "matrix", "matrices", "number", "integer", "string",
    "vector-map", "number-map", "pairs", "prototype")

ANALYSIS_PARAMS: dict[str, dict[str, str]] = {
    "valuation": {"being": BEING, "source": AGENT, "target": AGENT},
    "gradient": {"agent": AGENT},
    "alignment": {"agent": AGENT, "belief": BEING},
    "understanding": {"being": BEING, "holder": AGENT, "agents": AGENTS},
    "blindness": {"source": AGENT, "target": AGENT, "vectors": VECMAP},
    "propagation": {},
    "leadership": {"leader": AGENT, "being": BEING},
    "leadership_emergence": {"leader": AGENT, "being": BEING, "threshold": NUM},
    "motivation": {"agent": AGENT, "being": BEING, "holder": AGENT, "alpha": NUM},
    "coordination": {"leader": AGENT, "being": BEING, "followers": AGENTS, "eps": NUM, "delta": NUM},
    "persuasion": {"leader": AGENT, "being": BEING, "agent": AGENT, "matrix?": MAT, "pattern?": VEC},
    "hull": {"group": VECMAP, "candidate": VEC},
    "lifecycle": {"being": BEING, "update": STR, "factor?": NUM, "steps": INT, "threshold?": NUM},
    "counterfactual": {"agents": AGENTS, "hypothetical": VEC, "tol?": NUM},
    "social_identity": {"candidates": VECMAP, "followers": AGENTS, "prototype": PROTO, "members?": VECMAP,
                        "out_leader?": VEC, "contrast_follower?": AGENT, "out_threshold?": NUM},
    "marketing": {"agent": AGENT, "axis": STR, "weight": NUM, "eta": NUM, "product": VEC},
    "emotion": {"x": VEC, "g": VEC, "actions": MATS, "acceptance_axis": VEC, "depth?": INT, "tol?": NUM},
    "coherence": {"pair": AGENTS, "eps": NUM, "k?": INT, "being?": BEING, "delta?": NUM},
    "valuation_convergence": {"leader": AGENT, "initial": NUMMAP, "val_leader": NUM, "alpha": NUM},
    "map_fit": {"pairs": PAIRS, "probe?": VEC},
}

NEEDS_GRAPH = {"propagation", "leadership", "leadership_emergence", "valuation_convergence"}
NEEDS_SIMULATION = {"propagation"}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _is_vec(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_is_num(x) for x in v)


def _is_mat(v) -> bool:
    return (isinstance(v, list) and len(v) > 0 and all(_is_vec(r) for r in v)
            and len({len(r) for r in v}) == 1)


# ----------------------------------------------------------------------------
# domain objects built from a validated document

@dataclass(frozen=True)
class SimulationSpec:
    being: str
    origin: str
    config: SimulationConfig

    def with_overrides(self, seed=None, replicates=None, max_steps=None) -> "SimulationSpec":
        c = self.config
        cfg = SimulationConfig(
            c.seed if seed is None else seed,
            c.max_steps if max_steps is None else max_steps,
            c.replicates if replicates is None else replicates,
            c.adoption_threshold,
        )
        return SimulationSpec(self.being, self.origin, cfg)


@dataclass(frozen=True)
class AnalysisRequest:
    name: str
    kind: str
    params: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)


@dataclass(eq=False)
class Scenario:
    version: str
    name: str
    agents: dict[str, Agent]
    beings: dict[str, AbstractBeing]
    maps: dict[tuple[str, str], InterpretationMap]
    graph: InfluenceGraph | None
    simulation: SimulationSpec | None
    analyses: list[AnalysisRequest]
    document: dict  # normalized document; the basis for equality and serialization
    source: str | None = None
    content_hash: str | None = None

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)

    def analysis(self, name: str) -> AnalysisRequest:
        for a in self.analyses:
            if a.name == name:
                return a
        raise KeyError(f"scenario has no analysis named {name!r}")

    def map_between(self, src: str, dst: str) -> InterpretationMap:
        try:
            return self.maps[(src, dst)]
        except KeyError:
            raise MissingMap(f"scenario defines no map {src} -> {dst}") from None


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _normalize(doc: dict) -> dict:
    """Fill defaults so that equivalent documents compare equal."""
    out = copy.deepcopy(doc)
    out.setdefault("name", "")
    for key in ("beings", "maps", "analyses"):
        out.setdefault(key, [])
    for a in out["agents"]:
        a.setdefault("valuation", {"kind": "norm"})
    for a in out["analyses"]:
        a.setdefault("params", {})
        a.setdefault("expect", {})
    for key in ("graph", "simulation"):
        if out.get(key) is None:
            out.pop(key, None)
    if "graph" in out:
        out["graph"].setdefault("nodes", [a["id"] for a in out["agents"]])
    if "simulation" in out:
        s = out["simulation"]
        s.setdefault("seed", 0)
        s.setdefault("max_steps", 10)
        s.setdefault("replicates", 1)
    # ints in vectors and matrices become floats so 1 and 1.0 agree
    return _floatify(out)


def _floatify(obj, key=None):
    if isinstance(obj, dict):
        return {k: _floatify(v, k if key not in _FLOAT_CONTAINERS else key) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_floatify(v, key) for v in obj]
    if isinstance(obj, int) and not isinstance(obj, bool) and key not in _INT_KEYS:
        return float(obj)
    return obj


_INT_KEYS = {"dim", "seed", "max_steps", "replicates", "steps", "k", "depth"}
# mappings whose keys are ids rather than field names
_FLOAT_CONTAINERS = {"representations", "vectors", "group", "candidates", "members", "initial"}


def _build_valuation(spec: dict, dim: int) -> ValuationFunction:
    kind = spec["kind"]
    if kind == "component_sum":
        return ValuationFunction.component_sum(dim)
    if kind == "norm":
        return ValuationFunction.norm(spec.get("metric"))
    return ValuationFunction(kind, weights=spec.get("weights"))


def _check_semantics(doc: dict, problems: _Problems):
    agents = doc.get("agents", [])
    if not agents:
        problems.add(("agents",), "a scenario needs at least one agent")
    dims: dict[str, int] = {}
    for i, a in enumerate(agents):
        p = ("agents", i)
        if a["id"] in dims:
            problems.add(p + ("id",), f"duplicate agent id {a['id']!r}")
            continue
        dim = a["dim"]
        dims[a["id"]] = dim
        labels = a.get("labels")
        if labels is not None:
            if len(labels) != dim:
                problems.add(p + ("labels",), f"{len(labels)} labels for dimension {dim}")
            elif len(set(labels)) != len(labels):
                problems.add(p + ("labels",), "basis labels must be unique")
        for key in ("state", "goal"):
            if key in a and len(a[key]) != dim:
                problems.add(p + (key,), f"length {len(a[key])} does not match dimension {dim}")
        val = a.get("valuation", {"kind": "norm"})
        kind = val["kind"]
        if kind in ("weighted_sum", "linear"):
            if "weights" not in val:
                problems.add(p + ("valuation",), f"{kind} valuation needs weights")
            elif len(val["weights"]) != dim:
                problems.add(p + ("valuation", "weights"), f"length {len(val['weights'])} does not match dimension {dim}")
            if "metric" in val:
                problems.add(p + ("valuation", "metric"), f"{kind} valuation takes no metric")
        else:
            if "weights" in val:
                problems.add(p + ("valuation", "weights"), f"{kind} valuation takes no weights")
            if "metric" in val:
                m = val["metric"]
                if not _is_mat(m) or len(m) != dim or len(m[0]) != dim:
                    problems.add(p + ("valuation", "metric"), f"metric must be {dim}x{dim}")
                else:
                    try:
                        ValuationFunction.norm(m)
                    except ValueSpaceError as exc:
                        problems.add(p + ("valuation", "metric"), str(exc))

    beings: dict[str, dict] = {}
    for i, b in enumerate(doc.get("beings", [])):
        p = ("beings", i)
        if b["id"] in beings:
            problems.add(p + ("id",), f"duplicate being id {b['id']!r}")
        beings[b["id"]] = b["representations"]
        for aid, vec in b["representations"].items():
            if aid not in dims:
                problems.add(p + ("representations", aid), f"unknown agent {aid!r}")
            elif len(vec) != dims[aid]:
                problems.add(p + ("representations", aid),
                             f"length {len(vec)} does not match {aid}'s dimension {dims[aid]}")

    maps: set[tuple[str, str]] = set()
    for i, m in enumerate(doc.get("maps", [])):
        p = ("maps", i)
        key = (m["from"], m["to"])
        ok = True
        for end in ("from", "to"):
            if m[end] not in dims:
                problems.add(p + (end,), f"unknown agent {m[end]!r}")
                ok = False
        if key in maps:
            problems.add(p, f"duplicate map {key[0]} -> {key[1]}")
        maps.add(key)
        if not _is_mat(m["matrix"]):
            problems.add(p + ("matrix",), "matrix rows must all have the same length")
        elif ok:
            rows, cols = len(m["matrix"]), len(m["matrix"][0])
            if (rows, cols) != (dims[key[1]], dims[key[0]]):
                problems.add(p + ("matrix",),
                             f"shape {rows}x{cols} but {key[0]}->{key[1]} needs {dims[key[1]]}x{dims[key[0]]}")

    graph = doc.get("graph")
    if graph is not None:
        nodes = graph.get("nodes", list(dims))
        for j, n in enumerate(nodes):
            if n not in dims:
                problems.add(("graph", "nodes", j), f"unknown agent {n!r}")
        if len(set(nodes)) != len(nodes):
            problems.add(("graph", "nodes"), "duplicate node ids")
        for i, e in enumerate(graph["edges"]):
            p = ("graph", "edges", i)
            if not (0.0 < e["p"] <= 1.0):
                problems.add(p + ("p",), f"probability {e['p']} must lie in (0, 1]")
            ends_ok = True
            for end in ("from", "to"):
                if e[end] not in nodes:
                    problems.add(p + (end,), f"{e[end]!r} is not a graph node")
                    ends_ok = False
            if ends_ok and (e["from"], e["to"]) not in maps and e["from"] in dims and e["to"] in dims \
                    and dims[e["from"]] != dims[e["to"]]:
                problems.add(p, f"no map for {e['from']}->{e['to']} and the dimensions differ")

    sim = doc.get("simulation")
    if sim is not None:
        if sim["being"] not in beings:
            problems.add(("simulation", "being"), f"unknown being {sim['being']!r}")
        if sim["origin"] not in dims:
            problems.add(("simulation", "origin"), f"unknown agent {sim['origin']!r}")
        elif sim["being"] in beings and sim["origin"] not in beings[sim["being"]]:
            problems.add(("simulation", "origin"), f"origin {sim['origin']!r} holds no representation of {sim['being']!r}")
        if sim.get("seed", 0) >= 2 ** 64:
            problems.add(("simulation", "seed"), "seed must fit in 64 bits")
        if graph is None:
            problems.add(("simulation",), "a simulation block needs a graph")

    names = set()
    for i, a in enumerate(doc.get("analyses", [])):
        p = ("analyses", i)
        if a["name"] in names:
            problems.add(p + ("name",), f"duplicate analysis name {a['name']!r}")
        names.add(a["name"])
        kind = a["kind"]
        if kind in NEEDS_GRAPH and graph is None:
            problems.add(p, f"{kind} analysis needs a graph")
        if kind in NEEDS_SIMULATION and sim is None:
            problems.add(p, f"{kind} analysis needs a simulation block")
        _check_params(kind, a.get("params", {}), p + ("params",), dims, beings, maps, problems)


def _check_params(kind, params, path, dims, beings, maps, problems: _Problems):
    table = ANALYSIS_PARAMS[kind]
    known = {k.rstrip("?") for k in table}
    for k in params:
        if k not in known:
            problems.add(path + (k,), f"unknown parameter for {kind} analysis")
    for raw, typ in table.items():
        name = raw.rstrip("?")
        if name not in params:
            if not raw.endswith("?"):
                if typ == PROTO:
                    problems.add(path, "the group prototype must be given: 'leader' or an explicit vector")
                else:
                    problems.add(path, f"missing parameter {name!r}")
            continue
        v, here = params[name], path + (name,)
        if typ == AGENT:
            if v not in dims:
                problems.add(here, f"unknown agent {v!r}")
        elif typ == BEING:
            if v not in beings:
                problems.add(here, f"unknown being {v!r}")
        elif typ == AGENTS:
            if not isinstance(v, list) or not v:
                problems.add(here, "expected a nonempty list of agent ids")
            else:
                for j, x in enumerate(v):
                    if x not in dims:
                        problems.add(here + (j,), f"unknown agent {x!r}")
        elif typ == VEC:
            if not _is_vec(v):
                problems.add(here, "expected a list of numbers")
        elif typ == MAT:
            if not _is_mat(v):
                problems.add(here, "expected a rectangular list of number rows")
        elif typ == MATS:
            if not isinstance(v, list) or not all(_is_mat(m) for m in v):
                problems.add(here, "expected a list of matrices")
        elif typ == NUM:
            if not _is_num(v):
                problems.add(here, "expected a number")
        elif typ == INT:
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                problems.add(here, "expected a positive integer")
        elif typ == STR:
            if not isinstance(v, str):
                problems.add(here, "expected a string")
        elif typ in (VECMAP, NUMMAP):
            check = _is_vec if typ == VECMAP else _is_num
            if not isinstance(v, dict) or not v or not all(check(x) for x in v.values()):
                problems.add(here, f"expected a mapping of ids to {'vectors' if typ == VECMAP else 'numbers'}")
        elif typ == PAIRS:
            if not isinstance(v, list) or not v or not all(
                    isinstance(pr, list) and len(pr) == 2 and _is_vec(pr[0]) and _is_vec(pr[1]) for pr in v):
                problems.add(here, "expected a list of [source_vector, target_vector] pairs")
        elif typ == PROTO:
            if v != "leader" and not _is_vec(v):
                problems.add(here, "prototype must be 'leader' or an explicit vector")

    def need_map(src, dst, where):
        if src in dims and dst in dims and (src, dst) not in maps:
            problems.add(where, f"no map {src} -> {dst}")

    def need_rep(being, agent, where):
        if being in beings and agent in dims and agent not in beings[being]:
            problems.add(where, f"{agent!r} holds no representation of {being!r}")

    g = params.get
    if kind == "valuation":
        need_map(g("source"), g("target"), path)
        need_rep(g("being"), g("source"), path + ("being",))
    elif kind == "alignment":
        need_rep(g("belief"), g("agent"), path + ("belief",))
    elif kind == "understanding":
        need_rep(g("being"), g("holder"), path + ("being",))
        for a in g("agents") or []:
            need_map(g("holder"), a, path + ("agents",))
    elif kind == "blindness":
        need_map(g("source"), g("target"), path)
    elif kind in ("leadership", "leadership_emergence"):
        need_rep(g("being"), g("leader"), path + ("being",))
    elif kind == "motivation":
        need_rep(g("being"), g("holder"), path + ("being",))
    elif kind == "coordination":
        need_rep(g("being"), g("leader"), path + ("being",))
        for a in g("followers") or []:
            need_map(g("leader"), a, path + ("followers",))
    elif kind == "persuasion":
        need_rep(g("being"), g("leader"), path + ("being",))
        need_map(g("leader"), g("agent"), path)
    elif kind == "counterfactual":
        ag = g("agents")
        if isinstance(ag, list) and len(ag) != 2:
            problems.add(path + ("agents",), "counterfactual analysis compares exactly two agents")
        elif isinstance(ag, list):
            need_map(ag[0], ag[1], path + ("agents",))
    elif kind == "coherence":
        pr = g("pair")
        if isinstance(pr, list) and len(pr) != 2:
            problems.add(path + ("pair",), "coherence needs exactly two agents")
        elif isinstance(pr, list):
            need_map(pr[0], pr[1], path + ("pair",))
            need_map(pr[1], pr[0], path + ("pair",))
    elif kind == "lifecycle":
        if g("update") not in (None, "identity", "decay"):
            problems.add(path + ("update",), "update must be 'identity' or 'decay'")
        if g("update") == "decay" and "factor" not in params:
            problems.add(path, "decay update needs a factor")


def _build(doc: dict, source, digest) -> Scenario:
    agents = {}
    for a in doc["agents"]:
        space = ValueSpace(a["dim"], tuple(a.get("labels", ())))
        agents[a["id"]] = Agent(a["id"], space, _build_valuation(a["valuation"], a["dim"]),
                                a.get("state"), a.get("goal"))
    beings = {b["id"]: AbstractBeing(b["id"], b["representations"]) for b in doc["beings"]}
    maps = {(m["from"], m["to"]): InterpretationMap(m["from"], m["to"], np.array(m["matrix"], dtype=float))
            for m in doc["maps"]}
    graph = None
    if "graph" in doc:
        edges = tuple(Edge(e["from"], e["to"], float(e["p"]), maps.get((e["from"], e["to"])))
                      for e in doc["graph"]["edges"])
        graph = InfluenceGraph(tuple(doc["graph"]["nodes"]), edges)
    sim = None
    if "simulation" in doc:
        s = doc["simulation"]
        kwargs = dict(seed=s["seed"], max_steps=s["max_steps"], replicates=s["replicates"])
        if "adoption_threshold" in s:
            kwargs["adoption_threshold"] = s["adoption_threshold"]
        sim = SimulationSpec(s["being"], s["origin"], SimulationConfig(**kwargs))
    analyses = [AnalysisRequest(a["name"], a["kind"], a["params"], a["expect"]) for a in doc["analyses"]]
    return Scenario(doc["version"], doc["name"], agents, beings, maps, graph, sim, analyses,
                    doc, source, digest)


def parse_scenario(text: str | bytes, source: str | None = None) -> Scenario:
    """Parse and fully validate a scenario document."""
    raw = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    digest = content_hash(raw)
    try:
        decoded = raw.decode("utf-8")
        node = yaml.compose(decoded, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(decoded)
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", None, source) from None
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ParseError(exc.problem or str(exc), line, source) from None
    except yaml.YAMLError as exc:
        raise ParseError(str(exc), None, source) from None

    lines = _line_index(node)
    problems = _Problems(lines)
    if not isinstance(doc, dict):
        problems.add((), "top level must be a mapping")
        raise ScenarioValidationError(problems.items, source)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        problems.add(tuple(err.absolute_path), err.message)
    if problems.items:
        raise ScenarioValidationError(problems.items, source)

    _check_semantics(doc, problems)
    if problems.items:
        raise ScenarioValidationError(problems.items, source)
    try:
        return _build(_normalize(doc), source, digest)
    except ValueSpaceError as exc:  # checks that only the engine can make, e.g. an indefinite metric
        raise ScenarioValidationError([(None, "", str(exc))], source) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_scenario(data, str(path))


def serialize_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None, width=100)


def scenario_summary(scenario: Scenario) -> dict[str, Any]:
    return {
        "name": scenario.name,
        "agents": len(scenario.agents),
        "beings": len(scenario.beings),
        "maps": len(scenario.maps),
        "edges": 0 if scenario.graph is None else len(scenario.graph.edges),
        "analyses": [a.name for a in scenario.analyses],
    }
