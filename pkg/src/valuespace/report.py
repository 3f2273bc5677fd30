"""
Run the analyses requested by a scenario and serialize results.

All output is deterministic: the same scenario bytes and seed give the
same report bytes. Floats are written with 17 significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .agents import ValuationKind, belief_alignment, exists_for, motivational_gradient
from .applications import (
    EmotionInput,
    GroupContext,
    classify_emotion,
    deviance_report,
    elect_leader,
    group_score,
    marketing_intervention,
    outgroup_contrast,
)
from .counterfactuals import (
    Proportional,
    displacement,
    find_preference_reversal,
    perspective_displacement,
)
from .dynamics import (
    GoalUpdateRule,
    ValuationUpdateRule,
    check_coordination,
    convex_hull_leadership_check,
    decay_update,
    identity_update,
    run_lifecycle,
    run_valuation_convergence,
    update_goal,
)
from .errors import IoFailure, NotInjective, ValueSpaceError
from .geometry import DEFAULT_TOL, convex_hull_membership, cosine_similarity, pseudo_inverse
from .interpretation import (
    blind_spot,
    check_consistency,
    fit_interpretation_map,
    is_blind_to,
    persuasion_matrix,
    round_trip_bound,
)
from .network import (
    SimulationConfig,
    SimulationTrace,
    leadership_component,
    run_influence_process,
    simple_path_images,
    verify_no_null_space_condition,
)
from .scenario import AnalysisRequest, Scenario


# ----------------------------------------------------------------------------
# deterministic JSON

def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0.0" if math.copysign(1, x) > 0 else "-0.0"
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_plain(v) for v in obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        return obj.value
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    obj = _plain(obj)

    def enc(o, level):
        pad, inner = " " * (indent * level), " " * (indent * (level + 1))
        if o is None:
            return "null"
        if o is True:
            return "true"
        if o is False:
            return "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _num(o)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, 0) for v in o) + "]"
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + pad + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = sorted(o.items())
            return "{\n" + ",\n".join(f"{inner}{enc(k, 0)}: {enc(v, level + 1)}" for k, v in items) + "\n" + pad + "}"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


# ----------------------------------------------------------------------------
# traces

def emit_trace(traces: Sequence[SimulationTrace], fmt: str = "csv") -> bytes:
    """Serialize influence-process traces as CSV or JSON bytes.

    CSV rows are ordered by replicate, step and edge index. Component
    columns ``c1..cD`` cover the largest transmitted dimension; failed
    attempts leave the norm and components empty.
    """
    fmt = fmt.lower()
    rows = sorted(((t.replicate, e.step, e.edge_index, e) for t in traces for e in t.events),
                  key=lambda r: r[:3])
    if fmt == "json":
        payload = [
            {
                "replicate": t.replicate,
                "events": [
                    {"step": e.step, "edge": e.edge_index, "from": e.source, "to": e.target,
                     "success": e.success, "adopted": e.adopted,
                     "transmitted": None if e.transmitted is None else e.transmitted}
                    for e in sorted(t.events, key=lambda e: (e.step, e.edge_index))
                ],
                "final_representations": t.final_representations,
                "adoption_step": t.adoption_step,
            }
            for t in sorted(traces, key=lambda t: t.replicate)
        ]
        return dumps(payload).encode("utf-8")
    if fmt != "csv":
        raise IoFailure(f"unknown trace format {fmt!r}")
    width = max((e.transmitted.shape[0] for *_, e in rows if e.transmitted is not None), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "step", "from", "to", "success", "adopted", "transmitted_norm"]
               + [f"c{i + 1}" for i in range(width)])
    for rep, step, _, e in rows:
        if e.transmitted is None:
            tail = [""] * (1 + width)
        else:
            comps = [_num(v) for v in e.transmitted] + [""] * (width - e.transmitted.shape[0])
            tail = [_num(np.linalg.norm(e.transmitted))] + comps
        w.writerow([rep, step, e.source, e.target, int(e.success), int(e.adopted)] + tail)
    return buf.getvalue().encode("utf-8")


# ----------------------------------------------------------------------------
# analyses

def _rep(sc: Scenario, being: str, agent: str) -> np.ndarray:
    rep = sc.beings[being].get(agent)
    if rep is None:
        raise ValueSpaceError(f"{agent} holds no representation of {being}")
    return np.array(rep)


def _metric(agent) -> np.ndarray:
    v = agent.valuation
    if v.kind is ValuationKind.NORM and v.metric is not None:
        return np.array(v.metric)
    return np.eye(agent.dim)


def _sim_config(sc: Scenario, seed=None, replicates=None) -> SimulationConfig:
    if sc.simulation is not None:
        return sc.simulation.with_overrides(seed=seed, replicates=replicates).config
    return SimulationConfig(seed=0 if seed is None else seed, replicates=replicates or 100)


def a_valuation(sc, p, ctx):
    xa = _rep(sc, p["being"], p["source"])
    xb = sc.map_between(p["source"], p["target"])(xa)
    return {"x_source": xa, "x_target": xb,
            "val_source": sc.agents[p["source"]].valuation(xa),
            "val_target": sc.agents[p["target"]].valuation(xb)}


def a_gradient(sc, p, ctx):
    ag = sc.agents[p["agent"]]
    return {"state": ag.current_state, "goal": ag.goal_state, "gradient": motivational_gradient(ag)}


def a_alignment(sc, p, ctx):
    ag = sc.agents[p["agent"]]
    b = _rep(sc, p["belief"], p["agent"])
    m = motivational_gradient(ag)
    return {"belief": b, "gradient": m, "dot": belief_alignment(b, m)}


def a_understanding(sc, p, ctx):
    c = _rep(sc, p["being"], p["holder"])
    images, vals, recon = {}, {}, {}
    for a in p["agents"]:
        t = sc.map_between(p["holder"], a)
        img = t(c)
        images[a] = img
        vals[a] = sc.agents[a].valuation(img)
        recon[a] = float(np.linalg.norm(pseudo_inverse(t.matrix) @ img - c) / np.linalg.norm(c))
    out = {"images": images, "valuations": vals, "reconstruction_error": recon}
    if len(p["agents"]) >= 2:
        a, b = p["agents"][:2]
        out["cosine"] = cosine_similarity(images[a], images[b])
    return out


def a_blindness(sc, p, ctx):
    t = sc.map_between(p["source"], p["target"])
    target = sc.agents[p["target"]]
    images, blind, vals = {}, {}, {}
    for name, v in p["vectors"].items():
        img = t(v)
        images[name] = img
        blind[name] = is_blind_to(t, v)
        vals[name] = target.valuation(img)
    basis = blind_spot(t)
    return {"images": images, "blind": blind, "perceived_value": vals,
            "null_basis": basis, "null_dim": int(basis.shape[0])}


def a_propagation(sc, p, ctx):
    sim = sc.simulation
    cfg = _sim_config(sc, ctx.seed, ctx.replicates)
    traces = run_influence_process(sc.graph, sc.beings[sim.being], sim.origin, cfg)
    ctx.traces = traces
    first = traces[0]
    frac = {n: sum(n in t.final_representations for t in traces) / len(traces) for n in sc.graph.nodes}
    return {"final": first.final_representations, "adoption_step": first.adoption_step,
            "adopted_fraction": frac, "replicates": len(traces), "seed": cfg.seed}


def a_leadership(sc, p, ctx):
    x = _rep(sc, p["being"], p["leader"])
    cfg = _sim_config(sc, ctx.seed, ctx.replicates)
    report = verify_no_null_space_condition(sc.graph, p["leader"], x, cfg)
    images = {">".join(path): img for path, img in simple_path_images(sc.graph, p["leader"], x)}
    return {"component": sorted(report.component),
            "members": {n: n in report.component for n in sc.graph.nodes},
            "verdicts": report.verdicts, "adoption_counts": report.adoption_counts,
            "consistent": report.consistent, "fully_leads": report.fully_leads,
            "path_images": images, "max_steps": report.max_steps, "replicates": report.replicates}


def a_leadership_emergence(sc, p, ctx):
    leader = p["leader"]
    x = _rep(sc, p["being"], leader)
    component = leadership_component(sc.graph, leader, x)
    received, vals, led = {}, {}, {}
    for _, e in sc.graph.out_edges(leader):
        img = e.transmit(x)
        v = sc.agents[e.target].valuation(img)
        received[e.target] = img
        vals[e.target] = v
        led[e.target] = bool(e.target in component and v >= p["threshold"])
    return {"received": received, "valuations": vals, "led": led, "threshold": p["threshold"]}


def a_motivation(sc, p, ctx):
    ag = sc.agents[p["agent"]]
    x = _rep(sc, p["being"], p["holder"])
    new = update_goal(ag, x, GoalUpdateRule.convex_blend(p["alpha"]))
    m_old, m_new = motivational_gradient(ag), motivational_gradient(new)
    return {"goal_new": new.goal_state, "gradient_old": m_old, "gradient_new": m_new,
            "cosine_old": cosine_similarity(m_old, x), "cosine_new": cosine_similarity(m_new, x)}


def a_coordination(sc, p, ctx):
    x = _rep(sc, p["being"], p["leader"])
    followers = [(f, sc.map_between(p["leader"], f)(x)) for f in p["followers"]]
    rep = check_coordination(followers, x, p["eps"], p["delta"])
    return {"coordinated": rep.coordinated, "leader_norm": float(np.linalg.norm(x)),
            "distance": {v.agent: v.distance for v in rep.verdicts},
            "norm_gap": {v.agent: v.norm_gap for v in rep.verdicts}}


def a_persuasion(sc, p, ctx):
    x = _rep(sc, p["being"], p["leader"])
    t = sc.map_between(p["leader"], p["agent"])
    target = sc.agents[p["leader"]].valuation(x)
    image = t(x)
    out = {"leader_value": target, "before": float(np.linalg.norm(image))}
    if "matrix" in p:
        m = np.array(p["matrix"], dtype=float)
        out["given_matrix_value"] = float(np.linalg.norm(m @ image))
    scalar = persuasion_matrix(t, x, target)
    out["scalar_factor"] = float(scalar[0, 0])
    out["scalar_value"] = float(np.linalg.norm(scalar @ image))
    if "pattern" in p:
        pm = persuasion_matrix(t, x, target, pattern=p["pattern"])
        out["pattern_matrix_diag"] = np.diag(pm)
        out["pattern_value"] = float(np.linalg.norm(pm @ image))
    return out


def a_hull(sc, p, ctx):
    group = {k: np.array(v, dtype=float) for k, v in p["group"].items()}
    verts = list(group.values())
    cand = convex_hull_membership(p["candidate"], verts)
    return {"candidate": cand.verdict, "l1_distance": cand.l1_distance,
            "role": convex_hull_leadership_check(verts, p["candidate"]),
            "members": {k: convex_hull_membership(v, verts).verdict for k, v in group.items()}}


def a_lifecycle(sc, p, ctx):
    being = sc.beings[p["being"]]
    population = list(sc.agents.values())
    update = identity_update if p["update"] == "identity" else decay_update(p["factor"])
    thr = p.get("threshold", DEFAULT_TOL.zero_tol)
    exists = {a.id: exists_for(being, a.id, thr) for a in population}
    final, record = run_lifecycle(being, population, update, p["steps"], thr)
    return {"exists_initially": exists, "birth_step": record.birth_step, "death_step": record.death_step,
            "final_norms": record.norms[-1][1]}


def a_counterfactual(sc, p, ctx):
    i, j = p["agents"]
    ai, aj = sc.agents[i], sc.agents[j]
    t = sc.map_between(i, j)
    c = ai.current_state
    x = np.array(p["hypothetical"], dtype=float)
    d, dj = displacement(x, c), perspective_displacement(t, x, c)
    wi, wj = _metric(ai), _metric(aj)
    out = {"actual": c, "displacement": d, "perspective_displacement": dj,
           "cost_i": float(d @ wi @ d), "cost_j": float(dj @ wj @ dj)}
    try:
        res = find_preference_reversal(wi, t.matrix, wj, c, tol=p.get("tol", 1e-8))
    except NotInjective:
        out["reversal"] = "NOT_INJECTIVE"
        return out
    out["reversal"] = res.verdict
    out["eigenvalues"] = res.eigenvalues
    if not isinstance(res, Proportional):
        out["witness"] = {"x": res.x, "y": res.y, "costs": list(res.costs)}
    return out


def a_social_identity(sc, p, ctx):
    vals = {f: sc.agents[f].valuation for f in p["followers"]}
    cands = {k: np.array(v, dtype=float) for k, v in p["candidates"].items()}
    scores = {k: group_score(k, v, p["followers"], None, vals) for k, v in cands.items()}
    leader = elect_leader(sorted(cands.items()), p["followers"], None, vals)
    proto = cands[leader] if p["prototype"] == "leader" else np.array(p["prototype"], dtype=float)
    gctx = GroupContext(tuple(p["followers"]), proto)
    out: dict[str, Any] = {"scores": scores, "leader": leader, "prototype": proto}
    follower = p.get("contrast_follower", p["followers"][0])
    fval = sc.agents[follower].valuation
    if "members" in p:
        dev, mvals = {}, {}
        for m, v in p["members"].items():
            r = deviance_report(m, v, gctx)
            dev[m] = {"distance": r.distance, "reward": r.reward, "punishment": r.punishment}
            mvals[m] = fval(v)
        out["deviance"] = dev
        out["member_values"] = mvals
    if "out_leader" in p:
        oc = outgroup_contrast(follower, cands[leader], p["out_leader"], None, fval,
                               threshold=p.get("out_threshold", 0.5))
        out["contrast"] = {"in_val": oc.in_val, "out_val": oc.out_val, "ratio": oc.ratio,
                           "out_group": oc.out_group}
    return out


def a_marketing(sc, p, ctx):
    r = marketing_intervention(sc.agents[p["agent"]], p["axis"], p["weight"], p["eta"], p["product"])
    return {"value_before": r.value_before, "value_after": r.value_after,
            "value_gain": r.value_after - r.value_before,
            "gradient_before": r.gradient_before, "gradient_after": r.gradient_after,
            "cosine_before": r.cosine_before, "cosine_after": r.cosine_after,
            "dim_after": r.agent.dim, "labels_after": list(r.agent.space.basis_labels)}


def a_emotion(sc, p, ctx):
    inp = EmotionInput(p["x"], p["g"], tuple(p["actions"]), p["acceptance_axis"], p.get("depth", 4))
    v = classify_emotion(inp, tol=p.get("tol", 1e-9))
    return {"emotion": v.emotion, "reason": v.reason, "distance": v.distance, "acceptance": v.acceptance,
            "gradient": v.gradient, "gradient_norm": float(np.linalg.norm(v.gradient)),
            "search_depth": v.search_depth}


def a_coherence(sc, p, ctx):
    a, b = p["pair"]
    tab, tba = sc.map_between(a, b), sc.map_between(b, a)
    k = p.get("k", 1)
    names = [p["being"]] if "being" in p else sorted(n for n, bg in sc.beings.items() if bg.get(a) is not None)
    out = {}
    for name in names:
        x = _rep(sc, name, a)
        rt = round_trip_bound(tab, tba, x, p["eps"], k)
        cons = check_consistency(tab, tba, x, p["eps"], p.get("delta", math.inf),
                                 sc.agents[a].valuation, sc.agents[b].valuation)
        out[name] = {"status": rt.status, "observed_deviation": rt.observed_deviation,
                     "one_step_bound": rt.one_step_bound, "k_step_bound": rt.k_step_bound,
                     "forward_eps": cons.forward_eps, "backward_eps": cons.backward_eps,
                     "valuation_gap": cons.valuation_gap, "consistent": cons.ok}
    return {"k": k, "eps": p["eps"], "results": out}


def a_valuation_convergence(sc, p, ctx):
    cfg = _sim_config(sc, ctx.seed, ctx.replicates)
    res = run_valuation_convergence(p["initial"], p["val_leader"], p["leader"], sc.graph,
                                    ValuationUpdateRule(p["alpha"]), cfg)
    last = res.runs[0].table[-1]
    return {"hypothesis_holds": res.hypothesis_holds, "monotone": res.monotone,
            "violations": res.violation_count, "final": last,
            "max_final_distance": max(abs(v - p["val_leader"]) for v in last.values()) if last else 0.0}


def a_map_fit(sc, p, ctx):
    pairs = [(np.array(u, dtype=float), np.array(v, dtype=float)) for u, v in p["pairs"]]
    m = fit_interpretation_map(pairs, "source", "target")
    resid = math.sqrt(sum(float(np.linalg.norm(m(u) - v)) ** 2 for u, v in pairs))
    out = {"matrix": m.matrix, "residual": resid}
    if "probe" in p:
        out["probe_image"] = m(p["probe"])
    return out


ANALYSES: dict[str, Callable] = {
    "valuation": a_valuation, "gradient": a_gradient, "alignment": a_alignment,
    "understanding": a_understanding, "blindness": a_blindness, "propagation": a_propagation,
    "leadership": a_leadership, "leadership_emergence": a_leadership_emergence,
    "motivation": a_motivation, "coordination": a_coordination, "persuasion": a_persuasion,
    "hull": a_hull, "lifecycle": a_lifecycle, "counterfactual": a_counterfactual,
    "social_identity": a_social_identity, "marketing": a_marketing, "emotion": a_emotion,
    "coherence": a_coherence, "valuation_convergence": a_valuation_convergence, "map_fit": a_map_fit,
}


# ----------------------------------------------------------------------------
# expectations

def lookup(result, path: str):
    cur = _plain(result)
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict) and part in cur:
            cur = cur[part]
        else:
            raise KeyError(path)
    return cur


def _matches(actual, expected, tol) -> bool:
    if isinstance(expected, bool) or isinstance(expected, str) or expected is None:
        return actual == expected
    if isinstance(expected, (int, float)):
        return isinstance(actual, (int, float)) and not isinstance(actual, bool) \
            and abs(float(actual) - float(expected)) <= tol
    if isinstance(expected, list):
        return isinstance(actual, list) and len(actual) == len(expected) and all(
            _matches(a, e, tol) for a, e in zip(actual, expected))
    return actual == expected


def check_expectations(result, expect: dict, default_tol: float = DEFAULT_TOL.example_tol) -> list[dict]:
    checks = []
    for path, spec in expect.items():
        if isinstance(spec, dict):
            expected, tol = spec["value"], spec.get("tol", default_tol)
        else:
            expected, tol = spec, default_tol
        try:
            actual = lookup(result, path)
        except (KeyError, IndexError, ValueError):
            checks.append({"path": path, "expected": expected, "actual": None, "tol": tol, "pass": False})
            continue
        checks.append({"path": path, "expected": expected, "actual": actual, "tol": tol,
                       "pass": _matches(actual, expected, tol)})
    return checks


# ----------------------------------------------------------------------------
# runner

@dataclass
class _Ctx:
    seed: int | None = None
    replicates: int | None = None
    traces: list | None = None


@dataclass
class RunReport:
    scenario: str
    scenario_hash: str
    engine_version: str
    seed: int | None
    analyses: dict[str, dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def all_checks_pass(self) -> bool:
        return all(c["pass"] for a in self.analyses.values() for c in a.get("checks", []))

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "scenario_hash": self.scenario_hash,
                "engine_version": self.engine_version, "seed": self.seed,
                "analyses": self.analyses, "warnings": self.warnings}

    def to_json(self) -> bytes:
        return dumps(self.to_dict()).encode("utf-8")


def run_analysis(sc: Scenario, req: AnalysisRequest, seed=None, replicates=None) -> tuple[dict, list[str]]:
    ctx = _Ctx(seed, replicates)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = ANALYSES[req.kind](sc, req.params, ctx)
    notes = [f"{req.name}: {type(w.message).__name__}: {w.message}" for w in caught]
    return result, notes


def run_report(sc: Scenario, names: Sequence[str] | None = None, seed: int | None = None,
               replicates: int | None = None) -> RunReport:
    """Run the named analyses (all of them when ``names`` is None)."""
    reqs = sc.analyses if names is None else [sc.analysis(n) for n in names]
    if seed is None and sc.simulation is not None:
        seed = sc.simulation.config.seed
    report = RunReport(sc.name, sc.content_hash or "", __version__, seed)
    for req in reqs:
        result, notes = run_analysis(sc, req, seed, replicates)
        block = {"kind": req.kind, "result": _plain(result)}
        if req.expect:
            block["checks"] = check_expectations(result, req.expect)
        for key, val in _flags(result):
            notes.append(f"{req.name}: {key} = {val}")
        report.analyses[req.name] = block
        report.warnings.extend(notes)
    return report


def _flags(result) -> list[tuple[str, str]]:
    """Surface NOT_APPLICABLE verdicts and failed hypotheses as report warnings."""
    out = []

    def walk(o, path):
        if isinstance(o, dict):
            for k, v in o.items():
                walk(v, f"{path}.{k}" if path else str(k))
        elif o == "NOT_APPLICABLE":
            out.append((path, o))
        elif path.endswith("hypothesis_holds") and o is False:
            out.append((path, "false"))

    walk(_plain(result), "")
    return out
