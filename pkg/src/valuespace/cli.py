"""Command-line entry point.

Exit status: 0 on success, 1 when the scenario fails to parse or validate,
2 on usage or runtime errors. Every run writes ``manifest.json`` into the
output directory (``--out``, else ``$VALUESPACE_OUT``, else ``./out``).
"""
from __future__ import annotations

import argparse
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .counterfactuals import Proportional, displacement, find_preference_reversal, perspective_displacement
from .errors import IoFailure, ParseError, ScenarioValidationError, ValueSpaceError
from .interpretation import check_consistency, round_trip_bound
from .network import run_influence_process, verify_no_null_space_condition
from .report import _metric, _sim_config, dumps, emit_trace, run_report
from .scenario import Scenario, load_scenario, scenario_summary

OUT_ENV = "VALUESPACE_OUT"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in np.asarray(v, dtype=float)) + ")"


def _pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError(f"expected two comma-separated ids, got {text!r}")
    return parts[0], parts[1]


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valuespace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="path to a .scn scenario file")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./out)")
        return p

    add("validate", "parse and validate a scenario")
    p = add("simulate", "run the influence process and write traces")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--replicates", type=_positive)
    p.add_argument("--format", choices=["csv", "json", "both"], default="both")

    p = add("leadership", "leadership component and Monte Carlo cross-check")
    p.add_argument("--leader", required=True)
    p.add_argument("--being", required=True)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--replicates", type=_positive)

    p = add("coherence", "round-trip coherence bound for a pair of agents")
    p.add_argument("--pair", required=True, type=_pair, metavar="A,B")
    p.add_argument("--eps", required=True, type=float)
    p.add_argument("--k", type=_positive, default=1)
    p.add_argument("--being", help="check only this being (default: every being held by A)")

    p = add("counterfactual", "displacements and preference-reversal search for two agents")
    p.add_argument("--agents", required=True, type=_pair, metavar="I,J")
    p.add_argument("--hypothetical", type=_vector, metavar="X1,X2,...")
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("report", "run scenario analyses and write report.json")
    p.add_argument("--analysis", required=True, help="analysis name, or 'all'")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--replicates", type=_positive)
    return parser


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "out")


def _write(out: Path, name: str, data: bytes, written: list[str]):
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {out / name}: {exc.strerror or exc}") from None
    written.append(name)


def _manifest(args, sc: Scenario | None, status: int, seed, written: list[str]) -> dict:
    return {
        "command": args.command,
        "scenario": str(args.scenario),
        "scenario_hash": None if sc is None else sc.content_hash,
        "seed": seed,
        "exit_status": status,
        "outputs": sorted(written),
        "versions": {"valuespace": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }


# ----------------------------------------------------------------------------
# commands; each returns (exit status, seed used)

def cmd_validate(args, sc: Scenario, out: Path, written):
    s = scenario_summary(sc)
    print(f"ok: {args.scenario}: {s['agents']} agents, {s['beings']} beings, {s['maps']} maps, "
          f"{s['edges']} edges, {len(s['analyses'])} analyses")
    return EXIT_OK, None


def cmd_simulate(args, sc: Scenario, out: Path, written):
    if sc.simulation is None or sc.graph is None:
        raise ValueSpaceError("scenario has no simulation block")
    spec = sc.simulation.with_overrides(seed=args.seed, replicates=args.replicates)
    traces = run_influence_process(sc.graph, sc.beings[spec.being], spec.origin, spec.config)
    if args.format in ("csv", "both"):
        _write(out, "trace.csv", emit_trace(traces, "csv"), written)
    if args.format in ("json", "both"):
        _write(out, "trace.json", emit_trace(traces, "json"), written)
    first = traces[0]
    print(f"simulated {len(traces)} replicate(s), seed {spec.config.seed}, {spec.config.max_steps} steps")
    for n in sc.graph.nodes:
        if n in first.final_representations:
            print(f"  {n}: {_fmt_vec(first.final_representations[n])} (step {first.adoption_step[n]})")
        else:
            print(f"  {n}: not reached")
    return EXIT_OK, spec.config.seed


def cmd_leadership(args, sc: Scenario, out: Path, written):
    if sc.graph is None:
        raise ValueSpaceError("scenario has no graph")
    if args.being not in sc.beings:
        raise ValueSpaceError(f"unknown being {args.being!r}")
    x = sc.beings[args.being].get(args.leader)
    if x is None:
        raise ValueSpaceError(f"{args.leader!r} holds no representation of {args.being!r}")
    cfg = _sim_config(sc, args.seed, args.replicates)
    rep = verify_no_null_space_condition(sc.graph, args.leader, x, cfg)
    print(f"leader {args.leader}, being {args.being} = {_fmt_vec(x)}")
    print(f"component: {', '.join(sorted(rep.component))}")
    for n in sc.graph.nodes:
        where = "in component" if n in rep.component else "not in component"
        print(f"  {n}: {where}; adopted in {rep.adoption_counts[n]}/{rep.replicates} replicates "
              f"[{rep.verdicts[n].value}]")
    print("consistent" if rep.consistent else "INCONSISTENT: a node outside the component adopted")
    payload = {"leader": args.leader, "being": args.being, "component": sorted(rep.component),
               "verdicts": rep.verdicts, "adoption_counts": rep.adoption_counts,
               "replicates": rep.replicates, "max_steps": rep.max_steps, "consistent": rep.consistent}
    _write(out, "leadership.json", dumps(payload).encode(), written)
    return EXIT_OK, cfg.seed


def cmd_coherence(args, sc: Scenario, out: Path, written):
    a, b = args.pair
    tab, tba = sc.map_between(a, b), sc.map_between(b, a)
    names = [args.being] if args.being else sorted(n for n, bg in sc.beings.items() if bg.get(a) is not None)
    if not names:
        raise ValueSpaceError(f"no being is represented at {a!r}")
    results = {}
    for name in names:
        if name not in sc.beings or sc.beings[name].get(a) is None:
            raise ValueSpaceError(f"{a!r} holds no representation of {name!r}")
        x = sc.beings[name].get(a)
        rt = round_trip_bound(tab, tba, x, args.eps, args.k)
        cons = check_consistency(tab, tba, x, args.eps, float("inf"), sc.agents[a].valuation, sc.agents[b].valuation)
        print(f"{name}: {rt.status}  observed {rt.observed_deviation:.6g}  bound(k={rt.k}) {rt.k_step_bound:.6g}  "
              f"forward {cons.forward_eps:.3g}  backward {cons.backward_eps:.3g}")
        results[name] = {"status": rt.status, "observed_deviation": rt.observed_deviation,
                         "one_step_bound": rt.one_step_bound, "k_step_bound": rt.k_step_bound,
                         "forward_eps": cons.forward_eps, "backward_eps": cons.backward_eps}
    _write(out, "coherence.json", dumps({"pair": [a, b], "eps": args.eps, "k": args.k, "results": results}).encode(),
           written)
    return EXIT_OK, None


def cmd_counterfactual(args, sc: Scenario, out: Path, written):
    i, j = args.agents
    for aid in (i, j):
        if aid not in sc.agents:
            raise ValueSpaceError(f"unknown agent {aid!r}")
    t = sc.map_between(i, j)
    c = sc.agents[i].current_state
    wi, wj = _metric(sc.agents[i]), _metric(sc.agents[j])
    payload: dict = {"agents": [i, j], "actual": c}
    if args.hypothetical is not None:
        d, dj = displacement(args.hypothetical, c), perspective_displacement(t, args.hypothetical, c)
        print(f"displacement for {i}: {_fmt_vec(d)}; as read by {j}: {_fmt_vec(dj)}")
        payload.update(hypothetical=args.hypothetical, displacement=d, perspective_displacement=dj)
    res = find_preference_reversal(wi, t.matrix, wj, c, tol=args.tol)
    print(f"generalized eigenvalues: {_fmt_vec(res.eigenvalues)}")
    payload.update(verdict=res.verdict, eigenvalues=res.eigenvalues)
    if isinstance(res, Proportional):
        print("PROPORTIONAL: the two cost forms agree up to scale; no preference reversal exists")
    else:
        ci_x, ci_y, cj_x, cj_y = res.costs
        print(f"REVERSAL: x = {_fmt_vec(res.x)}, y = {_fmt_vec(res.y)}")
        print(f"  {i}: C(x) = {ci_x:.6g} < C(y) = {ci_y:.6g};  {j}: C(x) = {cj_x:.6g} > C(y) = {cj_y:.6g}")
        payload.update(x=res.x, y=res.y, costs=list(res.costs))
    _write(out, "counterfactual.json", dumps(payload).encode(), written)
    return EXIT_OK, None


def cmd_report(args, sc: Scenario, out: Path, written):
    names = None if args.analysis == "all" else [args.analysis]
    if names and args.analysis not in {a.name for a in sc.analyses}:
        known = ", ".join(a.name for a in sc.analyses) or "none"
        raise ValueSpaceError(f"no analysis named {args.analysis!r} (available: {known})")
    report = run_report(sc, names, seed=args.seed, replicates=args.replicates)
    _write(out, "report.json", report.to_json(), written)
    for name, block in report.analyses.items():
        checks = block.get("checks", [])
        passed = sum(c["pass"] for c in checks)
        print(f"{name} [{block['kind']}]: {passed}/{len(checks)} checks pass")
        for c in checks:
            if not c["pass"]:
                print(f"  FAIL {c['path']}: expected {c['expected']}, got {c['actual']}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK, report.seed


COMMANDS = {"validate": cmd_validate, "simulate": cmd_simulate, "leadership": cmd_leadership,
            "coherence": cmd_coherence, "counterfactual": cmd_counterfactual, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = _out_dir(args)
    written: list[str] = []
    sc, seed, status = None, None, EXIT_RUNTIME
    try:
        sc = load_scenario(args.scenario)
        status, seed = COMMANDS[args.command](args, sc, out, written)
    except ScenarioValidationError as exc:
        for line in exc.format_lines():
            print(line, file=sys.stderr)
        status = EXIT_INVALID
    except ParseError as exc:
        print(str(exc), file=sys.stderr)
        status = EXIT_INVALID
    except (ValueSpaceError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        status = EXIT_RUNTIME
    try:
        _write(out, "manifest.json", dumps(_manifest(args, sc, status, seed, written + ["manifest.json"])).encode(),
               written)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
