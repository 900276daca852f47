"""Command-line entry point: run, verify, analyze, scenarios."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .report import build_report, final_states, report_json, report_text, state_table
from .scenarios import BUILTINS, builtin_text, listing
from .sim import (
    ProtocolError,
    Scenario,
    ScenarioError,
    detect_data_islands,
    load_scenario,
    run_scenario,
    scenario_topology,
)
from .sync import MetadataMode
from .trace import MalformedTrace, Trace
from .verify import CHECKS, DEFAULT_CHECKS, check_hierarchy, check_interest_config

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PROTOCOL = 2
EXIT_VIOLATIONS = 3

MODES = [m.value for m in MetadataMode]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--mode", choices=MODES, default=None, help="override the metadata mode")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for seed sweeps")
    p.add_argument("--out", default=None, help="output file (or directory for sweeps)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="interestsync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate a scenario and write its trace")
    run.add_argument("scenario", help="scenario file or built-in name")
    run.add_argument("--sweep", type=int, default=0, metavar="K",
                     help="run K consecutive seeds starting at --seed and verify each")

    verify = sub.add_parser("verify", parents=[common], help="check a trace")
    verify.add_argument("trace")
    verify.add_argument("--checks", default=",".join(DEFAULT_CHECKS),
                        help=f"comma-separated subset of {','.join(CHECKS)}")

    analyze = sub.add_parser("analyze", parents=[common], help="static topology and interest analysis")
    analyze.add_argument("scenario")
    analyze.add_argument("--at", default=None, metavar="LABEL", help="use the topology at this checkpoint")

    sub.add_parser("scenarios", parents=[common], help="list built-in scenarios")
    return parser


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(ref: str, seed, mode) -> Scenario:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    elif ref in BUILTINS:
        text = builtin_text(ref)
    else:
        raise ScenarioError(f"{ref}: no such file or built-in scenario")
    return load_scenario(text, seed=seed, mode=mode)


def _sweep_one(args: tuple[str, int, str | None, str | None]) -> dict:
    ref, seed, mode, out_dir = args
    s = _load(ref, seed, mode)
    try:
        trace = run_scenario(s)
    except ProtocolError as exc:
        return {"seed": seed, "error": str(exc.cause)}
    if out_dir:
        trace.write(Path(out_dir) / f"{s.name}-seed{seed}.trace.jsonl")
    report = build_report(trace)
    return {"seed": seed, "trace_digest": report["trace_digest"], **report["summary"]}


def cmd_run(a: argparse.Namespace) -> int:
    try:
        s = _load(a.scenario, a.seed, a.mode)
    except (ScenarioError, OSError) as exc:
        _error(str(exc))
        return EXIT_INPUT

    if a.sweep:
        if a.out:
            Path(a.out).mkdir(parents=True, exist_ok=True)
        jobs = [(a.scenario, s.seed + i, a.mode, a.out) for i in range(a.sweep)]
        if a.jobs > 1:
            with ProcessPoolExecutor(a.jobs) as pool:
                rows = list(pool.map(_sweep_one, jobs))
        else:
            rows = [_sweep_one(j) for j in jobs]
        if a.json:
            print(json.dumps(rows, indent=2, sort_keys=True))
        else:
            for r in rows:
                status = r.get("error") or ("clean" if r["clean"] else f"{r['total']} violation(s)")
                print(f"seed {r['seed']:>6}  {status}")
        if any("error" in r for r in rows):
            return EXIT_PROTOCOL
        return EXIT_OK if all(r["clean"] for r in rows) else EXIT_VIOLATIONS

    out = Path(a.out or f"{s.name}.trace.jsonl")
    try:
        trace = run_scenario(s)
    except ProtocolError as exc:
        exc.trace.write(out)
        _error(f"protocol error: {exc.cause}; partial trace written to {out}")
        return EXIT_PROTOCOL
    trace.write(out)
    states = final_states(trace)
    if a.json:
        print(json.dumps({"scenario": s.name, "seed": s.seed, "mode": s.mode.value,
                          "trace": str(out), "final_states": states}, indent=2, sort_keys=True))
    else:
        print(f"{s.name}: seed {s.seed}, {s.mode.value}, {len(trace.events)} events -> {out}")
        print(state_table(states), end="")
    return EXIT_OK


def cmd_verify(a: argparse.Namespace) -> int:
    checks = [c.strip() for c in a.checks.split(",") if c.strip()]
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        _error(f"unknown check(s) {', '.join(unknown)}; choose from {', '.join(CHECKS)}")
        return EXIT_INPUT
    try:
        trace = Trace.read(a.trace)
        report = build_report(trace, checks)
    except (MalformedTrace, OSError, KeyError, TypeError, ValueError) as exc:
        _error(f"{a.trace}: malformed trace: {exc}")
        return EXIT_INPUT
    if a.out:
        Path(a.out).write_text(report_json(report))
    print(report_json(report) if a.json else report_text(report), end="")
    return EXIT_OK if report["summary"]["clean"] else EXIT_VIOLATIONS


def analyze_scenario(s: Scenario, at: str | None = None) -> dict:
    topo, interests = scenario_topology(s, at)
    islands = detect_data_islands(topo, interests)
    hierarchy = check_hierarchy(topo, interests)
    config = check_interest_config(s.footprints, interests)
    everywhere = s.mode is MetadataMode.METADATA_EVERYWHERE
    if not hierarchy:
        verdict = "hierarchy: OK ⇒ TCC+ upheld"
    elif everywhere:
        verdict = "metadata-everywhere ⇒ TCC+ upheld"
    elif not config and s.footprints:
        verdict = ("interest-config: OK, but not sufficient in intersection-only mode: "
                   "a narrower peer can advance a version vector past ops it skipped")
    else:
        verdict = "no condition satisfied: TCC+ not guaranteed"
    return {
        "scenario": s.name,
        "mode": s.mode.value,
        "at": at,
        "edges": topo.edge_list(),
        "islands": islands.to_json(),
        "hierarchy": [v.to_json() for v in hierarchy],
        "interest_config": [v.to_json() for v in config],
        "footprints_declared": bool(s.footprints),
        "verdict": verdict,
    }


def _analysis_text(r: dict) -> str:
    lines = [f"scenario {r['scenario']}  mode {r['mode']}" + (f"  at {r['at']}" if r["at"] else "")]
    found = r["islands"]["findings"]
    lines.append(f"islands: {len(found)}")
    for f in found:
        lines.append(f"  {{{', '.join(f['component_a'])}}} / {{{', '.join(f['component_b'])}}} share {{{', '.join(f['shared'])}}}")
    if r["islands"]["singletons"]:
        lines.append(f"  isolated (not islands): {', '.join(r['islands']['singletons'])}")
    lines.append("hierarchy: " + ("OK" if not r["hierarchy"] else f"{len(r['hierarchy'])} violation(s)"))
    lines += [f"  {v['explanation']}" for v in r["hierarchy"]]
    if not r["footprints_declared"]:
        lines.append("interest-config: no footprints declared")
    else:
        lines.append("interest-config: " + ("OK" if not r["interest_config"] else f"{len(r['interest_config'])} violation(s)"))
        lines += [f"  {v['explanation']}" for v in r["interest_config"]]
    lines.append(r["verdict"])
    return "\n".join(lines) + "\n"


def cmd_analyze(a: argparse.Namespace) -> int:
    try:
        s = _load(a.scenario, a.seed, a.mode)
        result = analyze_scenario(s, a.at)
    except (ScenarioError, OSError) as exc:
        _error(str(exc))
        return EXIT_INPUT
    text = json.dumps(result, indent=2, sort_keys=True) + "\n" if a.json else _analysis_text(result)
    if a.out:
        Path(a.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_scenarios(a: argparse.Namespace) -> int:
    entries = listing()
    if a.json:
        print(json.dumps(entries, indent=2))
    else:
        width = max(len(e["name"]) for e in entries)
        for e in entries:
            print(f"{e['name']:<{width}}  {e['description']}")
            print(f"{'':<{width}}  {e['note']}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "analyze": cmd_analyze, "scenarios": cmd_scenarios}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
