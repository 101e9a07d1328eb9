"""Command-line entry point.

Subcommands: gen, plan, run, eval, sweep, compare (plus replay, which re-runs
the command recorded in an output file). Every flag can also be set through an
environment variable ``TOOLBUDGET_<FLAG>``, e.g. ``TOOLBUDGET_SEED=7``.

Exit codes: 0 ok, 2 invalid configuration, 3 budget exhausted, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import BudgetExhaustedError, BudgetLedger, ConfigError
from .estimator import estimate_all, jaccard_similarity
from .evaluation import (
    RunSettings,
    compare,
    compute_metrics,
    fingerprint,
    load_transcripts,
    metrics_csv,
    report_json,
    run_batch,
    sweep,
)
from .planner import QuantizationConfig, make_plan, plan_table
from .simenv import POLICIES, Scenario, ScenarioConfig, generate_scenario

log = logging.getLogger("toolbudget")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4
ENV_PREFIX = "TOOLBUDGET_"


class InputMissing(Exception):
    pass


def _env(dest: str, default, kind=str):
    raw = os.environ.get(ENV_PREFIX + dest.upper())
    if raw is None:
        return default
    if kind is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{dest.upper()}={raw!r} is not a valid {kind.__name__}") from None


def _add(p: argparse.ArgumentParser, flag: str, default=None, kind=str, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    p.add_argument(flag, dest=dest, type=kind, default=_env(dest, default, kind), **kw)


def _add_switch(p, flag: str, default: bool, help: str):
    dest = flag.lstrip("-").replace("-", "_")
    p.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction, default=_env(dest, default, bool),
                   help=help)


def _common(p: argparse.ArgumentParser) -> None:
    _add(p, "--seed", 0, int, help="scenario seed (gen) or policy seed (run/sweep/compare)")
    _add(p, "--workers", 1, int, help="parallel episodes; 1 keeps execution serial")
    _add(p, "--out", None, str, help="output path")


def _run_knobs(p: argparse.ArgumentParser) -> None:
    _add(p, "--scenario", None, str, help="scenario bundle produced by gen")
    _add(p, "--policy", "greedy", str, choices=sorted(POLICIES))
    _add(p, "--budget", None, int, help="budget B (default: from the scenario)")
    _add(p, "--overhead", None, int, help="fixed overhead c_s (default: from the scenario)")
    _add(p, "--tau", None, float, help="value threshold for frequency limits")
    _add(p, "--max-steps", None, int, help="hard step cap per episode")
    _add(p, "--epsilon", None, float, help="quantise costs with this error bound")
    _add(p, "--planning-overhead", 0.0, float, help="planning cost folded into the overhead")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toolbudget", description="Budget-constrained tool-use planning.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scenario bundle")
    _common(g)
    _add(g, "--queries", 50, int)
    _add(g, "--tools-per-query", 5, int)
    _add(g, "--cost-min", 1, int)
    _add(g, "--cost-max", 10, int)
    _add(g, "--budget", 20, int)
    _add(g, "--overhead", 0, int)
    _add(g, "--tau", 0.15, float)
    _add(g, "--experience-size", 2000, int)
    _add(g, "--catalog-size", 64, int)
    _add(g, "--max-steps", 20, int)

    p = sub.add_parser("plan", help="plan tool usage for one query")
    _common(p)
    _run_knobs(p)
    _add(p, "--query-id", None, str, required=False)

    r = sub.add_parser("run", help="run a batch of episodes and write transcripts (JSONL)")
    _common(r)
    _run_knobs(r)
    _add_switch(r, "--planned", True, "enforce a plan (default) or run the unplanned baseline")
    _add_switch(r, "--resume", False, "skip queries already present in --out")

    e = sub.add_parser("eval", help="compute metrics over a transcript file")
    _common(e)
    _add(e, "--transcripts", None, str)
    _add(e, "--budget", None, int, help="assert the transcripts' budget")

    s = sub.add_parser("sweep", help="planned batches across budget R or threshold tau")
    _common(s)
    _run_knobs(s)
    _add(s, "--axis", "budget", str, choices=["budget", "tau"])
    _add(s, "--values", "5,10,20,40", str, help="comma-separated ascending values")

    c = sub.add_parser("compare", help="planned vs unplanned on identical episodes")
    _common(c)
    _run_knobs(c)

    rp = sub.add_parser("replay", help="re-run the command recorded in an output file")
    rp.add_argument("source")
    _add(rp, "--out", None, str, help="where to write the replayed output")
    return ap


# --- helpers -----------------------------------------------------------------


def _run_config(args: argparse.Namespace) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("verbose", "func")}
    return dict(sorted(d.items()))


def _load_scenario(path: Optional[str]) -> Scenario:
    if not path:
        raise ConfigError("--scenario is required")
    if not Path(path).is_file():
        raise InputMissing(f"scenario not found: {path}")
    return Scenario.load(path)


def _settings(args, planned: bool = True) -> RunSettings:
    return RunSettings(
        policy=args.policy, planned=planned, budget=args.budget, overhead=args.overhead, tau=args.tau,
        max_steps=args.max_steps, epsilon=args.epsilon, planning_overhead=args.planning_overhead,
        policy_seed=args.seed,
    )


def _write_json(path: Optional[str], payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_twin(path: str) -> Path:
    p = Path(path)
    return p.with_suffix(".csv") if p.suffix != ".csv" else p


def _json_twin(path: str) -> Path:
    p = Path(path)
    return p.with_suffix(".json") if p.suffix != ".json" else p


# --- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = ScenarioConfig(
        seed=args.seed, n_tools=args.tools_per_query, cost_min=args.cost_min, cost_max=args.cost_max,
        budget=args.budget, overhead=args.overhead, tau=args.tau, n_queries=args.queries,
        experience_size=args.experience_size, catalog_size=args.catalog_size, max_steps=args.max_steps,
    )
    scenario = generate_scenario(cfg)
    out = args.out or "scenario.json"
    digest = scenario.save(out)
    print(f"scenario {out} sha256={digest} seed={cfg.seed} R={cfg.capacity} tau={cfg.tau} queries={cfg.n_queries}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _load_scenario(args.scenario)
    qid = args.query_id or scenario.queries[0].id
    by_id = {q.id: q for q in scenario.queries}
    if qid not in by_id:
        raise ConfigError(f"unknown query id {qid!r}")
    s = _settings(args).resolved(scenario)
    query = by_id[qid]
    tools = scenario.tools_for(qid)
    estimates = estimate_all(query, tools, scenario.experience, jaccard_similarity, s.tau)
    qcfg = QuantizationConfig(s.epsilon, s.max_steps) if s.epsilon is not None else None
    plan = make_plan(query, tools, estimates, BudgetLedger(s.budget, s.overhead), qcfg, s.planning_overhead)
    print(plan_table(plan, estimates))
    if not plan.active():
        print(f"warning: empty plan for {qid}: no tool clears tau={s.tau} within budget", file=sys.stderr)
    payload = plan.to_dict()
    payload["run_config"] = _run_config(args)
    _write_json(args.out or f"plan_{qid}.json", payload)
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    out = Path(args.out or "transcripts.jsonl")
    config = _run_config(args)
    comparable = {k: v for k, v in config.items() if k not in ("resume", "workers")}
    done: set[str] = set()
    if args.resume and out.exists():
        for line in out.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            prev = {k: v for k, v in d.get("run_config", {}).items() if k not in ("resume", "workers")}
            if prev != comparable:
                raise ConfigError(f"{out} was written with a different configuration; cannot resume")
            done.add(d["query_id"])
    elif out.exists():
        out.unlink()
    todo = [q for q in scenario.queries if q.id not in done]
    settings = _settings(args, planned=args.planned)
    with open(out, "a", encoding="utf-8") as fh:
        def emit(t):
            d = t.to_dict()
            d["run_config"] = config
            fh.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")
            fh.flush()

        run_batch(scenario, settings, queries=todo, workers=args.workers, on_result=emit)
    print(f"wrote {len(todo)} transcripts to {out} ({len(done)} resumed)")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.transcripts or not Path(args.transcripts).is_file():
        raise InputMissing(f"transcripts not found: {args.transcripts}")
    transcripts = load_transcripts(args.transcripts)
    report = compute_metrics(transcripts, args.budget)
    ctx = {"run_config": _run_config(args), "source": str(args.transcripts)}
    first = json.loads(Path(args.transcripts).read_text(encoding="utf-8").splitlines()[0])
    if "run_config" in first:
        ctx["source_run_config"] = first["run_config"]
    payload = report_json(report, **ctx)
    if args.out:
        _write_json(str(_json_twin(args.out)), payload)
        _csv_twin(args.out).write_text(metrics_csv([("all", report)], {"source": args.transcripts}),
                                       encoding="utf-8")
    else:
        _write_json(None, payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args.scenario)
    kind = int if args.axis == "budget" else float
    try:
        values = [kind(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --values {args.values!r}") from None
    settings = _settings(args)
    rows = sweep(args.axis, values, scenario, settings, workers=args.workers)
    fp = fingerprint(scenario, settings)
    header = {"axis": args.axis, "seed": fp["seed"], "tau": fp["tau"], "R": fp["R"], "policy": args.policy}
    text = metrics_csv(rows, header)
    out = args.out or "sweep.csv"
    _csv_twin(out).write_text(text, encoding="utf-8")
    _write_json(str(_json_twin(out)), {
        "schema": "toolbudget.sweep/v1", "axis": args.axis, "fingerprint": fp, "run_config": _run_config(args),
        "rows": [{"axis_value": v, **r.to_dict()} for v, r in rows],
    })
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _load_scenario(args.scenario)
    res = compare(scenario, args.policy, None, _settings(args), workers=args.workers)
    rows = [("planned", res["planned"]), ("unplanned", res["unplanned"])]
    text = metrics_csv(rows, {"seed": res["fingerprint"]["seed"], "R": res["fingerprint"]["R"],
                              "tau": res["fingerprint"]["tau"], "policy": args.policy})
    text += "# delta " + " ".join(f"{k}={v:+.4f}" for k, v in res["delta"].items()) + "\n"
    out = args.out or "compare.json"
    _write_json(str(_json_twin(out)), {
        "schema": "toolbudget.compare/v1", "fingerprint": res["fingerprint"], "run_config": _run_config(args),
        "planned": res["planned"].to_dict(), "unplanned": res["unplanned"].to_dict(), "delta": res["delta"],
    })
    _csv_twin(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "plan": cmd_plan, "run": cmd_run, "eval": cmd_eval, "sweep": cmd_sweep,
            "compare": cmd_compare}


def _replay(args) -> int:
    src = Path(args.source)
    if not src.is_file():
        raise InputMissing(f"not found: {src}")
    text = src.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = json.loads(text.splitlines()[0])
    config = doc.get("run_config")
    if not config or config.get("command") not in COMMANDS:
        raise ConfigError(f"{src} carries no replayable run_config")
    ns = argparse.Namespace(**config)
    if args.out:
        ns.out = args.out
    if hasattr(ns, "resume"):
        ns.resume = False
    return COMMANDS[ns.command](ns)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            return _replay(args)
        return COMMANDS[args.command](args)
    except BudgetExhaustedError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputMissing, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
