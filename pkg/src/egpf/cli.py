"""``egpf`` command line.

Exit codes: 0 success, 1 failed golden check, 2 invalid scenario or
arguments, 3 numeric failure during a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .belief import ZeroEvidenceError
from .core import GameSpec
from .info import capacity_csv, channel_capacity, curve_csv, curve_is_monotone_convex, rate_distortion_curve
from .population import StepTooLarge
from .scenario_io import ScenarioError, load_scenario
from .sim import ExperimentResult, observation_channel, run_experiment
from .verify import CHECKS, format_table, run_checks

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class CommandResult:
    exit_code: int
    artifacts: list[Path] = field(default_factory=list)
    summary: str = ""


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _f(x: float) -> str:
    return repr(float(x))


def steps_csv(result: ExperimentResult) -> str:
    """Per-step means over replications, one row per (policy, t)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "t", "mean_regret", "mean_cumulative_regret", "se_cumulative_regret",
                "mean_kl_to_truth_bits", "se_kl_to_truth_bits", "mean_entropy_bits",
                "explore_fraction", "drift_trigger_fraction"])
    for policy, runs in result.runs.items():
        s = result.summaries[policy]
        regret = np.mean([r.regret for r in runs], axis=0)
        ent = np.mean([r.entropies for r in runs], axis=0)
        expl = np.mean([r.explored for r in runs], axis=0)
        trig = np.mean([r.triggered for r in runs], axis=0)
        for i in range(len(regret)):
            w.writerow([policy, i + 1, _f(regret[i]), _f(s.mean_cumulative_regret[i]),
                        _f(s.se_cumulative_regret[i]), _f(s.mean_kl_to_truth[i + 1]),
                        _f(s.se_kl_to_truth[i + 1]), _f(ent[i]), _f(expl[i]), _f(trig[i])])
    return buf.getvalue()


def trace_csv(result: ExperimentResult) -> str:
    """Every step of every replication."""
    game = result.config.game
    K = game.n_types
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "replication", "t", "true_type", "action", "response", "entropy_bits",
                "explored", "drift_statistic", "recalibrated", "regret", "cumulative_regret",
                "kl_to_truth_bits"] + [f"mu{k + 1}" for k in range(K)])
    for policy, runs in result.runs.items():
        for rep, run in enumerate(runs):
            cum = run.cumulative_regret
            kl = run.kl_to_truth
            for i in range(len(run.actions)):
                ds = run.drift_stat[i]
                w.writerow([
                    policy, rep, i + 1, run.true_type,
                    game.pharma_actions[run.actions[i]], game.physician_responses[run.responses[i]],
                    _f(run.entropies[i]), int(run.explored[i]), "" if math.isnan(ds) else _f(ds),
                    int(run.triggered[i]), _f(run.regret[i]), _f(cum[i]), _f(kl[i + 1]),
                ] + [_f(v) for v in run.beliefs[i + 1]])
    return buf.getvalue()


def summary_dict(result: ExperimentResult, seed: int) -> dict:
    cfg = result.config
    game = cfg.game
    out = {
        "scenario": cfg.name,
        "seed": seed,
        "replications": len(next(iter(result.runs.values()))) if result.runs else 0,
        "horizon": cfg.horizon,
        "policies": {p: s.to_dict(game) for p, s in result.summaries.items()},
        "type_capacities_bits": [float(c) for c in result.model.capacities],
    }
    if "egpf" in result.runs and result.runs["egpf"]:
        first = result.runs["egpf"][0]
        out["action_sequence"] = [game.pharma_actions[a] for a in first.actions]
        out["response_sequence"] = [game.physician_responses[d] for d in first.responses]
    return out


def cmd_run(scenario_path: str, out_dir: str, replications: int | None = None,
            seed: int | None = None, trace: bool = False) -> CommandResult:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandResult(EXIT_INVALID, summary=str(exc))
    cfg = scenario.config
    if seed is not None:
        cfg = cfg.with_seed(seed)
    out = Path(out_dir)
    artifacts = []
    try:
        with np.errstate(divide="raise", over="raise", invalid="raise"):
            result = run_experiment(cfg, replications)
            trajectory = scenario.population.run(cfg.game) if scenario.population else None
    except (ZeroEvidenceError, StepTooLarge, FloatingPointError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return CommandResult(EXIT_NUMERIC, summary=str(exc))

    summary = summary_dict(result, cfg.seed)
    artifacts.append(_write(out / "steps.csv", steps_csv(result)))
    if trace:
        artifacts.append(_write(out / "trace.csv", trace_csv(result)))
    if trajectory is not None:
        artifacts.append(_write(out / "trajectory.csv", trajectory.to_csv()))
        summary["population_final_shares"] = [float(x) for x in trajectory.states[-1]]
    artifacts.append(_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"))
    line = summary_line(summary)
    print(line)
    return CommandResult(EXIT_OK, artifacts, line)


def summary_line(summary: dict) -> str:
    parts = [f"scenario={summary['scenario'] or '-'}", f"seed={summary['seed']}"]
    if "action_sequence" in summary and len(summary["action_sequence"]) <= 10:
        parts.append("actions=" + "->".join(summary["action_sequence"]))
    for p, s in summary["policies"].items():
        parts.append(f"{p}.regret={s['cumulative_regret']['mean']:.4f}")
    return " ".join(parts)


def cmd_verify_paper(out_dir: str | None = None, list_only: bool = False, game: GameSpec | None = None) -> CommandResult:
    if list_only:
        for check in CHECKS:
            print(check.name)
        return CommandResult(EXIT_OK, summary=f"{len(CHECKS)} checks")
    results = run_checks(game)
    table = format_table(results)
    print(table)
    n_fail = sum(not r.passed for r in results)
    line = f"{len(results) - n_fail}/{len(results)} golden checks passed"
    print(line)
    artifacts = []
    if out_dir:
        artifacts.append(_write(Path(out_dir) / "golden.txt", table + "\n" + line + "\n"))
    return CommandResult(EXIT_CHECK_FAILED if n_fail else EXIT_OK, artifacts, line)


def cmd_capacity(scenario_path: str | None, out_dir: str | None, bsc: Sequence[float] = ()) -> CommandResult:
    rows = []
    if scenario_path:
        try:
            scenario = load_scenario(scenario_path)
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return CommandResult(EXIT_INVALID, summary=str(exc))
        P = observation_channel(scenario.config)
        for k, name in enumerate(_type_names(scenario.config.game)):
            rows.append((name, channel_capacity(P[:, :, k])))
    for p in bsc:
        if not 0 <= p <= 1:
            print("error: crossover probability must be in [0, 1]", file=sys.stderr)
            return CommandResult(EXIT_INVALID)
        rows.append((f"bsc({p:g})", channel_capacity([[1 - p, p], [p, 1 - p]])))
    text = capacity_csv(rows)
    return _emit(text, out_dir, "capacity.csv")


def _type_names(game: GameSpec) -> list[str]:
    return [f"type{k + 1}" for k in range(game.n_types)]


def cmd_replicator(scenario_path: str, out_dir: str | None) -> CommandResult:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandResult(EXIT_INVALID, summary=str(exc))
    if scenario.population is None:
        print(f"error: {scenario_path}: scenario has no population block", file=sys.stderr)
        return CommandResult(EXIT_INVALID)
    try:
        traj = scenario.population.run(scenario.config.game)
    except StepTooLarge as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return CommandResult(EXIT_NUMERIC, summary=str(exc))
    return _emit(traj.to_csv(), out_dir, "trajectory.csv")


def cmd_rd_curve(k: int, out_dir: str | None, slopes: Sequence[float], prior: Sequence[float] | None) -> CommandResult:
    p = np.full(k, 1.0 / k) if prior is None else np.asarray(prior, float)
    if p.size != k:
        print(f"error: prior needs {k} entries", file=sys.stderr)
        return CommandResult(EXIT_INVALID)
    points = rate_distortion_curve(p, 1.0 - np.eye(k), slopes)
    res = _emit(curve_csv(points), out_dir, "rd_curve.csv")
    if not curve_is_monotone_convex(points):
        print("warning: curve is not monotone and convex on this grid", file=sys.stderr)
    return res


def _emit(text: str, out_dir: str | None, filename: str) -> CommandResult:
    if out_dir:
        path = _write(Path(out_dir) / filename, text)
        print(str(path))
        return CommandResult(EXIT_OK, [path], str(path))
    sys.stdout.write(text)
    return CommandResult(EXIT_OK)


def _default_seed() -> int | None:
    raw = os.environ.get("EGPF_SEED")
    if raw in (None, ""):
        return None
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: EGPF_SEED must be an integer, got {raw!r}") from None


def _default_slopes() -> list[float]:
    return [0.0] + [float(x) for x in np.geomspace(0.05, 50.0, 40)] + [math.inf]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egpf", description="Engagement game simulations and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write step CSV and summary JSON")
    run.add_argument("scenario")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--replications", type=int, help="override the scenario's replication count")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed (default: $EGPF_SEED)")
    run.add_argument("--trace", action="store_true", help="also write every step of every replication")

    ver = sub.add_parser("verify-paper", help="replay the published worked examples as golden checks")
    ver.add_argument("--list", action="store_true", help="list checks without running them")
    ver.add_argument("--out", default=None, help="also write the table to OUT/golden.txt")
    ver.add_argument("--game", default=None, help="game JSON to check instead of the built-in launch game")

    cap = sub.add_parser("capacity", help="Blahut-Arimoto capacity of each type's channel")
    cap.add_argument("scenario", nargs="?")
    cap.add_argument("--bsc", type=float, action="append", default=[], help="binary symmetric channel crossover")
    cap.add_argument("--out", default=None)

    rep = sub.add_parser("replicator", help="integrate the scenario's population block")
    rep.add_argument("scenario")
    rep.add_argument("--out", default=None)

    rd = sub.add_parser("rd-curve", help="rate-distortion curve for the K x K one-hot distortion")
    rd.add_argument("--k", type=int, default=3)
    rd.add_argument("--prior", type=float, nargs="+", default=None)
    rd.add_argument("--slope", type=float, action="append", default=None, help="repeatable; default grid otherwise")
    rd.add_argument("--out", default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    if args.command == "run":
        seed = args.seed if args.seed is not None else _default_seed()
        if args.replications is not None and args.replications < 1:
            print("error: --replications must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        return cmd_run(args.scenario, args.out, args.replications, seed, args.trace).exit_code
    if args.command == "verify-paper":
        game = None
        if args.game:
            try:
                game = GameSpec.load(args.game)
            except (OSError, ValueError, KeyError) as exc:
                print(f"error: {args.game}: {exc}", file=sys.stderr)
                return EXIT_INVALID
        return cmd_verify_paper(args.out, args.list, game).exit_code
    if args.command == "capacity":
        if not args.scenario and not args.bsc:
            print("error: give a scenario or at least one --bsc", file=sys.stderr)
            return EXIT_INVALID
        return cmd_capacity(args.scenario, args.out, args.bsc).exit_code
    if args.command == "replicator":
        return cmd_replicator(args.scenario, args.out).exit_code
    if args.command == "rd-curve":
        if args.k < 1:
            print("error: --k must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        return cmd_rd_curve(args.k, args.out, args.slope or _default_slopes(), args.prior).exit_code
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
