"""Command-line front end: synth, validate, train, run, and compare.

Exit codes: 0 success, 2 usage error, 3 scenario validation failure,
1 other runtime failure.  Every artifact embeds the config and seed that
produced it.  Log level comes from the FARMGRID_LOG_LEVEL environment
variable (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import rl
from .market import MarketError
from .profiles import ScenarioError, load_scenario, synthesize_scenario, write_scenario
from .sim import (
    Ablations,
    Mode,
    PolicyKind,
    RunConfig,
    compare,
    render_markdown,
    run,
    write_ledger_json,
    write_trace_csv,
    write_trades_csv,
)

log = logging.getLogger("farmgrid")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3

_ABLATION_CHOICES = ("advisor", "priming", "dairy")


def _ablations(names: Optional[Sequence[str]]) -> Ablations:
    names = names or []
    return Ablations(
        advisor_on="advisor" not in names,
        priming_on="priming" not in names,
        dairy_constraints_on="dairy" not in names,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farmgrid",
        description=(
            "Peer-to-peer energy trading simulator for farm prosumer "
            "communities: scenario synthesis, policy training, simulation, "
            "and P2P-vs-grid-only comparison."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic scenario")
    synth.add_argument("--agents", type=int, required=True, help="number of farms")
    synth.add_argument("--days", type=int, required=True, help="horizon in days")
    synth.add_argument("--seed", type=int, default=0, help="RNG seed")
    synth.add_argument("--min-load", type=float, default=None, help="load floor in kWh")
    synth.add_argument("--out", "-o", required=True, help="output directory")

    validate = sub.add_parser("validate", help="check a scenario and exit")
    validate.add_argument("--scenario", required=True, help="scenario dir or TOML")

    train = sub.add_parser("train", help="train a policy on a scenario")
    train.add_argument("--scenario", required=True, help="scenario dir or TOML")
    train.add_argument(
        "--algo", required=True, choices=("qtable", "dqn", "ppo"), help="learner"
    )
    train.add_argument("--episodes", type=int, default=5000, help="training episodes")
    train.add_argument("--seed", type=int, default=0, help="RNG seed")
    train.add_argument(
        "--ablate",
        action="append",
        choices=_ABLATION_CHOICES,
        help="disable a feature (repeatable)",
    )
    train.add_argument("--out", "-o", required=True, help="checkpoint JSON path")
    train.add_argument("--curve", help="learning-curve CSV path (default <out>.curve.csv)")

    runp = sub.add_parser("run", help="simulate a scenario under one config")
    _add_run_args(runp)
    runp.add_argument("--out", "-o", required=True, help="output directory")

    comp = sub.add_parser("compare", help="run P2P and grid-only and report deltas")
    _add_run_args(comp, modes=True)
    comp.add_argument("--jobs", type=int, default=1, help="parallel worker threads")
    comp.add_argument("--markdown", action="store_true", help="also write report.md")
    comp.add_argument("--out", "-o", required=True, help="output directory")

    return parser


def _add_run_args(p: argparse.ArgumentParser, modes: bool = False) -> None:
    p.add_argument("--scenario", required=True, help="scenario dir or TOML")
    p.add_argument(
        "--policy",
        default="rulebased",
        choices=tuple(k.value for k in PolicyKind),
        help="decision policy",
    )
    p.add_argument("--checkpoint", help="trained policy checkpoint (non-rule-based)")
    if modes:
        p.add_argument(
            "--modes",
            default="p2p,gridonly",
            help="comma-separated modes to compare (p2p, gridonly)",
        )
    else:
        p.add_argument(
            "--mode",
            default="p2p",
            choices=tuple(m.value for m in Mode),
            help="market mode",
        )
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument(
        "--ablate",
        action="append",
        choices=_ABLATION_CHOICES,
        help="disable a feature (repeatable)",
    )
    p.add_argument(
        "--strict-paper-mode",
        action="store_true",
        help="disable the auction crossing check (fidelity experiments)",
    )


def _load_policy_for(args, ablations: Ablations, scenario):
    kind = PolicyKind(args.policy)
    if kind is PolicyKind.RULE_BASED:
        return None
    if not args.checkpoint:
        raise ScenarioError(f"--policy {kind.value} requires --checkpoint")
    policy, meta = rl.load_policy(
        args.checkpoint, schedule=scenario.tariff, priming_on=ablations.priming_on
    )
    if meta["algo"] != kind.value:
        raise ScenarioError(
            f"checkpoint algo {meta['algo']!r} does not match --policy {kind.value!r}"
        )
    return policy


def _cmd_synth(args) -> int:
    from .profiles import ShapeParams

    shape = None
    if args.min_load is not None:
        shape = ShapeParams(min_load_kwh=args.min_load)
    scenario = synthesize_scenario(args.agents, args.days, args.seed, shape=shape)
    config_path = write_scenario(scenario, args.out)
    log.info("wrote scenario to %s", config_path)
    print(config_path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(
        f"OK: {len(scenario.agent_ids)} agents, horizon {scenario.horizon_hours} h, "
        f"seed {scenario.rng_seed}"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    scenario = load_scenario(args.scenario)
    ablations = _ablations(args.ablate)
    from .env import TradingEnv

    env = TradingEnv(
        scenario,
        advisor_on=ablations.advisor_on,
        priming_on=ablations.priming_on,
    )
    trainers = {
        "qtable": (rl.train_qtable, rl.QLearningConfig()),
        "dqn": (rl.train_dqn, rl.DqnConfig()),
        "ppo": (rl.train_ppo, rl.PpoConfig()),
    }
    train_fn, config = trainers[args.algo]
    result = train_fn(env, episodes=args.episodes, seed=args.seed, config=config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rl.save_policy(out, result, config, priming_on=ablations.priming_on)
    curve_path = Path(args.curve) if args.curve else out.with_suffix(".curve.csv")
    result.write_curve(curve_path)
    tail = result.curve[-min(100, len(result.curve)) :]
    print(
        f"trained {args.algo} for {args.episodes} episodes "
        f"(last-100 mean reward {sum(tail) / len(tail):.3f}); "
        f"checkpoint {out}, curve {curve_path}"
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    ablations = _ablations(args.ablate)
    config = RunConfig(
        mode=Mode(args.mode),
        policy=PolicyKind(args.policy),
        ablations=ablations,
        seed=args.seed,
        strict_paper_mode=args.strict_paper_mode,
    )
    policy = _load_policy_for(args, ablations, scenario)
    result = run(scenario, config, policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ledger_json(out / "ledger.json", result)
    write_trace_csv(out / "trace.csv", result)
    write_trades_csv(out / "trades.csv", result)
    kpis = result.ledger.kpis()
    print(
        f"{config.resolved_label()}: cost {kpis['cost_bought_eur']:.2f} EUR, "
        f"revenue {kpis['revenue_sold_eur']:.2f} EUR, "
        f"peak demand {kpis['peak_hour_demand_kwh']:.2f} kWh -> {out}"
    )
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    ablations = _ablations(args.ablate)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not modes:
        raise ScenarioError("--modes must name at least one mode")
    configs = []
    for mode in modes:
        configs.append(
            RunConfig(
                mode=Mode(mode),
                policy=PolicyKind(args.policy),
                ablations=ablations,
                seed=args.seed,
                strict_paper_mode=args.strict_paper_mode,
            )
        )
    policy = _load_policy_for(args, ablations, scenario)
    policies = (
        {c.resolved_label(): policy for c in configs} if policy is not None else None
    )
    report = compare(scenario, configs, policies=policies, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    if args.markdown:
        (out / "report.md").write_text(render_markdown(report))
    for delta in report["deltas"]:
        print(
            f"{delta['metric']}: grid-only {delta['gridonly']:.2f} -> "
            f"p2p {delta['p2p']:.2f} ({delta['pct_change']:+.2f}%)"
        )
    print(out / "report.json")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("FARMGRID_LOG_LEVEL", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "synth": _cmd_synth,
        "validate": _cmd_validate,
        "train": _cmd_train,
        "run": _cmd_run,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, MarketError, rl.CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
