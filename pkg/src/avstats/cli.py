"""Command-line entry point: offline analysis, simulations, and the service.

Exit codes: 0 success, 1 validation problem, 2 I/O problem, 3 a simulation
finished but at least one declared bound failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Sequence

from .engine import (
    BernoulliTwoStream,
    MixtureSpec,
    NormalKnownVariance,
    chance_to_beat,
    initial_state,
    update_state,
)
from .errors import InvalidInputError, NotFoundError
from .service.config import load_config
from .service.store import parse_csv_observations
from .simlab import builtin_scenarios, run_scenario, scenario_from_dict, write_report

__all__ = ["main"]

_DEFAULT_ALPHAS = (0.1, 0.05, 0.01)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; route them through the
    # validation path instead so exit codes stay documented.
    def error(self, message: str):  # noqa: D102
        raise InvalidInputError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="avstats",
        description="Streaming A/B inference with always-valid p-values.",
        epilog="exit codes: 0 ok, 1 validation error, 2 I/O error, 3 simulation bound failed",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser(
        "analyze",
        help="replay an observation CSV and write per-row inference",
        description=(
            "Reads a CSV with header 'timestamp,variation,value' and writes one "
            "output row per observation: running n, p-value, chance to beat "
            "baseline, and confidence bounds per level."
        ),
    )
    analyze.add_argument("input", help="observation CSV path")
    analyze.add_argument(
        "--model", choices=("normal", "bernoulli"), default="bernoulli", help="observation model"
    )
    analyze.add_argument("--sigma-sq", type=float, default=1.0, help="known variance (normal model)")
    analyze.add_argument("--tau-sq", type=float, default=1.0, help="mixture variance")
    analyze.add_argument(
        "--alpha",
        type=float,
        action="append",
        help="error level for intervals; repeatable (default 0.1 0.05 0.01)",
    )
    analyze.add_argument("--out", required=True, help="output CSV path")

    simulate = sub.add_parser(
        "simulate",
        help="run a named or file-defined Monte Carlo scenario",
        description="Runs a scenario and writes its JSON and CSV report to --out.",
    )
    simulate.add_argument("scenario", help="builtin scenario name, or a path to a scenario JSON")
    simulate.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    simulate.add_argument("--out", default="sim-reports", help="report directory")

    serve = sub.add_parser(
        "serve",
        help="run the experiment HTTP service",
        description="Serves the experiment API until terminated.",
    )
    serve.add_argument("--config", default=None, help="plain-text KEY=VALUE config path")
    return parser


def _cmd_analyze(args: argparse.Namespace) -> int:
    alphas = args.alpha if args.alpha else list(_DEFAULT_ALPHAS)
    for alpha in alphas:
        if not 0 < alpha < 1:
            raise InvalidInputError(f"--alpha must be in (0, 1), got {alpha}")
    levels = sorted({1.0 - alpha for alpha in alphas})
    if args.model == "normal":
        model = NormalKnownVariance(sigma_sq=args.sigma_sq)
    else:
        model = BernoulliTwoStream()
    mixture = MixtureSpec(tau_sq=args.tau_sq)

    text = Path(args.input).read_text(encoding="utf-8")
    rows = parse_csv_observations(text)

    state = initial_state(levels)
    header = ["n", "p_value", "chance_to_beat"]
    for level in levels:
        header.extend([f"ci_{level:g}_lo", f"ci_{level:g}_hi"])
    lines = [",".join(header)]
    for i, (_, variation, value) in enumerate(rows):
        try:
            state = update_state(state, [(variation, value)], model, mixture)
        except InvalidInputError as exc:
            raise InvalidInputError(f"line {i + 2}: {exc}") from exc
        cells = [str(state.updated_at), repr(state.p_value), repr(chance_to_beat(state.p_value))]
        for level in levels:
            interval = state.ci_by_level[level]
            cells.extend([repr(interval.lo), repr(interval.hi)])
        lines.append(",".join(cells))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"analyzed {len(rows)} observations -> {args.out}")
    return 0


def _load_scenario(ref: str):
    registry = builtin_scenarios()
    if ref in registry:
        return registry[ref]
    path = Path(ref)
    if path.exists():
        import json

        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{ref}: not valid JSON: {exc}") from exc
        return scenario_from_dict(payload)
    names = ", ".join(sorted(registry))
    raise NotFoundError(f"unknown scenario {ref!r}; builtin scenarios: {names}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    report = run_scenario(scenario)
    json_path, csv_path = write_report(report, args.out)
    print(f"scenario {scenario.name} ({scenario.reps} reps, {report.wall_time_s:.1f}s)")
    for estimate in report.estimates:
        print(f"  {estimate.name} = {estimate.value:.6g} (se {estimate.std_error:.3g})")
    for check in report.checks:
        verdict = "PASS" if check.passed else "FAIL"
        bounds = f"[{check.lower if check.lower is not None else '-inf'}, " f"{check.upper if check.upper is not None else 'inf'}]"
        print(f"  [{verdict}] {check.name}: {check.estimate:.6g} in {bounds}")
    print(f"wrote {json_path} and {csv_path}")
    return 0 if report.all_passed else 3


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service.app import serve as run_service

    config = load_config(args.config)
    run_service(config)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_serve(args)
    except (InvalidInputError, NotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
