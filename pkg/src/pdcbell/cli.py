"""Command-line surface over the simulation library.

Commands map one-to-one onto library calls and only serialize their
results; no computation lives here.  Exit codes: 0 success (and feasible
for lhv-check), 2 malformed input, 3 infeasible (lhv-check only), 4
violated internal invariant.

Angles always carry an explicit ``deg`` or ``rad`` suffix; bare numbers are
rejected to prevent unit mistakes.  Relative ``--out`` paths resolve under
``$PDCBELL_OUT_DIR`` when that variable is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .bell import ChshSettings, chsh_decomposition, optimize_angles
from .errors import InputError, PdcBellError
from .fock import StateVector, occupation_key
from .lhv import lhv_feasible, tables_from_json_dict, verdict_to_json_dict
from .measurement import PolarizerAngle, joint_distribution
from .montecarlo import (
    EventLog,
    RunConfig,
    estimate_correlators,
    run_experiment,
)
from .optics import PairAmplitude, attach_vacuum, build_experiment_state, split_by_locality

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INVARIANT = 4

OUT_DIR_ENV = "PDCBELL_OUT_DIR"


def parse_angle(text: str) -> float:
    """An angle with a required deg/rad suffix, returned in radians."""
    text = text.strip().lower()
    for suffix, factor in (("deg", math.pi / 180.0), ("rad", 1.0)):
        if text.endswith(suffix):
            try:
                return float(text[: -len(suffix)]) * factor
            except ValueError as exc:
                raise InputError(f"cannot parse angle {text!r}") from exc
    raise InputError(f"angle {text!r} needs an explicit 'deg' or 'rad' suffix")


def parse_settings(text: str) -> ChshSettings:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 4:
        raise InputError(f"--settings needs 4 comma-separated angles, got {len(parts)}")
    return ChshSettings.from_radians(*(parse_angle(p) for p in parts))


def _resolve_out(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n")


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _prepared_state(p_pair: float) -> StateVector:
    state = build_experiment_state()
    if p_pair >= 1.0:
        return state
    return attach_vacuum(state, PairAmplitude.from_pair_probability(p_pair))


def cmd_state(args: argparse.Namespace) -> int:
    state = build_experiment_state()
    favorable, unfavorable = split_by_locality(state)
    print("state at the detection stations (station 1 | station 2):")
    for occ, amp in state.sorted_terms():
        print(f"  {occupation_key(occ):<8} {amp.real:+.6f} {amp.imag:+.6f}j")
    print(f"favorable weight:   {favorable.norm_squared():.6f}")
    print(f"unfavorable weight: {unfavorable.norm_squared():.6f}")
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    state = _prepared_state(args.p_pair)
    dist = joint_distribution(
        state, PolarizerAngle(parse_angle(args.xi)), PolarizerAngle(parse_angle(args.eta))
    )
    _emit(dist.to_json_dict(), _resolve_out(args.out))
    return EXIT_OK


def cmd_chsh(args: argparse.Namespace) -> int:
    state = _prepared_state(args.p_pair)
    result = chsh_decomposition(state, parse_settings(args.settings))
    _emit(result.to_json_dict(), _resolve_out(args.out))
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    state = _prepared_state(args.p_pair)
    settings, value = optimize_angles(state)
    _emit({"settings_rad": list(settings.as_radians()), "value": value}, _resolve_out(args.out))
    return EXIT_OK


def cmd_lhv_check(args: argparse.Namespace) -> int:
    tables = tables_from_json_dict(_load_json(args.input))
    verdict = lhv_feasible(tables)
    _emit(verdict_to_json_dict(verdict), _resolve_out(args.out))
    return EXIT_OK if verdict.feasible else EXIT_INFEASIBLE


def cmd_simulate(args: argparse.Namespace) -> int:
    config = RunConfig.from_json_dict(_load_json(args.config))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    log = run_experiment(config)
    out = _resolve_out(args.out)
    log.to_csv(out)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    log = EventLog.from_csv(args.input)
    report = estimate_correlators(log)
    payload = report.to_json_dict()
    if args.settings is not None:
        payload["settings_rad"] = list(parse_settings(args.settings).as_radians())
    _emit(payload, _resolve_out(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdcbell",
        description="Down-conversion Bell experiment: states, statistics, CHSH, "
        "local-model checks and counting runs.",
    )
    parser.add_argument("--version", action="version", version=f"pdcbell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="print the prepared state and its block weights")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("table", help="joint outcome distribution for one setting pair")
    p.add_argument("--xi", required=True, help="station-1 analyzer angle, e.g. 22.5deg or 0.39rad")
    p.add_argument("--eta", required=True, help="station-2 analyzer angle")
    p.add_argument("--p-pair", type=float, default=1.0, dest="p_pair",
                   help="per-bin pair probability; below 1 adds the vacuum term")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("chsh", help="CHSH value and block decomposition")
    p.add_argument("--settings", required=True,
                   help="xi,xi',eta,eta' with deg/rad suffixes, comma separated")
    p.add_argument("--p-pair", type=float, default=1.0, dest="p_pair")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("optimize", help="search the settings maximizing the CHSH value")
    p.add_argument("--p-pair", type=float, default=1.0, dest="p_pair")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("lhv-check", help="decide local-model feasibility of four tables")
    p.add_argument("--input", required=True, help="JSON file with the four tables")
    p.add_argument("--out", help="write the verdict JSON here instead of stdout")
    p.set_defaults(func=cmd_lhv_check)

    p = sub.add_parser("simulate", help="run the time-binned counting protocol")
    p.add_argument("--config", required=True, help="run configuration JSON file")
    p.add_argument("--out", required=True, help="event log CSV path")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="estimate correlators and CHSH from an event log")
    p.add_argument("--input", required=True, help="event log CSV path")
    p.add_argument("--settings", help="optional xi,xi',eta,eta' echoed into the report")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PdcBellError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
