"""Command-line entry point: ``pdiqkd {values,simulate,bounds,attack}``.

Exit codes: 0 success, 2 usage (including inconsistent inputs), 3 the
security theorem does not apply, 4 I/O failure. Output files embed the
resolved configuration and package version, and are written atomically
only after all arguments have been validated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._util import as_fraction, fraction_pair
from .bounds import BoundConstants, honest_acceptance_bound, min_entropy_bound, theorem_report
from .errors import CapacityError, ConsistencyError, DegenerateStatisticsError, DomainError, TheoremInapplicableError
from .games import CommonBitMaps, classical_value, load_game, magic_square
from .guessing import (
    GUESS_COMMON_BIT,
    GUESS_FULL_OUTPUT,
    ClassicalEveStrategy,
    best_guessing_triple,
    build_guessing_game,
    c_star_bounds,
    strategy_guessing_value,
)
from .protocol import (
    ClassicalDevice,
    OmniscientClassicalEve,
    PredictFromLeakEve,
    ProtocolConfig,
    QuantumDevice,
    RandomGuessEve,
    run_many,
    summarize_records,
)
from .quantum import NoiseModel, ideal_ms_strategy, win_probability

EXIT_USAGE = 2
EXIT_INAPPLICABLE = 3
EXIT_IO = 4
WORKERS_ENV = "PDIQKD_WORKERS"


class UsageError(Exception):
    pass


# argument types -------------------------------------------------------------

def rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def count(text: str) -> int:
    """Positive integer; accepts ``1e6`` style literals."""
    try:
        value = float(text) if any(c in text for c in ".eE") else int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def seed_type(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def probability(text: str) -> float:
    value = float(as_fraction(text))
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"expected a probability, got {text!r}")
    return value


def csv_list(kind):
    def parse(text: str) -> list:
        items = [t for t in text.split(",") if t.strip()]
        return [kind(t.strip()) for t in items]

    return parse


# output ---------------------------------------------------------------------

def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _render(doc: dict, rows: list[dict] | None, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# pdiqkd {__version__}\n")
    buf.write("# config: " + json.dumps(_jsonable(doc["config"]), sort_keys=True) + "\n")
    rows = rows or []
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _jsonable(v) for k, v in row.items()})
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pdiqkd-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _envelope(command: str, config: dict) -> dict:
    return {"tool": "pdiqkd", "version": __version__, "command": command, "config": config}


# subcommands ----------------------------------------------------------------

def cmd_values(args) -> tuple[dict, list[dict]]:
    eta = args.eta
    if not 0 < eta <= 1:
        raise UsageError(f"--eta must lie in (0, 1], got {eta}")
    condition = GUESS_COMMON_BIT if args.eve_condition == "common-bit" else GUESS_FULL_OUTPUT
    if args.game == "ms":
        game, maps = magic_square()
    else:
        try:
            game, maps = load_game(args.game)
        except OSError as exc:
            raise UsageError(f"cannot read game file: {exc}") from exc
        if maps is None:
            if condition == GUESS_COMMON_BIT:
                raise UsageError("custom game has no common_bits; use --eve-condition full-output")
            # placeholder maps, never consulted under full-output guessing
            nx, ny, na, nb = game.shape
            maps = CommonBitMaps(np.zeros((nx, ny, na), int), np.zeros((nx, ny, nb), int))
    g = build_guessing_game(game, maps, eta, condition)
    omega_c = classical_value(game)
    omega_g, pair, eve = best_guessing_triple(g)
    evaluated = [omega_g]
    omega_star = None
    if args.game == "ms":
        strategy = ideal_ms_strategy()
        omega_star = win_probability(strategy)
        evaluated.append(strategy_guessing_value(g, strategy, ClassicalEveStrategy.uniform(g)))
    certified = 1 - max(evaluated)
    working = args.cstar if 0 < args.cstar <= certified else None
    consts = c_star_bounds(evaluated, working_value=working)
    config = {
        "game": game.name,
        "eta": str(eta),
        "eve_condition": condition,
        "c_star_working_value": None if working is None else str(working),
    }
    rows = [
        {"quantity": "omega_c(G)", "exact": fraction_pair(omega_c), "value": str(omega_c), "decimal": float(omega_c)},
        {"quantity": "omega_c(G_eta)", "exact": fraction_pair(omega_g), "value": str(omega_g), "decimal": float(omega_g)},
        {
            "quantity": "C* upper bound",
            "exact": fraction_pair(consts.c_star_upper_bound),
            "value": f"<= {consts.c_star_upper_bound}",
            "decimal": float(consts.c_star_upper_bound),
        },
        {
            "quantity": "omega*(G) ideal strategy",
            "exact": None,
            "value": "n/a" if omega_star is None else f"{omega_star:.12f}",
            "decimal": omega_star,
        },
    ]
    doc = _envelope("values", config)
    doc["values"] = rows
    doc["optimal_classical_triple"] = {
        "alice_map": list(pair.alice_map),
        "bob_map": list(pair.bob_map),
        "eve_on_pair": {f"{x},{y}": max(d, key=d.get) for (x, y), d in sorted(eve.on_pair.items())},
    }
    return doc, rows


def _build_device(kind: str, epsilon: Fraction, target_win: float | None, noise_q: float | None):
    if kind == "ideal":
        return QuantumDevice()
    if kind == "noisy":
        if noise_q is not None:
            return QuantumDevice(noise=NoiseModel.depolarizing(noise_q))
        target = 1 - float(epsilon) / 2 if target_win is None else target_win
        try:
            return QuantumDevice.calibrated(target)
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
    if kind == "classical":
        return ClassicalDevice()
    raise UsageError(f"unknown device {kind!r}")


def _build_eve(kind: str, device):
    if kind == "random":
        return RandomGuessEve()
    if kind == "predict":
        return PredictFromLeakEve()
    if kind == "omniscient":
        if not hasattr(device, "alice_table"):
            return None
        return OmniscientClassicalEve(device)
    raise UsageError(f"unknown Eve model {kind!r}")


def _protocol_config(args, n: int, epsilon: Fraction) -> ProtocolConfig:
    try:
        return ProtocolConfig(
            n=n,
            eta=args.eta,
            gamma=args.gamma,
            epsilon=epsilon,
            master_seed=args.seed,
            exclude_test_rounds_from_key=not args.include_test_rounds,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _aggregate(records: list[dict]) -> dict:
    try:
        stats = summarize_records(records).to_dict()
    except DegenerateStatisticsError:
        stats = {"runs": len(records), "accepted": 0, "acceptance_rate": 0.0}
    return stats


def cmd_simulate(args) -> tuple[dict, list[dict]]:
    config = _protocol_config(args, args.n, args.eps)
    device = _build_device(args.device, args.eps, args.target_win, args.noise_q)
    eve = _build_eve(args.eve, device)
    if eve is None:
        raise UsageError("the omniscient Eve model needs the classical device")
    results = run_many(config, device, eve, args.runs, args.workers)
    records = [r.record() for r in results]
    if args.transcripts:
        for rec, res in zip(records, results):
            rec["transcript"] = res.transcript.to_dict()
    resolved = {
        **config.parameters(),
        "master_seed": config.master_seed,
        "config_hash": config.config_hash(),
        "runs": args.runs,
        "device": device.describe(),
        "eve": eve.describe(),
    }
    doc = _envelope("simulate", resolved)
    doc["runs"] = records
    doc["aggregate"] = _aggregate(records)
    rows = [{k: v for k, v in rec.items() if k != "transcript"} for rec in records]
    return doc, rows


def cmd_bounds(args) -> tuple[dict, list[dict]]:
    consts = BoundConstants(args.conc_constant, args.rep_constant, args.leak_constant, args.honest_constant)
    if args.eps <= 0:
        raise UsageError("--eps must be positive")
    if args.eps >= args.cstar / 2:
        raise TheoremInapplicableError(f"epsilon = {args.eps} is not below C*/2 = {args.cstar / 2}")
    config = _protocol_config(args, args.n, args.eps)
    resolved = {
        **config.parameters(),
        "config_hash": config.config_hash(),
        "c_star": str(args.cstar),
        "constants": consts.to_dict(),
    }
    doc = _envelope("bounds", resolved)
    if args.attach:
        try:
            with open(args.attach, encoding="utf-8") as fh:
                attached = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read run record {args.attach}: {exc}") from exc
        try:
            stats = summarize_records(attached["runs"])
        except (KeyError, TypeError) as exc:
            raise UsageError(f"{args.attach} is not a simulate run file") from exc
        except DegenerateStatisticsError:
            raise UsageError(f"every run in {args.attach} aborted; nothing to compare") from None
        report = theorem_report(config, args.cstar, consts, stats, p_a=args.pa)
        doc["theorem_report"] = report.to_dict()
        pa = args.pa if args.pa is not None else stats.acceptance_rate
    else:
        pa = 1.0 if args.pa is None else args.pa
    try:
        report = min_entropy_bound(config.n, float(args.eps), float(args.gamma), pa, float(args.cstar), consts)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    doc["bound"] = report.to_dict()
    doc["honest_acceptance_bound"] = honest_acceptance_bound(float(args.eps), float(args.gamma), config.n, consts)
    rows = [{"quantity": k, "value": v} for k, v in report.to_dict().items() if k != "constants"]
    rows += [{"quantity": f"constant.{k}", "value": v} for k, v in consts.to_dict().items()]
    return doc, rows


def cmd_attack(args) -> tuple[dict, list[dict]]:
    grid = [
        (d, e, eps, n)
        for d in args.devices
        for e in args.eves
        for eps in args.eps_grid
        for n in args.n_grid
    ]
    if not grid:
        raise UsageError("the sweep grid is empty")
    for d in args.devices:
        if d not in ("ideal", "noisy", "classical"):
            raise UsageError(f"unknown device {d!r}")
    for e in args.eves:
        if e not in ("random", "predict", "omniscient"):
            raise UsageError(f"unknown Eve model {e!r}")
    configs = {(eps, n): _protocol_config(args, n, eps) for _, _, eps, n in grid}

    def cell(item):
        d, e, eps, n = item
        config = configs[(eps, n)]
        device = _build_device(d, eps, None, None)
        eve = _build_eve(e, device)
        row = {
            "device": d,
            "eve": e,
            "epsilon": str(eps),
            "n": n,
            "runs": args.runs,
            "accepted": None,
            "acceptance_rate": None,
            "eve_per_bit_success": None,
            "eve_whole_key_success": None,
            "mean_key_length": None,
            "status": "ok",
        }
        if eve is None:
            row["status"] = "incompatible"
            return row
        records = [r.record() for r in run_many(config, device, eve, args.runs)]
        accepted = sum(r["abort_stage"] == "none" for r in records)
        row["accepted"] = accepted
        row["acceptance_rate"] = accepted / len(records)
        if accepted:
            stats = summarize_records(records)
            row["eve_per_bit_success"] = stats.per_bit_success
            row["eve_whole_key_success"] = stats.whole_string_success
            row["mean_key_length"] = stats.mean_key_length
        else:
            row["status"] = "all_aborted"
        return row

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(cell, grid))
    else:
        rows = [cell(item) for item in grid]
    resolved = {
        "devices": args.devices,
        "eves": args.eves,
        "epsilons": [str(e) for e in args.eps_grid],
        "ns": args.n_grid,
        "runs": args.runs,
        "eta": str(args.eta),
        "gamma": str(args.gamma),
        "master_seed": args.seed,
        "exclude_test_rounds_from_key": not args.include_test_rounds,
    }
    doc = _envelope("attack", resolved)
    doc["cells"] = rows
    return doc, rows


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=seed_type, default=0, help="master seed (default 0)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--workers", type=count, default=_default_workers(), help=f"worker threads (env {WORKERS_ENV})")

    protocol = argparse.ArgumentParser(add_help=False)
    protocol.add_argument("--eta", type=rational, default=Fraction(1, 8))
    protocol.add_argument("--gamma", type=rational, default=Fraction(1, 4))
    protocol.add_argument(
        "--include-test-rounds", action="store_true", help="keep the test rounds T in the raw key"
    )

    parser = argparse.ArgumentParser(prog="pdiqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pdiqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("values", parents=[common], help="exact game and guessing-game values")
    p.add_argument("--game", default="ms", help="'ms' or a path to a game JSON file")
    p.add_argument("--eta", type=rational, default=Fraction(1, 8))
    p.add_argument("--eve-condition", choices=("common-bit", "full-output"), default="common-bit")
    p.add_argument("--cstar", type=rational, default=Fraction(1, 100), help="working value of C*")
    p.set_defaults(func=cmd_values, default_format="json")

    p = sub.add_parser("simulate", parents=[common, protocol], help="seeded protocol runs")
    p.add_argument("--device", choices=("ideal", "noisy", "classical"), default="ideal")
    p.add_argument("--eve", choices=("random", "predict", "omniscient"), default="random")
    p.add_argument("--target-win", type=probability, default=None, help="noisy device win probability (default 1 - eps/2)")
    p.add_argument("--noise-q", type=probability, default=None, help="depolarizing probability for the noisy device")
    p.add_argument("--n", type=count, default=1000)
    p.add_argument("--eps", type=rational, default=Fraction(1, 10))
    p.add_argument("--runs", type=count, default=100)
    p.add_argument("--transcripts", action="store_true", help="dump the public transcript of each run")
    p.set_defaults(func=cmd_simulate, default_format="json")

    p = sub.add_parser("bounds", parents=[common, protocol], help="evaluate the analytic bounds")
    p.add_argument("--n", type=count, required=True)
    p.add_argument("--eps", type=rational, required=True)
    p.add_argument("--cstar", type=rational, default=Fraction(1, 100))
    p.add_argument("--pa", type=probability, default=None, help="probability of the conditioning event")
    p.add_argument("--conc-constant", type=positive_float, default=BoundConstants.conc_constant)
    p.add_argument("--rep-constant", type=positive_float, default=BoundConstants.rep_constant)
    p.add_argument("--leak-constant", type=positive_float, default=BoundConstants.leak_constant)
    p.add_argument("--honest-constant", type=positive_float, default=BoundConstants.honest_constant)
    p.add_argument("--attach", default=None, help="simulate output to compare against")
    p.set_defaults(func=cmd_bounds, default_format="json")

    p = sub.add_parser("attack", parents=[common, protocol], help="sweep device and Eve models")
    p.add_argument("--devices", type=csv_list(str), default=["ideal", "noisy", "classical"])
    p.add_argument("--eves", type=csv_list(str), default=["random", "predict", "omniscient"])
    p.add_argument("--eps-grid", type=csv_list(rational), default=[Fraction(1, 20), Fraction(1, 10)])
    p.add_argument("--n-grid", type=csv_list(count), default=[100, 1000])
    p.add_argument("--runs", type=count, default=50)
    p.set_defaults(func=cmd_attack, default_format="csv")
    return parser


def _print_table(rows: list[dict], stream) -> None:
    if not rows:
        return
    keys = [k for k in rows[0] if k != "exact"]
    widths = {k: max(len(k), *(len(_cell(r.get(k))) for r in rows)) for k in keys}
    stream.write("  ".join(k.ljust(widths[k]) for k in keys) + "\n")
    for r in rows:
        stream.write("  ".join(_cell(r.get(k)).ljust(widths[k]) for k in keys) + "\n")


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = args.format or args.default_format
    try:
        doc, rows = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ConsistencyError, CapacityError) as exc:
        print(f"pdiqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TheoremInapplicableError as exc:
        print(f"pdiqkd {args.command}: theorem inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except DomainError as exc:
        parser.error(str(exc))
    text = _render(doc, rows, fmt)
    if args.out is not None and args.command in ("values", "bounds"):
        _print_table(rows, sys.stdout)
    elif args.out is None and args.command == "values" and args.format is None:
        _print_table(rows, sys.stdout)
        return 0
    try:
        _emit(text, args.out)
    except OSError as exc:
        print(f"pdiqkd {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
