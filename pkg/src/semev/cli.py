"""Command-line entry point: ``semev {solve,sweep,simulate,pipeline,synth}``.

Every option can also come from a JSON file given with ``--config``; keys are
the option names with dashes turned into underscores (``c_i``, ``strategy_b``,
...).  Flags given on the command line win over the file.  Exit status is 0 on
success, 2 on a usage or domain error (one line on stderr), 1 on anything else.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import __version__
from .contest import ContestParams, DomainError, equilibrium
from .economics import contest_exposure, enforcement_cost, mev_tax
from .pipeline.config import DEFAULT_BOUNDARIES, PipelineConfig
from .pipeline.evaluate import evaluate_pipeline
from .pipeline.events import MalformedRowError, read_labels, read_sanctions, read_transfers
from .pipeline.run import run_pipeline
from .pipeline.synth import SynthConfig, synth_generate, write_synth
from .racesim import ChannelRegime, RepeatedConfig, Strategy, run_monte_carlo, run_repeated
from .runio import atomic_write_text, write_manifest

log = logging.getLogger("semev")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}
SWEEP_AXES = ("prize_ratio", "r", "alpha")


class UsageError(Exception):
    """Bad invocation; reported on one line with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- option value parsers (also applied to config-file values) --------------

def _float(value) -> float:
    if isinstance(value, bool):
        raise ValueError("expected a number")
    out = float(value)
    if not math.isfinite(out):
        raise ValueError(f"expected a finite number, got {value!r}")
    return out


def _int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    return int(value)


def _decimal(value) -> Decimal:
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise ValueError(f"not a decimal number: {value!r}") from None


def _boundaries(value) -> tuple[float, float, float]:
    parts = value.split(",") if isinstance(value, str) else list(value)
    if len(parts) != 3:
        raise ValueError("boundaries take three comma-separated values")
    out = tuple(_float(p) for p in parts)
    if not 0 < out[0] < out[1] < out[2]:
        raise ValueError("boundaries must be positive and strictly increasing")
    return out


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    raise ValueError(f"expected true or false, got {value!r}")


_float.__name__ = "number"
_int.__name__ = "integer"
_decimal.__name__ = "decimal"
_boundaries.__name__ = "boundaries"


# -- parser ------------------------------------------------------------------

def _global_options(p: argparse.ArgumentParser, prefix: str = "") -> None:
    p.add_argument("--config", dest=prefix + "config", metavar="PATH", help="JSON file of option values")
    p.add_argument("--seed", dest=prefix + "seed", type=_int, metavar="N", help="64-bit seed (default 0)")
    p.add_argument("--out", dest=prefix + "out", metavar="DIR", help="write outputs and manifest.json here")
    p.add_argument("--format", dest=prefix + "format", choices=("json", "csv"), help="output format")


def _contest_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v", type=_float, help="evader's value at stake V")
    p.add_argument("--psi", type=_float, help="issuer's enforcement value Psi")
    p.add_argument("--r", type=_float, help="contest sharpness r >= 1")
    p.add_argument("--c-i", type=_float, help="issuer participation cost")
    p.add_argument("--c-b", type=_float, help="evader participation cost")


CONTEST_DEFAULTS = {"v": 1.0, "psi": 2.0, "r": 1.0, "c_i": 0.0, "c_b": 0.0}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semev", description="Sanction-evasion contest lab.")
    parser.add_argument("--version", action="version", version=f"semev {__version__}")
    _global_options(parser, prefix="global_")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="equilibrium of one contest")
    _global_options(p)
    _contest_options(p)

    p = sub.add_parser("sweep", help="equilibrium and economics along one axis")
    _global_options(p)
    _contest_options(p)
    p.add_argument("--axis", choices=SWEEP_AXES, help="swept quantity")
    p.add_argument("--start", type=_float)
    p.add_argument("--stop", type=_float)
    p.add_argument("--steps", type=_int, help="number of grid points")
    p.add_argument("--log", action="store_const", const=True, help="geometric spacing")
    p.add_argument("--alpha", type=_float, help="proposer share when not swept (default 0)")

    p = sub.add_parser("simulate", help="Monte Carlo contests, or the repeated game with --alpha")
    _global_options(p)
    _contest_options(p)
    p.add_argument("--strategy-i", help="equilibrium | fixed:A | grid:LO:HI:STEPS")
    p.add_argument("--strategy-b", help="equilibrium | fixed:A | grid:LO:HI:STEPS")
    p.add_argument("--regime", help="public | private | mixed:issuer | mixed:evader")
    p.add_argument("--trials", type=_int, help="number of contests (default 100000)")
    p.add_argument("--alpha", type=_float, help="run the repeated setting at this proposer share")
    p.add_argument("--workers", type=_int, help="worker threads (output does not depend on it)")
    p.add_argument("--trials-csv", action="store_const", const=True,
                   help="also write per-trial trials.csv (needs --out)")

    p = sub.add_parser("pipeline", help="episode segmentation of a sanctioned-address event log")
    _global_options(p)
    p.add_argument("--transfers", metavar="PATH", help="transfers JSONL")
    p.add_argument("--sanctions", metavar="PATH", help="sanctions JSONL")
    p.add_argument("--labels", metavar="PATH", help="address,category CSV")
    p.add_argument("--ground-truth", metavar="PATH", help="score against a synth ground_truth.json")
    p.add_argument("--materiality-alpha", type=_float, help="liquidity fraction (default 0.10)")
    p.add_argument("--beta", type=_decimal, help="absolute outflow floor in USD (default 1000)")
    p.add_argument("--tau", type=_float, help="fixed gap threshold in seconds (skips estimation)")
    p.add_argument("--boundaries", type=_boundaries, help="regime cut points B1,B2,B3 in seconds")
    p.add_argument("--boundary-mode", choices=("default", "fitted"))
    p.add_argument("--k-max", type=_int, help="largest mixture size tried (default 50)")

    p = sub.add_parser("synth", help="synthetic event log with planted ground truth")
    _global_options(p)
    p.add_argument("--addresses", type=_int, help="evader addresses (default 100)")
    return parser


COMMAND_DEFAULTS = {
    "solve": {**CONTEST_DEFAULTS, "format": "json"},
    "sweep": {**CONTEST_DEFAULTS, "format": "csv", "axis": None, "start": None, "stop": None,
              "steps": None, "log": False, "alpha": 0.0},
    "simulate": {**CONTEST_DEFAULTS, "format": "json", "strategy_i": "equilibrium",
                 "strategy_b": "equilibrium", "regime": "public", "trials": 100_000, "alpha": None,
                 "workers": 1, "trials_csv": False},
    "pipeline": {"format": "json", "transfers": None, "sanctions": None, "labels": None,
                 "ground_truth": None, "materiality_alpha": 0.10, "beta": Decimal(1000), "tau": None,
                 "boundaries": tuple(float(b) for b in DEFAULT_BOUNDARIES),
                 "boundary_mode": "default", "k_max": 50},
    "synth": {"format": "json", "addresses": 100},
}
_NOT_CONFIG = {"command", "config"}


def _option_types(parser: argparse.ArgumentParser, command: str) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    types = {}
    for action in sub.choices[command]._actions:
        if action.dest in ("help", "config"):
            continue
        if action.choices is not None:
            choices = tuple(action.choices)

            def check(v, choices=choices):
                if v not in choices:
                    raise ValueError(f"expected one of {', '.join(choices)}")
                return v
            types[action.dest] = check
        elif action.const is True:
            types[action.dest] = _bool
        else:
            types[action.dest] = action.type or str
    return types


def resolve_options(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    ns = vars(args)
    command = ns["command"]
    for key in ("config", "seed", "out", "format"):
        if ns.get(key) is None:
            ns[key] = ns.get("global_" + key)
    opts = {"seed": 0, "out": None, **COMMAND_DEFAULTS[command]}
    types = _option_types(parser, command)

    if ns["config"] is not None:
        try:
            with open(ns["config"], encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"{ns['config']}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{ns['config']}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{ns['config']}: config must be a JSON object")
        for raw_key, value in doc.items():
            key = raw_key.replace("-", "_").lower()
            if key not in types:
                raise UsageError(f"{ns['config']}: unknown option {raw_key!r} for {command}")
            if value is None:
                continue
            try:
                opts[key] = types[key](value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{ns['config']}: option {raw_key!r}: {exc}") from None

    for key, value in ns.items():
        if key.startswith("global_") or key in _NOT_CONFIG or value is None:
            continue
        opts[key] = value
    return opts


# -- rendering ---------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def render(rows: list[dict] | dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=2) + "\n"
    rows = [rows] if isinstance(rows, dict) else rows
    buf = io.StringIO()
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        columns = list(rows[0])
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _config_record(opts: dict) -> dict:
    """The effective configuration as it is hashed into the manifest."""
    record = {}
    for key, value in sorted(opts.items()):
        if key == "out":
            continue
        if isinstance(value, Decimal):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        record[key] = value
    return record


def _emit(opts: dict, command: str, name: str, text: str, started: float, extra: dict | None = None) -> None:
    if opts["out"] is None:
        sys.stdout.write(text)
        return
    out = _out_dir(opts)
    atomic_write_text(out / name, text)
    write_manifest(out, command, _config_record(opts), opts["seed"], started, [name], extra)


def _out_dir(opts: dict) -> Path:
    out = Path(opts["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"{out}: cannot create output directory ({exc.strerror})") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"{out}: output directory is not writable")
    return out


def _params(opts: dict) -> ContestParams:
    return ContestParams(opts["v"], opts["psi"], opts["r"], opts["c_i"], opts["c_b"])


# -- commands ----------------------------------------------------------------

def cmd_solve(opts: dict, started: float) -> None:
    params = _params(opts)
    eq = equilibrium(params)
    record = {"V": params.V, "Psi": params.Psi, "r": params.r, "C_I": params.C_I,
              "C_B": params.C_B, "prize_ratio": params.prize_ratio, **eq.as_dict()}
    _emit(opts, "solve", f"solve.{opts['format']}", render(record, opts["format"]), started)


def sweep_grid(start: float, stop: float, steps: int, log_spaced: bool) -> np.ndarray:
    if steps < 1:
        raise UsageError(f"steps must be at least 1, got {steps}")
    if stop < start:
        raise UsageError(f"stop ({stop!r}) is below start ({start!r})")
    if steps == 1:
        return np.array([start])
    if log_spaced:
        if start <= 0:
            raise UsageError("log spacing needs a positive start")
        return np.geomspace(start, stop, steps)
    return np.linspace(start, stop, steps)


_AXIS_DOMAIN = {
    "prize_ratio": (2.0, math.inf, "prize ratio below 2"),
    "r": (1.0, math.inf, "r below 1"),
    "alpha": (0.0, 1.0, "alpha outside [0, 1]"),
}


def sweep_rows(opts: dict) -> list[dict]:
    axis = opts["axis"]
    if axis is None:
        raise UsageError("sweep needs --axis")
    for key in ("start", "stop", "steps"):
        if opts[key] is None:
            raise UsageError(f"sweep needs --{key}")
    lo, hi, why = _AXIS_DOMAIN[axis]
    for key in ("start", "stop"):
        if not lo <= opts[key] <= hi:
            raise UsageError(f"{key} {opts[key]!r}: {why}")
    grid = sweep_grid(opts["start"], opts["stop"], opts["steps"], bool(opts["log"]))

    base = _params(opts)
    rows = []
    for value in grid.tolist():
        alpha = opts["alpha"]
        if axis == "prize_ratio":
            params = ContestParams(base.V, value * base.V, base.r, base.C_I, base.C_B)
        elif axis == "r":
            params = ContestParams(base.V, base.Psi, value, base.C_I, base.C_B)
        else:
            params, alpha = base, value
        eq = equilibrium(params)
        tax = mev_tax(params)
        row = {
            "V": params.V, "Psi": params.Psi, "r": params.r, "C_I": params.C_I, "C_B": params.C_B,
            "prize_ratio": params.prize_ratio, "alpha": alpha,
            **eq.as_dict(),
            "tax_over_V": tax.tax_over_V,
            "tax_asymptote_gap": tax.asymptote_gap,
            "cost": enforcement_cost(alpha, params),
            "cost_slope": -contest_exposure(params),
        }
        # swept quantity first
        rows.append({axis: row[axis], **{k: v for k, v in row.items() if k != axis}})
    return rows


def cmd_sweep(opts: dict, started: float) -> None:
    rows = sweep_rows(opts)
    _emit(opts, "sweep", f"sweep.{opts['format']}", render(rows, opts["format"]), started)


def cmd_simulate(opts: dict, started: float) -> None:
    params = _params(opts)
    seed = opts["seed"]
    if opts["trials"] < 1:
        raise UsageError(f"trials must be at least 1, got {opts['trials']}")
    if opts["workers"] < 1:
        raise UsageError("workers must be at least 1")
    try:
        strat_I = Strategy.parse(opts["strategy_i"])
        strat_B = Strategy.parse(opts["strategy_b"])
        regime = ChannelRegime.parse(opts["regime"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fmt = opts["format"]

    if opts["alpha"] is not None:
        if opts["trials_csv"]:
            raise UsageError("--trials-csv applies to single contests, not the repeated run")
        if strat_I.kind.value != "equilibrium":
            raise UsageError("the repeated run fixes the issuer at its equilibrium bid")
        cfg = RepeatedConfig(opts["alpha"], opts["trials"], params, seed)
        report = run_repeated(cfg, strat_B, workers=opts["workers"])
        _emit(opts, "simulate", f"repeated.{fmt}", render(_report_dict(report), fmt), started)
        return

    if not opts["trials_csv"]:
        report = run_monte_carlo(params, strat_I, strat_B, regime, opts["trials"], seed,
                                 workers=opts["workers"])
        _emit(opts, "simulate", f"report.{fmt}", render(_report_dict(report), fmt), started)
        return

    if opts["out"] is None:
        raise UsageError("--trials-csv needs --out")
    out = _out_dir(opts)
    fd, tmp = tempfile.mkstemp(dir=out, prefix=".trials.csv.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            report = run_monte_carlo(params, strat_I, strat_B, regime, opts["trials"], seed,
                                     workers=opts["workers"], trial_log=fh)
        os.replace(tmp, out / "trials.csv")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    name = f"report.{fmt}"
    atomic_write_text(out / name, render(_report_dict(report), fmt))
    write_manifest(out, "simulate", _config_record(opts), seed, started, [name, "trials.csv"])


def _report_dict(report) -> dict:
    return json.loads(report.to_json())


def _read_inputs(opts: dict):
    for key in ("transfers", "sanctions"):
        if opts[key] is None:
            raise UsageError(f"pipeline needs --{key}")
    transfers = read_transfers(opts["transfers"])
    sanctions = read_sanctions(opts["sanctions"])
    labels = read_labels(opts["labels"]) if opts["labels"] else None
    return transfers, sanctions, labels


def cmd_pipeline(opts: dict, started: float) -> None:
    if opts["out"] is None:
        raise UsageError("pipeline needs --out")
    cfg = PipelineConfig(
        alpha=opts["materiality_alpha"],
        beta=opts["beta"],
        k_max=opts["k_max"],
        seed=opts["seed"],
        default_boundaries=tuple(opts["boundaries"]),
        boundary_mode=opts["boundary_mode"],
    )
    transfers, sanctions, labels = _read_inputs(opts)
    truth = None
    if opts["ground_truth"]:
        with open(opts["ground_truth"], encoding="utf-8") as fh:
            try:
                truth = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{opts['ground_truth']}:{exc.lineno}: invalid JSON ({exc.msg})") from None

    result = run_pipeline(transfers, sanctions, labels, cfg, tau=opts["tau"])
    out = _out_dir(opts)
    artifacts = {"episodes.csv": result.episodes_csv(), "regimes.json": result.regimes_json()}
    if truth is not None:
        report = evaluate_pipeline(result, truth)
        artifacts["evaluation.json"] = json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"
    for name, text in artifacts.items():
        atomic_write_text(out / name, text)
    extra = {"funnel": result.funnel, "removed": result.removed,
             "committed_window": result.committed_window, "input_digest": result.input_digest}
    write_manifest(out, "pipeline", _config_record(opts), opts["seed"], started, list(artifacts), extra)
    log.info("pipeline wrote %d episodes to %s", len(result.episodes), out)


def cmd_synth(opts: dict, started: float) -> None:
    if opts["out"] is None:
        raise UsageError("synth needs --out")
    data = synth_generate(SynthConfig(addresses=opts["addresses"], seed=opts["seed"]))
    out = _out_dir(opts)
    paths = write_synth(data, out)
    write_manifest(out, "synth", _config_record(opts), opts["seed"], started, list(paths))


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "pipeline": cmd_pipeline, "synth": cmd_synth}


def _setup_logging() -> None:
    name = os.environ.get("SEMEV_LOG", "warn").strip().lower()
    if name not in LOG_LEVELS:
        raise UsageError(f"SEMEV_LOG must be one of {', '.join(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        _setup_logging()
        args = parser.parse_args(argv)
        opts = resolve_options(parser, args)
        COMMANDS[args.command](opts, time.time())
    except (UsageError, DomainError, MalformedRowError) as exc:
        print(f"semev: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"semev: error: {exc.filename}: no such file", file=sys.stderr)
        return 2
    except PermissionError as exc:
        print(f"semev: error: {exc.filename}: permission denied", file=sys.stderr)
        return 2
    except ValueError as exc:
        # configuration objects validate their fields with ValueError
        print(f"semev: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        log.debug("internal error", exc_info=True)
        print(f"semev: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
