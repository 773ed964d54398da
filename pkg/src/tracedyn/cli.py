"""``tracedyn`` command-line interface.

Subcommands ``simulate``, ``ensemble``, ``collapse`` and ``boost-check``.
Exit codes: 0 on success, 1 on usage or configuration errors, 2 when the
numerics fail (non-finite values, step-size violations).  All randomness
comes from the master ``--seed`` through :mod:`tracedyn.seeding`, and every
output records the full configuration and seed, so repeating a command
reproduces its files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__
from .collapse import (
    StepSizeError,
    born_statistics,
    collapse_time_scaling,
    martingale_check,
    simulate_populations,
    variance_decay_curve,
)
from .config import (
    ConfigError,
    build_collapse_config,
    build_ensemble_config,
    build_initial,
    build_model,
    load_toml,
)
from .ensemble import SamplingError, run_ensemble
from .grassmann import DimensionError
from .nc_spacetime import boost_check
from .operator_core import GradingError, OperatorMatrix, SymbolError
from .seeding import MAX_SEED, child_rng
from .trace_dynamics import (
    SCHEMES,
    IntegrationError,
    adler_millard_charge,
    integrate,
    mass_shell_residual,
    trace_hamiltonian_value,
)

log = logging.getLogger("tracedyn")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="master seed (default: config 'seed' or 0)")
    common.add_argument("--threads", type=_positive_int, default=None, help="worker threads (env TRACEDYN_THREADS)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="tracedyn", description="Matrix trace dynamics simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common], help="integrate a trace-Hamiltonian model")
    sim.add_argument("--config", "--model", dest="config", required=True, help="model TOML file")
    sim.add_argument("--tau-end", type=float)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--scheme", choices=SCHEMES)
    sim.add_argument("--sample-every", type=_positive_int)
    sim.add_argument("--out", required=True, help="output CSV")

    ens = sub.add_parser("ensemble", parents=[common], help="sample the canonical ensemble")
    ens.add_argument("--config", required=True)
    ens.add_argument("--out", required=True, help="output JSON")

    col = sub.add_parser("collapse", parents=[common], help="state-reduction statistics")
    col.add_argument("--config", required=True)
    col.add_argument("--out", required=True, help="output directory")

    bc = sub.add_parser("boost-check", parents=[common], help="generalized boost checks")
    bc.add_argument("--trials", type=_positive_int, default=100)
    bc.add_argument("--dim", type=_positive_int, default=2)
    bc.add_argument("--generators", type=_positive_int, default=2)
    bc.add_argument("--out", help="output JSON (default: stdout)")
    return parser


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _header(command: str, seed: int, config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str)
    return f"# tracedyn {command}\n# seed = {seed}\n# config = {blob}\n"


def _write_csv(path: Path, command: str, seed: int, config: dict, columns, rows, notes=()) -> None:
    lines = [_header(command, seed, config)]
    lines.extend(f"# {n}\n" for n in notes)
    lines.append(",".join(columns) + "\n")
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _num(v) for v in row) + "\n")
    _write_text(path, "".join(lines))


def _write_json(path: Path | None, obj: dict) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        _write_text(path, text)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TRACEDYN_THREADS")
    if env is None:
        return 1
    try:
        return _positive_int(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"TRACEDYN_THREADS: {exc}") from None


def _master_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigError("config 'seed' must be an unsigned 64-bit integer")
    return seed


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _entry(value, i: int, j: int) -> complex:
    if isinstance(value, OperatorMatrix):
        return complex(value.data[0, i, j])
    return complex(value[i, j])


def _frobenius(value) -> float:
    if isinstance(value, OperatorMatrix):
        return value.frobenius_norm()
    return float(np.linalg.norm(value))


def cmd_simulate(args) -> int:
    cfg = load_toml(args.config)
    seed = _master_seed(args, cfg)
    model = build_model(cfg.get("model", {}))
    initial = build_initial(cfg.get("initial", {}), model, child_rng(seed, "simulate.initial"))
    run = dict(cfg.get("run", {}))
    for key in ("tau_end", "dt", "scheme", "sample_every"):
        if getattr(args, key) is not None:
            run[key] = getattr(args, key)
    unknown = sorted(set(run) - {"tau_end", "dt", "scheme", "sample_every"})
    if unknown:
        raise ConfigError(f"unknown keys in [run]: {', '.join(unknown)}")
    if "tau_end" not in run or "dt" not in run:
        raise ConfigError("tau_end and dt must be given in [run] or on the command line")
    run.setdefault("scheme", "rk4")
    run.setdefault("sample_every", 1)

    out_cfg = dict(cfg.get("output", {}))
    entries = out_cfg.get("entries")
    if entries is None:
        entries = [[model.coordinates[0], 0, 0], [model.momenta[0], 0, 0]]
    for sym, i, j in entries:
        if sym not in model.symbols or not (0 <= i < model.dim and 0 <= j < model.dim):
            raise ConfigError(f"output entry {[sym, i, j]} is not a matrix entry of the model")

    traj = integrate(
        model, initial, float(run["tau_end"]), float(run["dt"]), run["scheme"], sample_every=int(run["sample_every"])
    )
    q0 = adler_millard_charge(traj.initial, model)
    shell = model.four_momentum is not None and model.mass is not None
    columns = ["tau"]
    for sym, i, j in entries:
        columns += [f"{sym}_{i}{j}_re", f"{sym}_{i}{j}_im"]
    columns += ["H", "Q_drift"] + (["mass_shell"] if shell else [])
    rows = []
    for point in traj:
        row = [point.tau]
        for sym, i, j in entries:
            z = _entry(point[sym], i, j)
            row += [z.real, z.imag]
        row += [trace_hamiltonian_value(model, point), _frobenius(adler_millard_charge(point, model) - q0)]
        if shell:
            row.append(mass_shell_residual(point, model.mass, model.four_momentum))
        rows.append(row)
    full = {"file": cfg, "run": run, "entries": entries}
    _write_csv(Path(args.out), "simulate", seed, full, columns, rows)
    log.info("wrote %d samples to %s", len(rows), args.out)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = load_toml(args.config)
    seed = _master_seed(args, cfg)
    ecfg, ward = build_ensemble_config(cfg, seed)
    report = run_ensemble(ecfg, ward)
    for w in report.warnings:
        log.warning(w)
    obj = {"config": cfg, "seed": seed}
    obj.update(report.to_json_obj())
    _write_json(Path(args.out), obj)
    return EXIT_OK


def cmd_collapse(args) -> int:
    cfg = load_toml(args.config)
    seed = _master_seed(args, cfg)
    ccfg, psi0, scaling = build_collapse_config(cfg, seed)
    threads = _threads(args)
    out = Path(args.out)
    rec = simulate_populations(ccfg, psi0, threads=threads)
    born = born_statistics(ccfg, psi0, record=rec)
    curve = variance_decay_curve(ccfg, psi0, record=rec)
    mart = martingale_check(ccfg, psi0, record=rec)
    if born.flagged:
        log.warning("%d of %d trajectories did not resolve by t_end", born.unresolved, born.n_traj)

    notes = [f"unresolved = {born.unresolved}"]
    rows = zip(born.eigenvalues, born.expected, born.frequencies, born.stderr)
    _write_csv(
        out / "born.csv", "collapse", seed, cfg,
        ["eigenvalue", "probability_expected", "frequency", "stderr"], rows, notes,
    )
    _write_csv(
        out / "variance.csv", "collapse", seed, cfg,
        ["t", "mean_var", "stderr"], zip(curve.times, curve.mean_var, curve.stderr),
    )
    _write_csv(
        out / "martingale.csv", "collapse", seed, cfg,
        ["eigenvalue", "drift", "band", "within_band"],
        [(a, d, b, str(bool(d <= b)).lower()) for a, d, b in zip(mart.eigenvalues, mart.drift, mart.band)],
    )
    amps = [int(n) for n in scaling.get("amplifications", [ccfg.amplification])]
    if not amps or min(amps) < 1:
        raise ConfigError("[scaling] amplifications must be positive integers")
    floor = float(scaling.get("floor", 1e-2))
    sres = collapse_time_scaling(ccfg, psi0, amps, floor=floor, threads=threads)
    ratios = [float("nan")] + list(sres.ratios())
    _write_csv(
        out / "scaling.csv", "collapse", seed, cfg,
        ["amplification", "rate", "ratio_to_previous"], zip(sres.amplifications, sres.rates, ratios),
    )
    if sres.failed:
        log.warning("decay-rate fit failed for at least one amplification")
    return EXIT_OK


def cmd_boost_check(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = child_rng(seed, "boost_check")
    report = boost_check(args.trials, rng, args.dim, args.generators)
    obj = {"config": {"trials": args.trials, "dim": args.dim, "generators": args.generators}, "seed": seed}
    obj.update(report)
    _write_json(Path(args.out) if args.out else None, obj)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "collapse": cmd_collapse,
    "boost-check": cmd_boost_check,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except (IntegrationError, SamplingError, StepSizeError, FloatingPointError) as exc:
        print(f"tracedyn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"tracedyn: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, UsageError, SymbolError, GradingError, DimensionError, ValueError, KeyError, TypeError) as exc:
        print(f"tracedyn: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"tracedyn: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
