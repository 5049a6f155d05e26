"""Command-line front end.

Subcommands map onto the two-phase experiment plus two diagnostics:

* itebd: evolve the infinite chain, write a checkpoint and a curve.
* sample: Monte Carlo window sampling from a checkpoint.
* peaks: extract |mean| peaks from a curve, optionally shift-corrected
  against a reference curve.
* circuit-demo: compare direct, summed and sampled contraction of a
  random brickwork circuit.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
guard tripped, 4 I/O or checkpoint failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .circuit import (
    BrickworkCircuit,
    direct_expectation,
    lightcone_expectation_sampled,
    lightcone_expectation_sum,
)
from .errors import CheckpointError, ConfigError, NumericalError
from .harness import (
    PROFILES,
    extract_peaks,
    read_aggregate_curve,
    read_table,
    run_itebd,
    run_mc,
    shift_correction,
    write_peaks,
)
from .itebd import QuenchConfig


def _fmt(x) -> str:
    return repr(float(x))


def _check_seed(value: int) -> int:
    if value < 0 or value > 0xFFFFFFFFFFFFFFFF:
        raise ConfigError(f"seed must be an unsigned 64-bit value, got {value}")
    return value


def _profile(name):
    if name is None:
        return PROFILES["desk"]
    if name not in PROFILES:
        raise ConfigError(
            f"unknown profile {name!r}; choose from {', '.join(sorted(PROFILES))}"
        )
    return PROFILES[name]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinquench",
        description="Quench dynamics via evolution, checkpointed window sampling "
        "and light-cone circuit contraction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("itebd", help="evolve the infinite chain and checkpoint")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--delta", type=float, default=None, help="anisotropy")
    p.add_argument("--dt", type=float, default=None, help="Trotter step")
    p.add_argument("--kmax", type=int, default=None, help="bond dimension cap")
    p.add_argument("--t-end", type=float, required=True, help="checkpoint time")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-curve", required=True)

    p = sub.add_parser("sample", help="Monte Carlo window sampling")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--l", type=int, default=None, help="window half-width")
    p.add_argument("--t-fin", type=float, required=True)
    p.add_argument("--delta-t", type=float, default=None, help="window time step")
    p.add_argument("--nmax", type=int, default=None, help="Taylor order")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("peaks", help="extract peak heights from a curve")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--reference", default=None, help="trusted early-time curve")
    p.add_argument("--shift-correct", action="store_true")
    p.add_argument("--overlap-frac", type=float, default=0.25)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")

    p = sub.add_parser("circuit-demo", help="light-cone contraction check")
    p.add_argument("--n", type=int, required=True, help="number of qubits (even)")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("direct", "sum", "sample"), required=True)
    p.add_argument("--samples", type=int, default=10000)
    return parser


def _cmd_itebd(args) -> int:
    prof = _profile(args.profile)
    config = QuenchConfig(
        delta=prof["delta"] if args.delta is None else args.delta,
        dt=prof["dt"] if args.dt is None else args.dt,
        k_max=prof["k_max"] if args.kmax is None else args.kmax,
        t_init=args.t_end,
    )
    return run_itebd(config, args.out_checkpoint, args.out_curve)


def _cmd_sample(args) -> int:
    prof = _profile(args.profile)
    run_mc(
        args.checkpoint,
        l=prof["l"] if args.l is None else args.l,
        t_fin=args.t_fin,
        delta_t=prof["delta_t"] if args.delta_t is None else args.delta_t,
        n_max=prof["n_max"] if args.nmax is None else args.nmax,
        n_samples=args.samples,
        master_seed=_check_seed(args.seed),
        n_workers=args.workers,
        out=args.out,
    )
    return 0


def _reference_columns(path):
    meta, cols = read_table(path)
    if "mean_sz0" in cols:
        return cols["t"], cols["mean_sz0"]
    if "sz0" in cols:
        return cols["t"], cols["sz0"]
    raise ConfigError(f"{path}: no mean_sz0 or sz0 column to use as reference")


def _cmd_peaks(args) -> int:
    meta, curve = read_aggregate_curve(args.in_path)
    out_meta = {"source": meta.get("checkpoint"), "shift_constant": None}
    if args.shift_correct:
        if args.reference is None:
            raise ConfigError("--shift-correct requires --reference")
        ref_t, ref_v = _reference_columns(args.reference)
        curve = shift_correction(curve, ref_t, ref_v, overlap_frac=args.overlap_frac)
        out_meta["shift_constant"] = curve.shift_constant
        out_meta["overlap_frac"] = args.overlap_frac
    series = extract_peaks(curve)
    if args.out is not None:
        write_peaks(args.out, series, out_meta)
    else:
        for t, height, stderr in series.peaks:
            sys.stdout.write(f"{_fmt(t)},{_fmt(height)},{_fmt(stderr)}\n")
    return 0


def _cmd_circuit_demo(args) -> int:
    rng = np.random.default_rng(_check_seed(args.seed))
    circuit = BrickworkCircuit.random(args.n, args.depth, rng)
    if args.mode == "direct":
        sys.stdout.write(_fmt(direct_expectation(circuit)) + "\n")
    elif args.mode == "sum":
        sys.stdout.write(_fmt(lightcone_expectation_sum(circuit)) + "\n")
    else:
        mean, stderr = lightcone_expectation_sampled(circuit, args.samples, rng)
        sys.stdout.write(f"{_fmt(mean)},{_fmt(stderr)}\n")
    return 0


_COMMANDS = {
    "itebd": _cmd_itebd,
    "sample": _cmd_sample,
    "peaks": _cmd_peaks,
    "circuit-demo": _cmd_circuit_demo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical guard: {exc}\n")
        return 3
    except (CheckpointError, OSError) as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
