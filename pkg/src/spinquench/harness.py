"""Two-phase experiment driver: evolve, checkpoint, sample, aggregate.

Phase one runs the infinite-chain evolution to a chosen time and writes
a checkpoint plus a per-step observable curve. Phase two distributes
independent boundary samples over a process pool, evolves each sampled
window, and streams the results into a mean/stderr curve on the fixed
grid t_init + k * delta_t.

Determinism contract: each sample's generator is seeded by
(master_seed, sample_id) alone, samples are assigned to workers in
static contiguous blocks, and the reduction consumes them in ascending
sample_id order, so the output files are byte-identical for any worker
count. Output metadata deliberately excludes worker counts and
timestamps.

All data files are CSV with a '#'-prefixed JSON metadata line followed
by a column header; floats are written with shortest round-trip
precision.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError
from .itebd import MPSState, QuenchConfig, evolve_to, neel_init
from .sampler import (
    WindowSpec,
    assemble_window_state,
    sample_alpha,
    sample_spins_and_beta,
)
from .window import (
    EvolverParams,
    SparseWindowHamiltonian,
    build_hloc,
    evolve_and_measure,
    spin_wave_velocity,
)

#: Named parameter bundles. The full set is production scale and far
#: beyond interactive use; the desk sets finish on a laptop and are the
#: ones exercised by the test suite.
PROFILES = {
    "full": {"delta": 0.5, "dt": 0.0625, "k_max": 4096, "l": 10,
             "delta_t": 1.0 / 3.0, "n_max": 20},
    "desk": {"delta": 0.5, "dt": 0.0625, "k_max": 128, "l": 4,
             "delta_t": 1.0 / 3.0, "n_max": 20},
    "desk-small": {"delta": 0.5, "dt": 0.0625, "k_max": 16, "l": 2,
                   "delta_t": 1.0 / 3.0, "n_max": 20},
}


@dataclass(frozen=True)
class SampleRecord:
    """One boundary sample and its measured window series."""

    sample_id: int
    alpha: tuple
    beta: tuple
    series: tuple
    worker_seed: tuple


@dataclass(frozen=True)
class AggregateCurve:
    """Mean curve with per-point standard errors on a fixed grid."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int
    shift_constant: float = 0.0

    @property
    def grid(self):
        return [
            (float(t), float(m), float(s), self.n_samples)
            for t, m, s in zip(self.times, self.mean, self.stderr)
        ]


@dataclass(frozen=True)
class PeakSeries:
    """Interior local maxima of |mean|: (time, height, stderr) triples."""

    peaks: tuple


def git_blob_sha1(path) -> str:
    """Content hash of a file, computed the way git hashes a blob."""
    data = open(path, "rb").read()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _fmt(x) -> str:
    return repr(float(x))


def write_table(path, meta: dict, header, rows):
    """CSV with a '#'-prefixed JSON metadata line, LF newlines only."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def read_table(path):
    """(metadata, columns) of a CSV written by write_table."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{path}: missing '#' metadata line")
        meta = json.loads(first[1:])
        header = fh.readline().strip().split(",")
        cols = {name: [] for name in header}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            for name, tok in zip(header, line.split(",")):
                cols[name].append(float(tok))
    return meta, {name: np.array(vals) for name, vals in cols.items()}


def read_aggregate_curve(path) -> tuple:
    """(metadata, AggregateCurve) from a sampling output file."""
    meta, cols = read_table(path)
    for need in ("t", "mean_sz0", "stderr", "n_samples"):
        if need not in cols:
            raise ConfigError(f"{path}: missing column {need}")
    n = int(cols["n_samples"][0]) if cols["n_samples"].size else 0
    return meta, AggregateCurve(
        times=cols["t"],
        mean=cols["mean_sz0"],
        stderr=cols["stderr"],
        n_samples=n,
        shift_constant=float(meta.get("shift_constant", 0.0)),
    )


def run_itebd(config: QuenchConfig, out_checkpoint, out_curve) -> int:
    """Evolve the quench to config.t_init; write checkpoint and curve."""
    records = []
    state = evolve_to(neel_init(), config.t_init, config, observer=records.append)
    save_checkpoint(out_checkpoint, state, config)
    header = ("t", "sz0", "sz1", "discarded_weight", "entropy_A", "entropy_B")
    rows = [tuple(map(_fmt, (0.0, 0.5, -0.5, 0.0, 0.0, 0.0)))]
    for rec in records:
        rows.append(
            tuple(
                map(
                    _fmt,
                    (rec.time, rec.sz0, rec.sz1, rec.discarded_weight,
                     rec.entropy_a, rec.entropy_b),
                )
            )
        )
    meta = {
        "delta": config.delta,
        "dt": config.dt,
        "k_max": config.k_max,
        "t_init": config.t_init,
        "checkpoint": git_blob_sha1(out_checkpoint),
    }
    write_table(out_curve, meta, header, rows)
    return 0


def sample_one(
    state: MPSState,
    h: SparseWindowHamiltonian,
    l: int,
    t_fin: float,
    delta_t: float,
    n_max: int,
    master_seed: int,
    sample_id: int,
) -> SampleRecord:
    """Draw one boundary pair and measure its evolved window series."""
    seed = (int(master_seed), int(sample_id))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    spec = WindowSpec(l=l, t_init=state.time, seed=master_seed)
    alpha = sample_alpha(state, spec, rng)
    samp = sample_spins_and_beta(state, spec, alpha, rng)
    psi = assemble_window_state(state, spec, samp)
    params = EvolverParams(delta_t=delta_t, n_max=n_max, t_fin=t_fin)
    series = evolve_and_measure(psi, h, params, t_init=state.time)
    return SampleRecord(
        sample_id=sample_id,
        alpha=samp.alpha,
        beta=samp.beta,
        series=tuple(series),
        worker_seed=seed,
    )


def _chunk_values(args):
    """Worker body: value rows for a contiguous block of sample ids."""
    path, l, t_fin, delta_t, n_max, master_seed, start, stop = args
    state, _config = load_checkpoint(path)
    h = build_hloc(l, _config.delta)
    rows = np.empty((stop - start, _grid_size(state.time, t_fin, delta_t)))
    for k, sid in enumerate(range(start, stop)):
        rec = sample_one(state, h, l, t_fin, delta_t, n_max, master_seed, sid)
        rows[k] = [v for _t, v in rec.series]
    return start, rows


def _grid_size(t_init: float, t_fin: float, delta_t: float) -> int:
    n_float = (t_fin - t_init) / delta_t
    n = round(n_float)
    if abs(n_float - n) > 1e-9 or n < 0:
        raise ConfigError(
            f"t_fin - t_init = {t_fin - t_init} is not a nonnegative integer "
            f"number of delta_t = {delta_t} steps"
        )
    return n + 1


def run_mc(
    checkpoint,
    l: int,
    t_fin: float,
    delta_t: float,
    n_max: int,
    n_samples: int,
    master_seed: int,
    n_workers: int,
    out=None,
    expected_delta=None,
) -> AggregateCurve:
    """Monte Carlo phase: sample windows, evolve, aggregate, write CSV.

    The checkpoint is referenced by path so each worker process loads
    it independently. Aggregation is a single Welford pass over value
    rows in ascending sample_id order.
    """
    state, config = load_checkpoint(checkpoint)
    if expected_delta is not None and abs(config.delta - expected_delta) > 1e-12:
        raise ConfigError(
            f"checkpoint was built at delta={config.delta}, expected {expected_delta}"
        )
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if n_workers < 1:
        raise ConfigError(f"n_workers must be >= 1, got {n_workers}")
    if not t_fin > state.time:
        raise ConfigError(
            f"t_fin = {t_fin} must exceed the checkpoint time {state.time}"
        )
    EvolverParams(delta_t=delta_t, n_max=n_max, t_fin=t_fin)
    WindowSpec(l=l, t_init=state.time, seed=master_seed)
    n_points = _grid_size(state.time, t_fin, delta_t)
    horizon = l / spin_wave_velocity(config.delta)
    if t_fin - state.time > horizon:
        warnings.warn(
            f"t_fin - t_init = {t_fin - state.time:.4f} exceeds the window "
            f"horizon l/v = {horizon:.4f}; late grid points are unreliable",
            stacklevel=2,
        )

    bounds = [n_samples * j // n_workers for j in range(n_workers + 1)]
    tasks = [
        (os.fspath(checkpoint), l, t_fin, delta_t, n_max, master_seed, lo, hi)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    if len(tasks) <= 1:
        results = [_chunk_values(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_chunk_values, tasks))
    results.sort(key=lambda r: r[0])

    mean = np.zeros(n_points)
    m2 = np.zeros(n_points)
    count = 0
    for _start, rows in results:
        for row in rows:
            count += 1
            delta = row - mean
            mean += delta / count
            m2 += delta * (row - mean)
    if count != n_samples:
        raise ConfigError(f"aggregated {count} samples, expected {n_samples}")
    if count > 1:
        stderr = np.sqrt(m2 / (count - 1) / count)
    else:
        stderr = np.full(n_points, np.nan)

    times = state.time + delta_t * np.arange(n_points)
    curve = AggregateCurve(times=times, mean=mean, stderr=stderr, n_samples=count)
    if out is not None:
        meta = {
            "checkpoint": git_blob_sha1(checkpoint),
            "delta": config.delta,
            "dt": config.dt,
            "k_max": config.k_max,
            "t_init": config.t_init,
            "l": l,
            "t_fin": t_fin,
            "delta_t": delta_t,
            "n_max": n_max,
            "n_samples": n_samples,
            "master_seed": master_seed,
        }
        header = ("t", "mean_sz0", "stderr", "n_samples")
        rows_out = [
            (_fmt(t), _fmt(m), _fmt(s), str(n_samples))
            for t, m, s in zip(times, mean, stderr)
        ]
        write_table(out, meta, header, rows_out)
    return curve


def aggregate_reference(rows):
    """Two-pass mean/stderr, for cross-checking the streamed aggregate."""
    rows = np.asarray(rows, dtype=float)
    mean = rows.mean(axis=0)
    if rows.shape[0] > 1:
        stderr = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    else:
        stderr = np.full(rows.shape[1], np.nan)
    return mean, stderr


def extract_peaks(curve: AggregateCurve) -> PeakSeries:
    """Strictly interior local maxima of |mean| with their stderr."""
    if curve.times.size < 3:
        raise ConfigError("peak extraction needs a grid of at least 3 points")
    h = np.abs(curve.mean)
    peaks = []
    for i in range(1, h.size - 1):
        if h[i] > h[i - 1] and h[i] > h[i + 1]:
            peaks.append(
                (float(curve.times[i]), float(h[i]), float(curve.stderr[i]))
            )
    return PeakSeries(peaks=tuple(peaks))


def shift_correction(
    curve: AggregateCurve,
    reference_times,
    reference_values,
    overlap_frac: float = 0.25,
) -> AggregateCurve:
    """Add a constant so the curve matches the reference at early times.

    The constant is the mean of (reference - curve) over the grid
    points in the first overlap_frac of the curve's time span that the
    reference also covers; at least 3 such points are required. The
    stderr is unchanged and the constant is recorded on the result.
    """
    if not 0.0 < overlap_frac <= 1.0:
        raise ConfigError(f"overlap_frac must be in (0, 1], got {overlap_frac}")
    ref_t = np.asarray(reference_times, dtype=float)
    ref_v = np.asarray(reference_values, dtype=float)
    if ref_t.shape != ref_v.shape:
        raise ConfigError("reference times and values differ in length")
    span = curve.times[-1] - curve.times[0]
    t_cut = curve.times[0] + overlap_frac * span
    diffs = []
    for t, m in zip(curve.times, curve.mean):
        if t > t_cut + 1e-9:
            break
        hit = np.nonzero(np.abs(ref_t - t) < 1e-9)[0]
        if hit.size:
            diffs.append(ref_v[hit[0]] - m)
    if len(diffs) < 3:
        raise ConfigError(
            f"shift correction needs >= 3 overlap points, found {len(diffs)}"
        )
    c = float(np.mean(diffs))
    return replace(
        curve, mean=curve.mean + c, shift_constant=curve.shift_constant + c
    )


def write_peaks(path, series: PeakSeries, meta: dict) -> None:
    header = ("t_peak", "height", "stderr")
    rows = [tuple(map(_fmt, p)) for p in series.peaks]
    write_table(path, meta, header, rows)
