"""Finite-window dynamics: sparse open-chain XXZ and Taylor propagation.

A window of 2l+1 sites around the origin is evolved with the
open-boundary Hamiltonian H = sum_i SxSx + SySy + delta SzSz restricted
to the window bonds. States live in a single total-Sz sector, so the
sparse matrix is built and applied on the sector basis only.

The propagator is a plain truncated Taylor series of exp(-i H dt),
renormalized after each step with the pre-renormalization norm drift
checked against a hard guard. A dense reference evolver (scipy sparse
exponential applied to the full sector vector) doubles as the
independent oracle for the rest of the package.

Basis convention: computational spin configurations with site -l as the
most significant bit and up = 1, so a window configuration is read off
an index's binary digits left to right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import ConfigError, NormDriftError

#: Hard validation bound on the window half-width.
L_MAX = 14

#: Pre-renormalization norm drift above which a Taylor step is rejected.
NORM_DRIFT_TOL = 1e-9


@dataclass(frozen=True)
class WindowState:
    """Dense state on a window, supported on one total-Sz sector.

    total_sz_sector counts the up spins in the window (total Sz is
    n_up - n_sites/2). norm_drift records the pre-renormalization
    drift of the Taylor step that produced this state.
    """

    amplitudes: np.ndarray
    total_sz_sector: int
    norm_drift: float = 0.0

    @property
    def n_sites(self) -> int:
        n = int(round(math.log2(self.amplitudes.size)))
        if 1 << n != self.amplitudes.size:
            raise ConfigError("window amplitude length is not a power of two")
        return n

    @property
    def l(self) -> int:
        n = self.n_sites
        if n % 2 == 0:
            raise ConfigError("window must have an odd number of sites")
        return (n - 1) // 2


@dataclass(frozen=True)
class EvolverParams:
    """Window propagation controls."""

    delta_t: float = 1.0 / 3.0
    n_max: int = 20
    t_fin: float = 0.0

    def __post_init__(self):
        if not (self.delta_t > 0.0 and math.isfinite(self.delta_t)):
            raise ConfigError(f"delta_t must be positive, got {self.delta_t}")
        if self.n_max < 4:
            raise ConfigError(f"n_max must be >= 4, got {self.n_max}")


def _sector_basis(n_sites: int, n_up: int) -> np.ndarray:
    states = np.arange(1 << n_sites, dtype=np.int64)
    return states[np.bitwise_count(states) == n_up]


def _site_bits(basis: np.ndarray, n_sites: int, site: int) -> np.ndarray:
    """Bit of each basis state at chain position `site` (0 = leftmost)."""
    return (basis >> (n_sites - 1 - site)) & 1


def _chain_hamiltonian(n_sites: int, delta: float, basis: np.ndarray) -> sp.csr_matrix:
    """Open XXZ chain on the given basis (must be closed under hopping)."""
    dim = basis.size
    bits = np.stack([_site_bits(basis, n_sites, j) for j in range(n_sites)])
    szs = bits.astype(float) - 0.5
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    idx = np.arange(dim)
    for j in range(n_sites - 1):
        diag += delta * szs[j] * szs[j + 1]
        differ = bits[j] != bits[j + 1]
        if not np.any(differ):
            continue
        flip = (1 << (n_sites - 1 - j)) | (1 << (n_sites - 2 - j))
        flipped = basis[differ] ^ flip
        pos = np.searchsorted(basis, flipped)
        rows.append(idx[differ])
        cols.append(pos)
        vals.append(np.full(pos.size, 0.5))
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    h = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    h = h + sp.diags(diag)
    return h.tocsr()


class SparseWindowHamiltonian:
    """Window Hamiltonian with lazily built per-sector sparse blocks."""

    def __init__(self, l: int, delta: float):
        if not 1 <= l <= L_MAX:
            raise ConfigError(f"l must be in [1, {L_MAX}], got {l}")
        if not math.isfinite(delta):
            raise ConfigError("delta must be finite")
        self.l = int(l)
        self.delta = float(delta)
        self.n_sites = 2 * self.l + 1
        self.dimension = 1 << self.n_sites
        self._sectors: dict = {}

    def sector(self, n_up: int):
        """(basis indices, csr matrix) of the n_up-up-spins sector."""
        if not 0 <= n_up <= self.n_sites:
            raise ConfigError(f"n_up must be in [0, {self.n_sites}], got {n_up}")
        if n_up not in self._sectors:
            basis = _sector_basis(self.n_sites, n_up)
            self._sectors[n_up] = (basis, _chain_hamiltonian(self.n_sites, self.delta, basis))
        return self._sectors[n_up]

    def to_matrix(self) -> np.ndarray:
        """Dense full-space matrix, for small-window tests only."""
        if self.n_sites > 12:
            raise ConfigError("dense form only supported for n_sites <= 12")
        basis = np.arange(self.dimension, dtype=np.int64)
        return _chain_hamiltonian(self.n_sites, self.delta, basis).toarray()


def build_hloc(l: int, delta: float) -> SparseWindowHamiltonian:
    """Open-boundary window Hamiltonian on sites -l..+l."""
    return SparseWindowHamiltonian(l, delta)


def sz_center(psi: WindowState) -> float:
    """<Sz> of the central window site."""
    n = psi.n_sites
    bit = _site_bits(np.arange(psi.amplitudes.size, dtype=np.int64), n, n // 2)
    p = np.abs(psi.amplitudes) ** 2
    return float(p @ (bit - 0.5))


def taylor_step(
    psi: WindowState,
    h: SparseWindowHamiltonian,
    delta_t: float,
    n_max: int,
) -> WindowState:
    """One step of exp(-i H delta_t) by truncated Taylor series.

    The series runs to order n_max on the state's total-Sz sector and
    the result is renormalized; if the norm drifted by more than
    NORM_DRIFT_TOL beforehand the step is rejected, since that means
    the series was nowhere near converged.
    """
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    if psi.n_sites != h.n_sites:
        raise ConfigError(
            f"state on {psi.n_sites} sites but Hamiltonian on {h.n_sites}"
        )
    basis, h_sec = h.sector(psi.total_sz_sector)
    v = psi.amplitudes[basis]
    outside = np.ones(psi.amplitudes.size, dtype=bool)
    outside[basis] = False
    stray = psi.amplitudes[outside]
    if float(np.vdot(stray, stray).real) > 1e-20:
        raise ConfigError(
            "state has support outside its declared total-Sz sector"
        )
    acc = v.astype(complex)
    term = acc
    for order in range(1, n_max + 1):
        term = h_sec @ term
        term = term * (-1j * delta_t / order)
        acc = acc + term
    norm = float(np.linalg.norm(acc))
    drift = abs(norm - 1.0)
    if drift > NORM_DRIFT_TOL:
        raise NormDriftError(
            f"Taylor step norm drifted by {drift:.3e} (tolerance {NORM_DRIFT_TOL:g}); "
            f"increase n_max or decrease delta_t"
        )
    out = np.zeros_like(psi.amplitudes)
    out[basis] = acc / norm
    return WindowState(out, psi.total_sz_sector, norm_drift=drift)


def evolve_and_measure(
    psi: WindowState,
    h: SparseWindowHamiltonian,
    params: EvolverParams,
    t_init: float,
) -> list:
    """Series of (t, central <Sz>) from t_init to params.t_fin inclusive."""
    span = params.t_fin - t_init
    n_float = span / params.delta_t
    n = round(n_float)
    if abs(n_float - n) > 1e-9 or n < 0:
        raise ConfigError(
            f"(t_fin - t_init) = {span} is not a nonnegative integer number "
            f"of delta_t = {params.delta_t} steps"
        )
    series = [(t_init, sz_center(psi))]
    for j in range(1, n + 1):
        psi = taylor_step(psi, h, params.delta_t, params.n_max)
        series.append((t_init + j * params.delta_t, sz_center(psi)))
    return series


def _parse_config(initial):
    if isinstance(initial, str):
        table = {"u": 1, "d": 0, "1": 1, "0": 0}
        try:
            return [table[ch] for ch in initial.lower()]
        except KeyError:
            raise ConfigError(f"unrecognized spin character in {initial!r}") from None
    bits = [int(b) for b in initial]
    if any(b not in (0, 1) for b in bits):
        raise ConfigError("spin configuration entries must be 0/1 or u/d")
    return bits


def alternating_config(n_sites: int, start_up: bool = True) -> str:
    """Alternating u/d string of the given length."""
    a, b = ("u", "d") if start_up else ("d", "u")
    return "".join(a if j % 2 == 0 else b for j in range(n_sites))


def dense_reference_evolve(initial, delta: float, t_grid) -> list:
    """Reference evolution of a small open chain from a product state.

    Propagates the full sector state vector with scipy's sparse matrix
    exponential (no Taylor cutoff, no window) and returns a list of
    (t, per-site <Sz> array) at the requested ascending times, t = 0
    being the initial product state. Chains up to 20 sites.
    """
    bits = _parse_config(initial)
    n_sites = len(bits)
    if not 2 <= n_sites <= 20:
        raise ConfigError(f"chain length must be in [2, 20], got {n_sites}")
    n_up = sum(bits)
    basis = _sector_basis(n_sites, n_up)
    h = _chain_hamiltonian(n_sites, delta, basis)
    x0 = 0
    for b in bits:
        x0 = (x0 << 1) | b
    pos = int(np.searchsorted(basis, x0))
    v = np.zeros(basis.size, dtype=complex)
    v[pos] = 1.0
    signs = np.stack(
        [_site_bits(basis, n_sites, j).astype(float) - 0.5 for j in range(n_sites)],
        axis=1,
    )
    out = []
    t_prev = 0.0
    for t in t_grid:
        t = float(t)
        if t < -1e-12 or t < t_prev - 1e-12:
            raise ConfigError("t_grid must be ascending and nonnegative")
        if t > t_prev + 1e-15:
            v = expm_multiply((-1j * (t - t_prev)) * h, v)
            t_prev = t
        p = np.abs(v) ** 2
        out.append((t, p @ signs))
    return out


def spin_wave_velocity(delta: float) -> float:
    """Spin-wave velocity (pi/2) sin(theta)/theta with cos(theta) = delta.

    Valid in the planar regime |delta| <= 1; the delta -> 1 limit is
    pi/2 by continuity.
    """
    if not -1.0 <= delta <= 1.0:
        raise ConfigError(f"spin-wave velocity needs |delta| <= 1, got {delta}")
    theta = math.acos(delta)
    if theta == 0.0:
        return math.pi / 2.0
    return (math.pi / 2.0) * math.sin(theta) / theta
