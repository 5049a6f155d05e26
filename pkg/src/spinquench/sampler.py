"""Boundary sampling and window assembly for light-cone Monte Carlo.

The estimator resolves the identity on the Schmidt bases of the two
bonds enclosing a window of sites -l..+l: the left boundary state alpha
is drawn with probability lambda_alpha^2, the window spins are then
drawn one site at a time from exact conditionals, and the right
boundary state beta from the amplitudes left on the right bond. The
intermediate spins only steer the walk to a (alpha, beta) pair and are
discarded afterwards; they must never be aggregated as if they were
independent measurements, because all spin configurations re-enter the
window state coherently.

Conditionals come from a matrix-vector chain: with the boundary row
vector propagated through the site matrices, the probability of the
next spin is the squared norm of the corresponding candidate vector
divided by the sum over both spins. Right-normalization of everything
beyond the sampled prefix is what makes these conditionals exact.

The full window state for a sampled (alpha, beta) pair is assembled by
meeting in the middle: all 2^(l+1) left partial products over sites
-l..0 and all 2^l right partial products over sites 1..l are built by
binary-tree extension (one matrix-vector product per node), and every
amplitude is a single inner product across the central bond. This
costs O(l 2^l k^2) + O(2^(2l+1) k) and never the naive
O(2^(2l) k^2).

An alternative formulation propagates a density operator on the window
through the completely positive map defined by the site matrices and
samples from its diagonal, which avoids boundary vectors altogether;
it costs an extra factor of the bond dimension per site and offers no
statistical advantage here, so it is documented but not implemented.

Window configurations are indexed with site -l as the most significant
bit and up = 1, matching the window evolver's basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SamplingError
from .graded import GradedVector, graded_matvec
from .itebd import DN, SHIFT_A, SHIFT_B, UP, MPSState
from .window import L_MAX, WindowState

#: A candidate branch whose squared norm falls below this times its
#: sibling's is treated as an exact zero of the conditional.
BRANCH_FLOOR = 1e-28


@dataclass(frozen=True)
class WindowSpec:
    """Sampling geometry: window half-width and checkpoint time."""

    l: int
    t_init: float
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.l <= L_MAX:
            raise ConfigError(f"l must be in [1, {L_MAX}], got {self.l}")
        if self.seed < 0 or self.seed > 0xFFFFFFFFFFFFFFFF:
            raise ConfigError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class BoundarySample:
    """One sampled boundary pair with its conditional-probability trace.

    alpha and beta are (sector charge, index-within-sector) pairs. The
    trace holds the conditional probability of every drawn spin followed
    by that of beta; it is diagnostic only and never feeds estimates.
    """

    alpha: tuple
    beta: tuple
    log_weight_trace: tuple


def site_tensors(state: MPSState, site: int):
    """(up, down) site matrices at a chain position (even = A sublattice)."""
    return state.a_a if site % 2 == 0 else state.a_b


def site_shifts(site: int):
    return SHIFT_A if site % 2 == 0 else SHIFT_B


def boundary_spectrum(state: MPSState, spec: WindowSpec):
    """Schmidt spectrum of the left boundary bond (between -l-1 and -l).

    The bond carries the lambda of site -l-1's sublattice: lambda_B for
    even l (site -l-1 odd), lambda_A for odd l.
    """
    return state.lambda_b if (-spec.l - 1) % 2 != 0 else state.lambda_a


def sample_alpha(state: MPSState, spec: WindowSpec, rng) -> tuple:
    """Draw a left-boundary Schmidt state with probability lambda^2."""
    spectrum = boundary_spectrum(state, spec)
    entries = spectrum.entries
    weights = np.array([w * w for _, w, _ in entries])
    total = weights.sum()
    if not total > 0.0:
        raise SamplingError("boundary spectrum has no weight")
    r = rng.random() * total
    acc = 0.0
    for (q, _w, i), w2 in zip(entries, weights):
        acc += w2
        if r < acc:
            return (q, i)
    q, _w, i = entries[-1]
    return (q, i)


def _branch_probabilities(w_up: float, w_dn: float):
    """Conditional spin probabilities from two candidate squared norms."""
    big = max(w_up, w_dn)
    if not big > 0.0:
        raise SamplingError(
            "both spin branches have zero weight; the chain state is inconsistent"
        )
    if w_up < big * BRANCH_FLOOR:
        w_up = 0.0
    if w_dn < big * BRANCH_FLOOR:
        w_dn = 0.0
    tot = w_up + w_dn
    return w_up / tot, w_dn / tot


def sample_spins_and_beta(
    state: MPSState, spec: WindowSpec, alpha: tuple, rng
) -> BoundarySample:
    """Chain-sample the window spins, then the right boundary state.

    Starting from the alpha basis vector on the left boundary bond, each
    site's spin is drawn from the exact conditional given the full
    prefix; the propagated vector is renormalized after every draw. The
    spins themselves are not returned: only the boundary pair matters.
    """
    spectrum = boundary_spectrum(state, spec)
    dims = spectrum.sector_dims
    q_a, i_a = alpha
    vec = GradedVector.basis_vector(dims, q_a, i_a)
    trace = []
    for site in range(-spec.l, spec.l + 1):
        tensors = site_tensors(state, site)
        cands = [graded_matvec(tensors[s], vec, side="left") for s in (UP, DN)]
        norms = [c.norm2() for c in cands]
        p_up, p_dn = _branch_probabilities(norms[UP], norms[DN])
        if rng.random() < p_up:
            pick, p_pick = UP, p_up
        else:
            pick, p_pick = DN, p_dn
        trace.append(p_pick)
        vec = cands[pick].scaled(1.0 / math.sqrt(norms[pick]))
    charges = vec.charges
    if len(charges) != 1:
        raise SamplingError(
            f"propagated boundary vector spans {len(charges)} sectors; expected 1"
        )
    q_b = charges[0]
    amps = vec.blocks[q_b]
    probs = np.abs(amps) ** 2
    total = probs.sum()
    if not total > 0.0:
        raise SamplingError("no weight left for the right boundary draw")
    r = rng.random() * total
    i_b = int(np.searchsorted(np.cumsum(probs), r, side="right"))
    i_b = min(i_b, probs.size - 1)
    trace.append(float(probs[i_b] / total))
    return BoundarySample(alpha=(q_a, i_a), beta=(q_b, i_b), log_weight_trace=tuple(trace))


def _left_partials(state: MPSState, spec: WindowSpec, alpha: tuple):
    """Row vectors e_alpha A(s_-l) ... A(s_0) for all 2^(l+1) prefixes.

    Entry c of the returned list is the (sector, array) pair for the
    prefix whose bits (site -l first, up = 1) spell c; dead branches
    are None.
    """
    dims = boundary_spectrum(state, spec).sector_dims
    q_a, i_a = alpha
    start = GradedVector.basis_vector(dims, q_a, i_a)
    level = [(q_a, start.blocks[q_a])]
    for site in range(-spec.l, 1):
        tensors = site_tensors(state, site)
        shifts = site_shifts(site)
        nxt = [None] * (2 * len(level))
        for p, entry in enumerate(level):
            if entry is None:
                continue
            q, arr = entry
            for s, bit in ((UP, 1), (DN, 0)):
                block = tensors[s].block(q)
                if block is not None:
                    nxt[(p << 1) | bit] = (q + shifts[s], arr @ block)
        level = nxt
    return level


def _right_partials(state: MPSState, spec: WindowSpec, beta: tuple):
    """Column vectors A(s_1) ... A(s_l) e_beta for all 2^l suffixes."""
    q_b, i_b = beta
    dims = right_boundary_dims(state, spec)
    if q_b not in dims or not 0 <= i_b < dims[q_b]:
        raise ConfigError(f"no right boundary state (q={q_b}, index={i_b})")
    e = np.zeros(dims[q_b], dtype=complex)
    e[i_b] = 1.0
    level = [(q_b, e)]
    for site in range(spec.l, 0, -1):
        tensors = site_tensors(state, site)
        shifts = site_shifts(site)
        depth = spec.l - site
        nxt = [None] * (2 * len(level))
        for p, entry in enumerate(level):
            if entry is None:
                continue
            q, arr = entry
            for s, bit in ((UP, 1), (DN, 0)):
                block = tensors[s].block(q - shifts[s])
                if block is not None:
                    nxt[(bit << depth) | p] = (q - shifts[s], block @ arr)
        level = nxt
    return level


def _raw_window_amplitudes(state: MPSState, spec: WindowSpec, alpha, beta):
    """Unnormalized window amplitudes of one boundary pair."""
    lefts = _left_partials(state, spec, alpha)
    rights = _right_partials(state, spec, beta)
    l = spec.l
    amps = np.zeros(1 << (2 * l + 1), dtype=complex)
    for cl, left in enumerate(lefts):
        if left is None:
            continue
        ql, lvec = left
        base = cl << l
        for cr, right in enumerate(rights):
            if right is None:
                continue
            qr, rvec = right
            if ql == qr:
                amps[base | cr] = lvec @ rvec
    return amps


def _single_sector(amps: np.ndarray) -> int:
    n_up_all = np.bitwise_count(np.arange(amps.size, dtype=np.int64))
    sectors = np.unique(n_up_all[np.abs(amps) > 0.0])
    if sectors.size != 1:
        raise SamplingError(
            f"window state spans {sectors.size} total-Sz sectors; expected 1"
        )
    return int(sectors[0])


def assemble_window_state(
    state: MPSState, spec: WindowSpec, sample: BoundarySample
) -> WindowState:
    """Build the normalized window state of a sampled boundary pair.

    Meets in the middle at the bond between sites 0 and 1: each window
    amplitude is the inner product of a left partial product with a
    right one, nonzero only when their middle-bond sectors agree, which
    confines the state to a single total-Sz sector.
    """
    amps = _raw_window_amplitudes(state, spec, sample.alpha, sample.beta)
    norm2 = float(np.vdot(amps, amps).real)
    if not norm2 > 0.0:
        raise SamplingError(
            f"window state of boundary pair {sample.alpha}, {sample.beta} has zero norm"
        )
    amps /= math.sqrt(norm2)
    return WindowState(amps, _single_sector(amps))


def window_weight(state: MPSState, spec: WindowSpec, alpha: tuple, beta: tuple):
    """(weight, WindowState|None) of one boundary pair.

    The weight is lambda_alpha^2 times the squared norm of the raw
    window amplitudes; pairs with zero weight return None for the
    state. Summed over all pairs the weights give the norm of the
    state, i.e. one up to truncation residue.
    """
    spectrum = boundary_spectrum(state, spec)
    q_a, i_a = alpha
    lam = spectrum.blocks[q_a][i_a]
    amps = _raw_window_amplitudes(state, spec, alpha, beta)
    norm2 = float(np.vdot(amps, amps).real)
    weight = float(lam * lam) * norm2
    if not norm2 > 0.0:
        return weight, None
    amps = amps / math.sqrt(norm2)
    return weight, WindowState(amps, _single_sector(amps))


def right_boundary_dims(state: MPSState, spec: WindowSpec):
    """Sector dims of the bond between sites l and l+1."""
    tensors = site_tensors(state, spec.l)
    dims = {}
    for s in (UP, DN):
        dims.update(tensors[s].col_dims)
    return dims


def enumerate_boundary_pairs(state: MPSState, spec: WindowSpec):
    """Yield (alpha, beta, weight, WindowState) over all boundary pairs.

    Pairs with zero weight are skipped. Exhaustive, so only sensible at
    small l and bond dimension; the Monte Carlo path exists precisely
    because this loop is exponential in the boundary entropy.
    """
    spectrum = boundary_spectrum(state, spec)
    right_dims = right_boundary_dims(state, spec)
    for q_a, lam_vals in spectrum.blocks.items():
        for i_a in range(lam_vals.size):
            for q_b, d_b in sorted(right_dims.items()):
                for i_b in range(d_b):
                    weight, psi = window_weight(state, spec, (q_a, i_a), (q_b, i_b))
                    if psi is not None and weight > 0.0:
                        yield (q_a, i_a), (q_b, i_b), weight, psi
