"""Brickwork circuits and exact light-cone contraction of one observable.

A depth-T brickwork circuit on an even number of qubits applies layers
of disjoint two-qubit gates, odd layers on pairs (0,1), (2,3), ... and
even layers on pairs (1,2), (3,4), .... For the central-qubit
expectation after the final layer, three routes are provided:

* direct statevector contraction of the whole circuit,
* an exact sum over boundary configurations of a reduced window,
* Monte Carlo over the same boundary configurations.

The window route mirrors the matrix-product sampling estimator. Gates
outside the measured qubit's backward light cone drop exactly. The
early half of the cone splits into a cut-crossing core C (the forward
closure, within the cone, of early gates straddling the central cut)
and side groups B and D that act entirely left and right of the cut;
every B or D gate commutes with every chronologically earlier core
gate, because the closure would otherwise have absorbed it, so the
early cone reorders exactly into (core) x (B tensor D). With a product
initial state, B and D only enter through the reduced state of the
window W spanned by the core, the late cone gates A, and the measured
qubit. Writing the B-evolved left half as a matrix over (configuration
outside W, configuration inside W) and likewise for D, the reduced
state is an exact mixture of product states indexed by the outside
configurations (alpha, beta) with weight ||L_alpha||^2 ||R_beta||^2,
and the observable is the weighted sum of pure window expectations
after applying C then A.

Bit convention: qubit 0 is the most significant bit of a configuration
index, bit value 0 means spin up, so a two-qubit basis index is
2 b_left + b_right in the gate basis (up-up, up-down, down-up,
down-down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

#: Maximum single statevector width for the direct route.
DIRECT_QUBIT_LIMIT = 20

#: Allowed deviation from unitarity for supplied gates.
UNITARITY_TOL = 1e-12


def haar_gate(rng) -> np.ndarray:
    """Haar-distributed 4x4 unitary via QR with a fixed phase gauge."""
    z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _check_gate(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ConfigError(f"two-qubit gates must be 4x4, got {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(4)))
    if dev > UNITARITY_TOL:
        raise ConfigError(f"gate deviates from unitarity by {dev:.3e}")
    return u


class BrickworkCircuit:
    """An even-width brickwork circuit; layers[t] holds (left qubit, gate)."""

    def __init__(self, n_qubits: int, layers):
        if n_qubits < 2 or n_qubits % 2:
            raise ConfigError(f"n_qubits must be even and >= 2, got {n_qubits}")
        self.n_qubits = n_qubits
        checked = []
        for t, layer in enumerate(layers):
            offset = t % 2
            row = []
            for i, u in layer:
                if i % 2 != offset or not 0 <= i < n_qubits - 1:
                    raise ConfigError(
                        f"layer {t} may not hold a gate at qubits ({i}, {i + 1})"
                    )
                row.append((int(i), _check_gate(u)))
            row.sort(key=lambda g: g[0])
            checked.append(tuple(row))
        self.layers = tuple(checked)
        self._lookup = {
            (t, i): u for t, layer in enumerate(self.layers) for i, u in layer
        }

    def gate(self, t: int, i: int) -> np.ndarray:
        return self._lookup[(t, i)]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def measured(self) -> int:
        return self.n_qubits // 2

    @classmethod
    def random(cls, n_qubits: int, depth: int, rng) -> "BrickworkCircuit":
        """Full brickwork of independent Haar gates."""
        if depth < 1:
            raise ConfigError(f"depth must be >= 1, got {depth}")
        layers = []
        for t in range(depth):
            start = t % 2
            layers.append(
                [(i, haar_gate(rng)) for i in range(start, n_qubits - 1, 2)]
            )
        return cls(n_qubits, layers)


def product_state(bits) -> np.ndarray:
    """Statevector of a computational product configuration."""
    bits = [int(b) for b in bits]
    if any(b not in (0, 1) for b in bits):
        raise ConfigError("product state bits must be 0 (up) or 1 (down)")
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    psi = np.zeros(1 << len(bits), dtype=complex)
    psi[idx] = 1.0
    return psi


def neel_bits(n_qubits: int):
    """Alternating configuration, up on even qubits."""
    return tuple(i % 2 for i in range(n_qubits))


def apply_gate(psi: np.ndarray, n_qubits: int, i: int, u: np.ndarray) -> np.ndarray:
    """Apply a 4x4 gate to qubits (i, i+1) of a statevector."""
    shaped = psi.reshape(1 << i, 4, 1 << (n_qubits - i - 2))
    return np.einsum("st,atb->asb", u, shaped).reshape(psi.size)


def _sz_at(psi: np.ndarray, n_qubits: int, i: int) -> float:
    shaped = psi.reshape(1 << i, 2, 1 << (n_qubits - i - 1))
    p_up = float(np.vdot(shaped[:, 0, :], shaped[:, 0, :]).real)
    return p_up - 0.5


def direct_expectation(circuit: BrickworkCircuit, bits=None) -> float:
    """Central <Sz> after the full circuit, by dense statevector."""
    n = circuit.n_qubits
    if n > DIRECT_QUBIT_LIMIT:
        raise ConfigError(
            f"direct route limited to {DIRECT_QUBIT_LIMIT} qubits, got {n}"
        )
    if bits is None:
        bits = neel_bits(n)
    if len(bits) != n:
        raise ConfigError(f"expected {n} bits, got {len(bits)}")
    psi = product_state(bits)
    for layer in circuit.layers:
        for i, u in layer:
            psi = apply_gate(psi, n, i, u)
    return _sz_at(psi, n, circuit.measured)


@dataclass(frozen=True)
class CircuitRegions:
    """Light-cone split of a circuit around its measured qubit.

    Gate groups are chronologically ordered (layer, left qubit) pairs:
    core crosses the central cut during the early layers, left and
    right are the remaining early cone gates on their respective
    halves, late is the cone part of layers >= t_split. The window
    [w_lo, w_hi] spans core, late and the measured qubit.
    """

    t_split: int
    core: tuple
    left: tuple
    right: tuple
    late: tuple
    w_lo: int
    w_hi: int


def build_regions(circuit: BrickworkCircuit) -> CircuitRegions:
    n, m = circuit.n_qubits, circuit.measured
    depth = circuit.depth
    t_split = math.ceil(depth / 2)

    cone_qubits = {m}
    cone = set()
    for t in range(depth - 1, -1, -1):
        for i, _u in circuit.layers[t]:
            if i in cone_qubits or i + 1 in cone_qubits:
                cone.add((t, i))
                cone_qubits.update((i, i + 1))

    core, left, right, late = [], [], [], []
    core_qubits = set()
    for t in range(depth):
        for i, _u in circuit.layers[t]:
            if (t, i) not in cone:
                continue
            if t >= t_split:
                late.append((t, i))
            elif (i == m - 1) or i in core_qubits or i + 1 in core_qubits:
                core.append((t, i))
                core_qubits.update((i, i + 1))
            elif i + 1 < m:
                left.append((t, i))
            else:
                right.append((t, i))

    window = {m} | core_qubits
    for t, i in late:
        window.update((i, i + 1))
    return CircuitRegions(
        t_split=t_split,
        core=tuple(core),
        left=tuple(left),
        right=tuple(right),
        late=tuple(late),
        w_lo=min(window),
        w_hi=max(window),
    )


def _half_state(circuit, gates, bits, lo, hi) -> np.ndarray:
    """Evolve the product state on qubits lo..hi with the given gates."""
    width = hi - lo + 1
    psi = product_state(bits[lo : hi + 1])
    for t, i in gates:
        psi = apply_gate(psi, width, i - lo, circuit.gate(t, i))
    return psi


def _boundary_matrices(circuit, regions, bits):
    """Left rows and right columns over outside-window configurations.

    The left half evolves under the left gates and is reshaped with the
    qubits below w_lo as the row index; row alpha is the unnormalized
    window-side state paired with outside configuration alpha. The
    right half is reshaped with the qubits above w_hi as the column
    index.
    """
    n, m = circuit.n_qubits, circuit.measured
    lmat = _half_state(circuit, regions.left, bits, 0, m - 1)
    lmat = lmat.reshape(1 << regions.w_lo, 1 << (m - regions.w_lo))
    rmat = _half_state(circuit, regions.right, bits, m, n - 1)
    rmat = rmat.reshape(1 << (regions.w_hi + 1 - m), 1 << (n - 1 - regions.w_hi))
    return lmat, rmat


def _window_value(circuit, regions, lvec, rvec) -> float:
    """<Sz> on the measured qubit of one boundary product window."""
    w_lo, w_hi = regions.w_lo, regions.w_hi
    width = w_hi - w_lo + 1
    psi = np.kron(lvec, rvec)
    psi = psi / np.linalg.norm(psi)
    for t, i in regions.core + regions.late:
        psi = apply_gate(psi, width, i - w_lo, circuit.gate(t, i))
    return _sz_at(psi, width, circuit.measured - w_lo)


def lightcone_expectation_sum(circuit: BrickworkCircuit, bits=None) -> float:
    """Exact central <Sz> as a weighted sum over boundary configurations."""
    n = circuit.n_qubits
    if bits is None:
        bits = neel_bits(n)
    if len(bits) != n:
        raise ConfigError(f"expected {n} bits, got {len(bits)}")
    regions = build_regions(circuit)
    lmat, rmat = _boundary_matrices(circuit, regions, bits)
    lw = np.einsum("ab,ab->a", lmat.conj(), lmat).real
    rw = np.einsum("ab,ab->b", rmat.conj(), rmat).real
    total = 0.0
    for alpha in np.nonzero(lw > 0.0)[0]:
        for beta in np.nonzero(rw > 0.0)[0]:
            val = _window_value(circuit, regions, lmat[alpha], rmat[:, beta])
            total += lw[alpha] * rw[beta] * val
    return total


def lightcone_expectation_sampled(
    circuit: BrickworkCircuit, n_samples: int, rng, bits=None
):
    """Monte Carlo estimate (mean, standard error) of the window sum.

    Boundary configurations are drawn independently on the two sides
    with their exact weights; repeated pairs reuse the cached window
    value, so the cost is bounded by the number of distinct pairs.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    n = circuit.n_qubits
    if bits is None:
        bits = neel_bits(n)
    regions = build_regions(circuit)
    lmat, rmat = _boundary_matrices(circuit, regions, bits)
    lw = np.einsum("ab,ab->a", lmat.conj(), lmat).real
    rw = np.einsum("ab,ab->b", rmat.conj(), rmat).real
    alphas = rng.choice(lw.size, size=n_samples, p=lw / lw.sum())
    betas = rng.choice(rw.size, size=n_samples, p=rw / rw.sum())
    cache = {}
    vals = np.empty(n_samples)
    for k, (alpha, beta) in enumerate(zip(alphas, betas)):
        key = (int(alpha), int(beta))
        if key not in cache:
            cache[key] = _window_value(circuit, regions, lmat[alpha], rmat[:, beta])
        vals[k] = cache[key]
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("nan")
    return mean, stderr
