"""Infinite-chain evolution against closed forms and the dense oracle."""

import dataclasses
import math

import numpy as np
import pytest
import scipy.linalg
from scipy.special import j0

from spinquench.errors import ConfigError
from spinquench.graded import SchmidtSpectrum
from spinquench.itebd import (
    DN,
    UP,
    QuenchConfig,
    build_gate,
    evolve_to,
    expect_pair_observable,
    expect_sz,
    neel_init,
    right_normalization_deviation,
    update_bond,
)


def dense_pair_hamiltonian(delta):
    sz = np.diag([0.5, -0.5])
    sp = np.array([[0.0, 1.0], [0.0, 0.0]])
    h = 0.5 * (np.kron(sp, sp.T) + np.kron(sp.T, sp)) + delta * np.kron(sz, sz)
    return h


@pytest.mark.parametrize("delta", [0.0, 0.5, 1.0, -0.7])
@pytest.mark.parametrize("step", [0.0625, 0.5])
def test_gate_matches_expm(delta, step):
    # oracle: scipy matrix exponential of the explicit two-site Hamiltonian
    expected = scipy.linalg.expm(-1j * step * dense_pair_hamiltonian(delta))
    gate = build_gate(delta, step)
    assert np.allclose(gate.u, expected, atol=1e-14)


def test_gate_unitary():
    u = build_gate(0.5, 0.0625).u
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-14


def test_first_update_hand_oracle():
    # one AB gate on the product state: amplitudes cos(dt/2) on up-down
    # and -i sin(dt/2) on down-up, so the Schmidt values are
    # (cos(dt/2), sin(dt/2)) and sz0 = cos(dt)/2.
    dt = 0.3
    state = neel_init()
    gate = build_gate(0.5, dt)
    new, report = update_bond(state, gate, "AB", 8)
    lam = sorted(w for _q, w, _i in new.lambda_a.entries)
    assert lam == pytest.approx(
        sorted([math.cos(dt / 2.0), math.sin(dt / 2.0)]), abs=1e-14
    )
    assert report.discarded_weight == pytest.approx(0.0, abs=1e-14)
    assert expect_sz(new, "A") == pytest.approx(math.cos(dt) / 2.0, abs=1e-14)
    assert right_normalization_deviation(new) < 1e-13


def test_config_validation():
    with pytest.raises(ConfigError):
        QuenchConfig(dt=0.0)
    with pytest.raises(ConfigError):
        QuenchConfig(k_max=1)
    with pytest.raises(ConfigError):
        QuenchConfig(t_init=0.1, dt=0.0625)  # not a step multiple
    with pytest.raises(ConfigError):
        evolve_to(neel_init(), 0.1, QuenchConfig(dt=0.0625, k_max=8))
    with pytest.raises(ConfigError):
        evolve_to(neel_init(), -0.0625, QuenchConfig(dt=0.0625, k_max=8))


def test_neel_is_its_own_zero_step():
    state = neel_init()
    assert evolve_to(state, 0.0, QuenchConfig(dt=0.0625, k_max=8)) is state
    assert expect_sz(state, "A") == pytest.approx(0.5)
    assert expect_sz(state, "B") == pytest.approx(-0.5)


def test_xx_chain_bessel_closed_form():
    # free-fermion result: staggered magnetization J0(2t)/2 at delta=0
    config = QuenchConfig(delta=0.0, dt=0.0625, k_max=64)
    for t in (0.5, 1.0, 2.0):
        state = evolve_to(neel_init(), t, config)
        assert expect_sz(state, "A") == pytest.approx(j0(2.0 * t) / 2.0, abs=2e-4)


def test_against_dense_oracle_short(dense16_curve):
    records = []
    evolve_to(
        neel_init(),
        2.0,
        QuenchConfig(delta=0.5, dt=0.0625, k_max=64),
        observer=records.append,
    )
    worst = max(abs(r.sz0 - dense16_curve[round(r.time, 10)]) for r in records)
    assert worst < 1e-4


def test_staggered_symmetry_along_curve():
    records = []
    evolve_to(
        neel_init(),
        2.0,
        QuenchConfig(delta=0.5, dt=0.0625, k_max=64),
        observer=records.append,
    )
    assert max(abs(r.sz0 + r.sz1) for r in records) < 1e-9


def test_observer_times_and_cumulative_weight():
    records = []
    evolve_to(
        neel_init(),
        1.0,
        QuenchConfig(delta=0.5, dt=0.0625, k_max=32),
        observer=records.append,
    )
    assert len(records) == 16
    times = [r.time for r in records]
    assert times == pytest.approx([(k + 1) * 0.0625 for k in range(16)], abs=1e-12)
    total = 0.0
    for r in records:
        total += r.discarded_weight
        assert r.cumulative_discarded == pytest.approx(total, abs=1e-18)
    assert not records[-1].warning


def test_evolution_split_agrees_with_single_call():
    config = QuenchConfig(delta=0.5, dt=0.0625, k_max=64)
    one = evolve_to(neel_init(), 1.5, config)
    half = evolve_to(neel_init(), 0.75, config)
    two = evolve_to(half, 1.5, config)
    assert expect_sz(two, "A") == pytest.approx(expect_sz(one, "A"), abs=1e-10)
    assert two.time == one.time == 1.5


def test_update_reports_block_dims():
    state = evolve_to(neel_init(), 1.0, QuenchConfig(delta=0.5, dt=0.0625, k_max=16))
    gate = build_gate(0.5, 0.0625)
    _new, report = update_bond(state, gate, "AB", 16)
    total = state.lambda_b.total_dim + state.lambda_a.total_dim
    assert 0 < report.largest_block_dim < total


def test_division_free_with_tiny_schmidt_value():
    # overwrite the smallest Schmidt value with 1e-12 (four orders below the
    # natural minimum of the k=16 spectrum) and push it through updates that
    # consume it as a row weight.  The update path must stay finite because no
    # Schmidt coefficient is ever inverted.  k_max is kept wide and dt small so
    # truncation stays at floor level; heavy truncation degrades max-norm
    # right-normalization on its own, which is a separate effect.
    state = evolve_to(neel_init(), 1.0, QuenchConfig(delta=0.5, dt=0.0625, k_max=16))
    blocks = {q: vals.copy() for q, vals in state.lambda_a.blocks.items()}
    q_min = min(blocks, key=lambda q: blocks[q].min())
    blocks[q_min][int(np.argmin(blocks[q_min]))] = 1e-12
    state = dataclasses.replace(
        state, lambda_a=SchmidtSpectrum(blocks).normalized()
    )
    lam_all = np.concatenate(list(state.lambda_a.blocks.values()))
    assert lam_all.min() == pytest.approx(1e-12, rel=1e-9)
    gate = build_gate(0.5, 0.01)
    which = "BA"  # the BA update multiplies rows of theta by lambda_A
    for _ in range(20):
        state, _report = update_bond(state, gate, which, 256)
        which = "AB" if which == "BA" else "BA"
    for tensors in (state.a_a, state.a_b):
        for s in (UP, DN):
            for arr in tensors[s].blocks.values():
                assert np.all(np.isfinite(arr))
    assert right_normalization_deviation(state) < 1e-6


def test_pair_observable_matches_site_observable():
    state = evolve_to(neel_init(), 1.0, QuenchConfig(delta=0.5, dt=0.0625, k_max=32))
    sz_left = np.diag([0.5, 0.5, -0.5, -0.5])
    sz_right = np.diag([0.5, -0.5, 0.5, -0.5])
    assert expect_pair_observable(state, sz_left) == pytest.approx(
        expect_sz(state, "A"), abs=1e-12
    )
    assert expect_pair_observable(state, sz_right) == pytest.approx(
        expect_sz(state, "B"), abs=1e-12
    )
