import logging
import math

import numpy as np
import pytest

from qbattery.dynamics import (
    PositivityError,
    StepSizeError,
    _Generator,
    check_step_halving,
    evolve,
    rhs,
    validate_state,
)
from qbattery.linalg import expm_propagate
from qbattery.model import SystemSpec, build_operators, initial_state

from .conftest import random_density

FIG2A = dict(omega_c=0.5, omega_a=1.0, omega_d=math.pi, g=0.8, J=0.95, kappa=0.8, N=2, n=2, A=3.0)


def spec(**kw):
    return SystemSpec(**{**FIG2A, **kw})


def test_validate_state_pure():
    d = validate_state(initial_state(spec()))
    assert d.trace_dev <= 1e-12 and d.herm_dev <= 1e-12 and d.min_eig >= -1e-12


def test_validate_state_reports_negative_eigenvalue():
    rho = np.diag([1.5, -0.5])
    before = rho.copy()
    d = validate_state(rho)
    assert d.min_eig == pytest.approx(-0.5)
    np.testing.assert_array_equal(rho, before)


def test_rhs_vanishes_on_closed_eigenprojector():
    s = spec(kappa=0.0, A=0.0)
    ops = build_operators(s)
    _, vecs = np.linalg.eigh(ops.h_static)
    for k in (0, 5, 11):
        proj = np.outer(vecs[:, k], vecs[:, k].conj())
        assert np.max(np.abs(rhs(proj, 0.3, ops, s))) < 1e-12


@pytest.mark.parametrize("channels", ["heating", "cooling", "both"])
def test_rhs_traceless_and_hermitian(rng, channels):
    s = spec(channels=channels)
    ops = build_operators(s)
    for t in (0.0, 0.25, 1.7):
        rho = random_density(rng, 12)
        out = rhs(rho, t, ops, s)
        assert abs(np.trace(out)) < 1e-11
        assert np.max(np.abs(out - out.conj().T)) < 1e-11


def test_rhs_conserves_static_energy_when_closed(rng):
    s = spec(kappa=0.0, A=0.0)
    ops = build_operators(s)
    for _ in range(10):
        rho = random_density(rng, 12)
        assert abs(np.trace(ops.h_static @ rhs(rho, 1.0, ops, s))) < 1e-11


@pytest.mark.parametrize("channels", ["heating", "cooling", "both"])
def test_sparse_generator_matches_reference_rhs(rng, channels):
    s = spec(N=3, n=3, channels=channels)
    ops = build_operators(s)
    gen = _Generator(ops, s)
    for t in (0.0, 0.4, 2.2):
        rho = random_density(rng, 32)
        f = s.A * math.sin(s.omega_d * t)
        np.testing.assert_allclose(gen(rho, f), rhs(rho, t, ops, s), atol=1e-12)


def test_zero_duration():
    tr = evolve(spec(t_max=0.0))
    assert len(tr) == 1
    assert tr.delta_e.tolist() == [0.0] and tr.ergotropy.tolist() == [0.0]


def test_trajectory_shape_and_initial_row():
    tr = evolve(spec(t_max=1.0, record_every=50))
    np.testing.assert_allclose(tr.times, np.arange(0, 1.0001, 0.05), atol=1e-12)
    assert tr.delta_e[0] == 0.0
    for series in (tr.e_b, tr.ergotropy, tr.trace_dev, tr.herm_dev, tr.min_eig):
        assert len(series) == len(tr.times)


def test_final_step_is_recorded_when_not_aligned():
    tr = evolve(spec(t_max=0.25, record_every=100))
    np.testing.assert_allclose(tr.times, [0.0, 0.1, 0.2, 0.25], atol=1e-12)


def test_uneven_duration_rejected():
    with pytest.raises(ValueError):
        evolve(spec(t_max=0.0105, dt=1e-3))


def test_closed_system_matches_matrix_exponential(rng):
    s = spec(kappa=0.0, A=0.0, t_max=10.0)
    h = build_operators(s).h_static
    # initial_state is an eigenstate of the closed H_static; use a generic state
    rho0 = random_density(rng, 12)
    tr = evolve(s, rho0, keep_states=True)
    for t in (1.0, 5.0, 10.0):
        k = int(np.argmin(np.abs(tr.times - t)))
        err = np.linalg.norm(tr.states[k] - expm_propagate(h, rho0, t))
        assert err < 1e-6


def test_closed_system_energy_constant(rng):
    s = spec(kappa=0.0, A=0.0, t_max=50.0)
    h = build_operators(s).h_static
    tr = evolve(s, random_density(rng, 12), keep_states=True)
    energies = [np.trace(h @ r).real for r in tr.states]
    assert max(energies) - min(energies) < 1e-6


def test_linearity_in_initial_state(rng):
    s = spec(t_max=5.0, record_every=5000)
    a = random_density(rng, 12)
    b = initial_state(s)
    p = 0.3
    ra = evolve(s, a, keep_states=True).states[-1]
    rb = evolve(s, b, keep_states=True).states[-1]
    rm = evolve(s, p * a + (1 - p) * b, keep_states=True).states[-1]
    assert np.linalg.norm(rm - (p * ra + (1 - p) * rb)) < 1e-8


def test_trace_drift_small_without_renormalization():
    s = spec(t_max=10.0)
    tr = evolve(s)
    assert tr.corrections["max_trace_dev"] < 1e-8 * s.t_max
    assert tr.corrections["renormalizations"] == 0


def test_positivity_breach_aborts_with_snapshot():
    s = spec(t_max=0.1)
    rho0 = np.zeros((12, 12), dtype=complex)
    rho0[0, 0], rho0[1, 1] = 1.5, -0.5
    with pytest.raises(PositivityError) as info:
        evolve(s, rho0)
    assert info.value.min_eig == pytest.approx(-0.5)
    assert info.value.t == 0.0
    assert info.value.state.shape == (12, 12)


def test_positivity_breach_can_be_downgraded(caplog):
    s = spec(t_max=0.1)
    rho0 = np.zeros((12, 12), dtype=complex)
    rho0[0, 0], rho0[1, 1] = 1.5, -0.5
    with caplog.at_level(logging.WARNING):
        tr = evolve(s, rho0, allow_nonpositive=True)
    assert tr.min_eig[0] == pytest.approx(-0.5)
    assert "positivity" in caplog.text


def test_step_halving_passes_at_default_dt():
    coarse, fine = check_step_halving(spec(t_max=5.0))
    assert np.max(np.abs(coarse.delta_e - fine.delta_e)) < 1e-5


def test_step_halving_refuses_coarse_dt():
    s = spec(t_max=5.0, dt=0.05, record_every=2)
    with pytest.raises(StepSizeError) as info:
        check_step_halving(s)
    assert info.value.suggested_dt < s.dt
    assert info.value.max_change >= 1e-5
    # the suggestion is close to a step size that passes
    assert 0.005 < info.value.suggested_dt < 0.02
    check_step_halving(spec(t_max=5.0, dt=0.01, record_every=10))


def test_ergotropy_bounded_along_trajectory():
    tr = evolve(spec(N=3, n=2, t_max=10.0))
    assert np.all(tr.ergotropy >= -1e-8)
    assert np.all(tr.ergotropy <= tr.delta_e + 1e-6)
    assert abs(tr.delta_e[0]) < 1e-14
