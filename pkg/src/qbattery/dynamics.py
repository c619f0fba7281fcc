"""Master-equation right-hand side and fixed-step RK4 integration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .bath import BathSpec, channel_rates, dissipator_apply
from .energetics import battery_energy, energy_report
from .linalg import ContractError, hermiticity_error, partial_trace
from .model import (
    ModelOperators,
    SystemSpec,
    battery_ground_state,
    build_operators,
    hamiltonian_at,
    initial_state,
)

log = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-6
RENORMALIZE_TOL = 1e-10
STEP_HALVING_TOL = 1e-5


class PositivityError(RuntimeError):
    """The state left the positive cone beyond tolerance during integration."""

    def __init__(self, message, t, min_eig, state):
        super().__init__(message)
        self.t = t
        self.min_eig = min_eig
        self.state = state


class StepSizeError(RuntimeError):
    """Halving dt changed the trajectory by more than the allowed amount."""

    def __init__(self, message, max_change, suggested_dt):
        super().__init__(message)
        self.max_change = max_change
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class StateDiagnostics:
    trace_dev: float
    herm_dev: float
    min_eig: float


@dataclass
class Trajectory:
    times: np.ndarray
    e_b: np.ndarray
    delta_e: np.ndarray
    ergotropy: np.ndarray
    trace_dev: np.ndarray
    herm_dev: np.ndarray
    min_eig: np.ndarray
    e_g: float = 0.0
    states: list | None = None
    corrections: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.times,
            "E_b": self.e_b,
            "delta_E": self.delta_e,
            "ergotropy": self.ergotropy,
            "trace_dev": self.trace_dev,
            "min_eig": self.min_eig,
        }


def validate_state(rho) -> StateDiagnostics:
    """Trace deviation, Hermiticity deviation and smallest eigenvalue of ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    herm = hermiticity_error(rho)
    tr = abs(np.trace(rho) - 1.0)
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return StateDiagnostics(float(tr), herm, min_eig)


def rhs(rho, t: float, ops: ModelOperators, spec: SystemSpec) -> np.ndarray:
    """d rho / dt = -i [H(t), rho] + dissipator(rho)."""
    rho = np.asarray(rho, dtype=complex)
    dim = ops.fact.total_dim
    if rho.shape != (dim, dim):
        raise ContractError(f"rho has shape {rho.shape}, expected {(dim, dim)}")
    h = hamiltonian_at(ops, spec, t)
    out = -1j * (h @ rho - rho @ h)
    if spec.kappa > 0:
        out += dissipator_apply(rho, ops, BathSpec.from_spec(spec))
    return out


def _csr(*mats):
    """Shared CSR pattern of ``mats``: (indptr, indices, [data per matrix])."""
    mask = np.zeros(mats[0].shape, dtype=bool)
    for m in mats:
        mask |= m != 0
    rows, cols = np.nonzero(mask)
    indptr = np.searchsorted(rows, np.arange(mask.shape[0] + 1)).astype(np.int64)
    data = [np.ascontiguousarray(m[rows, cols], dtype=complex) for m in mats]
    return indptr, cols.astype(np.int64), data


class _Generator:
    """Sparse RHS for Hermitian rho.

    Uses K(t) = -i H(t) - (1/2) sum_c r_c L_c^dag L_c so that
    rhs = K rho + (K rho)^dag + sum_c r_c L_c rho L_c^dag.
    K and the jump operators are stored in CSR form.
    """

    def __init__(self, ops: ModelOperators, spec: SystemSpec):
        k0 = -1j * ops.h_static
        jumps = []
        if spec.kappa > 0:
            up, down = channel_rates(BathSpec.from_spec(spec))
            for rate, L in ((up, ops.jump_up), (down, ops.jump_down)):
                if rate:
                    k0 = k0 - 0.5 * rate * (L.conj().T @ L)
                    jumps.append((rate, L))
        kd = -1j * ops.drive_quadrature if spec.A != 0 else np.zeros_like(k0)
        self.k_ptr, self.k_idx, (self.k0, self.kd) = _csr(k0, kd)

        dim = ops.fact.total_dim
        if jumps:
            self.l_ptr, self.l_idx, ldata = _csr(*(L for _, L in jumps))
            self.l_data = np.array(ldata)
            self.rates = np.array([r for r, _ in jumps], dtype=float)
        else:
            self.l_ptr = np.zeros(dim + 1, dtype=np.int64)
            self.l_idx = np.zeros(0, dtype=np.int64)
            self.l_data = np.zeros((0, 0), dtype=complex)
            self.rates = np.zeros(0, dtype=float)

    @property
    def args(self):
        return (
            self.k_ptr, self.k_idx, self.k0, self.kd,
            self.l_ptr, self.l_idx, self.l_data, self.rates,
        )

    def __call__(self, rho, f):
        return _generator(np.ascontiguousarray(rho, dtype=complex), f, *self.args)


@njit(cache=True)
def _generator(rho, f, k_ptr, k_idx, k0, kd, l_ptr, l_idx, l_data, rates):
    dim = rho.shape[0]
    y = np.zeros_like(rho)
    for i in range(dim):
        for p in range(k_ptr[i], k_ptr[i + 1]):
            kv = k0[p] + f * kd[p]
            r = k_idx[p]
            for j in range(dim):
                y[i, j] += kv * rho[r, j]
    out = y + y.conj().T
    tmp = np.empty_like(rho)
    for c in range(rates.shape[0]):
        # tmp = rho L^dag: tmp[:, j] = sum_k rho[:, k] conj(L[j, k])
        tmp[:, :] = 0.0
        for j in range(dim):
            for p in range(l_ptr[j], l_ptr[j + 1]):
                lv = np.conj(l_data[c, p])
                k = l_idx[p]
                for i in range(dim):
                    tmp[i, j] += rho[i, k] * lv
        # out += rate * L tmp
        for i in range(dim):
            for p in range(l_ptr[i], l_ptr[i + 1]):
                lv = rates[c] * l_data[c, p]
                k = l_idx[p]
                for j in range(dim):
                    out[i, j] += lv * tmp[k, j]
    return out


@njit(cache=True)
def _rk4_block(rho, fvals, dt, renorm_tol, k_ptr, k_idx, k0, kd, l_ptr, l_idx, l_data, rates):
    """Advance ``len(fvals)`` RK4 steps; fvals[s] holds the drive at t, t+dt/2, t+dt.

    Returns (rho, renormalizations, worst trace dev, worst herm dev,
    trace dev of last step, herm dev of last step).
    """
    n_renorm = 0
    worst_tr = 0.0
    worst_h = 0.0
    tr_dev = 0.0
    h_dev = 0.0
    half = 0.5 * dt
    ops = (k_ptr, k_idx, k0, kd, l_ptr, l_idx, l_data, rates)
    for s in range(fvals.shape[0]):
        k1 = _generator(rho, fvals[s, 0], *ops)
        k2 = _generator(rho + half * k1, fvals[s, 1], *ops)
        k3 = _generator(rho + half * k2, fvals[s, 1], *ops)
        k4 = _generator(rho + dt * k3, fvals[s, 2], *ops)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)

        rho_h = rho.conj().T
        h_dev = np.max(np.abs(rho - rho_h))
        rho = 0.5 * (rho + rho_h)
        tr = np.trace(rho).real
        tr_dev = abs(tr - 1.0)
        if tr_dev > renorm_tol:
            n_renorm += 1
            rho = rho / tr
        worst_tr = max(worst_tr, tr_dev)
        worst_h = max(worst_h, h_dev)
    return rho, n_renorm, worst_tr, worst_h, tr_dev, h_dev


def _step_count(spec: SystemSpec) -> int:
    steps = int(round(spec.t_max / spec.dt))
    if abs(steps * spec.dt - spec.t_max) > 1e-9 * max(1.0, spec.t_max):
        raise ContractError(f"t_max={spec.t_max} is not a whole number of dt={spec.dt} steps")
    return steps


def evolve(
    spec: SystemSpec,
    rho0=None,
    *,
    keep_states: bool = False,
    allow_nonpositive: bool = False,
) -> Trajectory:
    """Integrate the master equation from ``rho0`` (default: the initial product state).

    Classical RK4 with fixed step ``spec.dt``; the drive is evaluated at the
    stage times t, t + dt/2, t + dt.  After every step the state is
    symmetrized and, if its trace drifted by more than 1e-10, renormalized.
    Observables are recorded every ``spec.record_every`` steps and at the
    final step.
    """
    ops = build_operators(spec)
    h_b = ops.h_battery_reduced
    e_g, _ = battery_ground_state(h_b)
    fact = ops.fact
    rho = initial_state(spec) if rho0 is None else np.array(rho0, dtype=complex)
    if rho.shape != (fact.total_dim,) * 2:
        raise ContractError(f"rho0 has shape {rho.shape}, expected {(fact.total_dim,) * 2}")

    gen = _Generator(ops, spec)
    dt = spec.dt
    steps = _step_count(spec)

    rows = []
    states = [] if keep_states else None
    n_renorm = 0
    worst_trace = 0.0
    worst_herm = 0.0

    def record(k, rho, trace_dev, herm_dev):
        t = k * dt
        min_eig = float(np.linalg.eigvalsh(rho)[0])
        if min_eig < -POSITIVITY_TOL:
            msg = f"state lost positivity at t={t:.6g}: min eigenvalue {min_eig:.3e}"
            if not allow_nonpositive:
                raise PositivityError(msg, t, min_eig, rho.copy())
            log.warning(msg)
        rho_b = partial_trace(rho, fact)
        try:
            rep = energy_report(rho_b, h_b, e_g)
            row = (t, rep.e_b, rep.delta_e, rep.ergotropy)
        except ContractError:
            if not allow_nonpositive:
                raise
            e_b = battery_energy(rho_b, h_b)
            row = (t, e_b, e_b - e_g, float("nan"))
        rows.append(row + (trace_dev, herm_dev, min_eig))
        if keep_states:
            states.append(rho.copy())

    d0 = validate_state(rho)
    record(0, rho, d0.trace_dev, d0.herm_dev)

    # record points: every record_every steps, plus the final step
    marks = list(range(spec.record_every, steps + 1, spec.record_every))
    if steps and (not marks or marks[-1] != steps):
        marks.append(steps)
    k = 0
    for mark in marks:
        t_stage = (np.arange(k, mark, dtype=float)[:, None] + np.array([0.0, 0.5, 1.0])) * dt
        fvals = np.ascontiguousarray(spec.A * np.sin(spec.omega_d * t_stage))
        rho, nr, wt, wh, trace_dev, herm_dev = _rk4_block(
            rho, fvals, dt, RENORMALIZE_TOL, *gen.args
        )
        n_renorm += nr
        worst_trace = max(worst_trace, wt)
        worst_herm = max(worst_herm, wh)
        k = mark
        record(k, rho, trace_dev, herm_dev)

    if n_renorm:
        log.info("trace renormalized on %d of %d steps", n_renorm, steps)

    cols = np.array(rows, dtype=float).reshape(-1, 7).T
    return Trajectory(
        times=cols[0],
        e_b=cols[1],
        delta_e=cols[2],
        ergotropy=cols[3],
        trace_dev=cols[4],
        herm_dev=cols[5],
        min_eig=cols[6],
        e_g=e_g,
        states=states,
        corrections={
            "renormalizations": n_renorm,
            "max_trace_dev": worst_trace,
            "max_herm_dev": worst_herm,
        },
    )


def check_step_halving(spec: SystemSpec, tol: float = STEP_HALVING_TOL, **kwargs):
    """Run ``spec`` at dt and dt/2 and compare delta_e at every recorded time.

    Returns the two trajectories.  Raises StepSizeError with a suggested dt
    when the largest change reaches ``tol``.
    """
    coarse = evolve(spec, **kwargs)
    fine = evolve(spec.replace(dt=spec.dt / 2, record_every=spec.record_every * 2), **kwargs)
    if not np.allclose(coarse.times, fine.times, rtol=0, atol=1e-9):
        raise ContractError("recorded time grids differ between dt and dt/2 runs")
    change = float(np.max(np.abs(coarse.delta_e - fine.delta_e)))
    if change >= tol:
        # RK4 global error ~ dt^4
        factor = (change / tol) ** 0.25
        suggested = spec.dt / (2.0 * factor)
        raise StepSizeError(
            f"halving dt={spec.dt:g} changed delta_E by {change:.3e} (>= {tol:g}); "
            f"try dt <= {suggested:.3g}",
            change,
            suggested,
        )
    return coarse, fine
