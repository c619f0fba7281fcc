"""Spin-chain battery, cavity, coupling and drive operators; initial state.

All quantities are dimensionless with hbar = k_B = 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .linalg import ContractError, HilbertFactorization, eigh, embed

CHANNELS = ("heating", "cooling", "both")

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|
SIGMA_MINUS = SIGMA_PLUS.T.copy()

# Tolerance for deciding that the all-down state is a ground state of H_b.
_GROUND_TOL = 1e-12


@dataclass(frozen=True)
class SystemSpec:
    """Physical and numerical parameters of one simulation run."""

    omega_a: float
    omega_c: float
    omega_d: float
    g: float
    J: float
    kappa: float
    A: float
    N: int
    n: int
    T: float = 1.0
    channels: str = "heating"
    t_max: float = 50.0
    dt: float = 1e-3
    record_every: int = 100

    def __post_init__(self):
        problems = []
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"N must be a positive integer, got {self.N}")
        if int(self.n) != self.n or self.n < 1:
            problems.append(f"n must be a positive integer, got {self.n}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            problems.append(f"record_every must be a positive integer, got {self.record_every}")
        for name in ("omega_a", "omega_c", "omega_d", "g", "J", "kappa", "A", "T", "t_max", "dt"):
            value = getattr(self, name)
            if not math.isfinite(value):
                problems.append(f"{name} must be finite, got {value}")
            elif value < 0:
                problems.append(f"{name} must be >= 0, got {value}")
        if self.dt <= 0:
            problems.append(f"dt must be > 0, got {self.dt}")
        if self.kappa > 0:
            if self.T <= 0:
                problems.append("T must be > 0 when kappa > 0")
            if self.omega_a <= 0:
                problems.append("omega_a must be > 0 when kappa > 0 (Debye reference)")
            if self.omega_c <= 0:
                problems.append("omega_c must be > 0 when kappa > 0 (Bose factor)")
        if self.channels not in CHANNELS:
            problems.append(f"channels must be one of {CHANNELS}, got {self.channels!r}")
        if problems:
            raise ContractError("invalid SystemSpec: " + "; ".join(problems))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "record_every", int(self.record_every))

    @property
    def factorization(self) -> HilbertFactorization:
        return HilbertFactorization(self.N, self.n + 1)

    def replace(self, **changes) -> "SystemSpec":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class ModelOperators:
    """Operators of one spec, embedded in the full spins (x) cavity space."""

    fact: HilbertFactorization
    h_battery: np.ndarray
    h_cavity: np.ndarray
    h_coupling: np.ndarray
    drive_quadrature: np.ndarray
    h_battery_reduced: np.ndarray
    jump_up: np.ndarray
    jump_down: np.ndarray

    @property
    def h_static(self) -> np.ndarray:
        return self.h_battery + self.h_cavity + self.h_coupling

    @property
    def excitation_number(self) -> np.ndarray:
        """Total excitations: sum_i sigma+_i sigma-_i + a^dag a."""
        return number_operator(self.fact)


def annihilation(dim: int) -> np.ndarray:
    """Truncated bosonic lowering operator on Fock states 0..dim-1."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def _spin_dims(N: int) -> list[int]:
    return [2] * N


def build_battery_hamiltonian(spec: SystemSpec) -> np.ndarray:
    """Open-chain battery Hamiltonian on the 2**N spin space.

    H_b = sum_i omega_a s+_i s-_i + J sum_{i<N} (s+_i s-_{i+1} + h.c.)
    """
    dims = _spin_dims(spec.N)
    up = [embed(SIGMA_PLUS, i, dims) for i in range(spec.N)]
    h = np.zeros((2**spec.N,) * 2, dtype=complex)
    for i in range(spec.N):
        h += spec.omega_a * up[i] @ up[i].conj().T
    for i in range(spec.N - 1):
        hop = up[i] @ up[i + 1].conj().T
        h += spec.J * (hop + hop.conj().T)
    return h


def number_operator(fact: HilbertFactorization) -> np.ndarray:
    dims = _spin_dims(fact.spin_count) + [fact.cavity_dim]
    a = annihilation(fact.cavity_dim)
    num = embed(a.conj().T @ a, fact.spin_count, dims)
    for i in range(fact.spin_count):
        num = num + embed(SIGMA_PLUS @ SIGMA_MINUS, i, dims)
    return num


def build_operators(spec: SystemSpec) -> ModelOperators:
    fact = spec.factorization
    N, cdim = fact.spin_count, fact.cavity_dim
    dims = _spin_dims(N) + [cdim]

    h_b = build_battery_hamiltonian(spec)
    a = embed(annihilation(cdim), N, dims)
    adag = a.conj().T
    h_battery = np.kron(h_b, np.eye(cdim))
    h_cavity = spec.omega_c * adag @ a

    h_coupling = np.zeros_like(h_battery)
    for i in range(N):
        sm = embed(SIGMA_MINUS, i, dims)
        h_coupling += adag @ sm + a @ sm.conj().T
    h_coupling *= spec.g

    return ModelOperators(
        fact=fact,
        h_battery=h_battery,
        h_cavity=h_cavity,
        h_coupling=h_coupling,
        drive_quadrature=adag + a,
        h_battery_reduced=h_b,
        jump_up=adag,
        jump_down=a,
    )


def build_static_hamiltonian(spec: SystemSpec) -> np.ndarray:
    """Time-independent part of the total Hamiltonian (battery + cavity + coupling)."""
    return build_operators(spec).h_static


def drive_amplitude(spec: SystemSpec, t: float) -> float:
    """Coefficient A sin(omega_d t) multiplying the cavity quadrature a^dag + a."""
    return spec.A * math.sin(spec.omega_d * t)


def hamiltonian_at(ops: ModelOperators, spec: SystemSpec, t: float) -> np.ndarray:
    return ops.h_static + drive_amplitude(spec, t) * ops.drive_quadrature


def battery_ground_state(h_b: np.ndarray) -> tuple[float, np.ndarray]:
    """Ground energy and ground-state vector of the reduced battery Hamiltonian.

    The all-down state |g...g> is returned whenever it is a ground state,
    which holds for short chains with J small compared to omega_a.  Otherwise
    (e.g. N=3 with J=0.95, omega_a=1, where the lowest one-excitation mode
    omega_a - sqrt(2) J is negative) the lowest eigenvector of H_b is used.
    """
    vals, vecs = eigh(h_b)
    e_g = float(vals[0])
    all_down = np.zeros(h_b.shape[0], dtype=complex)
    all_down[0] = 1.0
    if abs(h_b[0, 0].real - e_g) <= _GROUND_TOL:
        return e_g, all_down
    vec = vecs[:, 0]
    # fix the global phase so the state is reproducible
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    return e_g, vec


def initial_state(spec: SystemSpec) -> np.ndarray:
    """Battery ground state (x) cavity vacuum, as a full-space density matrix."""
    cdim = spec.n + 1
    _, psi_b = battery_ground_state(build_battery_hamiltonian(spec))
    vac = np.zeros(cdim, dtype=complex)
    vac[0] = 1.0
    psi = np.kron(psi_b, vac)
    return np.outer(psi, psi.conj())
