"""Debye bath: spectral density, thermal rate and the cavity dissipator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ContractError
from .model import CHANNELS, ModelOperators, SystemSpec


@dataclass(frozen=True)
class BathSpec:
    kappa: float
    omega_a: float
    omega_c: float
    T: float = 1.0
    channels: str = "heating"

    def __post_init__(self):
        if self.kappa < 0:
            raise ContractError(f"kappa must be >= 0, got {self.kappa}")
        if self.T <= 0:
            raise ContractError(f"T must be > 0, got {self.T}")
        if self.omega_a <= 0:
            raise ContractError(f"omega_a must be > 0, got {self.omega_a}")
        if self.channels not in CHANNELS:
            raise ContractError(f"channels must be one of {CHANNELS}, got {self.channels!r}")

    @classmethod
    def from_spec(cls, spec: SystemSpec) -> "BathSpec":
        return cls(spec.kappa, spec.omega_a, spec.omega_c, spec.T, spec.channels)


def spectral_density(omega: float, kappa: float, omega_a: float) -> float:
    """Debye form kappa |omega| / (omega_a^2 + omega^2); peak kappa / (2 omega_a) at |omega| = omega_a."""
    if omega_a <= 0:
        raise ContractError(f"omega_a must be > 0, got {omega_a}")
    w = abs(omega)
    return kappa * w / (omega_a * omega_a + w * w)


def bose_occupation(omega: float, T: float) -> float:
    if omega <= 0:
        raise ContractError(f"Bose occupation needs omega > 0, got {omega}")
    if T <= 0:
        return 0.0
    # expm1 keeps precision for omega << T
    x = omega / T
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def thermal_rate(omega: float, bath: BathSpec) -> float:
    """Absorption rate J(omega) / (exp(omega / T) - 1)."""
    if omega <= 0:
        raise ContractError(f"thermal rate is defined for omega > 0, got {omega}")
    return spectral_density(omega, bath.kappa, bath.omega_a) * bose_occupation(omega, bath.T)


def channel_rates(bath: BathSpec) -> tuple[float, float]:
    """Rates (heating, cooling) attached to D[a^dag] and D[a] for the chosen channels."""
    if bath.kappa == 0:
        return 0.0, 0.0
    j = spectral_density(bath.omega_c, bath.kappa, bath.omega_a)
    nbar = bose_occupation(bath.omega_c, bath.T)
    up = j * nbar if bath.channels in ("heating", "both") else 0.0
    down = j * (nbar + 1.0) if bath.channels in ("cooling", "both") else 0.0
    return up, down


def lindblad_dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[L] rho = L rho L^dag - (L^dag L rho + rho L^dag L) / 2."""
    ldag = L.conj().T
    ldl = ldag @ L
    return L @ rho @ ldag - 0.5 * (ldl @ rho + rho @ ldl)


def dissipator_apply(rho, ops: ModelOperators, bath: BathSpec) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    dim = ops.fact.total_dim
    if rho.shape != (dim, dim):
        raise ContractError(f"rho has shape {rho.shape}, expected {(dim, dim)}")
    up, down = channel_rates(bath)
    out = np.zeros_like(rho)
    if up:
        out += up * lindblad_dissipator(ops.jump_up, rho)
    if down:
        out += down * lindblad_dissipator(ops.jump_down, rho)
    return out
