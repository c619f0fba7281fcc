"""Stored energy, net charging energy, passive state and ergotropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ContractError, eigh, hermiticity_error

# Eigenvalues of rho in [-CLIP_TOL, 0) are treated as integration noise.
CLIP_TOL = 1e-6
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class EnergyReport:
    e_b: float
    delta_e: float
    ergotropy: float

    @property
    def passive_energy(self) -> float:
        return self.e_b - self.ergotropy


def battery_energy(rho_b, h_b) -> float:
    """Tr[H_b rho_b] as a real number."""
    rho_b = np.asarray(rho_b, dtype=complex)
    h_b = np.asarray(h_b, dtype=complex)
    if rho_b.shape != h_b.shape:
        raise ContractError(f"shape mismatch: rho {rho_b.shape}, H {h_b.shape}")
    e = np.einsum("ij,ji->", h_b, rho_b)
    if abs(e.imag) > IMAG_TOL:
        raise ContractError(
            f"Tr[H rho] has imaginary part {e.imag:.3e}; an input is not Hermitian"
        )
    return float(e.real)


def net_charging_energy(e_b: float, e_g: float) -> float:
    return e_b - e_g


def _state_spectrum(rho_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of rho_b, populations descending, benign negatives clipped."""
    if hermiticity_error(rho_b) > 1e-8:
        raise ContractError("rho_b is not Hermitian")
    vals, vecs = eigh(rho_b, tol=1e-8)
    if vals[0] < -CLIP_TOL:
        raise ContractError(
            f"rho_b has eigenvalue {vals[0]:.3e} below -{CLIP_TOL:g}; state is not positive"
        )
    if vals[0] < 0:
        vals = np.clip(vals, 0.0, None)
        vals = vals / vals.sum()
    # stable sort keeps ties in LAPACK order
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def passive_state(rho_b, h_b) -> np.ndarray:
    """Passive state with the spectrum of ``rho_b``.

    The largest population goes to the lowest level of ``h_b``, the next
    largest to the next level, and so on.
    """
    rho_b = np.asarray(rho_b, dtype=complex)
    pops, _ = _state_spectrum(rho_b)
    _, levels = eigh(h_b)
    return (levels * pops) @ levels.conj().T


def passive_energy(rho_b, h_b) -> float:
    pops, _ = _state_spectrum(np.asarray(rho_b, dtype=complex))
    energies, _ = eigh(h_b)
    return float(np.dot(pops, energies))


def ergotropy(rho_b, h_b) -> float:
    """Maximum work extractable from ``rho_b`` by a unitary, for Hamiltonian ``h_b``.

    Computed as the energy of ``rho_b`` minus the energy of its passive
    state.  When small negative eigenvalues were clipped, both energies refer
    to the clipped state.
    """
    rho_b = np.asarray(rho_b, dtype=complex)
    h_b = np.asarray(h_b, dtype=complex)
    if rho_b.shape != h_b.shape:
        raise ContractError(f"shape mismatch: rho {rho_b.shape}, H {h_b.shape}")
    pops, vecs = _state_spectrum(rho_b)
    energies, _ = eigh(h_b)
    diag_h = np.einsum("ik,ij,jk->k", vecs.conj(), h_b, vecs).real
    return float(np.dot(pops, diag_h) - np.dot(pops, energies))


def energy_report(rho_b, h_b, e_g: float) -> EnergyReport:
    e_b = battery_energy(rho_b, h_b)
    return EnergyReport(
        e_b=e_b,
        delta_e=net_charging_energy(e_b, e_g),
        ergotropy=ergotropy(rho_b, h_b),
    )
