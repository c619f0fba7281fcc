"""Dense complex linear algebra on the spin-chain x cavity Hilbert space.

Index convention (used everywhere in the package): the composite space is
ordered ``spin_1 (x) spin_2 (x) ... (x) spin_N (x) cavity``.  For a single
spin, index 0 is the ground state |g> and index 1 the excited state |e>.
Cavity index k is the Fock state |k>.  A full-space basis index is therefore

    idx = (s_1 s_2 ... s_N)_binary * cavity_dim + k

with spin_1 the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-9


class ContractError(ValueError):
    """Input violates a documented precondition (shape, Hermiticity, ...)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


@dataclass(frozen=True)
class HilbertFactorization:
    """Tensor structure of the spins (x) cavity space."""

    spin_count: int
    cavity_dim: int

    def __post_init__(self):
        if self.spin_count < 1 or self.cavity_dim < 1:
            raise ContractError(
                f"spin_count and cavity_dim must be positive, got "
                f"{self.spin_count}, {self.cavity_dim}"
            )

    @property
    def spin_dim(self) -> int:
        return 2**self.spin_count

    @property
    def total_dim(self) -> int:
        return self.spin_dim * self.cavity_dim


def _square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"{name} must be square, got shape {m.shape}")
    return m


def hermiticity_error(m: np.ndarray) -> float:
    """Largest entry of ``|m - m^dagger|``."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


def kron(*factors) -> np.ndarray:
    """Kronecker product of one or more square matrices, left to right."""
    if not factors:
        raise ContractError("kron needs at least one factor")
    out = _square(factors[0], "factor 0")
    for i, f in enumerate(factors[1:], start=1):
        out = np.kron(out, _square(f, f"factor {i}"))
    return out


def embed(op, site: int, dims) -> np.ndarray:
    """Place ``op`` on tensor factor ``site`` with identities elsewhere."""
    dims = list(dims)
    op = _square(op)
    if op.shape[0] != dims[site]:
        raise ContractError(
            f"operator of dim {op.shape[0]} does not fit site {site} of dim {dims[site]}"
        )
    left = int(np.prod(dims[:site], dtype=int))
    right = int(np.prod(dims[site + 1 :], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def partial_trace(rho, fact: HilbertFactorization, keep: str = "spins") -> np.ndarray:
    """Reduced density matrix of the spins (``keep="spins"``) or the cavity.

    The returned matrix has dimension ``2**N`` (spins) or ``cavity_dim``.
    """
    rho = _square(rho, "rho")
    if rho.shape[0] != fact.total_dim:
        raise ContractError(
            f"rho has dim {rho.shape[0]}, factorization expects {fact.total_dim}"
        )
    s, c = fact.spin_dim, fact.cavity_dim
    t = rho.reshape(s, c, s, c)
    if keep == "spins":
        return np.einsum("ikjk->ij", t)
    if keep == "cavity":
        return np.einsum("kikj->ij", t)
    raise ContractError(f"keep must be 'spins' or 'cavity', got {keep!r}")


def eigh(h, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.  Within a degenerate block the basis is whatever LAPACK
    returns.
    """
    h = _square(h, "h")
    err = hermiticity_error(h)
    if err > tol:
        raise ContractError(f"matrix is not Hermitian (max |h - h^dag| = {err:.3e})")
    if not np.all(np.isfinite(h)):
        raise ContractError("matrix has non-finite entries")
    h = 0.5 * (h + h.conj().T)
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigh did not converge for dim {h.shape[0]}: {exc}") from exc

    scale = max(np.linalg.norm(h, 2), np.finfo(float).tiny)
    resid = np.linalg.norm(h @ vecs - vecs * vals, axis=0)
    worst = float(resid.max()) if resid.size else 0.0
    if worst > EIG_RESIDUAL_TOL * scale:
        raise NumericalError(
            f"eigenvector residual {worst:.3e} exceeds {EIG_RESIDUAL_TOL:g} * ||h|| = "
            f"{EIG_RESIDUAL_TOL * scale:.3e}"
        )
    return vals, vecs


def expm_propagate(h, rho0, t: float) -> np.ndarray:
    """Closed-system evolution ``exp(-iht) rho0 exp(+iht)`` by diagonalizing ``h``."""
    rho0 = _square(rho0, "rho0")
    vals, vecs = eigh(h)
    u = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T
    return u @ rho0 @ u.conj().T
