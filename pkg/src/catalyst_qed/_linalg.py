"""Dense Hermitian helpers shared by the field operators and the propagators."""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-8


def hermiticity_error(m: np.ndarray) -> float:
    """Largest entrywise deviation of ``m`` from its adjoint."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def unitary_from_eigh(evals: np.ndarray, evecs: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for H = V diag(w) V^dagger."""
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i h t) through the eigendecomposition of the Hermitian matrix ``h``."""
    err = hermiticity_error(h)
    if err > HERMITICITY_TOL:
        raise ValueError(f"generator is not Hermitian (max |H - H^dagger| = {err:.3g})")
    w, v = np.linalg.eigh(symmetrize(h))
    return unitary_from_eigh(w, v, t)


def trace_norm_hermitian(m: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(symmetrize(m)))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * trace_norm_hermitian(rho - sigma)


def density_violations(
    rho: np.ndarray, herm_tol: float = 1e-12, trace_tol: float = 1e-12, psd_tol: float = 1e-10
) -> list[str]:
    """Human-readable list of the density-operator properties ``rho`` breaks."""
    problems = []
    herm = hermiticity_error(rho)
    if herm > herm_tol:
        problems.append(f"not Hermitian (max |rho - rho^dagger| = {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        problems.append(f"trace {tr.real:.12g}{tr.imag:+.3g}j differs from 1")
    lo = float(np.min(np.linalg.eigvalsh(symmetrize(rho))))
    if lo < -psd_tol:
        problems.append(f"negative eigenvalue {lo:.3g}")
    return problems


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.vdot(rho.conj().T, rho)))
