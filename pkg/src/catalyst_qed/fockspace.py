"""Truncated single-mode bosonic space.

Levels run from 0 to ``n_max`` inclusive, so every matrix here is
``(n_max + 1) x (n_max + 1)``. Operators are plain complex numpy arrays.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from ._linalg import expm_hermitian, symmetrize

THERMAL_TAIL_TOL = 1e-9


class TruncationWarning(UserWarning):
    """A state or operator is not well represented at the chosen cutoff."""


def check_cutoff(n_max: int) -> int:
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 1:
        raise ValueError(f"Fock cutoff must be an integer >= 1, got {n_max!r}")
    return int(n_max)


def thermal_weights(n_bar: float, n_levels: int) -> np.ndarray:
    """Untruncated geometric distribution p_n = n_bar^n / (1 + n_bar)^(n+1)."""
    n = np.arange(n_levels)
    if n_bar == 0:
        return (n == 0).astype(float)
    return np.exp(n * np.log(n_bar) - (n + 1) * np.log1p(n_bar))


def thermal_tail_weight(n_bar: float, n_max: int) -> float:
    """Probability above level ``n_max`` before renormalization."""
    if n_bar == 0:
        return 0.0
    return float((n_bar / (1.0 + n_bar)) ** (n_max + 1))


def thermal_cutoff(n_bar: float, tol: float = THERMAL_TAIL_TOL) -> int:
    """Smallest n_max whose thermal tail weight is below ``tol``."""
    if n_bar == 0:
        return 1
    q = n_bar / (1.0 + n_bar)
    return max(1, math.ceil(math.log(tol) / math.log(q)) - 1)


def default_cutoff(n_bar_th: float, alpha_max: float) -> int:
    """Cutoff large enough for a thermal state displaced by up to ``alpha_max``.

    Takes the larger of a Poisson-style bound around mu = n_bar_th + alpha_max^2
    and the geometric thermal tail pushed out by the displacement.
    """
    mu = n_bar_th + alpha_max**2
    gaussian = math.ceil(mu + 6.0 * math.sqrt(mu + 1.0)) + 6
    tail = math.ceil((math.sqrt(thermal_cutoff(n_bar_th)) + alpha_max) ** 2) + 6
    return max(gaussian, tail)


def thermal_state(n_bar_th: float, n_max: int, *, check_tail: bool = True) -> np.ndarray:
    """Thermal density matrix truncated at ``n_max`` and renormalized to unit trace.

    Warns with :class:`TruncationWarning` when the discarded tail exceeds 1e-9,
    unless ``check_tail`` is False.
    """
    n_max = check_cutoff(n_max)
    if not np.isfinite(n_bar_th) or n_bar_th < 0:
        raise ValueError(f"mean thermal photon number must be >= 0, got {n_bar_th!r}")
    tail = thermal_tail_weight(n_bar_th, n_max)
    if check_tail and tail > THERMAL_TAIL_TOL:
        warnings.warn(
            f"thermal tail weight {tail:.2e} above n_max={n_max} exceeds {THERMAL_TAIL_TOL:g}",
            TruncationWarning,
            stacklevel=2,
        )
    p = thermal_weights(n_bar_th, n_max + 1)
    return np.diag(p / p.sum()).astype(complex)


def fock_state(n: int, n_max: int) -> np.ndarray:
    n_max = check_cutoff(n_max)
    if not 0 <= n <= n_max:
        raise ValueError(f"level {n} outside 0..{n_max}")
    ket = np.zeros(n_max + 1, dtype=complex)
    ket[n] = 1.0
    return ket


def annihilation_operator(n_max: int) -> np.ndarray:
    n_max = check_cutoff(n_max)
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def number_operator(n_max: int) -> np.ndarray:
    n_max = check_cutoff(n_max)
    return np.diag(np.arange(n_max + 1)).astype(complex)


def displacement_operator(alpha: complex, n_max: int) -> np.ndarray:
    """D(alpha) = exp(alpha a^dagger - alpha^* a) from the truncated generator.

    The anti-Hermitian generator is exponentiated as exp(-i K) with
    K = i (alpha a^dagger - alpha^* a), the same eigendecomposition route the
    propagators use, so D and the dynamics see identical truncation.
    """
    n_max = check_cutoff(n_max)
    alpha = complex(alpha)
    mod = abs(alpha)
    if mod**2 + 6 * mod + 6 > n_max:
        warnings.warn(
            f"|alpha|={mod:.3g} is large for n_max={n_max}; displacement will be truncation-biased",
            TruncationWarning,
            stacklevel=2,
        )
    if alpha == 0:
        return np.eye(n_max + 1, dtype=complex)
    a = annihilation_operator(n_max)
    k = 1j * (alpha * a.conj().T - alpha.conjugate() * a)
    return expm_hermitian(k, 1.0)


def coherent_state(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent ket from the closed-form Poisson amplitudes, renormalized after truncation."""
    n_max = check_cutoff(n_max)
    n = np.arange(n_max + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    alpha = complex(alpha)
    if alpha == 0:
        return fock_state(0, n_max)
    amps = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * log_fact) * np.exp(
        1j * n * np.angle(alpha)
    )
    return amps / np.linalg.norm(amps)


def displace_state(rho: np.ndarray, alpha: complex) -> np.ndarray:
    """D(alpha) rho D(alpha)^dagger, re-symmetrized."""
    d = displacement_operator(alpha, rho.shape[0] - 1)
    return symmetrize(d @ rho @ d.conj().T)


def displaced_thermal_state(n_bar_th: float, alpha: complex, n_max: int) -> np.ndarray:
    return displace_state(thermal_state(n_bar_th, n_max), alpha)


def mean_photon_number(rho: np.ndarray) -> float:
    n = np.arange(rho.shape[0])
    return float(np.real(np.sum(n * np.diag(rho))))


def top_level_population(rho: np.ndarray, levels: int = 3) -> float:
    """Population held by the highest ``levels`` Fock states."""
    return float(np.real(np.sum(np.diag(rho)[-levels:])))
