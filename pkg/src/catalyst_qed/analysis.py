"""Figures of merit for protocol runs, the gate robustness curve and the decoherence budget."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fockspace, register
from ._linalg import purity, symmetrize, trace_distance
from .dynamics import JointShape, partial_trace_atoms, partial_trace_field
from .protocol import ProtocolConfig, RunResult, run

SWEEP_AXES = {
    "r": "r",
    "n_bar_th": "n_bar_th",
    "tau": "tau",
    "N": "n_atoms",
    "n_atoms": "n_atoms",
    "cutoff": "cutoff",
}


@dataclass(frozen=True)
class Metrics:
    ghz_fidelity: float
    atomic_purity: float
    product_form_distance: float
    mean_photon_final: float


def ghz_fidelity(rho_atoms: np.ndarray, target: np.ndarray) -> float:
    """<target| rho |target> for a pure target, clipped to [0, 1]."""
    if rho_atoms.shape != (target.size, target.size):
        raise ValueError(f"state of shape {rho_atoms.shape} does not match target of size {target.size}")
    return float(min(max(np.vdot(target, rho_atoms @ target).real, 0.0), 1.0))


def product_form_distance(joint: np.ndarray, shape: JointShape) -> float:
    """Trace distance between the joint state and the product of its two marginals."""
    rho_a = partial_trace_field(joint, shape)
    rho_f = partial_trace_atoms(joint, shape)
    return trace_distance(symmetrize(joint), np.kron(rho_a, rho_f))


def lab_mean_photon(rho_frame: np.ndarray, frame_amplitude: complex) -> float:
    """<a^dagger a> in the lab for a field state given in the frame displaced by ``frame_amplitude``.

    Uses <a^dagger a>_lab = <a^dagger a> + 2 Re(beta^* <a>) + |beta|^2.
    """
    a_mean = np.trace(fockspace.annihilation_operator(rho_frame.shape[0] - 1) @ rho_frame)
    beta = complex(frame_amplitude)
    return fockspace.mean_photon_number(rho_frame) + 2 * (beta.conjugate() * a_mean).real + abs(beta) ** 2


def compute_metrics(result: RunResult) -> Metrics:
    rho_a = result.final_atoms
    if result.final_joint is None:
        # closed-loop leading-order result: field left as the displaced thermal state
        distance = 0.0
        n_final = result.config.n_bar_th + abs(result.frame_amplitude) ** 2
    else:
        distance = product_form_distance(result.final_joint, result.shape)
        n_final = lab_mean_photon(result.final_field, result.frame_amplitude)
    return Metrics(
        ghz_fidelity=ghz_fidelity(rho_a, result.target),
        atomic_purity=min(purity(rho_a), 1.0),
        product_form_distance=distance,
        mean_photon_final=max(n_final, 0.0),
    )


def evaluate(config: ProtocolConfig) -> tuple[RunResult, Metrics]:
    result = run(config)
    result.metrics = compute_metrics(result)
    return result, result.metrics


def robustness_fidelity(two_g_tau_sq: float) -> float:
    """Overlap of the ideal and the mis-timed gate output, as a function of the loop phase 2(g tau)^2."""
    s, c = math.sin(two_g_tau_sq), math.cos(two_g_tau_sq)
    return 0.25 * (1 + s) ** 2 + 0.25 * c**2


def robustness_states(two_g_tau_sq: float) -> tuple[np.ndarray, np.ndarray]:
    """Ideal and actual two-atom outputs for the uniform input, in the phase-0 product basis.

    Basis order is ++, +-, -+, --. The ideal gate puts i on ++ and --; the
    actual one puts exp(i 2(g tau)^2) there.
    """
    ideal = 0.5 * np.array([1j, 1, 1, 1j])
    w = np.exp(1j * two_g_tau_sq)
    actual = 0.5 * np.array([w, 1, 1, w])
    return ideal, actual


def robustness_fidelity_via_states(two_g_tau_sq: float) -> float:
    """Same quantity as :func:`robustness_fidelity`, from explicit state vectors."""
    ideal, actual = robustness_states(two_g_tau_sq)
    basis = [register.product_state(lab, 0.0) for lab in ("++", "+-", "-+", "--")]
    psi = sum(c * b for c, b in zip(ideal, basis))
    phi = sum(c * b for c, b in zip(actual, basis))
    return float(abs(np.vdot(psi, phi)) ** 2)


@dataclass(frozen=True)
class DecoherenceParams:
    """Inputs of the back-of-envelope decoherence estimate (SI units).

    ``d`` is the phase-space separation of the field components; ``None``
    means g*tau.
    """

    g_physical: float
    T_r: float
    n_atoms: int
    T_c: float
    n_bar_th: float
    d: float | None = None

    def __post_init__(self):
        for name in ("g_physical", "T_r", "n_atoms", "T_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_bar_th < 0:
            raise ValueError("n_bar_th must be >= 0")
        if self.d is not None and not self.d > 0:
            raise ValueError("d must be positive")


@dataclass(frozen=True)
class DecoherenceBudget:
    t_total: float
    T_r_eff: float
    T_c_eff: float
    infidelity: float


def decoherence_budget(p: DecoherenceParams, tau: float) -> DecoherenceBudget:
    """Infidelity t/T_r' + t/T_c' for a run of four segments of length ``tau`` seconds.

    T_r' = T_r / N and T_c' = T_c / ((1 + 2 n_th) d^2).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    t_total = 4 * tau
    d = p.g_physical * tau if p.d is None else p.d
    T_r_eff = p.T_r / p.n_atoms
    T_c_eff = p.T_c / ((1 + 2 * p.n_bar_th) * d**2)
    return DecoherenceBudget(t_total, T_r_eff, T_c_eff, t_total / T_r_eff + t_total / T_c_eff)


def tau_for_loop_phase(g_physical: float, two_g_tau_sq: float = math.pi / 2) -> float:
    """Segment time that gives 2(g tau)^2 the requested value."""
    return math.sqrt(two_g_tau_sq / 2) / g_physical


def distance_for_cavity_time(T_c: float, n_bar_th: float, T_c_eff: float) -> float:
    """Separation d that reproduces a quoted effective cavity coherence time."""
    return math.sqrt(T_c / ((1 + 2 * n_bar_th) * T_c_eff))


@dataclass
class SweepRow:
    value: object
    metrics: Metrics | None
    truncation_flag: bool = False
    error: str | None = None


def sweep(base: ProtocolConfig, axis: str, values, max_workers: int | None = None) -> list[SweepRow]:
    """One run per value of ``axis``; rows come back in input order.

    A failing row records its error and the sweep carries on.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"cannot sweep {axis!r}; choose one of {sorted(set(SWEEP_AXES))}")
    field_name = SWEEP_AXES[axis]

    def one(value) -> SweepRow:
        try:
            config = base.replace(**{field_name: value})
            result, metrics = evaluate(config)
            return SweepRow(value, metrics, result.truncation_flag)
        except Exception as exc:  # noqa: BLE001 - row errors are data here
            return SweepRow(value, None, False, f"{type(exc).__name__}: {exc}")

    values = list(values)
    if max_workers and max_workers > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]

