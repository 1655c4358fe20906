"""Square-loop displace/rotate/evolve protocol and its three execution engines.

The schedule displaces the field by r, evolves for tau, and then three times
displaces the field by a quarter turn of the square, rotates every atom with
|g> -> i|g> and evolves again. In the frame that follows the field amplitude,
each evolution is a strong classical drive of Rabi frequency r g plus a
spin-dependent force; the force walks the field round a closed square whose
side depends on the collective atomic state, leaving only a state-dependent
phase behind.

Engines
-------
LabExact
    Literal joint-space simulation with the field matrices in the lab frame.
    Needs a cutoff covering the full amplitude r.
DisplacedExact
    Same physics in the frame moving with the field amplitude. Lab
    displacements fold into the frame amplitude, so the simulated field stays
    near thermal occupation and r can be macroscopic.
AnalyticRWA
    Closed form obtained by dropping terms rotating at 2 r g; no field matrices.
"""

from __future__ import annotations

import cmath
import math
import numbers
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Union

import numpy as np

from . import fockspace, register
from ._linalg import symmetrize
from .dynamics import (
    JointShape,
    cached_propagator,
    embed_field_operator,
    partial_trace_atoms,
    partial_trace_field,
)

TRUNCATION_TOL = 1e-6
TOP_LEVELS = 3
ALIGNMENT_TOL = 1e-9
GATE_OVERLAP_MIN = 0.99
GATE_LABELS = ("++", "+-", "-+", "--")


class ConfigError(ValueError):
    """Invalid protocol configuration."""


class Engine(str, Enum):
    LAB_EXACT = "LabExact"
    DISPLACED_EXACT = "DisplacedExact"
    ANALYTIC_RWA = "AnalyticRWA"


@dataclass(frozen=True)
class DisplaceField:
    beta: complex


@dataclass(frozen=True)
class RotateAtoms:
    quarter_turns: int = 1


@dataclass(frozen=True)
class Evolve:
    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError(f"evolution duration must be >= 0, got {self.duration!r}")


ProtocolStep = Union[DisplaceField, RotateAtoms, Evolve]


def build_schedule(r: float, tau: float, quarter_turns: int = 1) -> list[ProtocolStep]:
    """The eleven-step square loop.

    ``quarter_turns=-1`` swaps the rotation for |g> -> -i|g>, which traverses
    the same field square in the opposite sense relative to the atomic basis.
    """
    if not r >= 0:
        raise ConfigError(f"r must be >= 0, got {r!r}")
    if not tau >= 0:
        raise ConfigError(f"tau must be >= 0, got {tau!r}")
    r = float(r)
    steps: list[ProtocolStep] = [DisplaceField(complex(r, 0.0)), Evolve(tau)]
    for beta in (complex(-r, r), complex(-r, -r), complex(r, -r)):
        steps += [DisplaceField(beta), RotateAtoms(quarter_turns), Evolve(tau)]
    return steps


def _ket_label(label: str, n_atoms: int) -> np.ndarray:
    if label == "bloch":
        return register.bloch_initial_state(n_atoms)
    if len(label) == n_atoms and set(label) <= {"+", "-"}:
        return register.product_state(label, 0.0)
    raise ConfigError(f"unknown initial state label {label!r}")


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """One run of the protocol, in units where g = 1.

    ``initial_state`` is ``"bloch"`` (all atoms excited), a string of ``+``/``-``
    naming a product state in the phase-0 rotated basis, or an explicit ket.
    ``cutoff=None`` selects an engine-appropriate default.
    """

    n_atoms: int
    r: float
    tau: float
    n_bar_th: float = 0.0
    cutoff: int | None = None
    engine: Engine = Engine.DISPLACED_EXACT
    initial_state: Union[str, np.ndarray] = "bloch"

    g: ClassVar[float] = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "n_atoms", register.check_atoms(self.n_atoms))
            if self.cutoff is not None:
                object.__setattr__(self, "cutoff", fockspace.check_cutoff(self.cutoff))
            object.__setattr__(self, "engine", Engine(self.engine))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("r", "tau", "n_bar_th"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, float(value))
        if isinstance(self.initial_state, str):
            _ket_label(self.initial_state, self.n_atoms)
        else:
            ket = np.asarray(self.initial_state, dtype=complex).ravel()
            if ket.size != 2**self.n_atoms:
                raise ConfigError(f"initial ket has length {ket.size}, expected {2**self.n_atoms}")
            if abs(np.linalg.norm(ket) - 1) > 1e-12:
                raise ConfigError("initial ket is not normalized")
            object.__setattr__(self, "initial_state", ket)

    @property
    def omega(self) -> float:
        return self.r * self.g

    def initial_ket(self) -> np.ndarray:
        if isinstance(self.initial_state, str):
            return _ket_label(self.initial_state, self.n_atoms)
        return self.initial_state

    def field_scale(self) -> float:
        """Photon-number scale the cutoff must cover for this engine."""
        spread = self.n_atoms * self.g * self.tau
        if self.engine is Engine.LAB_EXACT:
            return self.n_bar_th + (self.r * math.sqrt(2) + spread) ** 2
        return self.n_bar_th + spread**2

    def resolved_cutoff(self) -> int | None:
        if self.engine is Engine.ANALYTIC_RWA:
            return None
        if self.cutoff is not None:
            return self.cutoff
        return fockspace.default_cutoff(self.n_bar_th, math.sqrt(self.field_scale() - self.n_bar_th))

    def replace(self, **changes) -> "ProtocolConfig":
        data = {
            "n_atoms": self.n_atoms,
            "r": self.r,
            "tau": self.tau,
            "n_bar_th": self.n_bar_th,
            "cutoff": self.cutoff,
            "engine": self.engine,
            "initial_state": self.initial_state,
        }
        data.update(changes)
        return ProtocolConfig(**data)

    def to_dict(self) -> dict:
        state = self.initial_state
        if not isinstance(state, str):
            state = [[float(z.real), float(z.imag)] for z in state]
        return {
            "n_atoms": self.n_atoms,
            "r": self.r,
            "tau": self.tau,
            "n_bar_th": self.n_bar_th,
            "cutoff": self.cutoff,
            "engine": self.engine.value,
            "initial_state": state,
        }

    def __eq__(self, other):
        if not isinstance(other, ProtocolConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


# -- RWA loop geometry -------------------------------------------------------


@dataclass(frozen=True)
class LoopGeometry:
    """What the schedule does to each collective sigma_z eigenvalue m, to leading order.

    A Dicke sector with eigenvalue m (measured in the phase-0 basis and
    carried along by the rotations) ends up multiplied by
    ``exp(-i dynamic_phase * m + i geometric_phase * m**2)`` and relabeled to
    the basis at ``final_phi``. ``closure`` is the conditional field
    displacement left over per unit m; zero means the field factors out.
    """

    final_phi: float
    leg_signs: tuple[int, ...]
    leg_displacements: tuple[complex, ...]
    dynamic_phase: float
    geometric_phase: float
    closure: complex
    net_displacement: complex
    total_quarter_turns: int

    @property
    def orientation(self) -> int:
        return -1 if self.geometric_phase < 0 else 1

    def sector_phase(self, m: float) -> complex:
        return cmath.exp(-1j * self.dynamic_phase * m + 1j * self.geometric_phase * m * m)


def loop_geometry(schedule, g: float = 1.0) -> LoopGeometry:
    """Leading-order phase bookkeeping for an arbitrary displace/rotate/evolve list.

    During an evolution with frame amplitude beta = |beta| e^{-i phi_f}, the
    drive term is 2 g |beta| sigma_z(phi_f). The atoms' basis label phi_a
    (advanced by pi/2 per quarter turn) must agree with phi_f up to pi, in
    which case sigma_z(phi_f) = s sigma_z(phi_a) with s = +-1, and the force
    displaces the field by -i m g t e^{-i phi_a}.
    """
    beta = 0j
    turns = 0
    signs, legs = [], []
    dynamic = 0.0
    for step in schedule:
        if isinstance(step, DisplaceField):
            beta = _fold_displacement(beta, complex(step.beta))
        elif isinstance(step, RotateAtoms):
            turns += step.quarter_turns
        elif isinstance(step, Evolve):
            phi_a = turns * math.pi / 2
            if abs(beta) > 0:
                s = math.cos(-cmath.phase(beta) - phi_a)
                if abs(abs(s) - 1) > ALIGNMENT_TOL:
                    raise ValueError(
                        "atomic basis is not aligned with the drive axis; "
                        "the spin-dependent force is not diagonal"
                    )
                s = 1 if s > 0 else -1
            else:
                s = 1
            signs.append(s)
            legs.append(-1j * g * step.duration * cmath.exp(-1j * phi_a))
            dynamic += 2 * g * abs(beta) * step.duration * s
        else:
            raise TypeError(f"unknown protocol step {step!r}")
    geometric = 0.0
    for j in range(len(legs)):
        for i in range(j):
            geometric += (legs[j] * legs[i].conjugate()).imag
    return LoopGeometry(
        final_phi=register.reduce_phase(turns * math.pi / 2),
        leg_signs=tuple(signs),
        leg_displacements=tuple(legs),
        dynamic_phase=dynamic,
        geometric_phase=geometric,
        closure=sum(legs, 0j),
        net_displacement=beta,
        total_quarter_turns=turns,
    )


def _rotated_basis_transform(n_atoms: int) -> np.ndarray:
    """Columns are the phase-0 rotated product states, bit 1 meaning |->."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    return register.kron_all([h] * n_atoms)


def rwa_unitary(n_atoms: int, geometry: LoopGeometry) -> np.ndarray:
    """Atomic unitary of a closed loop, including the relabeling rotations."""
    if abs(geometry.closure) > 1e-9:
        raise ValueError("schedule leaves a state-dependent field displacement; atoms stay entangled")
    minus_count = np.array([bin(b).count("1") for b in range(2**n_atoms)])
    m = n_atoms / 2 - minus_count
    phases = np.exp(-1j * geometry.dynamic_phase * m + 1j * geometry.geometric_phase * m**2)
    h = _rotated_basis_transform(n_atoms)
    rot = register.rotation_g_to_ig(n_atoms, geometry.total_quarter_turns)
    return rot @ (h * phases) @ h.conj().T


def analytic_final_state(
    n_atoms: int, r: float, tau: float, *, schedule=None, initial_state=None, g: float = 1.0
) -> np.ndarray:
    """Leading-order final atomic ket.

    For the Bloch input this is
    2^{-N/2} sum_k C(N,k)^{1/2} exp(-i L m_k + i chi m_k^2) |Phi_{k, final_phi}>
    with m_k = N/2 - k, L and chi read off the schedule by :func:`loop_geometry`.
    """
    n_atoms = register.check_atoms(n_atoms)
    geometry = loop_geometry(schedule if schedule is not None else build_schedule(r, tau), g)
    ket = register.bloch_initial_state(n_atoms) if initial_state is None else np.asarray(initial_state, complex)
    return rwa_unitary(n_atoms, geometry) @ ket


def target_state(n_atoms: int, geometry: LoopGeometry) -> np.ndarray:
    """GHZ state the loop produces from the Bloch input at the ideal loop area."""
    return register.ghz_target(
        n_atoms, geometry.dynamic_phase / 8, geometry.final_phi, geometry.orientation
    )[2]


# -- engines -----------------------------------------------------------------


@dataclass(frozen=True)
class SegmentRecord:
    index: int
    step: ProtocolStep
    trace: float
    top_fock_population: float | None
    frame_amplitude: complex


@dataclass
class RunResult:
    config: ProtocolConfig
    geometry: LoopGeometry
    target: np.ndarray
    final_atoms: np.ndarray
    frame_amplitude: complex
    records: list[SegmentRecord]
    shape: JointShape | None = None
    final_joint: np.ndarray | None = None
    final_field: np.ndarray | None = None
    metrics: object = None

    @property
    def truncation_flag(self) -> bool:
        return any(
            rec.top_fock_population is not None and rec.top_fock_population > TRUNCATION_TOL
            for rec in self.records
        )

    @property
    def max_top_fock_population(self) -> float | None:
        pops = [rec.top_fock_population for rec in self.records if rec.top_fock_population is not None]
        return max(pops) if pops else None

    def lab_field(self) -> np.ndarray | None:
        """Final field state in the lab frame (displaced back by the frame amplitude)."""
        if self.final_field is None:
            return None
        if self.frame_amplitude == 0:
            return self.final_field
        return fockspace.displace_state(self.final_field, self.frame_amplitude)


def _fold_displacement(beta: complex, delta: complex) -> complex:
    # D(delta) D(beta) = phase * D(beta + delta); the phase cancels in rho
    return beta + delta


def _check_cutoff(config: ProtocolConfig, n_max: int) -> None:
    need = config.field_scale()
    if n_max < need:
        raise ConfigError(
            f"{config.engine.value} needs cutoff >= {need:.1f} for this configuration, got {n_max}"
        )


def _rotation_phases(shape: JointShape, quarter_turns: int) -> np.ndarray:
    d = np.diag(register.rotation_g_to_ig(shape.n_atoms, quarter_turns))
    return np.repeat(d, shape.field_dim)


def _evolve_exact(config: ProtocolConfig, schedule, atom_operator: np.ndarray):
    """Run the schedule on ``atom_operator (x) rho_th``; returns the final joint operator.

    Linear in ``atom_operator``, which may be any (not necessarily Hermitian)
    atomic matrix.
    """
    lab = config.engine is Engine.LAB_EXACT
    n_max = config.resolved_cutoff()
    shape = JointShape(config.n_atoms, n_max)
    rho = np.kron(atom_operator, fockspace.thermal_state(config.n_bar_th, n_max))
    beta = 0j
    records = []
    for index, step in enumerate(schedule):
        if isinstance(step, DisplaceField):
            if lab:
                d = embed_field_operator(fockspace.displacement_operator(step.beta, n_max), shape)
                rho = d @ rho @ d.conj().T
            else:
                beta = _fold_displacement(beta, complex(step.beta))
        elif isinstance(step, RotateAtoms):
            ph = _rotation_phases(shape, step.quarter_turns)
            rho = ph[:, None] * rho * ph.conj()[None, :]
        elif isinstance(step, Evolve):
            prop = cached_propagator(shape.n_atoms, n_max, config.g, 0j if lab else beta)
            rho = prop.apply(rho, step.duration)
        else:
            raise TypeError(f"unknown protocol step {step!r}")
        field_state = partial_trace_atoms(rho, shape)
        records.append(
            SegmentRecord(
                index=index,
                step=step,
                trace=float(np.trace(rho).real),
                top_fock_population=fockspace.top_level_population(field_state, TOP_LEVELS).real,
                frame_amplitude=beta,
            )
        )
    return shape, rho, beta, records


def run(config: ProtocolConfig, schedule=None) -> RunResult:
    """Execute the protocol. Truncation problems are reported, not raised.

    Check ``result.truncation_flag``; a :class:`fockspace.TruncationWarning`
    is also emitted when it is set.
    """
    schedule = build_schedule(config.r, config.tau) if schedule is None else list(schedule)
    geometry = loop_geometry(schedule, config.g)
    target = target_state(config.n_atoms, geometry)
    psi0 = config.initial_ket()

    if config.engine is Engine.ANALYTIC_RWA:
        psi = rwa_unitary(config.n_atoms, geometry) @ psi0
        beta = 0j
        records = []
        for index, step in enumerate(schedule):
            if isinstance(step, DisplaceField):
                beta = _fold_displacement(beta, complex(step.beta))
            records.append(SegmentRecord(index, step, 1.0, None, beta))
        return RunResult(
            config=config,
            geometry=geometry,
            target=target,
            final_atoms=np.outer(psi, psi.conj()),
            frame_amplitude=beta,
            records=records,
        )

    _check_cutoff(config, config.resolved_cutoff())
    shape, rho, beta, records = _evolve_exact(config, schedule, np.outer(psi0, psi0.conj()))
    rho = symmetrize(rho)
    result = RunResult(
        config=config,
        geometry=geometry,
        target=target,
        final_atoms=symmetrize(partial_trace_field(rho, shape)),
        frame_amplitude=beta,
        records=records,
        shape=shape,
        final_joint=rho,
        final_field=symmetrize(partial_trace_atoms(rho, shape)),
    )
    if result.truncation_flag:
        warnings.warn(
            f"top {TOP_LEVELS} Fock levels hold {result.max_top_fock_population:.2e} "
            f"(> {TRUNCATION_TOL:g}) at cutoff {shape.n_max}; raise the cutoff",
            fockspace.TruncationWarning,
            stacklevel=2,
        )
    return result


# -- two-qubit phase gate ----------------------------------------------------


@dataclass
class GatePhases:
    """Phases of the diagonal two-atom gate in the rotated product basis.

    ``raw`` holds the output phase of each input relative to ``+-``.
    ``phases`` is the normalized (theta_pp, theta_pm, theta_mp, theta_mm):
    theta_pm = 0, theta_pp = theta_mm = half the two-qubit invariant
    theta_pp + theta_mm - theta_pm - theta_mp taken in [0, 2 pi), and theta_mp
    is whatever is left after removing the same single-atom phase from both
    atoms (ideally 0).
    """

    raw: dict[str, float]
    phases: tuple[float, float, float, float]
    overlaps: dict[str, float]
    final_phi: float
    truncation_flag: bool = False
    flagged: bool = field(init=False)

    def __post_init__(self):
        self.flagged = bool(min(self.overlaps.values()) < GATE_OVERLAP_MIN)

    @property
    def conditional_phase(self) -> float:
        return self.phases[0]


def wrap_signed(x: float) -> float:
    """Angle in (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


def normalize_gate_phases(raw: dict[str, float]) -> tuple[float, float, float, float]:
    ref = raw["+-"]
    invariant = register.reduce_phase(raw["++"] + raw["--"] - ref - raw["-+"])
    cond = invariant / 2
    return (cond, 0.0, wrap_signed(raw["-+"] - ref), cond)


def expected_conditional_phase(geometry: LoopGeometry) -> float:
    """Normalized theta_pp predicted by the loop's geometric phase."""
    return register.reduce_phase(2 * geometry.geometric_phase) / 2


def extract_two_qubit_phases(config: ProtocolConfig, schedule=None) -> GatePhases:
    """Send each of |+-_1,0>|+-_2,0> through the protocol and read off its phase.

    For the exact engines the relative phase between inputs i and j is taken
    from the off-diagonal channel output E(|i><j|) projected on the expected
    outputs, so a thermal field is handled without purification.
    """
    if config.n_atoms != 2:
        raise ConfigError("gate extraction needs n_atoms = 2")
    schedule = build_schedule(config.r, config.tau) if schedule is None else list(schedule)
    geometry = loop_geometry(schedule, config.g)
    inputs = {lab: register.product_state(lab, 0.0) for lab in GATE_LABELS}
    outputs = {lab: register.product_state(lab, geometry.final_phi) for lab in GATE_LABELS}

    if config.engine is Engine.ANALYTIC_RWA:
        u = rwa_unitary(2, geometry)
        amps = {lab: np.vdot(outputs[lab], u @ inputs[lab]) for lab in GATE_LABELS}
        ref = amps["+-"]
        raw = {lab: cmath.phase(amps[lab] * ref.conjugate()) for lab in GATE_LABELS}
        overlaps = {lab: abs(amps[lab]) for lab in GATE_LABELS}
        return GatePhases(raw, normalize_gate_phases(raw), overlaps, geometry.final_phi)

    _check_cutoff(config, config.resolved_cutoff())
    raw, overlaps = {}, {}
    truncated = False
    ref_in, ref_out = inputs["+-"], outputs["+-"]
    for lab in GATE_LABELS:
        shape, rho, _, records = _evolve_exact(config, schedule, np.outer(inputs[lab], inputs[lab].conj()))
        truncated |= any(rec.top_fock_population > TRUNCATION_TOL for rec in records)
        atoms = partial_trace_field(rho, shape)
        overlaps[lab] = math.sqrt(max(np.vdot(outputs[lab], atoms @ outputs[lab]).real, 0.0))
        if lab == "+-":
            raw[lab] = 0.0
            continue
        shape, rho, _, _ = _evolve_exact(config, schedule, np.outer(inputs[lab], ref_in.conj()))
        coherence = np.vdot(outputs[lab], partial_trace_field(rho, shape) @ ref_out)
        raw[lab] = cmath.phase(coherence)
    return GatePhases(raw, normalize_gate_phases(raw), overlaps, geometry.final_phi, truncated)
