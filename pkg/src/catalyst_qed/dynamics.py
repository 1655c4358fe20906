"""Joint atom-field Hamiltonians, unitary propagation and partial traces.

Joint matrices use the ordering atoms (x) field, so a joint index is
``atom_index * (n_max + 1) + photon_number``. Times are measured in units of
1/g unless a caller passes a physical ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fockspace, register
from ._linalg import HERMITICITY_TOL, hermiticity_error, symmetrize, unitary_from_eigh


@dataclass(frozen=True)
class JointShape:
    n_atoms: int
    n_max: int

    def __post_init__(self):
        register.check_atoms(self.n_atoms)
        fockspace.check_cutoff(self.n_max)

    @property
    def atom_dim(self) -> int:
        return 2**self.n_atoms

    @property
    def field_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.atom_dim * self.field_dim


@dataclass(frozen=True)
class CouplingParams:
    """Coupling g, segment time tau, drive amplitude r and its phase phi.

    ``omega`` is always r * g, the Rabi frequency of the classical drive seen
    by each atom in the displaced frame.
    """

    g: float
    tau: float
    r: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g!r}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not self.r >= 0:
            raise ValueError(f"r must be non-negative, got {self.r!r}")
        object.__setattr__(self, "phi", register.reduce_phase(self.phi))

    @property
    def omega(self) -> float:
        return self.r * self.g

    @property
    def alpha(self) -> complex:
        return self.r * complex(math.cos(self.phi), -math.sin(self.phi))


def embed_atom_operator(m: np.ndarray, shape: JointShape) -> np.ndarray:
    if m.shape != (shape.atom_dim, shape.atom_dim):
        raise ValueError(f"atomic operator has shape {m.shape}, expected {(shape.atom_dim,) * 2}")
    return np.kron(m, np.eye(shape.field_dim))


def embed_field_operator(m: np.ndarray, shape: JointShape) -> np.ndarray:
    if m.shape != (shape.field_dim, shape.field_dim):
        raise ValueError(f"field operator has shape {m.shape}, expected {(shape.field_dim,) * 2}")
    return np.kron(np.eye(shape.atom_dim), m)


def tavis_cummings_hamiltonian(shape: JointShape, g: float = 1.0) -> np.ndarray:
    """sum_j g (a^dagger S_j^- + a S_j^+) on the truncated joint space."""
    a = fockspace.annihilation_operator(shape.n_max)
    h = np.zeros((shape.dim, shape.dim), dtype=complex)
    for j in range(shape.n_atoms):
        h += np.kron(register.raising(shape.n_atoms, j), a)
    h *= g
    return h + h.conj().T


def displaced_frame_hamiltonian(shape: JointShape, g: float, alpha: complex) -> np.ndarray:
    """Tavis-Cummings coupling to the shifted field a + alpha.

    Equals D^dagger(alpha) H D(alpha): the extra piece is the classical drive
    sum_j g (alpha^* S_j^- + alpha S_j^+) acting on the atoms only.
    """
    alpha = complex(alpha)
    drive = sum(alpha * register.raising(shape.n_atoms, j) for j in range(shape.n_atoms))
    drive = g * (drive + drive.conj().T)
    return tavis_cummings_hamiltonian(shape, g) + embed_atom_operator(drive, shape)


def rwa_force_hamiltonian(shape: JointShape, g: float, phi: float) -> np.ndarray:
    """Spin-dependent force g (e^{-i phi} a^dagger + e^{i phi} a) (x) sigma_z(phi).

    Leading-order displaced-frame coupling once the terms rotating at 2 r g are
    dropped. For a Dicke sector with eigenvalue m the field is displaced by
    -i m g t e^{-i phi}.
    """
    a = fockspace.annihilation_operator(shape.n_max)
    quad = np.exp(-1j * phi) * a.conj().T + np.exp(1j * phi) * a
    return g * np.kron(register.collective_sigma_z(shape.n_atoms, phi), quad)


def excitation_operator(shape: JointShape) -> np.ndarray:
    """a^dagger a + sum_j |e_j><e_j|, conserved by the Tavis-Cummings coupling."""
    return embed_field_operator(fockspace.number_operator(shape.n_max), shape) + embed_atom_operator(
        register.excited_number(shape.n_atoms), shape
    )


@dataclass
class Propagator:
    """exp(-i H t) for one Hermitian H, diagonalized once and reused for any t."""

    hamiltonian: np.ndarray
    evals: np.ndarray = field(init=False, repr=False)
    evecs: np.ndarray = field(init=False, repr=False)
    _unitaries: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        err = hermiticity_error(self.hamiltonian)
        if err > HERMITICITY_TOL:
            raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^dagger| = {err:.3g})")
        self.evals, self.evecs = np.linalg.eigh(symmetrize(self.hamiltonian))

    def unitary(self, t: float) -> np.ndarray:
        t = float(t)
        if t not in self._unitaries:
            self._unitaries[t] = unitary_from_eigh(self.evals, self.evecs, t)
        return self._unitaries[t]

    def apply(self, rho: np.ndarray, t: float) -> np.ndarray:
        """U rho U^dagger. Linear in rho and valid for non-Hermitian operators too."""
        if t < 0:
            raise ValueError(f"propagation time must be >= 0, got {t!r}")
        if t == 0:
            return rho.copy()
        u = self.unitary(t)
        return u @ rho @ u.conj().T


def propagate(h: np.ndarray, t: float, rho: np.ndarray) -> np.ndarray:
    return Propagator(h).apply(rho, t)


@lru_cache(maxsize=16)
def cached_propagator(n_atoms: int, n_max: int, g: float, alpha: complex) -> Propagator:
    """Propagator for the displaced-frame Hamiltonian, shared across runs.

    ``alpha = 0`` gives the lab-frame Tavis-Cummings Hamiltonian.
    """
    shape = JointShape(n_atoms, n_max)
    if alpha == 0:
        return Propagator(tavis_cummings_hamiltonian(shape, g))
    return Propagator(displaced_frame_hamiltonian(shape, g, alpha))


def _split(rho: np.ndarray, shape: JointShape) -> np.ndarray:
    if rho.shape != (shape.dim, shape.dim):
        raise ValueError(f"joint operator has shape {rho.shape}, expected {(shape.dim,) * 2}")
    return rho.reshape(shape.atom_dim, shape.field_dim, shape.atom_dim, shape.field_dim)


def partial_trace_field(rho: np.ndarray, shape: JointShape) -> np.ndarray:
    """Reduced atomic state."""
    return np.einsum("afbf->ab", _split(rho, shape))


def partial_trace_atoms(rho: np.ndarray, shape: JointShape) -> np.ndarray:
    """Reduced field state."""
    return np.einsum("anam->nm", _split(rho, shape))


def joint_state(rho_atoms: np.ndarray, rho_field: np.ndarray) -> np.ndarray:
    return np.kron(rho_atoms, rho_field)
