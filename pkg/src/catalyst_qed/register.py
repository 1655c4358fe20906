"""N-atom two-level register.

Per atom the computational ordering is (|e>, |g>), and atom 1 is the most
significant tensor factor. The rotated basis at phase ``phi`` is

    |+_phi> = (|e> + e^{i phi}|g>) / sqrt(2),   |-_phi> = (|e> - e^{i phi}|g>) / sqrt(2).

Dicke states carry real, positive amplitudes on every rotated product state.
"""

from __future__ import annotations

import math
from functools import reduce
from itertools import combinations

import numpy as np

MAX_ATOMS = 12


def check_atoms(n_atoms: int) -> int:
    if isinstance(n_atoms, bool) or int(n_atoms) != n_atoms or not 1 <= n_atoms <= MAX_ATOMS:
        raise ValueError(f"atom count must be an integer in 1..{MAX_ATOMS}, got {n_atoms!r}")
    return int(n_atoms)


def reduce_phase(phi: float) -> float:
    """Map an angle into [0, 2 pi)."""
    out = math.fmod(float(phi), 2 * math.pi)
    if out < 0:
        out += 2 * math.pi
    # fmod can land exactly on 2 pi after the shift for tiny negative inputs
    return 0.0 if out >= 2 * math.pi else out


def kron_all(factors) -> np.ndarray:
    return reduce(np.kron, factors)


def rotated_basis_kets(phi: float) -> tuple[np.ndarray, np.ndarray]:
    phase = np.exp(1j * reduce_phase(phi))
    plus = np.array([1.0, phase]) / math.sqrt(2)
    minus = np.array([1.0, -phase]) / math.sqrt(2)
    return plus, minus


def product_state(signs, phi: float) -> np.ndarray:
    """Rotated product ket; ``signs`` holds '+'/'-' (or +1/-1) per atom."""
    plus, minus = rotated_basis_kets(phi)
    kets = []
    for s in signs:
        if s in ("+", 1):
            kets.append(plus)
        elif s in ("-", -1):
            kets.append(minus)
        else:
            raise ValueError(f"unknown single-atom label {s!r}")
    return kron_all(kets)


def dicke_state(n_atoms: int, k: int, phi: float) -> np.ndarray:
    """Symmetric state with ``k`` atoms in |-_phi> and the rest in |+_phi>."""
    n_atoms = check_atoms(n_atoms)
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= n_atoms:
        raise ValueError(f"k must be an integer in 0..{n_atoms}, got {k!r}")
    plus, minus = rotated_basis_kets(phi)
    ket = np.zeros(2**n_atoms, dtype=complex)
    for chosen in combinations(range(n_atoms), int(k)):
        ket += kron_all([minus if j in chosen else plus for j in range(n_atoms)])
    return ket / math.sqrt(math.comb(n_atoms, int(k)))


def bloch_initial_state(n_atoms: int) -> np.ndarray:
    """All atoms excited, |e>^N."""
    n_atoms = check_atoms(n_atoms)
    ket = np.zeros(2**n_atoms, dtype=complex)
    ket[0] = 1.0
    return ket


def embed_single_atom(op: np.ndarray, j: int, n_atoms: int) -> np.ndarray:
    """Place a 2x2 operator on atom ``j`` (0-based) of an ``n_atoms`` register."""
    factors = [np.eye(2, dtype=complex)] * n_atoms
    factors[j] = op
    return kron_all(factors)


def _collective(op: np.ndarray, n_atoms: int) -> np.ndarray:
    return sum(embed_single_atom(op, j, n_atoms) for j in range(n_atoms))


def single_sigma_z(phi: float) -> np.ndarray:
    plus, minus = rotated_basis_kets(phi)
    return 0.5 * (np.outer(plus, plus.conj()) - np.outer(minus, minus.conj()))


def collective_sigma_z(n_atoms: int, phi: float) -> np.ndarray:
    """Sum over atoms of (|+><+| - |-><-|)/2 in the basis at ``phi``.

    Spectrum is N/2 - k for k = 0..N with multiplicity C(N, k).
    """
    n_atoms = check_atoms(n_atoms)
    return _collective(single_sigma_z(phi), n_atoms)


def raising(n_atoms: int, j: int) -> np.ndarray:
    """S_j^+ = |e_j><g_j|."""
    return embed_single_atom(np.array([[0, 1], [0, 0]], dtype=complex), j, n_atoms)


def excited_number(n_atoms: int) -> np.ndarray:
    """Number of excited atoms, sum_j |e_j><e_j|."""
    n_atoms = check_atoms(n_atoms)
    return _collective(np.diag([1.0, 0.0]).astype(complex), n_atoms)


def rotation_g_to_ig(n_atoms: int, quarter_turns: int = 1) -> np.ndarray:
    """Tensor power of diag(1, i**quarter_turns); |g_j> -> i|g_j> for one turn.

    One turn advances the rotated-basis phase by pi/2 without any extra phase:
    |+-_phi> -> |+-_{phi + pi/2}>.
    """
    n_atoms = check_atoms(n_atoms)
    return kron_all([np.diag([1.0, 1j**quarter_turns])] * n_atoms)


def ghz_target(
    n_atoms: int, omega_tau: float, phi: float, orientation: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-branch GHZ target in the rotated basis at ``phi``.

    With c = exp(8 i omega_tau - i s N pi/2) and s = ``orientation``,

        branch_a = prod_j (|+> + c|->)/sqrt(2),  branch_b = prod_j (|+> - c|->)/sqrt(2),
        target   = (e^{i s pi/4} branch_a + e^{-i s pi/4} branch_b) / sqrt(2).

    ``orientation=-1`` is the mirror image produced when the phase-space loop
    is traversed the other way round (the geometric phase flips sign).
    """
    n_atoms = check_atoms(n_atoms)
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    plus, minus = rotated_basis_kets(phi)
    c = np.exp(1j * (8 * omega_tau - orientation * n_atoms * math.pi / 2))
    branch_a = kron_all([(plus + c * minus) / math.sqrt(2)] * n_atoms)
    branch_b = kron_all([(plus - c * minus) / math.sqrt(2)] * n_atoms)
    w = np.exp(1j * orientation * math.pi / 4)
    target = (w * branch_a + w.conjugate() * branch_b) / math.sqrt(2)
    return branch_a, branch_b, target


def reduced_single_atom(ket: np.ndarray, j: int = 0) -> np.ndarray:
    """Reduced density matrix of atom ``j`` for a pure register state."""
    n_atoms = int(round(math.log2(ket.size)))
    psi = np.moveaxis(ket.reshape([2] * n_atoms), j, 0).reshape(2, -1)
    return psi @ psi.conj().T
