import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from catalyst_qed import fockspace as fs
from catalyst_qed import register as reg
from catalyst_qed._linalg import density_violations, purity, trace_distance
from catalyst_qed.dynamics import (
    CouplingParams,
    JointShape,
    Propagator,
    cached_propagator,
    displaced_frame_hamiltonian,
    embed_atom_operator,
    embed_field_operator,
    excitation_operator,
    joint_state,
    partial_trace_atoms,
    partial_trace_field,
    propagate,
    rwa_force_hamiltonian,
    tavis_cummings_hamiltonian,
)


def ket_dm(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def joint_ket(atom_ket, n, shape):
    return np.kron(atom_ket, fs.fock_state(n, shape.n_max))


def random_state(dim, rng, rank=3):
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def sector_projectors(n_atoms, phi):
    sz = reg.collective_sigma_z(n_atoms, phi)
    projs = []
    for k in range(n_atoms + 1):
        m = n_atoms / 2 - k
        # product over other eigenvalues, Lagrange style
        p = np.eye(2**n_atoms, dtype=complex)
        for k2 in range(n_atoms + 1):
            if k2 != k:
                m2 = n_atoms / 2 - k2
                p = p @ (sz - m2 * np.eye(2**n_atoms)) / (m - m2)
        projs.append(p)
    return projs


def test_joint_shape():
    s = JointShape(2, 9)
    assert (s.atom_dim, s.field_dim, s.dim) == (4, 10, 40)
    with pytest.raises(ValueError):
        JointShape(0, 5)
    with pytest.raises(ValueError):
        JointShape(2, 0)


def test_coupling_params():
    p = CouplingParams(g=2.0, tau=0.5, r=3.0, phi=-math.pi / 2)
    assert p.omega == 6.0
    assert p.phi == pytest.approx(3 * math.pi / 2)
    assert p.alpha == pytest.approx(3j)
    for bad in ({"g": 0}, {"tau": 0}, {"r": -1}):
        kwargs = {"g": 1.0, "tau": 1.0, "r": 1.0} | bad
        with pytest.raises(ValueError):
            CouplingParams(**kwargs)


def test_jaynes_cummings_block():
    shape = JointShape(1, 1)
    h = tavis_cummings_hamiltonian(shape, g=0.7)
    # index = atom * 2 + n with atom 0 = e
    expected = np.zeros((4, 4))
    expected[0, 3] = expected[3, 0] = 0.7
    np.testing.assert_array_equal(h, expected)


def test_tavis_cummings_is_hermitian_and_conserves_excitations():
    shape = JointShape(2, 10)
    h = tavis_cummings_hamiltonian(shape)
    assert np.array_equal(h, h.conj().T)
    x = excitation_operator(shape)
    assert np.max(np.abs(h @ x - x @ h)) < 1e-12


def test_displaced_frame_at_zero_amplitude():
    shape = JointShape(2, 6)
    np.testing.assert_array_equal(displaced_frame_hamiltonian(shape, 1.0, 0), tavis_cummings_hamiltonian(shape))


def test_displaced_frame_matches_conjugation():
    n_max = 40
    shape = JointShape(1, n_max)
    alpha = 1.0
    d = embed_field_operator(fs.displacement_operator(alpha, n_max), shape)
    lhs = d.conj().T @ tavis_cummings_hamiltonian(shape) @ d
    rhs = displaced_frame_hamiltonian(shape, 1.0, alpha)
    # compare on photon numbers well inside the cutoff
    keep = np.array([a * (n_max + 1) + n for a in range(2) for n in range(n_max // 2)])
    assert np.max(np.abs((lhs - rhs)[np.ix_(keep, keep)])) < 1e-6


def test_real_alpha_drive_is_pauli_x():
    shape = JointShape(1, 5)
    r = 2.5
    diff = displaced_frame_hamiltonian(shape, 1.0, r) - tavis_cummings_hamiltonian(shape)
    sx = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(diff, np.kron(r * sx, np.eye(6)), atol=1e-15)


def test_drive_equals_twice_omega_sigma_z():
    # g(alpha^* S^- + alpha S^+) = 2 g r sigma_z(phi) for alpha = r e^{-i phi}
    shape = JointShape(2, 3)
    for phi in (0.0, 0.8, math.pi / 2):
        p = CouplingParams(g=1.0, tau=1.0, r=1.7, phi=phi)
        diff = displaced_frame_hamiltonian(shape, 1.0, p.alpha) - tavis_cummings_hamiltonian(shape)
        expected = embed_atom_operator(2 * p.omega * reg.collective_sigma_z(2, phi), shape)
        np.testing.assert_allclose(diff, expected, atol=1e-14)


def test_rwa_force_single_atom_form():
    shape = JointShape(1, 8)
    a = fs.annihilation_operator(8)
    h = rwa_force_hamiltonian(shape, 1.0, 0.0)
    np.testing.assert_allclose(h, np.kron(reg.collective_sigma_z(1, 0.0), a + a.conj().T), atol=1e-15)


def test_rwa_force_commutes_with_sigma_z():
    shape = JointShape(2, 10)
    for phi in (0.0, 1.1):
        h = rwa_force_hamiltonian(shape, 1.0, phi)
        sz = embed_atom_operator(reg.collective_sigma_z(2, phi), shape)
        assert np.max(np.abs(h @ sz - sz @ h)) < 1e-12
        assert np.max(np.abs(h - h.conj().T)) < 1e-15


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("gt", [0.3, 1.0])
def test_rwa_force_displaces_each_sector(k, gt):
    n_max = 30
    phi = 0.6
    shape = JointShape(2, n_max)
    psi0 = joint_ket(reg.dicke_state(2, k, phi), 0, shape)
    u = expm(-1j * gt * rwa_force_hamiltonian(shape, 1.0, phi))
    out = u @ psi0
    amp = -1j * (1 - k) * gt * np.exp(-1j * phi)
    expected = np.kron(reg.dicke_state(2, k, phi), fs.coherent_state(amp, n_max))
    assert abs(abs(np.vdot(expected, out)) ** 2 - 1) < 1e-8


def test_rwa_force_keeps_sector_populations():
    rng = np.random.default_rng(3)
    shape = JointShape(2, 12)
    rho0 = random_state(shape.dim, rng)
    phi = 0.25
    prop = Propagator(rwa_force_hamiltonian(shape, 1.0, phi))
    projs = [embed_atom_operator(p, shape) for p in sector_projectors(2, phi)]
    before = [np.trace(p @ rho0).real for p in projs]
    for t in (0.4, 1.3, 2.0):
        rho = prop.apply(rho0, t)
        after = [np.trace(p @ rho).real for p in projs]
        np.testing.assert_allclose(after, before, atol=1e-12)


def test_propagate_zero_time_and_bad_inputs():
    shape = JointShape(1, 4)
    h = tavis_cummings_hamiltonian(shape)
    rho = ket_dm(joint_ket([1, 0], 0, shape))
    np.testing.assert_array_equal(propagate(h, 0.0, rho), rho)
    with pytest.raises(ValueError):
        propagate(h, -1.0, rho)
    bad = h.copy()
    bad[0, 3] += 1e-6
    with pytest.raises(ValueError):
        propagate(bad, 1.0, rho)


@pytest.mark.parametrize("gt", [0.0, 0.4, 1.0, 2.7])
def test_vacuum_rabi(gt):
    shape = JointShape(1, 5)
    rho = ket_dm(joint_ket([1, 0], 0, shape))
    out = propagate(tavis_cummings_hamiltonian(shape), gt, rho)
    p_e = partial_trace_field(out, shape)[0, 0].real
    assert abs(p_e - math.cos(gt) ** 2) < 1e-8


def test_propagator_is_unitary_and_cached():
    shape = JointShape(2, 8)
    prop = Propagator(displaced_frame_hamiltonian(shape, 1.0, 2 - 1j))
    u = prop.unitary(0.9)
    assert np.max(np.abs(u @ u.conj().T - np.eye(shape.dim))) < 1e-9
    assert prop.unitary(0.9) is u
    assert cached_propagator(2, 8, 1.0, 2 - 1j) is cached_propagator(2, 8, 1.0, 2 - 1j)


def test_propagate_preserves_trace_purity_and_validity():
    rng = np.random.default_rng(0)
    shape = JointShape(2, 10)
    h = tavis_cummings_hamiltonian(shape)
    rho = random_state(shape.dim, rng)
    out = propagate(h, 1.7, rho)
    assert abs(np.trace(out) - 1) < 1e-9
    assert abs(purity(out) - purity(rho)) < 1e-9
    assert density_violations(out, herm_tol=1e-10, trace_tol=1e-9, psd_tol=1e-8) == []


def test_propagate_is_linear():
    rng = np.random.default_rng(1)
    shape = JointShape(1, 10)
    prop = Propagator(displaced_frame_hamiltonian(shape, 1.0, 0.5j))
    r1, r2 = random_state(shape.dim, rng), random_state(shape.dim, rng)
    lhs = prop.apply((r1 + r2) / 2, 1.2)
    rhs = (prop.apply(r1, 1.2) + prop.apply(r2, 1.2)) / 2
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_excitation_number_conserved():
    shape = JointShape(2, 10)
    x = excitation_operator(shape)
    # support well below the ceiling: excitations <= 4
    psi = (joint_ket(reg.bloch_initial_state(2), 2, shape) + joint_ket([0, 1, 0, 0], 3, shape)) / math.sqrt(2)
    rho = ket_dm(psi)
    prop = Propagator(tavis_cummings_hamiltonian(shape))
    before = np.trace(x @ rho).real
    for t in (0.5, 1.0, 3.0):
        assert abs(np.trace(x @ prop.apply(rho, t)).real - before) < 1e-8


@settings(max_examples=8, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.1, 2.0))
def test_frame_equivalence(re, im, t):
    alpha = complex(re, im)
    n_max = 40
    shape = JointShape(1, n_max)
    d = embed_field_operator(fs.displacement_operator(alpha, n_max), shape)
    rho = np.kron(ket_dm([0.6, 0.8j]), fs.thermal_state(0.3, n_max))
    lab = propagate(tavis_cummings_hamiltonian(shape), t, rho)
    frame = d @ propagate(displaced_frame_hamiltonian(shape, 1.0, alpha), t, d.conj().T @ rho @ d) @ d.conj().T
    assert trace_distance(lab, frame) < 1e-6


def test_embedding_rules():
    shape = JointShape(1, 3)
    assert np.array_equal(embed_atom_operator(np.eye(2), shape), np.eye(8))
    assert np.array_equal(embed_field_operator(np.eye(4), shape), np.eye(8))
    a = np.array([[1, 2j], [-2j, 0]])
    b = fs.number_operator(3)
    np.testing.assert_array_equal(embed_atom_operator(a, shape) @ embed_field_operator(b, shape), np.kron(a, b))
    emb = embed_atom_operator(a, shape)
    assert np.array_equal(emb, emb.conj().T)
    with pytest.raises(ValueError):
        embed_atom_operator(np.eye(3), shape)
    with pytest.raises(ValueError):
        embed_field_operator(np.eye(2), shape)


def test_partial_traces():
    rng = np.random.default_rng(2)
    shape = JointShape(2, 4)
    ra, rf = random_state(4, rng), random_state(5, rng)
    joint = joint_state(ra, rf)
    np.testing.assert_allclose(partial_trace_field(joint, shape), ra, atol=1e-12)
    np.testing.assert_allclose(partial_trace_atoms(joint, shape), rf, atol=1e-12)

    small = JointShape(1, 1)
    bell = ket_dm((joint_ket([1, 0], 0, small) + joint_ket([0, 1], 1, small)) / math.sqrt(2))
    np.testing.assert_allclose(partial_trace_field(bell, small), np.eye(2) / 2, atol=1e-15)

    mixed = random_state(shape.dim, rng) * 0.7
    assert abs(np.trace(partial_trace_field(mixed, shape)) - np.trace(mixed)) < 1e-12
    red = partial_trace_atoms(mixed / 0.7, shape)
    assert density_violations(red, herm_tol=1e-12, trace_tol=1e-10) == []
    with pytest.raises(ValueError):
        partial_trace_field(np.eye(7), shape)
