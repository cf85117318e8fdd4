import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermibundle import bundle as B
from fermibundle import confspace as C
from fermibundle import iso
from fermibundle import potentials
from fermibundle import triple as T
from fermibundle.errors import DimensionError, ShapeError, SymmetryError


def unit(v):
    return v / np.linalg.norm(v)


def random_state(rng, n):
    return unit(rng.normal(size=n) + 1j * rng.normal(size=n))


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="module")
def setup():
    box = C.LatticeBox.cube(2, 3)
    pair = C.build_pair(box, 2)
    V = potentials.combine(potentials.onsite_random(box, seed=2), potentials.pairwise(0.7))
    fb = B.bundle_from_character(pair)
    tF = T.make_bundle_triple(fb, V)
    tA = T.make_subspace_triple(pair, V, symmetry="anti")
    frame = iso.canonical_frame(fb, pair)
    U = (tA.embedding.T @ iso.map_U_matrix(frame, pair)).toarray()
    return pair, V, tF, tA, U


def test_params_validation():
    with pytest.raises(ValueError):
        T.PhysicalParams(hbar=0)
    with pytest.raises(ValueError):
        T.PhysicalParams(spacing=-1.0)


def test_pvm_axioms(setup):
    _, _, tF, tA, U = setup
    for t in (tF, tA, tA.conjugated(U)):
        Ps = [t.Q.projection(lab) for lab in t.Q.labels]
        total = np.zeros((t.dim, t.dim), dtype=complex)
        for i, Pi in enumerate(Ps):
            assert np.max(np.abs(Pi @ Pi - Pi)) <= 1e-12
            assert np.max(np.abs(Pi - Pi.conj().T)) <= 1e-12
            for Pj in Ps[i + 1:i + 4]:
                assert np.max(np.abs(Pi @ Pj)) <= 1e-12
            total += Pi
        assert np.max(np.abs(total - np.eye(t.dim))) <= 1e-12
        assert t.hermiticity_residual() <= 1e-12


def test_pvm_rejects_bad_cells():
    with pytest.raises(ValueError):
        T.PVM(["a", "b"], [[0], [0]], 2)
    with pytest.raises(ShapeError):
        T.PVM(["a"], [[0], [1]], 2)


def test_single_particle_bundle_triple():
    pair = C.build_pair(C.LatticeBox.cube(2, 3), 1)
    t = T.make_bundle_triple(B.trivial_bundle(pair.quotient))
    A = pair.quotient.adjacency().toarray()
    np.testing.assert_allclose(t.dense_H(), 0.5 * (np.diag(A.sum(1)) - A), atol=1e-15)
    allidx = np.sort(np.concatenate(t.Q.cells))
    np.testing.assert_array_equal(allidx, np.arange(t.dim))


def test_single_particle_subspace_equals_ordered():
    pair = C.build_pair(C.LatticeBox.cube(2, 3), 1)
    V = potentials.onsite_random(pair.box, seed=1)
    to = T.make_ordered_triple(pair, V)
    for kind in ("anti", "sym"):
        ts = T.make_subspace_triple(pair, V, symmetry=kind)
        np.testing.assert_allclose(ts.dense_H(), to.dense_H(), atol=1e-15)


def test_subspace_dimension(setup):
    pair, _, _, tA, _ = setup
    assert tA.dim == pair.quotient.n_vertices


def test_spectra_agree(setup):
    _, _, tF, tA, _ = setup
    assert np.max(np.abs(tF.spectrum() - tA.spectrum())) < 1e-10


def test_asymmetric_potential_rejected(setup):
    pair = setup[0]
    with pytest.raises(SymmetryError):
        T.make_subspace_triple(pair, lambda X: X[0][0], symmetry="anti")


def test_verify_identity_and_iso(setup):
    _, _, tF, tA, U = setup
    w = T.verify_equivalence(tA, tA, np.eye(tA.dim))
    assert w.h_residual == 0 and w.q_residual == 0
    w = T.verify_equivalence(tF, tA, U, tol=1e-10)
    assert isinstance(w, T.EquivalenceWitness)


def test_verify_random_unitary_fails(setup):
    _, _, _, tA, _ = setup
    W = random_unitary(np.random.default_rng(0), tA.dim)
    out = T.verify_equivalence(tA, tA, W)
    assert isinstance(out, T.NoEquivalence)
    assert out.residuals["Q_max"] > 0.1


def test_verify_shape_errors(setup):
    pair, V, tF, tA, U = setup
    small = T.make_bundle_triple(B.bundle_from_character(C.build_pair(C.LatticeBox.cube(2, 2), 2)))
    with pytest.raises(ShapeError):
        T.verify_equivalence(tA, small, np.eye(tA.dim))


def test_solve_recovers_iso_map(setup):
    _, _, tF, tA, U = setup
    w = T.solve_equivalence(tF, tA)
    assert isinstance(w, T.EquivalenceWitness)
    k = np.unravel_index(np.argmax(np.abs(U)), U.shape)
    phase = w.U[k] / U[k]
    assert abs(abs(phase) - 1) < 1e-12
    assert np.max(np.abs(w.U - phase * U)) < 1e-10


def test_solve_self_is_phase_identity(setup):
    _, _, _, tA, _ = setup
    w = T.solve_equivalence(tA, tA)
    D = np.diag(w.U)
    assert np.max(np.abs(w.U - np.diag(D))) < 1e-12
    assert np.max(np.abs(D - D[0])) < 1e-12


def test_solve_scrambled_counterexample(setup):
    _, _, _, tA, _ = setup
    W = random_unitary(np.random.default_rng(1), tA.dim)
    scrambled = T.QuantumTriple(W @ tA.dense_H() @ W.conj().T, tA.Q)
    assert np.max(np.abs(np.linalg.eigvalsh(scrambled.dense_H()) - tA.spectrum())) < 1e-10
    out = T.solve_equivalence(tA, scrambled)
    assert isinstance(out, T.NoEquivalence) and out.status == "not-equivalent"
    assert out.obstruction
    json.dumps(out.to_json())


def test_solve_phase_obstruction():
    # a triangle with a flux cannot be gauged into the flux-free triangle
    Q = T.PVM([0, 1, 2], [[0], [1], [2]], 3)
    H1 = -np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=complex)
    H2 = H1.copy()
    H2[0, 1] *= 1j
    H2[1, 0] *= -1j
    out = T.solve_equivalence(T.QuantumTriple(H1, Q), T.QuantumTriple(H2, Q))
    assert isinstance(out, T.NoEquivalence)
    assert out.reason.startswith("coupling phase")


def test_solve_rank_mismatch_and_unsupported():
    H = np.diag([1.0, 2.0, 3.0])
    t1 = T.QuantumTriple(H, T.PVM(["a", "b"], [[0], [1, 2]], 3))
    t2 = T.QuantumTriple(H, T.PVM(["a", "b"], [[0, 1], [2]], 3))
    assert T.solve_equivalence(t1, t2).reason == "cell rank mismatch"
    assert T.solve_equivalence(t1, t1).status == "unsupported"


def test_solve_disconnected_reports_components():
    H = np.diag([1.0, 2.0])
    Q = T.PVM(["a", "b"], [[0], [1]], 2)
    w = T.solve_equivalence(T.QuantumTriple(H, Q), T.QuantumTriple(H, Q))
    assert isinstance(w, T.EquivalenceWitness)
    assert any("components" in n for n in w.notes)


def test_equivalence_relation(setup):
    _, _, tF, tA, U = setup
    W = np.diag(np.exp(2j * np.pi * np.random.default_rng(3).random(tA.dim)))
    tB = tA.conjugated(W)
    assert isinstance(T.verify_equivalence(tF, tB, W @ U), T.EquivalenceWitness)
    assert isinstance(T.verify_equivalence(tA, tF, U.conj().T), T.EquivalenceWitness)


def test_evolve(setup):
    _, _, tF, tA, U = setup
    rng = np.random.default_rng(8)
    psi = random_state(rng, tF.dim)
    np.testing.assert_array_equal(T.evolve(tF, psi, 0.0), psi)
    for time in (0.1, 1.0, 10.0):
        out = T.evolve(tF, psi, time)
        assert abs(np.linalg.norm(out) - 1) <= 1e-12
        lhs = T.evolve(tA, U @ psi, time)
        assert np.max(np.abs(lhs - U @ out)) < 1e-10


def test_evolve_krylov_path(setup, monkeypatch):
    _, _, tF, _, _ = setup
    psi = random_state(np.random.default_rng(9), tF.dim)
    dense = T.evolve(tF, psi, 1.3)
    monkeypatch.setattr(T, "DENSE_EVOLVE_MAX", 1)
    krylov = T.evolve(tF, psi, 1.3)
    assert np.max(np.abs(dense - krylov)) < 1e-10


def test_evolve_warns_on_unnormalized(setup):
    _, _, tF, _, _ = setup
    with pytest.warns(UserWarning):
        T.evolve(tF, np.ones(tF.dim), 0.5)


def test_born(setup):
    _, _, tF, tA, U = setup
    psi = np.zeros(tF.dim, dtype=complex)
    psi[4] = 1
    rho = T.born_distribution(tF, psi)
    assert rho[4] == 1 and rho.sum() == 1
    rng = np.random.default_rng(10)
    for _ in range(5):
        psi = random_state(rng, tF.dim)
        r1 = T.born_distribution(tF, psi, 0.7)
        assert np.all(r1 >= 0) and abs(r1.sum() - 1) <= 1e-12
        r2 = T.born_distribution(tA, U @ psi, 0.7)
        assert np.max(np.abs(r1 - r2)) <= 1e-12


def coord(lab):
    return float(lab[0] % 3 + lab[1] % 3)


def test_velocity_trivial_cases(setup):
    _, _, tF, _, _ = setup
    rng = np.random.default_rng(11)
    psi = random_state(rng, tF.dim)
    vf = T.velocity_form(tF, psi, lambda lab: 2.5)
    assert np.max(np.abs(vf.values)) < 1e-13
    real_psi = unit(rng.normal(size=tF.dim))
    assert np.max(np.abs(T.velocity_form(tF, real_psi, coord).values)) < 1e-13


def test_velocity_flags_empty_cells(setup):
    _, _, tF, _, _ = setup
    psi = np.zeros(tF.dim, dtype=complex)
    psi[:3] = unit(np.array([1, 1j, 1]))
    vf = T.velocity_form(tF, psi, coord)
    assert vf.undefined[3:].all() and not vf.undefined[:3].any()
    assert np.isnan(vf.values[3:]).all()


def test_velocity_invariance(setup):
    _, _, tF, tA, U = setup
    rng = np.random.default_rng(12)
    psi = random_state(rng, tF.dim)
    v1 = T.velocity_form(tF, psi, coord)
    v2 = T.velocity_form(tA, U @ psi, coord)
    assert np.max(np.abs(v1.values - v2.values)) <= 1e-12
    W = random_unitary(rng, tF.dim)
    v3 = T.velocity_form(tF.conjugated(W), W @ psi, coord)
    # dividing by small cell densities amplifies roundoff, so compare on the scale max(1, |v|)
    assert np.max(np.abs(v1.values - v3.values) / np.maximum(1, np.abs(v1.values))) <= 1e-12
    assert np.max(np.abs(v1.numerators - v3.numerators)) <= 1e-12


def test_velocity_telescopes_to_expectation_derivative(setup):
    _, _, tF, _, _ = setup
    psi = random_state(np.random.default_rng(13), tF.dim)
    fv = np.array([coord(lab) for lab in tF.Q.labels])
    vf = T.velocity_form(tF, psi, fv)

    def expect(t):
        return float(np.dot(T.born_distribution(tF, psi, t), fv))

    h = 1e-5
    fd = (expect(h) - expect(-h)) / (2 * h)
    assert abs(vf.numerators.sum() - fd) < 1e-6


def test_d1_demo_single_particle():
    rep = T.d1_boundary_demo(C.LatticeBox.cube(1, 6), 1)
    assert rep["anti_vs_dirichlet"] < 1e-12 and rep["sym_vs_neumann"] < 1e-12
    assert rep["spectra"]["anti"] == rep["spectra"]["sym"]


@pytest.mark.parametrize("potential", ["zero", "onsite", "onsite+pair:0.4:gaussian"])
def test_d1_demo_two_particles(potential):
    box = C.LatticeBox.cube(1, 6)
    rep = T.d1_boundary_demo(box, 2, potentials.parse_potential(potential, box, seed=3))
    assert rep["anti_vs_dirichlet"] <= 1e-10
    assert rep["sym_vs_neumann"] <= 1e-10
    assert len(rep["spectra"]["anti"]) == 15 and len(rep["spectra"]["sym"]) == 21


def test_d1_demo_errors():
    with pytest.raises(DimensionError):
        T.d1_boundary_demo(C.LatticeBox.cube(2, 3))


def test_triple_json(setup):
    tA = setup[3]
    data = tA.to_json()
    assert data["dim"] == tA.dim and len(data["cells"]) == tA.dim
    json.dumps(data)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_born_and_velocity_invariant_under_random_equivalence(seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    H = H + H.conj().T
    t = T.QuantumTriple(H, T.PVM(list(range(6)), [[k] for k in range(6)], 6))
    W = random_unitary(rng, 6)
    tw = t.conjugated(W)
    psi = random_state(rng, 6)
    f = rng.normal(size=6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        np.testing.assert_allclose(T.born_distribution(tw, W @ psi, 0.4),
                                   T.born_distribution(t, psi, 0.4), atol=1e-12)
    v1 = T.velocity_form(t, psi, f)
    v2 = T.velocity_form(tw, W @ psi, f)
    assert np.max(np.abs(v1.values - v2.values) / np.maximum(1, np.abs(v1.values))) <= 1e-12
    assert np.max(np.abs(v1.numerators - v2.numerators)) <= 1e-12
