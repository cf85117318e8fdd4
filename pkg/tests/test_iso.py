import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermibundle import bundle as B
from fermibundle import confspace as C
from fermibundle import iso
from fermibundle import perm as P
from fermibundle.bundle import Frame
from fermibundle.errors import InvalidFrameError, SymmetryError


def random_complex(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


@pytest.fixture(scope="module")
def fermi33():
    pair = C.build_pair(C.LatticeBox.cube(2, 3), 2)
    fb = B.bundle_from_character(pair)
    return pair, fb, iso.canonical_frame(fb, pair)


@pytest.fixture(scope="module")
def fermi3():
    pair = C.build_pair(C.LatticeBox.cube(2, 3), 3)
    fb = B.bundle_from_character(pair)
    return pair, fb, iso.canonical_frame(fb, pair)


def test_product_function_antisymmetrized(fermi33):
    pair, _, _ = fermi33
    g = pair.ordered
    rng = np.random.default_rng(3)
    f1, f2 = rng.normal(size=g.box.n_sites), rng.normal(size=g.box.n_sites)
    prod = np.array([f1[a] * f2[b] for a, b in g.vertices])
    swapped = np.array([f2[a] * f1[b] for a, b in g.vertices])
    np.testing.assert_allclose(iso.symmetrize_projector(prod, g, "anti"), 0.5 * (prod - swapped), atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["anti", "sym"]))
def test_projector_idempotent_and_orthogonal(seed, kind):
    pair = C.build_pair(C.LatticeBox.cube(2, 3), 3)
    g = pair.ordered
    f = random_complex(np.random.default_rng(seed), g.n_vertices)
    once = iso.symmetrize_projector(f, g, kind)
    assert np.max(np.abs(iso.symmetrize_projector(once, g, kind) - once)) <= 1e-14
    other = "sym" if kind == "anti" else "anti"
    assert np.max(np.abs(iso.symmetrize_projector(once, g, other))) <= 1e-14


def test_canonical_frame_values(fermi33):
    pair, _, frame = fermi33
    vals = frame.scalar()
    for v, tup in enumerate(pair.ordered.vertices):
        assert vals[v] == (1 if tup[0] < tup[1] else -1)


def test_map_U_delta_section(fermi33):
    pair, _, frame = fermi33
    q = pair.quotient.index_of([(0, 1), (2, 0)])
    psi = np.zeros(pair.quotient.n_vertices)
    psi[q] = 1.0
    f = iso.map_U(psi, frame, pair)
    a = pair.ordered.index_of([(0, 1), (2, 0)])
    b = pair.ordered.index_of([(2, 0), (0, 1)])
    assert abs(f[a] - 1 / math.sqrt(2)) < 1e-15 and abs(f[b] + 1 / math.sqrt(2)) < 1e-15
    rest = np.delete(f, [a, b])
    assert np.all(rest == 0)


@pytest.mark.parametrize("which", ["fermi33", "fermi3"])
def test_map_U_isometry_and_antisymmetry(which, request):
    pair, _, frame = request.getfixturevalue(which)
    rng = np.random.default_rng(7)
    for _ in range(100):
        psi = random_complex(rng, pair.quotient.n_vertices)
        f = iso.map_U(psi, frame, pair)
        nq = iso.weighted_norm(psi, pair.quotient)
        assert abs(iso.weighted_norm(f, pair.ordered) - nq) <= 1e-12 * nq
        assert iso.symmetry_residual(f, pair.ordered, "anti") == 0.0


def test_map_U_respects_spacing():
    pair = C.build_pair(C.LatticeBox.cube(2, 3, spacing=0.3), 2)
    fb = B.bundle_from_character(pair)
    frame = iso.canonical_frame(fb, pair)
    psi = random_complex(np.random.default_rng(0), pair.quotient.n_vertices)
    f = iso.map_U(psi, frame, pair)
    assert pair.ordered.measure == pair.quotient.measure == 0.3 ** 4
    assert abs(iso.weighted_inner(f, f, pair.ordered) - iso.weighted_inner(psi, psi, pair.quotient)) < 1e-12


def test_map_U_rejects_bad_frame(fermi33):
    pair, fb, frame = fermi33
    bad = Frame(frame.bundle, np.ones_like(frame.values))
    with pytest.raises(InvalidFrameError):
        iso.map_U(np.zeros(pair.quotient.n_vertices), bad, pair)


def test_canonical_frame_requires_matching_rep(fermi33):
    pair, _, _ = fermi33
    with pytest.raises(InvalidFrameError):
        iso.canonical_frame(B.bundle_from_character(pair, "trivial"), pair)


def test_trivialized_frame_equals_canonical(fermi33):
    pair, fb, frame = fermi33
    triv = B.trivialize(B.pullback(fb, pair))
    np.testing.assert_array_equal(triv.values, frame.values)


def test_round_trip(fermi3):
    pair, _, frame = fermi3
    rng = np.random.default_rng(11)
    for _ in range(20):
        psi = random_complex(rng, pair.quotient.n_vertices)
        back, spread = iso.map_U_inverse(iso.map_U(psi, frame, pair), frame, pair, return_spread=True)
        assert np.max(np.abs(back - psi)) <= 1e-12
        assert spread <= 1e-12
        f = iso.map_U(psi, frame, pair)
        assert np.max(np.abs(iso.map_U(iso.map_U_inverse(f, frame, pair), frame, pair) - f)) <= 1e-12
    zero = iso.map_U_inverse(np.zeros(pair.ordered.n_vertices), frame, pair)
    assert np.all(zero == 0)


def test_inverse_rejects_non_antisymmetric(fermi33):
    pair, _, frame = fermi33
    f = np.random.default_rng(0).normal(size=pair.ordered.n_vertices)
    with pytest.raises(SymmetryError):
        iso.map_U_inverse(f, frame, pair)


def test_frame_sign_law(fermi3):
    pair, _, frame = fermi3
    vals = frame.scalar()
    perms, table = pair.ordered.action_table
    for s, p in enumerate(perms):
        assert np.array_equal(vals[table[s]], P.sign(p) * vals)


def test_two_frames_differ_by_global_phase(fermi33):
    pair, fb, frame = fermi33
    rng = np.random.default_rng(5)
    phase = np.exp(2j * np.pi * rng.random())
    other = Frame(frame.bundle, phase * frame.values)
    for _ in range(10):
        psi = random_complex(rng, pair.quotient.n_vertices)
        u1 = iso.map_U(psi, frame, pair)
        u2 = iso.map_U(psi, other, pair)
        assert abs(abs(np.vdot(u1, u2)) - np.vdot(psi, psi).real) < 1e-10


def test_matrix_form_matches_function_form(fermi3):
    pair, _, frame = fermi3
    U = iso.map_U_matrix(frame, pair)
    assert U.nnz == pair.ordered.n_vertices
    psi = random_complex(np.random.default_rng(2), pair.quotient.n_vertices)
    np.testing.assert_allclose(U @ psi, iso.map_U(psi, frame, pair), atol=1e-15)
    G = (U.conj().T @ U).toarray()
    assert np.max(np.abs(G - np.eye(pair.quotient.n_vertices))) <= 1e-12


def test_descent(fermi3):
    pair = fermi3[0]
    rng = np.random.default_rng(4)
    psi = random_complex(rng, pair.quotient.n_vertices)
    f = iso.descent(psi, pair)
    assert iso.symmetry_residual(f, pair.ordered, "sym") == 0
    assert abs(np.linalg.norm(f) - np.linalg.norm(psi)) < 1e-12
    np.testing.assert_allclose(iso.descent_inverse(f, pair), psi, atol=1e-12)
    with pytest.raises(SymmetryError):
        iso.descent_inverse(iso.map_U(psi, fermi3[2], pair), pair)


@pytest.mark.parametrize("kind", ["anti", "sym"])
def test_subspace_basis_orthonormal(fermi3, kind):
    pair = fermi3[0]
    Bm, cells = iso.subspace_basis(pair, kind)
    assert len(cells) == pair.quotient.n_vertices
    G = (Bm.T @ Bm).toarray()
    assert np.max(np.abs(G - np.eye(len(cells)))) < 1e-14
    for col in Bm.T.toarray():
        assert iso.symmetry_residual(col, pair.ordered, kind) < 1e-15


def test_subspace_basis_with_collisions():
    pair = C.build_pair(C.LatticeBox.cube(1, 4), 2, collisions=True)
    Ba, ca = iso.subspace_basis(pair, "anti")
    Bs, cs = iso.subspace_basis(pair, "sym")
    assert len(ca) == math.comb(4, 2) and len(cs) == math.comb(4, 2) + 4
    assert np.max(np.abs((Bs.T @ Bs).toarray() - np.eye(len(cs)))) < 1e-14
    assert np.max(np.abs((Ba.T @ Bs).toarray())) < 1e-15
