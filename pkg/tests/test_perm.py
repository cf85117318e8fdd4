import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fermibundle import perm as P
from fermibundle.errors import ShapeError


def inversion_sign(images):
    """Independent oracle: parity of the inversion count."""
    inv = sum(1 for a, b in itertools.combinations(images, 2) if a > b)
    return -1 if inv % 2 else 1


def letter_sign(images):
    """Sign of a permutation given as images, via explicit bubble sort swaps."""
    seq = list(images)
    swaps = 0
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                swaps += 1
    return (-1) ** swaps


perms = st.integers(1, 8).flatmap(lambda n: st.permutations(list(range(1, n + 1)))).map(
    lambda imgs: P.Permutation(tuple(imgs)))


def same_size_pair(n_max=8):
    return st.integers(1, n_max).flatmap(lambda n: st.tuples(
        st.permutations(list(range(1, n + 1))), st.permutations(list(range(1, n + 1))))).map(
        lambda t: (P.Permutation(tuple(t[0])), P.Permutation(tuple(t[1]))))


def test_rejects_non_bijection():
    with pytest.raises(ValueError):
        P.Permutation((1, 1, 3))


def test_compose_identity_and_involution():
    p = P.from_cycles(4, (1, 3, 4))
    assert P.compose(P.identity(4), p) == p
    t = P.transposition(2, 1, 2)
    assert P.compose(t, t).is_identity()


def test_compose_against_index_chasing(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        p, q = P.random_permutation(n, rng), P.random_permutation(n, rng)
        table = {k: p.images[q.images[k - 1] - 1] for k in range(1, n + 1)}
        assert all(P.compose(p, q)(k) == table[k] for k in table)


def test_compose_size_mismatch():
    with pytest.raises(ShapeError):
        P.compose(P.identity(2), P.identity(3))


def test_sign_examples():
    assert P.sign(P.identity(5)) == 1
    assert P.sign(P.transposition(2, 1, 2)) == -1
    assert P.sign(P.from_cycles(3, (1, 2, 3))) == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_sign_homomorphism_exhaustive(n):
    allp = P.all_permutations(n)
    assert len(allp) == math.factorial(n)
    for p in allp:
        assert P.sign(p) == inversion_sign(p.images)
        for q in allp:
            assert P.sign(P.compose(p, q)) == P.sign(p) * P.sign(q)


def test_sign_homomorphism_random(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        p, q = P.random_permutation(n, rng), P.random_permutation(n, rng)
        assert P.sign(P.compose(p, q)) == P.sign(p) * P.sign(q)


@given(perms)
def test_sign_matches_inversions(p):
    assert P.sign(p) == inversion_sign(p.images)


@given(same_size_pair())
def test_matrix_is_homomorphism(pq):
    p, q = pq
    np.testing.assert_array_equal(P.compose(p, q).matrix(), p.matrix() @ q.matrix())
    assert round(np.linalg.det(p.matrix())) == P.sign(p)


@given(same_size_pair())
def test_act_is_right_action(pq):
    sigma, tau = pq
    seq = tuple(range(10, 10 + sigma.n))
    assert tau.act(sigma.act(seq)) == P.compose(sigma, tau).act(seq)


@given(perms)
def test_inverse(p):
    assert P.compose(p, p.inverse()).is_identity()
    assert P.compose(p.inverse(), p).is_identity()


def test_block_sign_examples():
    t = P.transposition(2, 1, 2)
    assert P.block_sign(t, 3) == -1
    assert P.block_sign(t, 2) == 1
    for d in (1, 2, 3, 4):
        assert P.block_sign(P.identity(3), d) == 1


@pytest.mark.parametrize("d", [1, 2, 3])
def test_block_sign_letter_level(d):
    for p in P.all_permutations(3):
        assert P.block_sign(p, d) == letter_sign(P.expand_blocks(p, d).images)


def test_braid_to_permutation():
    assert P.braid_to_permutation(P.BraidWord(2, ((1, 1),))) == P.transposition(2, 1, 2)
    assert P.braid_to_permutation(P.BraidWord(2, ((1, 1), (1, 1)))).is_identity()
    w = P.BraidWord(3, ((1, 1), (2, 1)))
    expected = P.compose(P.transposition(3, 1, 2), P.transposition(3, 2, 3))
    assert P.braid_to_permutation(w) == expected
    assert P.sign(expected) == 1 and not expected.is_identity()


def test_braid_character_examples():
    beta = 0.37
    s1 = P.BraidWord(2, ((1, 1),))
    assert abs(P.braid_character(s1, beta) - np.exp(1j * beta)) < 1e-15
    assert abs(P.braid_character(s1, np.pi) + 1) < 1e-15
    assert P.braid_character(P.BraidWord(4), 1.3) == 1


words = st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(1, n - 1), st.sampled_from([1, -1])), max_size=12),
    st.lists(st.tuples(st.integers(1, n - 1), st.sampled_from([1, -1])), max_size=12)))


@given(words, st.floats(-10, 10))
def test_braid_character_homomorphism(w, beta):
    n, a, b = w
    w1, w2 = P.BraidWord(n, tuple(a)), P.BraidWord(n, tuple(b))
    lhs = P.braid_character(w1 + w2, beta)
    assert abs(lhs - P.braid_character(w1, beta) * P.braid_character(w2, beta)) < 1e-12
    assert (w1 + w2).free_reduce().exponent_sum() == (w1 + w2).exponent_sum()
    assert P.braid_to_permutation(w1.free_reduce()) == P.braid_to_permutation(w1)
    assert P.braid_to_permutation(w1 + w1.inverse()).is_identity()
