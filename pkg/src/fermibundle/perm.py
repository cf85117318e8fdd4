"""Permutations of {1..N}, braid words, and their 1-dimensional characters.

Permutations are stored 1-based.  ``compose(p, q)`` is the map k -> p(q(k)).
The action on an ordered tuple is ``p.act(x) = (x[p(1)], ..., x[p(N)])``,
which is a right action: ``p.act(q.act(x)) == compose(q, p).act(x)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(k) for k in self.images)
        if sorted(imgs) != list(range(1, len(imgs) + 1)):
            raise ValueError(f"not a permutation of 1..{len(imgs)}: {imgs}")
        object.__setattr__(self, "images", imgs)

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for k, img in enumerate(self.images, start=1):
            inv[img - 1] = k
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return self.images == tuple(range(1, self.n + 1))

    def act(self, seq: Sequence):
        """Reorder ``seq`` as (seq[p(1)], ..., seq[p(N)])."""
        if len(seq) != self.n:
            raise ShapeError(f"sequence of length {len(seq)} for S_{self.n}")
        return tuple(seq[k - 1] for k in self.images)

    def matrix(self) -> np.ndarray:
        """Permutation matrix with P e_k = e_{p(k)}; a homomorphism for ``compose``."""
        P = np.zeros((self.n, self.n))
        for k, img in enumerate(self.images):
            P[img - 1, k] = 1.0
        return P

    def __repr__(self):
        return f"Permutation{self.images}"


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(1, n + 1)))


def transposition(n: int, i: int, j: int) -> Permutation:
    imgs = list(range(1, n + 1))
    imgs[i - 1], imgs[j - 1] = j, i
    return Permutation(tuple(imgs))


def from_cycles(n: int, *cycles: Sequence[int]) -> Permutation:
    imgs = list(range(1, n + 1))
    for cyc in cycles:
        for a, b in zip(cyc, tuple(cyc[1:]) + (cyc[0],)):
            imgs[a - 1] = b
    return Permutation(tuple(imgs))


def all_permutations(n: int) -> list[Permutation]:
    """All of S_n in lexicographic order of the image tuples (identity first)."""
    return [Permutation(p) for p in itertools.permutations(range(1, n + 1))]


def random_permutation(n: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(int(k) + 1 for k in rng.permutation(n)))


def compose(p: Permutation, q: Permutation) -> Permutation:
    if p.n != q.n:
        raise ShapeError(f"cannot compose permutations of {p.n} and {q.n} letters")
    return Permutation(tuple(p.images[k - 1] for k in q.images))


def sign(p: Permutation) -> int:
    """Sign via cycle decomposition: (-1)^(N - number of cycles)."""
    seen = [False] * p.n
    cycles = 0
    for start in range(p.n):
        if seen[start]:
            continue
        cycles += 1
        k = start
        while not seen[k]:
            seen[k] = True
            k = p.images[k] - 1
    return -1 if (p.n - cycles) % 2 else 1


def expand_blocks(p: Permutation, d: int) -> Permutation:
    """Permutation of N*d letters moving block k (letters (k-1)d+1..kd) to block p(k)."""
    if d < 1:
        raise ValueError("block size must be >= 1")
    imgs = []
    for k in range(1, p.n + 1):
        base = (p(k) - 1) * d
        imgs.extend(base + i for i in range(1, d + 1))
    return Permutation(tuple(imgs))


def block_sign(p: Permutation, d: int) -> int:
    """Sign of the block permutation on N*d letters, equal to sign(p)**d."""
    if d < 1:
        raise ValueError("space dimension must be >= 1")
    return sign(p) ** d


@dataclass(frozen=True)
class BraidWord:
    """Word in the Artin generators sigma_1..sigma_{N-1} and their inverses.

    ``letters`` holds (generator index, exponent) pairs with exponent +1 or -1.
    """

    strands: int
    letters: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        letters = tuple((int(i), int(e)) for i, e in self.letters)
        for i, e in letters:
            if not 1 <= i <= self.strands - 1:
                raise ValueError(f"generator sigma_{i} undefined on {self.strands} strands")
            if e not in (1, -1):
                raise ValueError(f"exponent must be +1 or -1, got {e}")
        object.__setattr__(self, "letters", letters)

    def __add__(self, other: "BraidWord") -> "BraidWord":
        if self.strands != other.strands:
            raise ShapeError("braid words on different strand counts")
        return BraidWord(self.strands, self.letters + other.letters)

    def exponent_sum(self) -> int:
        return sum(e for _, e in self.letters)

    def inverse(self) -> "BraidWord":
        return BraidWord(self.strands, tuple((i, -e) for i, e in reversed(self.letters)))

    def free_reduce(self) -> "BraidWord":
        out: list[tuple[int, int]] = []
        for letter in self.letters:
            if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
                out.pop()
            else:
                out.append(letter)
        return BraidWord(self.strands, tuple(out))


def braid_to_permutation(w: BraidWord) -> Permutation:
    """Product of the transpositions (i, i+1) in word order."""
    result = identity(w.strands)
    for i, _ in w.letters:
        result = compose(result, transposition(w.strands, i, i + 1))
    return result


def braid_character(w: BraidWord, beta: float) -> complex:
    """The character sending every positive generator to exp(i*beta)."""
    return complex(np.exp(1j * beta * w.exponent_sum()))


def factorial(n: int) -> int:
    return math.factorial(n)
