"""Named permutation-symmetric potentials on lattice configurations.

Each builder returns a callable taking the (N, d) array of particle
positions; all of them are symmetric under relabelling particles.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .confspace import LatticeBox


def zero_potential() -> Callable[[np.ndarray], float]:
    return lambda X: 0.0


def onsite_random(box: LatticeBox, seed: int = 0, scale: float = 1.0
                  ) -> Callable[[np.ndarray], float]:
    """Sum over particles of a fixed random value per site (uniform in [-scale, scale])."""
    values = np.random.default_rng(seed).uniform(-scale, scale, size=box.n_sites)
    index = box.site_index

    def V(X):
        sites = np.rint(np.asarray(X) / box.spacing).astype(int)
        return float(sum(values[index[tuple(s)]] for s in sites))

    return V


def pairwise(strength: float = 1.0, kind: str = "coulomb", length: float = 1.0
             ) -> Callable[[np.ndarray], float]:
    """Sum over pairs of g(|x_i - x_j|): coulomb strength/r or gaussian strength exp(-r^2/length^2)."""
    if kind == "coulomb":
        g = lambda r: strength / r
    elif kind == "gaussian":
        g = lambda r: strength * np.exp(-(r / length) ** 2)
    else:
        raise ValueError(f"unknown pair interaction {kind!r}")

    def V(X):
        X = np.asarray(X, dtype=float)
        total = 0.0
        for i in range(len(X)):
            for j in range(i + 1, len(X)):
                total += g(np.linalg.norm(X[i] - X[j]))
        return float(total)

    return V


def harmonic_trap(omega: float = 1.0, mass: float = 1.0, center=None
                  ) -> Callable[[np.ndarray], float]:
    def V(X):
        X = np.asarray(X, dtype=float)
        c = 0.0 if center is None else np.asarray(center, dtype=float)
        return float(0.5 * mass * omega ** 2 * np.sum((X - c) ** 2))

    return V


def combine(*terms: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    return lambda X: float(sum(t(X) for t in terms))


def parse_potential(text: str, box: LatticeBox, seed: int = 0) -> Callable[[np.ndarray], float]:
    """Parse ``zero``, ``onsite[:scale]``, ``pair[:strength[:kind]]``, ``trap[:omega]`` joined by ``+``."""
    terms = []
    for part in (text or "zero").split("+"):
        name, *args = part.strip().split(":")
        if name == "zero":
            terms.append(zero_potential())
        elif name == "onsite":
            terms.append(onsite_random(box, seed, float(args[0]) if args else 1.0))
        elif name == "pair":
            strength = float(args[0]) if args else 1.0
            kind = args[1] if len(args) > 1 else "coulomb"
            terms.append(pairwise(strength, kind))
        elif name == "trap":
            terms.append(harmonic_trap(float(args[0]) if args else 1.0))
        else:
            raise ValueError(f"unknown potential term {name!r}")
    return combine(*terms)
