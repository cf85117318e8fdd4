"""Configuration space of a variable number of particles, truncated at N_max.

Sector N holds N-point subsets of the box; sector 0 is a single point of
measure 1.  States are sequences of per-sector arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import bundle_from_character
from .confspace import ConfigGraphPair, LatticeBox, build_pair
from .errors import CapacityError, ShapeError
from .iso import canonical_frame, descent, map_U


@dataclass(eq=False)
class GammaSpace:
    box: LatticeBox
    n_max: int
    sectors: list  # index N: ConfigGraphPair, or None for N = 0

    def sector_size(self, n: int) -> int:
        return 1 if n == 0 else self.sectors[n].quotient.n_vertices

    def sector_sizes(self) -> list[int]:
        return [self.sector_size(n) for n in range(self.n_max + 1)]

    def sector_measure(self, n: int) -> float:
        """Weight of one point of sector n."""
        return 1.0 if n == 0 else self.sectors[n].quotient.measure

    def total_measure(self) -> float:
        return sum(self.sector_measure(n) * self.sector_size(n) for n in range(self.n_max + 1))


def build_gamma(box: LatticeBox, n_max: int) -> GammaSpace:
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if n_max > box.n_sites:
        raise CapacityError(f"{box.n_sites} sites cannot hold {n_max} distinct particles")
    sectors: list[ConfigGraphPair | None] = [None]
    sectors += [build_pair(box, n) for n in range(1, n_max + 1)]
    return GammaSpace(box, n_max, sectors)


@dataclass(eq=False)
class SectorState:
    """Per-sector quotient values (sections of the sector bundle, or functions)."""

    space: GammaSpace
    values: list[np.ndarray]
    phases: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.values) != self.space.n_max + 1:
            raise ShapeError(f"need {self.space.n_max + 1} sector arrays")
        self.values = [np.asarray(v, dtype=complex).reshape(-1) for v in self.values]
        for n, v in enumerate(self.values):
            if len(v) != self.space.sector_size(n):
                raise ShapeError(f"sector {n} needs {self.space.sector_size(n)} values, got {len(v)}")
        if self.phases is None:
            self.phases = np.zeros(self.space.n_max + 1)
        self.phases = np.asarray(self.phases, dtype=float)

    def sector_norms2(self) -> np.ndarray:
        return np.array([self.space.sector_measure(n) * np.sum(np.abs(v) ** 2)
                         for n, v in enumerate(self.values)])

    def norm2(self) -> float:
        return float(self.sector_norms2().sum())

    def densities(self) -> list[np.ndarray]:
        """Born density |psi|^2 on every sector."""
        return [np.abs(v) ** 2 for v in self.values]

    def to_json(self) -> list[dict]:
        return [{"sector": n, "phase": float(self.phases[n]),
                 "values": [[float(z.real), float(z.imag)] for z in v]}
                for n, v in enumerate(self.values)]


def random_sector_state(space: GammaSpace, rng: np.random.Generator, phases=None) -> SectorState:
    vals = [rng.normal(size=space.sector_size(n)) + 1j * rng.normal(size=space.sector_size(n))
            for n in range(space.n_max + 1)]
    st = SectorState(space, vals, phases)
    scale = 1 / np.sqrt(st.norm2())
    st.values = [v * scale for v in st.values]
    return st


def assemble_fock(state: SectorState, kind: str = "fermi") -> list[np.ndarray]:
    """Per-sector ordered functions exp(i theta_N) U_N psi_N.

    ``fermi`` uses the canonical frame of each sector's fermionic pullback,
    ``bose`` the symmetric descent.  Sector 0 passes through.
    """
    if kind not in ("fermi", "bose"):
        raise ValueError("kind must be 'fermi' or 'bose'")
    out = []
    for n, v in enumerate(state.values):
        ph = np.exp(1j * state.phases[n])
        if n == 0:
            out.append(ph * v)
            continue
        pair = state.space.sectors[n]
        if kind == "fermi":
            frame = canonical_frame(bundle_from_character(pair), pair)
            out.append(ph * map_U(v, frame, pair))
        else:
            out.append(ph * descent(v, pair))
    return out


def fock_norm2(space: GammaSpace, functions: list[np.ndarray]) -> float:
    """Total squared norm of per-sector ordered functions (vertex weight spacing^{N d})."""
    total = 0.0
    for n, f in enumerate(functions):
        w = 1.0 if n == 0 else space.sectors[n].ordered.measure
        total += w * float(np.sum(np.abs(f) ** 2))
    return total
