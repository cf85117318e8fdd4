"""Physical units shared by the lattice and continuum modules."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    hbar: float = 1.0
    mass: float = 1.0
    spacing: float | None = None  # None: use the lattice spacing of the box

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError("hbar and mass must be positive")
        if self.spacing is not None and not self.spacing > 0:
            raise ValueError("spacing must be positive")
