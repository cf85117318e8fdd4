"""Fermionic statistics as flat line bundles on lattice configuration spaces.

Submodules
----------
perm       permutations, signs, braid words
confspace  ordered and unordered configuration graphs, loops and lifts
bundle     flat Hermitian bundles, holonomy, gauge equivalence, Laplacians
triple     Hamiltonian + position PVM triples and their equivalence
iso        (anti)symmetrization and the section <-> function unitary
bohm       closed-form Slater states and Bohmian trajectories
fock       variable particle number sectors
params     physical units (hbar, mass, lattice spacing)
potentials named symmetric potentials
"""
__version__ = "0.1.0"
