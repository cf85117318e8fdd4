"""Finite-dimensional quantum triples: Hilbert space, Hamiltonian, position PVM.

Cells of a PVM are labelled by canonical (sorted) site tuples, so triples
built on the quotient graph and on the (anti)symmetric subspace of the
ordered graph share one label set.
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .bundle import connection_laplacian, evaluate_potential, trivial_bundle
from .confspace import build_pair
from .errors import DimensionError, ShapeError, SymmetryError
from .iso import subspace_basis, symmetry_residual
from .params import PhysicalParams

DENSE_EVOLVE_MAX = 3000


def _dense(M) -> np.ndarray:
    return M.toarray() if sparse.issparse(M) else np.asarray(M)


@dataclass(eq=False)
class PVM:
    """Projections Q(c) = B[:, idx_c] B[:, idx_c]^H for a unitary B (identity if None)."""

    labels: list
    cells: list[np.ndarray]
    dim: int
    basis: np.ndarray | None = None

    def __post_init__(self):
        self.cells = [np.asarray(c, dtype=np.int64) for c in self.cells]
        if len(self.labels) != len(self.cells):
            raise ShapeError("one index set per label")
        self.index = {lab: k for k, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("duplicate cell labels")
        allidx = np.concatenate(self.cells) if self.cells else np.zeros(0, dtype=np.int64)
        if len(allidx) != self.dim or len(np.unique(allidx)) != self.dim:
            raise ValueError("cells must partition the index set")
        if self.basis is not None:
            self.basis = np.asarray(self.basis, dtype=complex)

    def ranks(self) -> np.ndarray:
        return np.array([len(c) for c in self.cells])

    def cell_vectors(self, k: int) -> np.ndarray:
        idx = self.cells[k]
        if self.basis is None:
            V = np.zeros((self.dim, len(idx)))
            V[idx, np.arange(len(idx))] = 1
            return V
        return self.basis[:, idx]

    def projection(self, label) -> np.ndarray:
        V = self.cell_vectors(self.index[label])
        return V @ V.conj().T

    def to_cell_coords(self, psi: np.ndarray) -> np.ndarray:
        return psi if self.basis is None else self.basis.conj().T @ psi

    def cell_weights(self, psi: np.ndarray) -> np.ndarray:
        """<psi|Q(c)|psi> for every cell."""
        c = np.abs(self.to_cell_coords(psi)) ** 2
        return np.array([c[idx].sum() for idx in self.cells])

    def axiom_residual(self) -> float:
        """Worst deviation from idempotence, orthogonality and completeness."""
        if self.basis is None:
            return 0.0
        G = self.basis.conj().T @ self.basis
        return float(np.max(np.abs(G - np.eye(self.dim))))

    def conjugated(self, U: np.ndarray) -> "PVM":
        """PVM with cells U Q(c) U^H."""
        B = np.eye(self.dim) if self.basis is None else self.basis
        return PVM(list(self.labels), list(self.cells), self.dim, _dense(U) @ B)


@dataclass(eq=False)
class QuantumTriple:
    H: object  # dense ndarray or scipy sparse
    Q: PVM
    params: PhysicalParams = field(default_factory=PhysicalParams)
    name: str = ""

    def __post_init__(self):
        if self.H.shape != (self.Q.dim, self.Q.dim):
            raise ShapeError(f"H has shape {self.H.shape}, PVM dimension {self.Q.dim}")
        self._eig = None

    @property
    def dim(self) -> int:
        return self.Q.dim

    def dense_H(self) -> np.ndarray:
        return _dense(self.H).astype(complex)

    def hermiticity_residual(self) -> float:
        D = self.H - self.H.conj().T
        return float(abs(D).max()) if D.shape[0] else 0.0

    def spectrum(self) -> np.ndarray:
        return self.eig()[0]

    def eig(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.dense_H())
        return self._eig

    def conjugated(self, U) -> "QuantumTriple":
        """The triple (U H U^H, U Q U^H)."""
        Ud = _dense(U)
        return QuantumTriple(Ud @ self.dense_H() @ Ud.conj().T, self.Q.conjugated(Ud),
                             self.params, self.name + "^U")

    def to_json(self) -> dict:
        H = self.dense_H()
        return {
            "name": self.name,
            "dim": self.dim,
            "H": [[[float(z.real), float(z.imag)] for z in row] for row in H],
            "cells": {json_label(lab): idx.tolist() for lab, idx in zip(self.Q.labels, self.Q.cells)},
        }


def json_label(label) -> str:
    return "-".join(str(s) for s in label) if isinstance(label, tuple) else str(label)


# --- builders ---------------------------------------------------------------

def make_bundle_triple(bundle, V=None, params: PhysicalParams | None = None) -> QuantumTriple:
    """Connection Laplacian plus V with one cell per vertex (all of its fiber)."""
    params = params or PhysicalParams()
    H = connection_laplacian(bundle, V, params)
    r = bundle.rank
    g = bundle.graph
    cells = [np.arange(v * r, (v + 1) * r) for v in range(g.n_vertices)]
    return QuantumTriple(H, PVM(list(g.vertices), cells, g.n_vertices * r), params,
                         f"bundle[{bundle.name}]")


def ordered_hamiltonian(pair, V=None, params: PhysicalParams | None = None):
    params = params or PhysicalParams()
    Vo = evaluate_potential(V, pair.ordered)
    return connection_laplacian(trivial_bundle(pair.ordered), Vo, params), Vo


def make_ordered_triple(pair, V=None, params: PhysicalParams | None = None) -> QuantumTriple:
    """Full ordered-graph triple; cells are ordered tuples (labels carry the particle order)."""
    params = params or PhysicalParams()
    H, _ = ordered_hamiltonian(pair, V, params)
    g = pair.ordered
    cells = [np.array([v]) for v in range(g.n_vertices)]
    return QuantumTriple(H, PVM(list(g.vertices), cells, g.n_vertices), params, "ordered")


def make_subspace_triple(pair, V=None, params: PhysicalParams | None = None, symmetry: str = "anti",
                         tol: float = 1e-12) -> QuantumTriple:
    """Ordered-graph Hamiltonian compressed to the (anti)symmetric subspace.

    Coordinates are the coefficients in the orthonormal basis of
    (anti)symmetrized deltas; the cell of quotient vertex q is the basis
    vector supported over q.
    """
    params = params or PhysicalParams()
    H, Vo = ordered_hamiltonian(pair, V, params)
    res = symmetry_residual(Vo, pair.ordered, "sym")
    if res > tol:
        raise SymmetryError(f"potential is not permutation symmetric (residual {res:.3g})")
    B, qcells = subspace_basis(pair, symmetry)
    Hs = (B.T @ H @ B).toarray()
    labels = [pair.quotient.vertices[q] for q in qcells]
    cells = [np.array([k]) for k in range(len(qcells))]
    t = QuantumTriple(Hs, PVM(labels, cells, len(qcells)), params, symmetry)
    t.embedding = B
    return t


# --- equivalence ------------------------------------------------------------

@dataclass
class EquivalenceWitness:
    U: np.ndarray
    h_residual: float
    q_residuals: dict
    unitarity_residual: float
    notes: list = field(default_factory=list)

    @property
    def q_residual(self) -> float:
        return max(self.q_residuals.values(), default=0.0)

    def to_json(self, include_witness: bool = False) -> dict:
        out = {"status": "equivalent",
               "residuals": {"H": self.h_residual, "Q_max": self.q_residual,
                             "unitarity": self.unitarity_residual},
               "notes": list(self.notes)}
        if include_witness:
            out["witness"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.U]
        return out


@dataclass
class NoEquivalence:
    reason: str
    status: str = "not-equivalent"  # or "unsupported"
    obstruction: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def __bool__(self):
        return False

    def to_json(self) -> dict:
        return {"status": self.status, "reason": self.reason,
                "obstruction": self.obstruction, "residuals": self.residuals}


def _frob(M) -> float:
    return float(np.linalg.norm(M))


def verify_equivalence(t1: QuantumTriple, t2: QuantumTriple, U, tol: float = 1e-10):
    """Check U H1 U^H = H2 and U Q1(c) U^H = Q2(c) (Frobenius norms)."""
    if t1.dim != t2.dim:
        raise ShapeError(f"dimensions {t1.dim} and {t2.dim} differ")
    if set(t1.Q.labels) != set(t2.Q.labels):
        raise ShapeError("triples have different cell label sets")
    Ud = _dense(U).astype(complex)
    if Ud.shape != (t1.dim, t1.dim):
        raise ShapeError(f"U has shape {Ud.shape}")
    unit = float(np.max(np.abs(Ud.conj().T @ Ud - np.eye(t1.dim)))) if t1.dim else 0.0
    h_res = _frob(Ud @ t1.dense_H() @ Ud.conj().T - t2.dense_H())
    q_res = {}
    for k, lab in enumerate(t1.Q.labels):
        A = Ud @ t1.Q.cell_vectors(k)
        B = t2.Q.cell_vectors(t2.Q.index[lab])
        q_res[lab] = _frob(A @ A.conj().T - B @ B.conj().T)
    worst_q = max(q_res.values(), default=0.0)
    if h_res <= tol and worst_q <= tol and unit <= tol:
        return EquivalenceWitness(Ud, h_res, q_res, unit)
    return NoEquivalence("residuals above tolerance",
                         residuals={"H": h_res, "Q_max": worst_q, "unitarity": unit})


def solve_equivalence(t1: QuantumTriple, t2: QuantumTriple, tol: float = 1e-10):
    """Construct U with U H1 U^H = H2 and U Q1 U^H = Q2 for rank-one cells.

    Such a U maps each cell line of t1 to the same cell line of t2, so in
    cell coordinates it is diagonal with unknown phases.  Phases are fixed
    along a breadth-first spanning tree of the coupling graph (pairs of cells
    with a nonzero Hamiltonian entry) and every remaining coupling is
    checked.  A failing check certifies that no U exists.
    """
    if t1.dim != t2.dim:
        return NoEquivalence("dimension mismatch", obstruction={"dims": [t1.dim, t2.dim]})
    if set(t1.Q.labels) != set(t2.Q.labels):
        return NoEquivalence("cell label sets differ")
    labels = list(t1.Q.labels)
    r1 = t1.Q.ranks()
    r2 = np.array([len(t2.Q.cells[t2.Q.index[lab]]) for lab in labels])
    if np.any(r1 != r2):
        k = int(np.flatnonzero(r1 != r2)[0])
        return NoEquivalence("cell rank mismatch",
                             obstruction={"cell": json_label(labels[k]),
                                          "ranks": [int(r1[k]), int(r2[k])]})
    if np.any(r1 != 1):
        return NoEquivalence("only rank-one cells are supported", status="unsupported")

    # cell coordinates, common label order
    V1 = np.column_stack([t1.Q.cell_vectors(k) for k in range(len(labels))])
    V2 = np.column_stack([t2.Q.cell_vectors(t2.Q.index[lab]) for lab in labels])
    A = V1.conj().T @ t1.dense_H() @ V1
    B = V2.conj().T @ t2.dense_H() @ V2
    n = len(labels)

    dd = np.abs(np.diag(A) - np.diag(B))
    if n and dd.max() > tol:
        k = int(np.argmax(dd))
        return NoEquivalence("diagonal entries differ (a diagonal U cannot change them)",
                             obstruction={"cell": json_label(labels[k]),
                                          "H1": complex_pair(A[k, k]), "H2": complex_pair(B[k, k])})
    mag = np.abs(np.abs(A) - np.abs(B))
    if n and mag.max() > tol:
        i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
        return NoEquivalence("coupling magnitudes differ",
                             obstruction={"cells": [json_label(labels[i]), json_label(labels[j])],
                                          "abs_H1": float(abs(A[i, j])), "abs_H2": float(abs(B[i, j]))})

    coupled = (np.abs(A) > tol) & ~np.eye(n, dtype=bool)
    nbrs = [np.flatnonzero(coupled[i]) for i in range(n)]
    u = np.zeros(n, dtype=complex)
    n_comp = 0
    for root in range(n):
        if u[root] != 0:
            continue
        n_comp += 1
        u[root] = 1.0
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j in nbrs[i]:
                if u[j] == 0:
                    # u_j A_ji conj(u_i) = B_ji
                    ph = B[j, i] * u[i] / A[j, i]
                    u[j] = ph / abs(ph)
                    queue.append(j)
    R = u[:, None] * A * u.conj()[None, :] - B
    worst = np.abs(R)
    if n and worst.max() > tol:
        i, j = np.unravel_index(int(np.argmax(worst)), worst.shape)
        return NoEquivalence("coupling phase cannot be matched",
                             obstruction={"cells": [json_label(labels[i]), json_label(labels[j])],
                                          "H1": complex_pair(A[i, j]), "H2": complex_pair(B[i, j]),
                                          "residual": float(worst[i, j])})
    U = V2 @ np.diag(u) @ V1.conj().T
    out = verify_equivalence(t1, t2, U, tol=max(tol, 1e-10) * max(1.0, math.sqrt(n)))
    if isinstance(out, EquivalenceWitness) and n_comp > 1:
        out.notes.append(f"coupling graph has {n_comp} components; one free phase per component")
    return out


def complex_pair(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# --- dynamics and observables ---------------------------------------------

def evolve(t: QuantumTriple, psi: np.ndarray, time: float, params: PhysicalParams | None = None
           ) -> np.ndarray:
    """exp(-i H time / hbar) psi (spectral for small dimension, Krylov otherwise)."""
    params = params or t.params
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        warnings.warn(f"state norm is {nrm:.12g}, not 1", stacklevel=2)
    if time == 0:
        return psi.copy()
    if t.dim <= DENSE_EVOLVE_MAX:
        w, V = t.eig()
        return V @ (np.exp(-1j * w * time / params.hbar) * (V.conj().T @ psi))
    H = sparse.csr_matrix(t.H)
    return expm_multiply((-1j * time / params.hbar) * H, psi)


def born_distribution(t: QuantumTriple, psi: np.ndarray, time: float = 0.0,
                      params: PhysicalParams | None = None) -> np.ndarray:
    """<psi_t|Q(c)|psi_t> in label order."""
    return t.Q.cell_weights(evolve(t, psi, time, params))


@dataclass
class CellField:
    labels: list
    values: np.ndarray  # NaN where undefined
    numerators: np.ndarray
    density: np.ndarray
    undefined: np.ndarray


def velocity_form(t: QuantumTriple, psi: np.ndarray, f, params: PhysicalParams | None = None,
                  density_floor: float = 1e-14) -> CellField:
    """Re<psi|Q(c) (i/hbar)[H, f^]|psi> / <psi|Q(c)|psi> for every cell c.

    ``f`` maps labels to reals (dict or callable) or is an array in label order.
    """
    params = params or t.params
    labels = t.Q.labels
    if callable(f):
        fv = np.array([float(f(lab)) for lab in labels])
    elif isinstance(f, dict):
        fv = np.array([float(f[lab]) for lab in labels])
    else:
        fv = np.asarray(f, dtype=float)
        if fv.shape != (len(labels),):
            raise ShapeError("one value of f per cell")
    psi = np.asarray(psi, dtype=complex)
    fidx = np.empty(t.dim)
    for k, idx in enumerate(t.Q.cells):
        fidx[idx] = fv[k]
    c = t.Q.to_cell_coords(psi)
    if t.Q.basis is None:
        H = t.H
        Hc = H @ c
        fHc = fidx * Hc
        Hfc = H @ (fidx * c)
    else:
        Bm = t.Q.basis
        Hcell = Bm.conj().T @ t.dense_H() @ Bm
        fHc = fidx * (Hcell @ c)
        Hfc = Hcell @ (fidx * c)
    phi = (1j / params.hbar) * (np.asarray(Hfc).ravel() - np.asarray(fHc).ravel())
    prod = np.conj(c) * phi
    num = np.array([prod[idx].sum().real for idx in t.Q.cells])
    dens = np.array([(np.abs(c[idx]) ** 2).sum() for idx in t.Q.cells])
    undefined = dens < density_floor
    vals = np.full(len(labels), np.nan)
    vals[~undefined] = num[~undefined] / dens[~undefined]
    return CellField(list(labels), vals, num, dens, undefined)


# --- one-dimensional boundary demo -----------------------------------------

def d1_boundary_demo(box, n: int = 2, V=None, params: PhysicalParams | None = None) -> dict:
    """Compare (anti)symmetric subspace spectra on a line with fundamental-domain Laplacians.

    The ordered graph keeps coinciding configurations.  For N = 2 the
    fundamental domain x1 < x2 (diagonal deleted, full grid degree on the
    diagonal) must reproduce the anti-symmetric spectrum, and x1 <= x2 with
    weight sqrt(2) on hops touching the diagonal the symmetric one.
    """
    if box.d != 1:
        raise DimensionError(f"boundary demo needs d = 1, got d = {box.d}")
    if n not in (1, 2):
        raise ValueError("boundary demo supports N = 1 and N = 2")
    params = params or PhysicalParams()
    pair = build_pair(box, n, collisions=(n == 2))
    H, _ = ordered_hamiltonian(pair, V, params)
    Hd = H.toarray()
    out = {"n_sites": box.n_sites, "n_particles": n}
    spectra = {}
    for kind in ("anti", "sym"):
        spectra[kind] = np.linalg.eigvalsh(make_subspace_triple(pair, V, params, kind).dense_H())
    verts = pair.ordered.vertices
    if n == 1:
        spectra["dirichlet"] = spectra["neumann"] = np.linalg.eigvalsh(Hd)
    else:
        strict = [i for i, (a, b) in enumerate(verts) if a < b]
        spectra["dirichlet"] = np.linalg.eigvalsh(Hd[np.ix_(strict, strict)])
        weak = [i for i, (a, b) in enumerate(verts) if a <= b]
        M = Hd[np.ix_(weak, weak)].copy()
        ondiag = np.array([verts[i][0] == verts[i][1] for i in weak])
        touch = np.logical_xor.outer(ondiag, ondiag)
        M[touch] *= math.sqrt(2)
        spectra["neumann"] = np.linalg.eigvalsh(M)
    out["spectra"] = {k: v.tolist() for k, v in spectra.items()}
    out["anti_vs_dirichlet"] = float(np.max(np.abs(spectra["anti"] - spectra["dirichlet"])))
    out["sym_vs_neumann"] = float(np.max(np.abs(spectra["sym"] - spectra["neumann"])))
    return out
