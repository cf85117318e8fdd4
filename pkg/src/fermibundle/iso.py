"""Maps between bundle sections on the quotient and (anti)symmetric functions upstairs.

All functions on graphs carry the vertex weight ``spacing**(N d)``.  The
ordered and the quotient graph use the same weight, so with the
``1/sqrt(N!)`` factor the maps below are isometries for both the weighted
and the plain Euclidean inner products.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import sparse

from . import perm as P
from .bundle import DiscreteBundle, Frame, pullback, sign_rep
from .confspace import ConfigGraph, ConfigGraphPair
from .errors import InvalidFrameError, ShapeError, SymmetryError


def weighted_norm(values: np.ndarray, graph: ConfigGraph) -> float:
    return float(np.sqrt(graph.measure * np.sum(np.abs(values) ** 2)))


def weighted_inner(f: np.ndarray, g: np.ndarray, graph: ConfigGraph) -> complex:
    return complex(graph.measure * np.vdot(f, g))


def ordering_index(pair: ConfigGraphPair) -> np.ndarray:
    """For each ordered vertex v the index (into ``all_permutations``) of rho
    with ``v = rho.act(canonical rep of pi(v))``."""
    perms = P.all_permutations(pair.n_particles)
    pindex = {p: i for i, p in enumerate(perms)}
    qv = pair.quotient.vertices
    out = np.empty(pair.ordered.n_vertices, dtype=np.int64)
    for v, tup in enumerate(pair.ordered.vertices):
        canon = qv[pair.projection[v]]
        out[v] = pindex[P.Permutation(tuple(canon.index(s) + 1 for s in tup))]
    return out


def symmetrize_projector(f: np.ndarray, graph: ConfigGraph, kind: str = "anti") -> np.ndarray:
    """(1/N!) sum over sigma of chi(sigma) f(sigma . q), chi = sign or 1."""
    perms, table = graph.action_table
    f = np.asarray(f)
    if f.shape[0] != graph.n_vertices:
        raise ShapeError(f"expected {graph.n_vertices} values, got {f.shape[0]}")
    if kind not in ("anti", "sym"):
        raise ValueError("kind must be 'anti' or 'sym'")
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    for s, p in enumerate(perms):
        w = P.sign(p) if kind == "anti" else 1
        out = out + w * f[table[s]]
    return out / len(perms)


def symmetry_residual(f: np.ndarray, graph: ConfigGraph, kind: str = "anti") -> float:
    """max over sigma, q of |f(sigma q) - chi(sigma) f(q)|."""
    perms, table = graph.action_table
    res = 0.0
    for s, p in enumerate(perms):
        w = P.sign(p) if kind == "anti" else 1
        res = max(res, float(np.max(np.abs(f[table[s]] - w * f))))
    return res


def canonical_frame(bundle: DiscreteBundle, pair: ConfigGraphPair,
                    rep: Callable[[P.Permutation], np.ndarray] = sign_rep) -> Frame:
    """Parallel frame of the pullback fixed by the identity on sorted tuples.

    For a bundle built from representation ``rep`` the frame at
    ``rho.act(canonical)`` is ``rep(rho)^H``; with the default sign
    representation this is +1 on sorted tuples and sign(rho) elsewhere.
    """
    pb = pullback(bundle, pair)
    perms = P.all_permutations(pair.n_particles)
    mats = np.stack([np.atleast_2d(np.asarray(rep(p), dtype=complex)).conj().T for p in perms])
    if mats.shape[1] != bundle.rank:
        raise ShapeError("representation dimension differs from bundle rank")
    frame = Frame(pb, mats[ordering_index(pair)])
    frame.require_parallel()
    return frame


def _check_frame(frame: Frame, pair: ConfigGraphPair, tol: float) -> None:
    if frame.bundle.graph is not pair.ordered:
        raise ShapeError("frame must live on the pair's ordered graph")
    res = frame.parallel_residual()
    if res > tol:
        raise InvalidFrameError(f"frame is not parallel on every edge (residual {res:.3g})")


def map_U(section: np.ndarray, frame: Frame, pair: ConfigGraphPair, tol: float = 1e-10
          ) -> np.ndarray:
    """(U psi)(q^) = frame(q^) psi(pi q^) / sqrt(N!)."""
    _check_frame(frame, pair, tol)
    r = frame.bundle.rank
    psi = np.asarray(section, dtype=complex)
    flat = psi.ndim == 1
    psi = psi.reshape(pair.quotient.n_vertices, r)
    out = np.einsum("vij,vj->vi", frame.values, psi[pair.projection])
    out /= math.sqrt(math.factorial(pair.n_particles))
    return out[:, 0] if flat and r == 1 else out


def map_U_matrix(frame: Frame, pair: ConfigGraphPair, tol: float = 1e-10) -> sparse.csr_matrix:
    """Sparse matrix of :func:`map_U`; one r x r block per ordered vertex."""
    _check_frame(frame, pair, tol)
    r = frame.bundle.rank
    nv = pair.ordered.n_vertices
    rows = np.arange(nv)[:, None, None] * r + np.arange(r)[None, :, None]
    cols = pair.projection[:, None, None] * r + np.arange(r)[None, None, :]
    rows, cols = np.broadcast_arrays(rows, cols)
    data = frame.values / math.sqrt(math.factorial(pair.n_particles))
    return sparse.csr_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(nv * r, pair.quotient.n_vertices * r))


def map_U_inverse(f: np.ndarray, frame: Frame, pair: ConfigGraphPair, tol: float = 1e-10,
                  return_spread: bool = False, kind: str | None = "anti"):
    """Section psi(q) = sqrt(N!) frame(q^)^H f(q^), checked over all representatives q^.

    ``kind`` selects the symmetry demanded of a scalar input before
    inversion (None skips the check; the representative spread is always
    checked).
    """
    _check_frame(frame, pair, tol)
    r = frame.bundle.rank
    f = np.asarray(f, dtype=complex)
    flat = f.ndim == 1
    fv = f.reshape(pair.ordered.n_vertices, r)
    if r == 1 and kind is not None:
        res = symmetry_residual(fv[:, 0], pair.ordered, kind)
        if res > tol:
            raise SymmetryError(f"input lacks {kind} symmetry (residual {res:.3g})")
    cand = math.sqrt(math.factorial(pair.n_particles)) * np.einsum(
        "vji,vj->vi", frame.values.conj(), fv)
    fibers = np.array(pair.fibers)  # (n_q, N!) for collision-free pairs
    vals = cand[fibers]  # (n_q, N!, r)
    spread = float(np.max(np.abs(vals - vals[:, :1]))) if vals.size else 0.0
    if spread > tol:
        raise SymmetryError(f"representatives disagree by {spread:.3g}")
    psi = vals[:, 0]
    psi = psi[:, 0] if flat and r == 1 else psi
    return (psi, spread) if return_spread else psi


def descent(func: np.ndarray, pair: ConfigGraphPair) -> np.ndarray:
    """Symmetric ordered function f(q^) = func(pi q^) / sqrt(N!)."""
    func = np.asarray(func)
    return func[pair.projection] / math.sqrt(math.factorial(pair.n_particles))


def descent_matrix(pair: ConfigGraphPair) -> sparse.csr_matrix:
    nv = pair.ordered.n_vertices
    data = np.full(nv, 1 / math.sqrt(math.factorial(pair.n_particles)))
    return sparse.csr_matrix((data, (np.arange(nv), pair.projection)),
                             shape=(nv, pair.quotient.n_vertices))


def descent_inverse(f: np.ndarray, pair: ConfigGraphPair, tol: float = 1e-10) -> np.ndarray:
    res = symmetry_residual(f, pair.ordered, "sym")
    if res > tol:
        raise SymmetryError(f"input is not symmetric (residual {res:.3g})")
    canon = np.array([pair.canonical_rep(q) for q in range(pair.quotient.n_vertices)])
    return np.asarray(f)[canon] * math.sqrt(math.factorial(pair.n_particles))


def subspace_basis(pair: ConfigGraphPair, kind: str = "anti"
                   ) -> tuple[sparse.csr_matrix, list[int]]:
    """Orthonormal basis of (anti)symmetrized deltas, one column per orbit.

    Returns the (ordered vertices x orbits) basis matrix and the quotient
    vertex of each column.  Orbits with coinciding points (collision graphs
    only) get weight ``1/sqrt(orbit size)`` in the symmetric case and are
    dropped in the anti-symmetric case.  The column of orbit q is the
    descent (``sym``) or the canonical-frame ``map_U`` (``anti``) of the
    delta section at q.
    """
    if kind not in ("anti", "sym"):
        raise ValueError("kind must be 'anti' or 'sym'")
    perms = P.all_permutations(pair.n_particles)
    qv = pair.quotient.vertices
    rows, cols, data, cells = [], [], [], []
    for q, fiber in enumerate(pair.fibers):
        collided = len(set(qv[q])) < len(qv[q])
        if kind == "anti" and collided:
            continue
        col = len(cells)
        cells.append(q)
        if kind == "sym":
            w = 1 / math.sqrt(len(fiber))
            for v in fiber:
                rows.append(v)
                cols.append(col)
                data.append(w)
        else:
            canon = qv[q]
            for v in fiber:
                tup = pair.ordered.vertices[v]
                rho = P.Permutation(tuple(canon.index(s) + 1 for s in tup))
                rows.append(v)
                cols.append(col)
                data.append(P.sign(rho) / math.sqrt(len(perms)))
    B = sparse.csr_matrix((np.array(data, dtype=float), (rows, cols)),
                          shape=(pair.ordered.n_vertices, len(cells)))
    return B, cells
