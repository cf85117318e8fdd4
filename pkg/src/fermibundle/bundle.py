"""Flat Hermitian bundles on configuration graphs.

A bundle of rank r stores one r x r unitary per edge, for the stored
direction i -> j of the edge; it maps fiber coordinates at i to fiber
coordinates at j.  The reverse direction uses the conjugate transpose.

Frames follow the trivialization convention: ``frame[v]`` maps fiber
coordinates at v into a fixed reference space, and a frame is parallel when
``frame[j] @ U(i -> j) == frame[i]`` on every edge.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.stats import unitary_group

from . import perm as P
from .confspace import ConfigGraph, ConfigGraphPair, permutation_loop
from .errors import (DimensionError, InvalidFrameError, NotALoopError, RepresentationError,
                     ShapeError, TrivializationObstruction, UnsupportedTopologyError)
from .params import PhysicalParams

UNITARY_TOL = 1e-12


@dataclass(eq=False)
class DiscreteBundle:
    graph: ConfigGraph
    rank: int
    unitaries: np.ndarray  # (n_edges, rank, rank)
    name: str = ""

    def __post_init__(self):
        U = np.asarray(self.unitaries, dtype=complex)
        if U.shape != (self.graph.n_edges, self.rank, self.rank):
            raise ShapeError(f"expected ({self.graph.n_edges}, {self.rank}, {self.rank}) "
                             f"edge unitaries, got {U.shape}")
        self.unitaries = U

    def unitarity_residual(self) -> float:
        if len(self.unitaries) == 0:
            return 0.0
        eye = np.eye(self.rank)
        prod = np.einsum("eji,ejk->eik", self.unitaries.conj(), self.unitaries)
        return float(np.max(np.abs(prod - eye)))

    def transport(self, i: int, j: int) -> np.ndarray:
        e, forward = self.graph.edge_id(i, j)
        U = self.unitaries[e]
        return U if forward else U.conj().T

    def to_json(self) -> dict:
        U = self.unitaries.reshape(len(self.unitaries), -1)
        return {
            "name": self.name,
            "rank": self.rank,
            "graph_hash": self.graph.digest(),
            "edges": self.graph.edges.tolist(),
            "unitaries": [[[float(z.real), float(z.imag)] for z in row] for row in U],
        }


def _scalar_bundle(graph: ConfigGraph, phases: np.ndarray, name: str) -> DiscreteBundle:
    return DiscreteBundle(graph, 1, np.asarray(phases, dtype=complex).reshape(-1, 1, 1), name)


def trivial_bundle(graph: ConfigGraph, rank: int = 1) -> DiscreteBundle:
    U = np.broadcast_to(np.eye(rank, dtype=complex), (graph.n_edges, rank, rank)).copy()
    return DiscreteBundle(graph, rank, U, "trivial")


def _require_free(pair: ConfigGraphPair):
    # with coinciding points the fiber is smaller than N! and edge alignments are not unique
    if pair.ordered.collisions:
        raise UnsupportedTopologyError("statistics bundles need a collision-free configuration graph")


def _alignments(pair: ConfigGraphPair) -> list[P.Permutation]:
    _require_free(pair)
    return [P.Permutation(tuple(row)) for row in pair.alignment]


def bundle_from_character(pair: ConfigGraphPair, character: str = "alternating") -> DiscreteBundle:
    """Line bundle on the quotient graph whose loop holonomies are character(sigma_loop)."""
    if character == "trivial":
        return _scalar_bundle(pair.quotient, np.ones(pair.quotient.n_edges), "trivial")
    if character != "alternating":
        raise ValueError(f"S_N has only the trivial and alternating characters, not {character!r}")
    signs = [P.sign(t) for t in _alignments(pair)]
    return _scalar_bundle(pair.quotient, np.array(signs, dtype=float), "fermionic")


def check_representation(rep: Callable[[P.Permutation], np.ndarray], n: int,
                         tol: float = 1e-10) -> int:
    """Validate unitarity and the homomorphism law; return the representation dimension.

    Exhaustive over S_n for n <= 4, otherwise over products of adjacent
    transpositions with all group elements reachable in two steps.
    """
    ident = np.atleast_2d(rep(P.identity(n)))
    dim = ident.shape[0]
    if np.max(np.abs(ident - np.eye(dim))) > tol:
        raise RepresentationError("identity is not represented by the identity matrix")
    if n <= 4:
        elems = P.all_permutations(n)
        pairs = [(a, b) for a in elems for b in elems]
    else:
        gens = [P.transposition(n, i, i + 1) for i in range(1, n)]
        elems = gens + [P.compose(a, b) for a in gens for b in gens]
        pairs = [(a, b) for a in gens for b in elems]
    cache = {}

    def R(p):
        if p not in cache:
            M = np.atleast_2d(np.asarray(rep(p), dtype=complex))
            if M.shape != (dim, dim):
                raise RepresentationError(f"rep({p}) has shape {M.shape}, expected {(dim, dim)}")
            if np.max(np.abs(M.conj().T @ M - np.eye(dim))) > tol:
                raise RepresentationError(f"rep({p}) is not unitary")
            cache[p] = M
        return cache[p]

    for a, b in pairs:
        if np.max(np.abs(R(P.compose(a, b)) - R(a) @ R(b))) > tol:
            raise RepresentationError(f"rep(compose({a}, {b})) != rep({a}) rep({b})")
    return dim


def bundle_from_representation(pair: ConfigGraphPair, rep: Callable[[P.Permutation], np.ndarray]
                               ) -> DiscreteBundle:
    """Quotient of the trivial bundle over the ordered graph by the S_N action ``rep``.

    Fibers are identified with the representation space through the
    canonical (sorted) representatives, which makes the edge unitary
    ``rep(tau)`` for the aligning permutation tau of the edge.  The holonomy
    of a loop is then ``rep(loop_permutation(loop))``.
    """
    dim = check_representation(rep, pair.n_particles)
    cache: dict[P.Permutation, np.ndarray] = {}
    U = np.empty((pair.quotient.n_edges, dim, dim), dtype=complex)
    for e, tau in enumerate(_alignments(pair)):
        if tau not in cache:
            cache[tau] = np.atleast_2d(np.asarray(rep(tau), dtype=complex))
        U[e] = cache[tau]
    return DiscreteBundle(pair.quotient, dim, U, "representation")


def sign_rep(p: P.Permutation) -> np.ndarray:
    return np.array([[P.sign(p)]], dtype=float)


def trivial_rep(p: P.Permutation) -> np.ndarray:
    return np.eye(1)


def standard_rep(n: int) -> Callable[[P.Permutation], np.ndarray]:
    """The (n-1)-dimensional standard representation of S_n (real orthogonal)."""
    # orthonormal basis of the complement of (1, ..., 1)
    Q, _ = np.linalg.qr(np.c_[np.ones(n), np.eye(n)[:, : n - 1]])
    basis = Q[:, 1:]

    def rep(p: P.Permutation) -> np.ndarray:
        return basis.T @ p.matrix() @ basis

    return rep


def _wedge_sort_sign(seq: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sort a wedge monomial; return (sorted indices, sign); sign 0 on repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return tuple(sorted(seq)), 0
    inversions = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return tuple(sorted(seq)), (-1) ** inversions


def exterior_power_bundle(pair: ConfigGraphPair, w_dim: int) -> DiscreteBundle:
    """Anti-symmetric part of the point-indexed tensor power of a fixed space C^w_dim.

    Fibers are spanned by wedge monomials e_{a_1} ^ ... ^ e_{a_N}
    (a_1 < ... < a_N) whose slot k belongs to the k-th point of the sorted
    configuration.  Moving a point carries its factor along unchanged; the
    factors are then re-sorted into the slot order of the target
    configuration, with the sign of that re-sorting.
    """
    n = pair.n_particles
    if w_dim < n:
        raise ValueError(f"exterior power of C^{w_dim} of degree {n} is zero")
    monomials = list(itertools.combinations(range(w_dim), n))
    mindex = {m: i for i, m in enumerate(monomials)}
    rank = len(monomials)
    assert rank == math.comb(w_dim, n)
    U = np.zeros((pair.quotient.n_edges, rank, rank), dtype=complex)
    for e, tau in enumerate(_alignments(pair)):
        inv = tau.inverse()
        for col, mono in enumerate(monomials):
            # slot k of the landed tuple sits at canonical slot tau(k)
            reordered = [mono[inv(m) - 1] for m in range(1, n + 1)]
            target, s = _wedge_sort_sign(reordered)
            U[e, mindex[target], col] = s
    return DiscreteBundle(pair.quotient, rank, U, f"exterior(W={w_dim})")


def pseudoscalar_bundle(pair: ConfigGraphPair) -> DiscreteBundle:
    """Line of top-degree forms e_{1,1} ^ ... ^ e_{N,d}; defined for odd d only.

    Transport along a hop keeps each tangent vector attached to its point;
    re-sorting the N blocks of d vectors into canonical order costs the sign
    of the letter-level block permutation.
    """
    d = pair.box.d
    if d % 2 == 0:
        raise DimensionError(
            f"the pseudo-scalar construction works only for odd d (got d={d}): for even d the "
            "block-reordering sign is always +1, which gives the trivial bundle")
    signs = [P.sign(P.expand_blocks(t, d)) for t in _alignments(pair)]
    return _scalar_bundle(pair.quotient, np.array(signs, dtype=float), "pseudoscalar")


def directsum_ambient_bundle(pair: ConfigGraphPair) -> DiscreteBundle:
    """Rank-N! bundle with one component per ordering of the configuration.

    Component rho at q is the ordering ``rho.act(canonical rep of q)``.
    Transport sends component rho at q to the ordering reached by lifting the
    hop from that ordering, which is ``compose(tau, rho)`` at r.
    """
    n = pair.n_particles
    perms = P.all_permutations(n)
    pindex = {p: i for i, p in enumerate(perms)}
    nf = len(perms)
    U = np.zeros((pair.quotient.n_edges, nf, nf), dtype=complex)
    for e, tau in enumerate(_alignments(pair)):
        for col, rho in enumerate(perms):
            U[e, pindex[P.compose(tau, rho)], col] = 1.0
    return DiscreteBundle(pair.quotient, nf, U, "directsum")


def antisymmetric_vector(n: int) -> np.ndarray:
    """Unit vector w with w_rho = sign(rho)/sqrt(N!) in the ordering basis."""
    perms = P.all_permutations(n)
    return np.array([P.sign(p) for p in perms], dtype=complex) / math.sqrt(len(perms))


def directsum_antisym_bundle(pair: ConfigGraphPair, tol: float = 1e-12) -> DiscreteBundle:
    """Rank-1 subbundle {w : w_(sigma q) = sign(sigma) w_q} of the ordering bundle."""
    ambient = directsum_ambient_bundle(pair)
    v = antisymmetric_vector(pair.n_particles)
    moved = ambient.unitaries @ v  # (E, N!)
    coeff = moved @ v.conj()
    leak = np.max(np.abs(moved - coeff[:, None] * v[None, :])) if len(moved) else 0.0
    if leak > tol:
        raise AssertionError(f"anti-symmetric subbundle is not parallel (leak {leak:.3g})")
    return _scalar_bundle(pair.quotient, coeff, "directsum-antisym")


def pair_angle_increment(x: np.ndarray, x_new: np.ndarray, y: np.ndarray) -> float:
    """Principal-value change of arg(x - y) when x moves to x_new."""
    a = x - y
    b = x_new - y
    return float(np.angle((b[0] + 1j * b[1]) / (a[0] + 1j * a[1])))


def anyon_bundle(pair: ConfigGraphPair, beta: float) -> DiscreteBundle:
    """Line bundle on the plane configuration graph with exchange holonomy exp(i beta).

    The phase of a hop is exp(i beta/pi * total change of the pair angles
    between the moving particle and every other particle).
    """
    box = pair.box
    if box.d != 2:
        raise DimensionError(f"anyonic statistics needs d = 2, got d = {box.d}")
    if any(box.periodic):
        raise UnsupportedTopologyError("pair angles need a planar (non-periodic) box")
    windings = getattr(pair, "_windings", None)
    if windings is None:
        windings = pair._windings = pair_windings(pair)
    phases = np.exp(1j * beta / math.pi * windings)
    return _scalar_bundle(pair.quotient, phases, f"anyon(beta={beta:.6g})")


def pair_windings(pair: ConfigGraphPair) -> np.ndarray:
    """Sum of pair-angle increments for every stored quotient edge direction."""
    _require_free(pair)
    box = pair.box
    qv = pair.quotient.vertices
    out = np.empty(pair.quotient.n_edges)
    for e, (q, r) in enumerate(pair.quotient.edges):
        old = [s for s in qv[q] if s not in qv[r]][0]
        new = [s for s in qv[r] if s not in qv[q]][0]
        x, xn = box.position(old), box.position(new)
        total = 0.0
        for s in qv[q]:
            if s == old:
                continue
            inc = pair_angle_increment(x, xn, box.position(s))
            if abs(inc) >= math.pi - 1e-9:
                raise AssertionError("hop turns a pair angle by pi; branch cut ambiguous")
            total += inc
        out[e] = total
    return out


def loop_winding(pair: ConfigGraphPair, loop: Sequence[int]) -> float:
    """Total pair-angle winding (radians) accumulated along a quotient path."""
    w = getattr(pair, "_windings", None)
    if w is None:
        w = pair._windings = pair_windings(pair)
    total = 0.0
    for a, b in zip(loop, loop[1:]):
        e, forward = pair.quotient.edge_id(a, b)
        total += w[e] if forward else -w[e]
    return total


def path_transport(bundle: DiscreteBundle, path: Sequence[int]) -> np.ndarray:
    """Ordered product of edge transports along a path (later edges on the left)."""
    M = np.eye(bundle.rank, dtype=complex)
    for a, b in zip(path, path[1:]):
        M = bundle.transport(int(a), int(b)) @ M
    return M


def holonomy(bundle: DiscreteBundle, loop: Sequence[int]) -> np.ndarray:
    loop = list(loop)
    if loop[0] != loop[-1]:
        raise NotALoopError("holonomy needs a closed path")
    bundle.graph.check_path(loop)
    return path_transport(bundle, loop)


def regauge(bundle: DiscreteBundle, gauge: np.ndarray) -> DiscreteBundle:
    """Bundle seen through per-vertex unitaries: U'(i->j) = g_j U g_i^H."""
    g = np.asarray(gauge, dtype=complex).reshape(bundle.graph.n_vertices, bundle.rank, bundle.rank)
    i, j = bundle.graph.edges[:, 0], bundle.graph.edges[:, 1]
    U = g[j] @ bundle.unitaries @ np.conj(np.swapaxes(g[i], 1, 2))
    return DiscreteBundle(bundle.graph, bundle.rank, U, bundle.name + "+gauge")


def random_gauge(graph: ConfigGraph, rank: int, rng: np.random.Generator) -> np.ndarray:
    if rank == 1:
        return np.exp(2j * np.pi * rng.random(graph.n_vertices)).reshape(-1, 1, 1)
    return unitary_group.rvs(rank, size=graph.n_vertices, random_state=rng).reshape(
        graph.n_vertices, rank, rank)


def random_unitary_bundle(graph: ConfigGraph, rank: int, rng: np.random.Generator
                          ) -> DiscreteBundle:
    if rank == 1:
        U = np.exp(2j * np.pi * rng.random(graph.n_edges)).reshape(-1, 1, 1)
    else:
        U = unitary_group.rvs(rank, size=graph.n_edges, random_state=rng).reshape(-1, rank, rank)
    return DiscreteBundle(graph, rank, U, "random")


@dataclass
class SpanningForest:
    """Breadth-first spanning forest with tree transports of a bundle."""

    roots: list[int]
    component: np.ndarray
    parent: np.ndarray
    order: np.ndarray
    tree_edge: np.ndarray  # bool per edge


def spanning_forest(graph: ConfigGraph) -> SpanningForest:
    ncomp, labels = connected_components(graph.adjacency(), directed=False)
    parent = np.full(graph.n_vertices, -1, dtype=np.int64)
    orders = []
    roots = []
    adj = graph.adjacency()
    for c in range(ncomp):
        root = int(np.flatnonzero(labels == c)[0])
        roots.append(root)
        order, pred = breadth_first_order(adj, root, directed=False, return_predecessors=True)
        mask = pred[order] >= 0
        parent[order[mask]] = pred[order[mask]]
        orders.append(order)
    tree = np.zeros(graph.n_edges, dtype=bool)
    for v in np.flatnonzero(parent >= 0):
        e, _ = graph.edge_id(int(parent[v]), int(v))
        tree[e] = True
    return SpanningForest(roots, labels, parent, np.concatenate(orders), tree)


def tree_transports(bundle: DiscreteBundle, forest: SpanningForest) -> np.ndarray:
    """T[v] = transport from the component root to v along the tree."""
    T = np.empty((bundle.graph.n_vertices, bundle.rank, bundle.rank), dtype=complex)
    for root in forest.roots:
        T[root] = np.eye(bundle.rank)
    for v in forest.order:
        p = forest.parent[v]
        if p >= 0:
            T[v] = bundle.transport(int(p), int(v)) @ T[p]
    return T


def cycle_holonomies(bundle: DiscreteBundle, forest: SpanningForest, T: np.ndarray | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Holonomies T_j^H U(i->j) T_i of the fundamental cycles (one per non-tree edge)."""
    if T is None:
        T = tree_transports(bundle, forest)
    cyc = np.flatnonzero(~forest.tree_edge)
    i, j = bundle.graph.edges[cyc, 0], bundle.graph.edges[cyc, 1]
    C = np.conj(np.swapaxes(T[j], 1, 2)) @ bundle.unitaries[cyc] @ T[i]
    return cyc, C


def fundamental_cycle(graph: ConfigGraph, forest: SpanningForest, e: int) -> list[int]:
    """Closed path root -> i -> j -> root for non-tree edge e = (i, j)."""
    i, j = (int(x) for x in graph.edges[e])

    def up(v):
        path = [v]
        while forest.parent[path[-1]] >= 0:
            path.append(int(forest.parent[path[-1]]))
        return path[::-1]

    return up(i) + up(j)[::-1]


@dataclass
class GaugeEquivalence:
    equivalent: bool
    witness: np.ndarray | None  # (V, r, r): fiber of b1 -> fiber of b2
    cycle_residual: float
    edge_residual: float
    n_cycles: int

    def __bool__(self):
        return self.equivalent


def _intertwiner(C1: np.ndarray, C2: np.ndarray, tol: float) -> np.ndarray | None:
    """Unitary W with W C1[k] = C2[k] W for all k, or None."""
    r = C1.shape[-1]
    if len(C1) == 0:
        return np.eye(r, dtype=complex)
    if r == 1:
        if np.max(np.abs(C1 - C2)) > tol:
            return None
        return np.eye(1, dtype=complex)
    eye = np.eye(r)
    M = np.zeros((r * r, r * r), dtype=complex)
    for a, b in zip(C1, C2):
        K = np.kron(a.T, eye) - np.kron(eye, b)
        M += K.conj().T @ K
    w, V = np.linalg.eigh(M)
    null = V[:, w <= max(tol, 1e-10) * max(1.0, len(C1))]
    if null.shape[1] == 0:
        return None
    rng = np.random.default_rng(0)
    Wv = null @ (rng.normal(size=null.shape[1]) + 1j * rng.normal(size=null.shape[1]))
    W = Wv.reshape(r, r, order="F")
    u, s, vh = np.linalg.svd(W)
    if s[-1] < 1e-8 * s[0]:
        return None
    return u @ vh


def is_gauge_equivalent(b1: DiscreteBundle, b2: DiscreteBundle, tol: float = 1e-10
                        ) -> GaugeEquivalence:
    """Decide isomorphism of two bundles on the same graph by spanning-tree gauge fixing.

    Both bundles are gauge-fixed to the identity on a breadth-first
    spanning forest; they are isomorphic iff, on each component, one unitary
    W conjugates every fundamental-cycle holonomy of ``b1`` into that of
    ``b2``.  The witness ``I[v] = T2[v] W T1[v]^H`` satisfies
    ``I[j] U1(i->j) = U2(i->j) I[i]`` on every edge.
    """
    if b1.graph is not b2.graph and b1.graph.digest() != b2.graph.digest():
        raise ShapeError("bundles live on different graphs")
    if b1.rank != b2.rank:
        raise ShapeError(f"rank {b1.rank} vs rank {b2.rank}")
    graph = b1.graph
    forest = spanning_forest(graph)
    T1 = tree_transports(b1, forest)
    T2 = tree_transports(b2, forest)
    cyc, C1 = cycle_holonomies(b1, forest, T1)
    _, C2 = cycle_holonomies(b2, forest, T2)
    comp_of_cycle = forest.component[graph.edges[cyc, 0]]
    Ws = {}
    for c, root in enumerate(forest.roots):
        sel = comp_of_cycle == c
        W = _intertwiner(C1[sel], C2[sel], tol)
        if W is None:
            res = float(np.max(np.abs(C1[sel] - C2[sel]))) if sel.any() else 0.0
            return GaugeEquivalence(False, None, res, float("nan"), len(cyc))
        Ws[c] = W
    Wv = np.stack([Ws[c] for c in forest.component])
    I = T2 @ Wv @ np.conj(np.swapaxes(T1, 1, 2))
    cyc_res = 0.0
    if len(cyc):
        Wc = Wv[graph.edges[cyc, 0]]
        cyc_res = float(np.max(np.abs(Wc @ C1 @ np.conj(np.swapaxes(Wc, 1, 2)) - C2)))
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    edge_res = float(np.max(np.abs(I[j] @ b1.unitaries - b2.unitaries @ I[i]))) if len(i) else 0.0
    ok = cyc_res <= tol and edge_res <= tol
    return GaugeEquivalence(ok, I if ok else None, cyc_res, edge_res, len(cyc))


def pullback(bundle: DiscreteBundle, pair: ConfigGraphPair) -> DiscreteBundle:
    """Bundle on the ordered graph with fiber over v equal to the fiber over pi(v)."""
    if bundle.graph is not pair.quotient:
        raise ShapeError("bundle must live on the pair's quotient graph")
    og = pair.ordered
    a = pair.projection[og.edges[:, 0]]
    b = pair.projection[og.edges[:, 1]]
    U = np.empty((og.n_edges, bundle.rank, bundle.rank), dtype=complex)
    lookup = pair.quotient.edge_lookup
    for e, (x, y) in enumerate(zip(a, b)):
        if x < y:
            U[e] = bundle.unitaries[lookup[(int(x), int(y))]]
        else:
            U[e] = bundle.unitaries[lookup[(int(y), int(x))]].conj().T
    return DiscreteBundle(og, bundle.rank, U, "pullback(" + bundle.name + ")")


@dataclass(eq=False)
class Frame:
    """Per-vertex unitaries mapping fibers of ``bundle`` to a reference space."""

    bundle: DiscreteBundle
    values: np.ndarray  # (V, r, r)

    def parallel_residual(self) -> float:
        g = self.bundle.graph
        if g.n_edges == 0:
            return 0.0
        i, j = g.edges[:, 0], g.edges[:, 1]
        return float(np.max(np.abs(self.values[j] @ self.bundle.unitaries - self.values[i])))

    def scalar(self) -> np.ndarray:
        if self.bundle.rank != 1:
            raise ShapeError("scalar view only for line bundles")
        return self.values[:, 0, 0]

    def require_parallel(self, tol: float = 1e-10) -> None:
        res = self.parallel_residual()
        if res > tol:
            raise InvalidFrameError(f"frame is not parallel (residual {res:.3g})")


def trivialize(bundle: DiscreteBundle, tol: float = 1e-10) -> Frame:
    """Parallel frame built by tree transport from each component root.

    Raises :class:`TrivializationObstruction` naming a fundamental cycle
    whose holonomy is not the identity.
    """
    forest = spanning_forest(bundle.graph)
    T = tree_transports(bundle, forest)
    cyc, C = cycle_holonomies(bundle, forest, T)
    if len(cyc):
        dev = np.max(np.abs(C - np.eye(bundle.rank)), axis=(1, 2))
        worst = int(np.argmax(dev))
        if dev[worst] > tol:
            loop = fundamental_cycle(bundle.graph, forest, int(cyc[worst]))
            raise TrivializationObstruction(loop, holonomy(bundle, loop), dev[worst])
    return Frame(bundle, np.conj(np.swapaxes(T, 1, 2)))


def connection_laplacian(bundle: DiscreteBundle, V=None, params=None, spacing: float | None = None
                         ) -> sparse.csr_matrix:
    """H = -(hbar^2/2m) Delta + V for the bundle's hop-difference Laplacian.

    ``(Delta psi)(q) = spacing**-2 * sum_{r ~ q} (U(r->q) psi(r) - psi(q))``.
    ``V`` is an array with one real value per vertex, a callable taking the
    (N, d) array of particle positions, or None for zero.
    """
    params = params or PhysicalParams()
    g = bundle.graph
    a = spacing or params.spacing or g.box.spacing
    Vv = evaluate_potential(V, g)
    r = bundle.rank
    kin = params.hbar ** 2 / (2 * params.mass * a * a)
    deg = np.zeros(g.n_vertices)
    np.add.at(deg, g.edges[:, 0], 1)
    np.add.at(deg, g.edges[:, 1], 1)
    i, j = g.edges[:, 0], g.edges[:, 1]
    # block (i, j) = -kin * U(j->i) = -kin * U_e^H ; block (j, i) = -kin * U_e
    off_ij = -kin * np.conj(np.swapaxes(bundle.unitaries, 1, 2))
    off_ji = -kin * bundle.unitaries
    diag = (kin * deg + Vv)[:, None, None] * np.eye(r)[None]
    rows = np.r_[i, j, np.arange(g.n_vertices)]
    cols = np.r_[j, i, np.arange(g.n_vertices)]
    blocks = np.concatenate([off_ij, off_ji, diag.astype(complex)])
    rr, cc = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
    R = (rows[:, None, None] * r + rr[None]).ravel()
    Cc = (cols[:, None, None] * r + cc[None]).ravel()
    n = g.n_vertices * r
    return sparse.coo_matrix((blocks.ravel(), (R, Cc)), shape=(n, n)).tocsr()


def evaluate_potential(V, graph: ConfigGraph) -> np.ndarray:
    if V is None:
        return np.zeros(graph.n_vertices)
    if callable(V):
        return np.array([float(V(graph.positions(v))) for v in range(graph.n_vertices)])
    arr = np.asarray(V, dtype=float).ravel()
    if arr.shape != (graph.n_vertices,) or not np.all(np.isfinite(arr)):
        raise ShapeError(f"potential needs one finite value per vertex ({graph.n_vertices})")
    return arr


def exchange_loop(pair: ConfigGraphPair, base_rep: int = 0, i: int = 1, j: int = 2) -> list[int]:
    """Quotient loop exchanging particles i and j once counter-clockwise.

    Only particles i and j move.  In the plane the loop is oriented so that
    the total pair-angle winding is +pi; other dimensions return the
    shortest such loop as found.
    """
    loop = permutation_loop(pair, base_rep, P.transposition(pair.n_particles, i, j), movers=(i, j))
    if pair.box.d == 2 and not any(pair.box.periodic):
        w = loop_winding(pair, loop)
        if w < 0:
            loop = loop[::-1]
            w = -w
        if abs(w - math.pi) > 1e-9:
            raise AssertionError(f"exchange loop winds by {w / math.pi:.6g} pi, expected pi")
    return loop
