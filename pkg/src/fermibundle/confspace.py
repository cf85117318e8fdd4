"""Finite lattice stand-ins for ordered and unordered configuration spaces.

Sites of a :class:`LatticeBox` are enumerated in lexicographic order of
their integer coordinates, so sorting site indices is the same as sorting
points lexicographically.  Graph vertices are tuples of site indices;
helpers convert to and from coordinate points.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import perm as P
from .errors import CapacityError, InvalidConfigError, LiftError, NotALoopError, ShapeError


@dataclass(frozen=True)
class LatticeBox:
    d: int
    sides: tuple[int, ...]
    periodic: tuple[bool, ...] | bool = False
    spacing: float = 1.0

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        if self.d < 1 or len(sides) != self.d:
            raise ShapeError(f"need {self.d} side lengths, got {sides}")
        if any(s < 1 for s in sides):
            raise ValueError("side lengths must be positive")
        periodic = self.periodic
        if isinstance(periodic, bool):
            periodic = (periodic,) * self.d
        periodic = tuple(bool(p) for p in periodic)
        if len(periodic) != self.d:
            raise ShapeError("one periodic flag per axis")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def cube(cls, d: int, side: int, periodic: bool = False, spacing: float = 1.0):
        return cls(d, (side,) * d, periodic, spacing)

    @property
    def n_sites(self) -> int:
        return math.prod(self.sides)

    @cached_property
    def sites(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(s) for s in self.sides)))

    @cached_property
    def site_index(self) -> dict[tuple[int, ...], int]:
        return {s: i for i, s in enumerate(self.sites)}

    @cached_property
    def neighbors(self) -> list[list[int]]:
        """Axis-aligned unit-step neighbours of every site (no duplicates)."""
        out = []
        for site in self.sites:
            nbrs = []
            for axis in range(self.d):
                for step in (-1, 1):
                    c = list(site)
                    c[axis] += step
                    if self.periodic[axis]:
                        c[axis] %= self.sides[axis]
                    elif not 0 <= c[axis] < self.sides[axis]:
                        continue
                    j = self.site_index[tuple(c)]
                    if j != self.site_index[site] and j not in nbrs:
                        nbrs.append(j)
            out.append(nbrs)
        return out

    def position(self, site: int) -> np.ndarray:
        return self.spacing * np.asarray(self.sites[site], dtype=float)

    def to_json(self) -> dict:
        return {"d": self.d, "sides": list(self.sides), "periodic": list(self.periodic),
                "spacing": self.spacing}


@dataclass(eq=False)
class ConfigGraph:
    """Undirected graph whose vertices are N-tuples of site indices.

    ``edges[e] = (i, j)`` with ``i < j``; the stored direction of an edge is
    i -> j.  ``neighbors[i]`` lists ``(j, e)`` pairs.
    """

    box: LatticeBox
    n_particles: int
    vertices: list[tuple[int, ...]]
    edges: np.ndarray
    ordered: bool
    collisions: bool = False
    index: dict[tuple[int, ...], int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> list[list[tuple[int, int]]]:
        nb: list[list[tuple[int, int]]] = [[] for _ in self.vertices]
        for e, (i, j) in enumerate(self.edges):
            nb[i].append((int(j), e))
            nb[j].append((int(i), e))
        return nb

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}

    def edge_id(self, i: int, j: int) -> tuple[int, bool]:
        """Return (edge index, True if i -> j is the stored direction)."""
        if i < j:
            e = self.edge_lookup.get((i, j))
            forward = True
        else:
            e = self.edge_lookup.get((j, i))
            forward = False
        if e is None:
            raise ValueError(f"vertices {i} and {j} are not adjacent")
        return e, forward

    def vertex_points(self, i: int) -> tuple[tuple[int, ...], ...]:
        return tuple(self.box.sites[s] for s in self.vertices[i])

    def index_of(self, points: Sequence[Sequence[int]]) -> int:
        key = tuple(self.box.site_index[tuple(int(c) for c in p)] for p in points)
        if not self.ordered:
            key = tuple(sorted(key))
        try:
            return self.index[key]
        except KeyError:
            raise InvalidConfigError(f"{points} is not a vertex of this graph") from None

    def positions(self, i: int) -> np.ndarray:
        """Physical coordinates, shape (N, d)."""
        return np.array([self.box.position(s) for s in self.vertices[i]])

    @cached_property
    def measure(self) -> float:
        """Weight spacing**(N d) carried by every vertex."""
        return self.box.spacing ** (self.n_particles * self.box.d)

    def check_path(self, path: Sequence[int]) -> list[int]:
        path = [int(v) for v in path]
        if not path:
            raise ValueError("empty path")
        for a, b in zip(path, path[1:]):
            self.edge_id(a, b)
        return path

    def components(self) -> tuple[int, np.ndarray]:
        return connected_components(self.adjacency(), directed=False)

    def adjacency(self):
        n = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        return coo_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()

    @cached_property
    def action_table(self) -> tuple[list[P.Permutation], np.ndarray]:
        """For ordered graphs: ``table[s, v]`` is the index of sigma_s . v."""
        if not self.ordered:
            raise ValueError("the permutation action lives on the ordered graph")
        perms = P.all_permutations(self.n_particles)
        table = np.empty((len(perms), self.n_vertices), dtype=np.int64)
        for s, p in enumerate(perms):
            for v, tup in enumerate(self.vertices):
                table[s, v] = self.index[p.act(tup)]
        return perms, table

    def digest(self) -> str:
        payload = json.dumps({"vertices": self.vertices, "edges": self.edges.tolist()})
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_json(self, projection: Sequence[int] | None = None) -> dict:
        out = {
            "box": self.box.to_json(),
            "n_particles": self.n_particles,
            "ordered": self.ordered,
            "vertices": [[list(p) for p in self.vertex_points(i)] for i in range(self.n_vertices)],
            "edges": self.edges.tolist(),
        }
        if projection is not None:
            out["projection"] = [int(x) for x in projection]
        return out


def build_ordered_graph(box: LatticeBox, n: int, collisions: bool = False) -> ConfigGraph:
    """All ordered N-tuples of distinct sites, joined by single-particle unit hops.

    With ``collisions=True`` coinciding sites are kept and hops onto occupied
    sites are allowed (used for the one-dimensional boundary demo).
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if not collisions and box.n_sites < n:
        raise CapacityError(f"{box.n_sites} sites cannot hold {n} distinct particles")
    sites = range(box.n_sites)
    if collisions:
        verts = list(itertools.product(sites, repeat=n))
    else:
        verts = list(itertools.permutations(sites, n))
    index = {v: i for i, v in enumerate(verts)}
    nbrs = box.neighbors
    edges = []
    for i, v in enumerate(verts):
        for k, s in enumerate(v):
            for t in nbrs[s]:
                if not collisions and t in v:
                    continue
                w = v[:k] + (t,) + v[k + 1:]
                j = index[w]
                if i < j:
                    edges.append((i, j))
    return ConfigGraph(box, n, verts, np.array(edges, dtype=np.int64), ordered=True,
                       collisions=collisions)


def project(points: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    """Unordered configuration (canonically sorted) of an ordered one."""
    pts = [tuple(int(c) for c in p) for p in points]
    if len(set(pts)) != len(pts):
        raise InvalidConfigError(f"configuration {pts} has coinciding points")
    return tuple(sorted(pts))


@dataclass(eq=False)
class ConfigGraphPair:
    """Ordered graph, its S_N quotient, the projection and lift tables.

    ``alignment[e]`` (for quotient edge e = (q, r), q < r) is the permutation
    tau, 1-based images, such that hopping from the canonical representative
    of q lands on ``tau.act(canonical representative of r)``.
    """

    ordered: ConfigGraph
    quotient: ConfigGraph
    projection: np.ndarray
    fibers: list[list[int]]
    alignment: np.ndarray

    @property
    def n_particles(self) -> int:
        return self.ordered.n_particles

    @property
    def box(self) -> LatticeBox:
        return self.ordered.box

    def canonical_rep(self, q: int) -> int:
        """Ordered vertex index of the sorted tuple over quotient vertex q."""
        return self.ordered.index[self.quotient.vertices[q]]

    def aligning_permutation(self, q: int, r: int) -> P.Permutation:
        e, forward = self.quotient.edge_id(q, r)
        tau = P.Permutation(tuple(self.alignment[e]))
        return tau if forward else tau.inverse()

    def to_json(self) -> dict:
        return {"ordered": self.ordered.to_json(self.projection),
                "quotient": self.quotient.to_json()}


def build_quotient(ordered: ConfigGraph) -> ConfigGraphPair:
    """Quotient of an ordered graph by relabelling, with covering checks."""
    if not ordered.ordered:
        raise ValueError("expected an ordered configuration graph")
    n = ordered.n_particles
    nfact = math.factorial(n)
    canon = sorted({tuple(sorted(v)) for v in ordered.vertices})
    qindex = {v: i for i, v in enumerate(canon)}
    projection = np.array([qindex[tuple(sorted(v))] for v in ordered.vertices], dtype=np.int64)
    fibers: list[list[int]] = [[] for _ in canon]
    for i, q in enumerate(projection):
        fibers[q].append(i)

    qedges: dict[tuple[int, int], int] = {}
    for i, j in ordered.edges:
        a, b = projection[i], projection[j]
        if a == b:
            raise AssertionError("hop preserved the unordered configuration")
        key = (min(a, b), max(a, b))
        qedges[key] = qedges.get(key, 0) + 1
    keys = sorted(qedges)

    if not ordered.collisions:
        bad = [q for q, f in enumerate(fibers) if len(f) != nfact]
        if bad:
            raise AssertionError(f"{len(bad)} quotient vertices lack {nfact} preimages")
        bad_e = [k for k in keys if qedges[k] != nfact]
        if bad_e:
            raise AssertionError(f"{len(bad_e)} quotient edges lack {nfact} preimages")

    quotient = ConfigGraph(ordered.box, n, canon, np.array(keys, dtype=np.int64), ordered=False,
                           collisions=ordered.collisions)
    alignment = np.empty((len(keys), n), dtype=np.int64)
    for e, (q, r) in enumerate(keys):
        cq, cr = canon[q], canon[r]
        moved = [s for s in cq if s not in cr]
        new = [s for s in cr if s not in cq]
        if len(moved) != 1 or len(new) != 1:
            # collision graphs: a hop onto an occupied site changes multiplicities
            alignment[e] = np.arange(1, n + 1)
            continue
        k = cq.index(moved[0])
        landed = cq[:k] + (new[0],) + cq[k + 1:]
        alignment[e] = [cr.index(s) + 1 for s in landed]
    return ConfigGraphPair(ordered, quotient, projection, fibers, alignment)


def build_pair(box: LatticeBox, n: int, collisions: bool = False) -> ConfigGraphPair:
    return build_quotient(build_ordered_graph(box, n, collisions))


def lift_path(pair: ConfigGraphPair, path: Sequence[int], start: int) -> list[int]:
    """Unique ordered path over a quotient path, starting at ordered vertex ``start``."""
    path = pair.quotient.check_path(path)
    if pair.projection[start] != path[0]:
        raise LiftError(f"ordered vertex {start} does not lie over quotient vertex {path[0]}")
    qverts = pair.quotient.vertices
    cur = pair.ordered.vertices[start]
    out = [int(start)]
    for a, b in zip(path, path[1:]):
        old = [s for s in qverts[a] if s not in qverts[b]]
        new = [s for s in qverts[b] if s not in qverts[a]]
        k = cur.index(old[0])
        cur = cur[:k] + (new[0],) + cur[k + 1:]
        out.append(pair.ordered.index[cur])
    return out


def project_path(pair: ConfigGraphPair, path: Sequence[int]) -> list[int]:
    path = pair.ordered.check_path(path)
    return [int(pair.projection[v]) for v in path]


def loop_permutation(pair: ConfigGraphPair, loop: Sequence[int], base_rep: int | None = None
                     ) -> P.Permutation:
    """Permutation sigma with lift endpoint = sigma.act(base_rep).

    Concatenating loop a then loop b gives ``compose(sigma_b, sigma_a)``.
    """
    loop = list(loop)
    if loop[0] != loop[-1]:
        raise NotALoopError("path does not return to its starting vertex")
    if base_rep is None:
        base_rep = pair.canonical_rep(loop[0])
    lifted = lift_path(pair, loop, base_rep)
    start = pair.ordered.vertices[lifted[0]]
    end = pair.ordered.vertices[lifted[-1]]
    return P.Permutation(tuple(start.index(s) + 1 for s in end))


def reverse_path(path: Sequence[int]) -> list[int]:
    return list(path)[::-1]


def concatenate(*paths: Sequence[int]) -> list[int]:
    out = list(paths[0])
    for p in paths[1:]:
        if p[0] != out[-1]:
            raise ValueError("paths do not join")
        out.extend(p[1:])
    return out


def bfs_tree(graph: ConfigGraph, root: int) -> np.ndarray:
    """Parent array of a breadth-first tree (-1 for root and unreachable)."""
    parent = np.full(graph.n_vertices, -1, dtype=np.int64)
    seen = np.zeros(graph.n_vertices, dtype=bool)
    seen[root] = True
    queue = deque([root])
    nb = graph.neighbors
    while queue:
        v = queue.popleft()
        for w, _ in nb[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                queue.append(w)
    return parent


def tree_path(parent: np.ndarray, root: int, target: int) -> list[int]:
    """Path root -> target along a parent array."""
    path = [int(target)]
    while path[-1] != root:
        p = parent[path[-1]]
        if p < 0:
            raise ValueError(f"vertex {target} unreachable from {root}")
        path.append(int(p))
    return path[::-1]


def shortest_path(graph: ConfigGraph, a: int, b: int) -> list[int]:
    return tree_path(bfs_tree(graph, a), a, b)


def random_loops(graph: ConfigGraph, base: int, count: int, rng: np.random.Generator,
                 walk_length: tuple[int, int] = (4, 30)) -> list[list[int]]:
    """Random closed paths at ``base``: a random walk, then the BFS-tree path home."""
    parent = bfs_tree(graph, base)
    nb = graph.neighbors
    loops = []
    for _ in range(count):
        steps = int(rng.integers(walk_length[0], walk_length[1] + 1))
        walk = [base]
        for _ in range(steps):
            opts = nb[walk[-1]]
            walk.append(opts[int(rng.integers(len(opts)))][0])
        home = tree_path(parent, base, walk[-1])[::-1]
        loops.append(concatenate(walk, home))
    return loops


def permutation_loop(pair: ConfigGraphPair, base_rep: int, sigma: P.Permutation,
                     movers: Sequence[int] | None = None) -> list[int]:
    """Quotient loop at pi(base_rep) whose lift from base_rep ends at sigma.act(base_rep).

    Found by breadth-first search in the ordered graph; ``movers`` (1-based
    particle labels) restricts which particles may move.
    """
    og = pair.ordered
    target = og.index[sigma.act(og.vertices[base_rep])]
    if movers is None:
        path = shortest_path(og, base_rep, target)
    else:
        allowed = {m - 1 for m in movers}
        parent = {base_rep: -1}
        queue = deque([base_rep])
        while queue and target not in parent:
            v = queue.popleft()
            for w, _ in og.neighbors[v]:
                if w in parent:
                    continue
                wt = og.vertices[w]
                vt = og.vertices[v]
                k = next(i for i in range(len(vt)) if vt[i] != wt[i])
                if k not in allowed:
                    continue
                parent[w] = v
                queue.append(w)
        if target not in parent:
            raise ValueError("no path realizes this permutation with the given movers")
        path = [target]
        while path[-1] != base_rep:
            path.append(parent[path[-1]])
        path = path[::-1]
    return project_path(pair, path)


def random_ordered_path(graph: ConfigGraph, start: int, steps: int, rng: np.random.Generator
                        ) -> list[int]:
    path = [int(start)]
    nb = graph.neighbors
    for _ in range(steps):
        opts = nb[path[-1]]
        path.append(opts[int(rng.integers(len(opts)))][0])
    return path
