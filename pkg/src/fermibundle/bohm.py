"""Bohmian trajectories for closed-form anti-symmetric Gaussian states.

Orbitals are Gaussians exp(sum_a (-a x_a^2 + b x_a + c)) whose
coefficients evolve in closed form under the free or the isotropic harmonic
Hamiltonian.  An N-particle state is the normalized Slater determinant of N
such orbitals; values and gradients are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.integrate import DOP853, cumulative_trapezoid, solve_ivp

from . import perm as P
from .errors import NodeError, ShapeError
from .params import PhysicalParams

NODE_GUARD = 1e-12


@dataclass(frozen=True)
class Orbital:
    """Gaussian packet with center x0, momentum p0 and position spread sigma."""

    center: tuple[float, ...]
    momentum: tuple[float, ...]
    width: float = 1.0
    kind: str = "free"  # "free" or "harmonic"
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "momentum", tuple(float(c) for c in np.atleast_1d(self.momentum)))
        if len(self.center) != len(self.momentum):
            raise ShapeError("center and momentum need the same dimension")
        if self.kind not in ("free", "harmonic"):
            raise ValueError(f"unknown orbital evolution {self.kind!r}")
        if self.kind == "harmonic" and not self.omega > 0:
            raise ValueError("harmonic orbitals need omega > 0")
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def d(self) -> int:
        return len(self.center)

    def initial_coefficients(self, hbar: float):
        x0 = np.array(self.center)
        p0 = np.array(self.momentum)
        a0 = np.full(self.d, 1 / (4 * self.width ** 2), dtype=complex)
        b0 = 2 * a0 * x0 + 1j * p0 / hbar
        c0 = -0.25 * math.log(2 * math.pi * self.width ** 2) - a0 * x0 ** 2 - 1j * p0 * x0 / hbar
        return a0, b0, c0

    def coefficients(self, t: float, params: PhysicalParams):
        """(a, b, c) at time t, one entry per space dimension."""
        hb, m = params.hbar, params.mass
        a0, b0, c0 = self.initial_coefficients(hb)
        if t == 0:
            return a0, b0, c0
        if self.kind == "free":
            a = 1 / (1 / a0 + 2j * hb * t / m)
            b = b0 * a / a0
            c = c0 + 0.5 * np.log(a / a0) - b0 ** 2 * (a - a0) / (4 * a0 ** 2)
            return a, b, c
        w = self.omega
        alpha = m * w / (2 * hb)
        cs, sn = math.cos(w * t), math.sin(w * t)
        D = alpha * cs + 1j * a0 * sn
        # continuous branch of log D: D exp(-i w t) has positive real part
        ar = a0.real
        argD = w * t + np.arctan2((ar - alpha) * sn * cs, alpha * cs * cs + ar * sn * sn)
        logD_alpha = np.log(np.abs(D) / alpha) + 1j * argD
        a = alpha * (a0 * cs + 1j * alpha * sn) / D
        b = b0 * alpha / D
        c = c0 - 0.5 * logD_alpha + 0.25j * b0 ** 2 * sn / D
        return a, b, c


def gaussian_overlap(o1: Orbital, o2: Orbital, hbar: float, axes: Sequence[int] | None = None
                     ) -> complex:
    """<o1|o2> at t = 0, optionally restricted to a subset of axes."""
    a1, b1, c1 = o1.initial_coefficients(hbar)
    a2, b2, c2 = o2.initial_coefficients(hbar)
    A = np.conj(a1) + a2
    Bs = np.conj(b1) + b2
    per_axis = np.exp(np.conj(c1) + c2 + Bs ** 2 / (4 * A)) * np.sqrt(np.pi / A)
    if axes is not None:
        per_axis = per_axis[list(axes)]
    return complex(np.prod(per_axis))


def _evaluate(coeffs, x: np.ndarray):
    """Values and gradients of K orbitals at points x (..., d).

    Returns phi (..., K) and dphi (..., K, d).
    """
    a, b, c = coeffs  # each (K, d)
    xe = x[..., None, :]
    expo = np.sum(-a * xe ** 2 + b * xe + c, axis=-1)
    phi = np.exp(expo)
    dphi = phi[..., None] * (-2 * a * xe + b)
    return phi, dphi


@dataclass(eq=False)
class SlaterState:
    """det[phi_k(x_j, t)] / sqrt(N! det G) with G the orbital Gram matrix."""

    orbitals: list[Orbital]
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        self.orbitals = list(self.orbitals)
        ds = {o.d for o in self.orbitals}
        if len(ds) != 1:
            raise ShapeError("all orbitals must share the space dimension")
        self.d = ds.pop()
        n = self.n_particles
        G = np.array([[gaussian_overlap(self.orbitals[k], self.orbitals[l], self.params.hbar)
                       for l in range(n)] for k in range(n)])
        self.gram = G
        detG = np.linalg.det(G).real
        if not detG > 1e-14:
            raise ValueError("orbitals are linearly dependent")
        self._norm = 1 / math.sqrt(math.factorial(n) * detG)
        self._coeff_cache: dict[float, tuple] = {}

    @property
    def n_particles(self) -> int:
        return len(self.orbitals)

    def coefficients(self, t: float):
        t = float(t)
        if t not in self._coeff_cache:
            cs = [o.coefficients(t, self.params) for o in self.orbitals]
            self._coeff_cache = {t: tuple(np.array([c[i] for c in cs]) for i in range(3))}
        return self._coeff_cache[t]

    def value_grad(self, x, t: float, guard: bool = True):
        return wave_value(self, x, t, guard=guard)


def _as_points(x, n: int, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == n * d and (x.ndim == 1 or x.shape[-2:] != (n, d)):
        x = x.reshape(x.shape[:-1] + (n, d))
    if x.shape[-2:] != (n, d):
        raise ShapeError(f"expected configurations of shape (..., {n}, {d}), got {x.shape}")
    return x


def wave_value(state: SlaterState, x, t: float = 0.0, guard: bool = False):
    """Value psi and gradient (flattened to N d) at configuration(s) x.

    ``x`` may be (N, d), flat (N d,) or batched (..., N, d).  With ``guard``
    a NodeError is raised where |det| falls below 1e-12 times the product
    of the row norms of the orbital matrix.
    """
    n, d = state.n_particles, state.d
    pts = _as_points(x, n, d)
    phi, dphi = _evaluate(state.coefficients(t), pts)  # (..., N, K), (..., N, K, d)
    det = np.linalg.det(phi)
    if guard:
        scale = np.prod(np.linalg.norm(phi, axis=-1), axis=-1)
        bad = np.abs(det) < NODE_GUARD * scale
        if np.any(bad):
            where = pts if pts.ndim == 2 else pts[np.unravel_index(int(np.argmax(bad)), bad.shape)]
            raise NodeError("configuration is at a node of the wave function", where, t)
    grad = np.empty(det.shape + (n, d), dtype=complex)
    for j in range(n):
        for ax in range(d):
            M = phi.copy()
            M[..., j, :] = dphi[..., j, :, ax]
            grad[..., j, ax] = np.linalg.det(M)
    psi = det * state._norm
    grad = grad * state._norm
    return psi, grad.reshape(det.shape + (n * d,))


@dataclass(eq=False)
class GaugeField:
    """Vector potential A and gauge function f (with its gradient) for one particle."""

    A: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], float] | None = None
    grad_f: Callable[[np.ndarray], np.ndarray] | None = None

    def transformed(self) -> "GaugeField":
        """Potential A + grad f (gauge function consumed)."""
        A, gf = self.A, self.grad_f
        return GaugeField(lambda x: A(x) + gf(x))


def uniform_potential(A0: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    A0 = np.asarray(A0, dtype=float)
    return lambda x: np.broadcast_to(A0, np.shape(x)).copy()


@dataclass(eq=False)
class PhasedWave:
    """exp(i f(x)/hbar) times a one-particle wave with a known gradient."""

    base: object
    f: Callable[[np.ndarray], float]
    grad_f: Callable[[np.ndarray], np.ndarray]
    hbar: float = 1.0

    @property
    def params(self):
        return self.base.params

    @property
    def n_particles(self):
        return self.base.n_particles

    @property
    def d(self):
        return self.base.d

    def value_grad(self, x, t: float, guard: bool = True):
        psi, grad = self.base.value_grad(x, t, guard=guard)
        xx = np.asarray(x, dtype=float).reshape(np.shape(psi) + (-1,))
        ph = np.exp(1j * self.f(xx) / self.hbar)
        return ph * psi, ph[..., None] * (grad + (1j / self.hbar) * self.grad_f(xx) * psi[..., None])


def gauge_transform(state, gauge: GaugeField) -> tuple[PhasedWave, GaugeField]:
    """The pair (exp(i f/hbar) psi, A + grad f)."""
    if state.n_particles != 1:
        raise ShapeError("gauge demo is single-particle")
    return (PhasedWave(state, gauge.f, gauge.grad_f, state.params.hbar), gauge.transformed())


def velocity(state, x, t: float = 0.0, gauge: GaugeField | None = None, guard: bool = True
             ) -> np.ndarray:
    """v = (1/m)(hbar Im(grad psi / psi) - A), flattened to N d per configuration."""
    psi, grad = state.value_grad(x, t, guard=guard)
    p = state.params
    v = p.hbar * np.imag(grad / psi[..., None])
    if gauge is not None:
        xx = np.asarray(x, dtype=float).reshape(v.shape)
        v = v - gauge.A(xx)
    return v / p.mass


@dataclass
class Trajectory:
    times: np.ndarray
    configs: np.ndarray  # (T, N d)
    n_particles: int
    d: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def points(self) -> np.ndarray:
        return self.configs.reshape(len(self.times), self.n_particles, self.d)

    @property
    def complete(self) -> bool:
        return self.diagnostics.get("status") == "complete"


def integrate(state, q0, t_end: float, tol: float = 1e-9, n_out: int = 101,
              gauge: GaugeField | None = None, t_eval: Sequence[float] | None = None
              ) -> Trajectory:
    """Integrate dq/dt = v(q, t) with an adaptive 8th-order Runge-Kutta scheme.

    Each accepted step meets the local error tolerance ``rtol = atol = tol``.
    Output times are filled from the dense output of every accepted step.
    If the velocity hits the node guard the trajectory is truncated at the
    last accepted step and the event is recorded in the diagnostics.
    """
    n, d = state.n_particles, state.d
    y0 = np.asarray(q0, dtype=float).reshape(n * d)
    times = np.linspace(0.0, t_end, n_out) if t_eval is None else np.asarray(t_eval, dtype=float)
    nfev = 0

    def rhs(t, y):
        nonlocal nfev
        nfev += 1
        return velocity(state, y, t, gauge)

    out = np.full((len(times), n * d), np.nan)
    diag = {"nfev": 0, "n_steps": 0, "n_rejected": 0, "node_events": [], "status": "complete", "tol": tol}
    filled = 0
    while filled < len(times) and times[filled] <= 0:
        out[filled] = y0
        filled += 1
    try:
        solver = DOP853(rhs, 0.0, y0, t_end, rtol=tol, atol=tol)
        while solver.status == "running" and filled < len(times):
            before = nfev
            msg = solver.step()
            if solver.status == "failed":
                diag["status"] = "failed"
                diag["message"] = msg
                break
            diag["n_steps"] += 1
            # every trial step costs n_stages evaluations; extra trials were rejected
            diag["n_rejected"] += max(0, (nfev - before) // solver.n_stages - 1)
            dense = solver.dense_output()
            while filled < len(times) and times[filled] <= solver.t + 1e-15:
                out[filled] = dense(times[filled])
                filled += 1
    except NodeError as err:
        diag["status"] = "node"
        diag["node_events"].append({"time": float(err.time),
                                    "location": np.asarray(err.location).ravel().tolist()})
    diag["nfev"] = nfev
    keep = filled
    return Trajectory(times[:keep], out[:keep], n, d, diag)


def permute_config(q, sigma: P.Permutation, d: int) -> np.ndarray:
    """sigma . q for a flat configuration of N d-dimensional points."""
    pts = np.asarray(q, dtype=float).reshape(-1, d)
    return np.asarray(sigma.act(list(pts))).reshape(-1)


def project_trajectory(tr: Trajectory) -> np.ndarray:
    """Per-time lexicographically sorted points, shape (T, N, d)."""
    pts = tr.points
    out = np.empty_like(pts)
    for k, frame in enumerate(pts):
        order = np.lexsort(frame.T[::-1])
        out[k] = frame[order]
    return out


# --- Born-rule equivariance -------------------------------------------------

def sample_initial(state: SlaterState, count: int, rng: np.random.Generator,
                   max_rounds: int = 1000) -> np.ndarray:
    """Draw configurations from |psi_0|^2 by rejection sampling.

    Proposal: every particle independently from the mixture of the orbital
    densities |phi_k|^2 weighted by their norms.  Hadamard's inequality
    bounds |det|^2 by the product of squared row norms, so accepting with
    probability |det|^2 / prod_j sum_k |phi_k(x_j)|^2 is exact.
    """
    n, d = state.n_particles, state.d
    weights = np.real(np.diag(state.gram))
    weights = weights / weights.sum()
    centers = np.array([o.center for o in state.orbitals])
    widths = np.array([o.width for o in state.orbitals])
    coeffs = state.coefficients(0.0)
    accepted = []
    total = 0
    batch = max(4 * count, 1000)
    for _ in range(max_rounds):
        comp = rng.choice(n, size=(batch, n), p=weights)
        x = centers[comp] + widths[comp][..., None] * rng.standard_normal((batch, n, d))
        phi, _ = _evaluate(coeffs, x)
        ratio = np.abs(np.linalg.det(phi)) ** 2 / np.prod(np.sum(np.abs(phi) ** 2, axis=-1), axis=-1)
        keep = rng.random(batch) < ratio
        accepted.append(x[keep])
        total += int(keep.sum())
        if total >= count:
            break
    return np.concatenate(accepted)[:count]


def marginal_density(state: SlaterState, t: float, axis: int, grid: np.ndarray) -> np.ndarray:
    """Density of one coordinate (any particle, given axis) under |psi_t|^2.

    Uses the one-body density sum_{k,l} conj(phi_k) phi_l (G^-1)_{lk} / N;
    integrals over the other axes are closed-form Gaussian overlaps, which
    are constant in time.
    """
    n, d = state.n_particles, state.d
    hb = state.params.hbar
    Ginv = np.linalg.inv(state.gram)
    others = [a for a in range(d) if a != axis]
    O = np.array([[gaussian_overlap(state.orbitals[k], state.orbitals[l], hb, others) if others else 1.0
                   for l in range(n)] for k in range(n)])
    a, b, c = state.coefficients(t)
    xe = grid[:, None]
    phi = np.exp(-a[:, axis] * xe ** 2 + b[:, axis] * xe + c[:, axis])  # (G, K)
    dens = np.einsum("gk,gl,kl,lk->g", phi.conj(), phi, O, Ginv)
    return dens.real / n


def _ensemble_rhs(state, n_samples: int):
    nd = state.n_particles * state.d

    def rhs(t, y):
        # rejected trial steps may overflow; the error control discards them
        with np.errstate(invalid="ignore", over="ignore"):
            return velocity(state, y.reshape(n_samples, nd), t).ravel()

    return rhs


def equivariance_test(state: SlaterState, sample_count: int, t: float, seed: int = 0,
                      marked_axis: int = 0, tol: float = 1e-8, chunk: int = 100) -> dict:
    """Kolmogorov-Smirnov comparison of transported samples with the |psi_t|^2 marginal.

    Samples are transported in chunks of ``chunk`` configurations, each
    chunk as one vectorized ODE system; a chunk that touches a node is
    redone one trajectory at a time and the failing trajectories are counted.
    """
    rng = np.random.default_rng(seed)
    x0 = sample_initial(state, sample_count, rng)
    n, d = state.n_particles, state.d
    flat = x0.reshape(len(x0), n * d)
    finals = []
    failures = 0
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        if t == 0:
            finals.append(block)
            continue
        try:
            sol = solve_ivp(_ensemble_rhs(state, len(block)), (0.0, t), block.ravel(), method="DOP853",
                            rtol=tol, atol=tol, t_eval=[t])
            if not sol.success:
                raise RuntimeError(sol.message)
            finals.append(sol.y[:, -1].reshape(len(block), n * d))
        except (NodeError, RuntimeError):
            for q in block:
                tr = integrate(state, q, t, tol=tol, n_out=2)
                if tr.complete and len(tr.times) == 2:
                    finals.append(tr.configs[-1][None])
                else:
                    failures += 1
    final = np.concatenate(finals).reshape(-1, n, d)
    samples = final[:, 0, marked_axis]
    lo = samples.min() - 5.0
    hi = samples.max() + 5.0
    grid = np.linspace(lo, hi, 20001)
    dens = marginal_density(state, t, marked_axis, grid)
    cdf = cumulative_trapezoid(dens, grid, initial=0.0)
    mass = cdf[-1]
    cdf = cdf / mass
    res = stats.kstest(samples, lambda s: np.interp(s, grid, cdf))
    fail_frac = failures / max(1, len(x0))
    return {"ks_statistic": float(res.statistic), "p_value": float(res.pvalue),
            "failures": failures, "n_samples": int(len(samples)), "time": float(t),
            "marginal_mass": float(mass), "degraded": fail_frac > 0.01, "seed": int(seed)}
