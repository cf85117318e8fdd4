"""Reproducible experiments behind the command-line subcommands.

Every runner takes a :class:`RunConfig` and returns an :class:`Outcome`
holding a JSON-ready result dictionary, a pass flag and optional CSV
tables.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import unitary_group

from . import bohm
from . import bundle as B
from . import confspace as C
from . import fock
from . import iso
from . import perm as P
from . import potentials
from . import triple as T


@dataclass
class RunConfig:
    experiment: str = "holonomy-audit"
    d: int = 2
    side: int = 3
    n: int = 2
    periodic: bool = False
    spacing: float = 1.0
    beta: float = math.pi
    n_betas: int = 9
    potential: str = "zero"
    seed: int = 0
    tol: float = 1e-10
    n_loops: int = 100
    w_dim: int = 0  # 0: use N
    hbar: float = 1.0
    mass: float = 1.0
    t_end: float = 1.0
    samples: int = 10000
    n_max: int = 3
    out: str = "runs"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(raw, type(getattr(cls(), key)))
        return cls(**kwargs)

    def box(self) -> C.LatticeBox:
        return C.LatticeBox.cube(self.d, self.side, self.periodic, self.spacing)

    def params(self) -> T.PhysicalParams:
        return T.PhysicalParams(self.hbar, self.mass)

    def to_json(self) -> dict:
        return asdict(self)


def _coerce(raw, typ):
    if not isinstance(raw, str):
        return typ(raw)
    if typ is bool:
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes")
    if typ is float and raw.strip().lower() in ("pi", "π"):
        return math.pi
    return typ(raw.strip())


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


@dataclass
class Outcome:
    results: dict
    ok: bool
    tables: dict = field(default_factory=dict)  # name -> (header, rows)


def _sign_loops(pair, count, rng):
    base = 0
    return C.random_loops(pair.quotient, base, count, rng)


def holonomy_audit(cfg: RunConfig) -> Outcome:
    pair = C.build_pair(cfg.box(), cfg.n)
    fb = B.bundle_from_character(pair, "alternating")
    rng = np.random.default_rng(cfg.seed)
    loops = _sign_loops(pair, cfg.n_loops, rng)
    worst = 0.0
    matches = 0
    odd = 0
    for loop in loops:
        s = P.sign(C.loop_permutation(pair, loop))
        h = B.holonomy(fb, loop)[0, 0]
        res = abs(h - s)
        worst = max(worst, res)
        matches += res <= 1e-12
        odd += s == -1
    try:
        h_ex = B.holonomy(fb, B.exchange_loop(pair))[0, 0]
    except ValueError:
        # a line with N >= 2 has no exchange loop
        h_ex = None
    res = {"graph": {"quotient_vertices": pair.quotient.n_vertices,
                     "quotient_edges": pair.quotient.n_edges,
                     "ordered_vertices": pair.ordered.n_vertices},
           "loops": len(loops), "matching": matches, "odd_loops": odd,
           "max_residual": worst,
           "exchange_holonomy": None if h_ex is None else [h_ex.real, h_ex.imag]}
    ok = matches == len(loops) and (h_ex is None or abs(h_ex + 1) <= 1e-12)
    return Outcome(res, ok)


def fermionic_constructions(pair) -> dict:
    out = {"character": B.bundle_from_character(pair, "alternating"),
           "exterior": B.exterior_power_bundle(pair, pair.n_particles),
           "directsum": B.directsum_antisym_bundle(pair),
           "representation": B.bundle_from_representation(pair, B.sign_rep)}
    if pair.box.d % 2 == 1:
        out["pseudoscalar"] = B.pseudoscalar_bundle(pair)
    return out


def constructions_compare(cfg: RunConfig) -> Outcome:
    pair = C.build_pair(cfg.box(), cfg.n)
    bundles = fermionic_constructions(pair)
    names = sorted(bundles)
    rows = []
    ok = True
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            r = B.is_gauge_equivalent(bundles[names[a]], bundles[names[b]], tol=1e-12)
            rows.append({"pair": [names[a], names[b]], "equivalent": r.equivalent,
                         "cycle_residual": r.cycle_residual, "edge_residual": r.edge_residual,
                         "cycles": r.n_cycles})
            ok &= r.equivalent
    triv = B.is_gauge_equivalent(bundles["character"], B.bundle_from_character(pair, "trivial"))
    res = {"constructions": names, "comparisons": rows,
           "fermionic_vs_trivial_equivalent": triv.equivalent}
    return Outcome(res, ok and not triv.equivalent)


def _equivalence_suite(pair, V, params, kind: str, tol: float) -> tuple[dict, bool, dict]:
    if kind == "anti":
        bun = B.bundle_from_character(pair, "alternating")
        frame = iso.canonical_frame(bun, pair)
        Uo = iso.map_U_matrix(frame, pair)
    else:
        bun = B.bundle_from_character(pair, "trivial")
        Uo = iso.descent_matrix(pair)
    tb = T.make_bundle_triple(bun, V, params)
    ts = T.make_subspace_triple(pair, V, params, kind)
    Ut = (ts.embedding.T @ Uo).toarray()
    unit = float(np.max(np.abs((Uo.conj().T @ Uo).toarray() - np.eye(Uo.shape[1]))))
    w = T.verify_equivalence(tb, ts, Ut, tol=tol)
    eb = np.linalg.eigvalsh(tb.dense_H())
    es = np.linalg.eigvalsh(ts.dense_H())
    spec_gap = float(np.max(np.abs(eb - es)))
    solved = T.solve_equivalence(tb, ts, tol=tol)
    phase_gap = float("nan")
    if isinstance(solved, T.EquivalenceWitness):
        k = np.unravel_index(int(np.argmax(np.abs(Ut))), Ut.shape)
        ph = solved.U[k] / Ut[k]
        phase_gap = float(np.max(np.abs(solved.U - ph * Ut)))
    res = {"dimension": tb.dim, "unitarity": unit,
           "verify": w.to_json(),
           "spectrum_gap": spec_gap,
           "solver": solved.to_json(),
           "solver_vs_constructed_after_global_phase": phase_gap}
    ok = (isinstance(w, T.EquivalenceWitness) and unit <= 1e-12 and spec_gap <= 1e-9
          and phase_gap <= tol)
    return res, ok, {"bundle": eb, "subspace": es}


def equivalence(cfg: RunConfig) -> Outcome:
    box = cfg.box()
    pair = C.build_pair(box, cfg.n)
    V = potentials.parse_potential(cfg.potential, box, cfg.seed)
    params = cfg.params()
    results = {}
    tables = {}
    ok = True
    for kind in ("anti", "sym"):
        r, good, spectra = _equivalence_suite(pair, V, params, kind, cfg.tol)
        results[kind] = r
        ok &= good
        tables[f"spectrum_{kind}"] = (["index", "bundle", "subspace"],
                                      [(k, a, b) for k, (a, b) in enumerate(zip(spectra["bundle"], spectra["subspace"]))])
    # scrambled counterexample
    ts = T.make_subspace_triple(pair, V, params, "anti")
    rng = np.random.default_rng(cfg.seed)
    W = _random_unitary(ts.dim, rng)
    scrambled = T.QuantumTriple(W @ ts.dense_H() @ W.conj().T, ts.Q, params, "scrambled")
    bad = T.solve_equivalence(ts, scrambled, tol=cfg.tol)
    results["scrambled"] = bad.to_json()
    ok &= isinstance(bad, T.NoEquivalence) and bad.status == "not-equivalent"
    return Outcome(results, ok, tables)


def _random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(2j * np.pi * rng.random((1, 1)))


def continuity_bound(pair, params) -> float:
    """Bound on |dE_k/d beta| for anyon Hamiltonians (Weyl's inequality)."""
    a = params.spacing or pair.box.spacing
    kin = params.hbar ** 2 / (2 * params.mass * a * a)
    deg = np.bincount(pair.quotient.edges.ravel(), minlength=pair.quotient.n_vertices)
    return float(kin * deg.max() * (pair.n_particles - 1))


def anyon_sweep(cfg: RunConfig) -> Outcome:
    box = cfg.box()
    pair = C.build_pair(box, cfg.n)
    V = potentials.parse_potential(cfg.potential, box, cfg.seed)
    params = cfg.params()
    betas = np.linspace(0.0, math.pi, cfg.n_betas)
    loop = B.exchange_loop(pair)
    rows = []
    spectra = []
    worst = 0.0
    for beta in betas:
        bun = B.anyon_bundle(pair, beta)
        h = B.holonomy(bun, loop)[0, 0]
        err = abs(h - np.exp(1j * beta))
        worst = max(worst, err)
        spectra.append(np.linalg.eigvalsh(T.make_bundle_triple(bun, V, params).dense_H()))
        rows.append({"beta": float(beta), "holonomy": [h.real, h.imag], "error": err})
    spectra = np.array(spectra)
    dbeta = np.diff(betas)
    emp = float(np.max(np.abs(np.diff(spectra, axis=0)) / dbeta[:, None])) if len(betas) > 1 else 0.0
    bound = continuity_bound(pair, params)
    try:
        B.trivialize(B.anyon_bundle(pair, 0.0))
        triv0 = True
    except B.TrivializationObstruction:
        triv0 = False
    eq_pi = B.is_gauge_equivalent(B.anyon_bundle(pair, math.pi),
                                  B.bundle_from_character(pair, "alternating")).equivalent
    res = {"betas": betas.tolist(), "exchange": rows, "max_holonomy_error": worst,
           "beta0_trivializable": triv0, "beta_pi_fermionic": eq_pi,
           "continuity_empirical_C": emp, "continuity_bound_C": bound}
    tables = {"spectra": (["beta"] + [f"E{k}" for k in range(spectra.shape[1])],
                          [[b, *s] for b, s in zip(betas, spectra)])}
    ok = worst <= 1e-12 and triv0 and eq_pi and emp <= bound
    return Outcome(res, ok, tables)


def d1_boundary(cfg: RunConfig) -> Outcome:
    box = C.LatticeBox.cube(1, cfg.side, False, cfg.spacing)
    V = potentials.parse_potential(cfg.potential, box, cfg.seed)
    rep = T.d1_boundary_demo(box, cfg.n, V, cfg.params())
    ok = rep["anti_vs_dirichlet"] <= 1e-10 and rep["sym_vs_neumann"] <= 1e-10
    spectra = rep.pop("spectra")
    tables = {f"spectrum_{k}": (["index", "eigenvalue"], list(enumerate(v))) for k, v in spectra.items()}
    return Outcome(rep, ok, tables)


def two_fermion_state(d: int, params: T.PhysicalParams) -> bohm.SlaterState:
    z = np.zeros(d)
    e = np.eye(d)[0]
    orbs = [bohm.Orbital(z - 0.5 * e, 0.8 * e, 1.0), bohm.Orbital(z + 0.7 * e, -0.4 * e, 0.7)]
    return bohm.SlaterState(orbs, params)


def gauge_demo_field(d: int, A0=None):
    """Uniform vector potential plus a smooth gauge function."""
    A0 = np.full(d, 0.3) if A0 is None else np.asarray(A0, dtype=float)
    k = np.arange(1, d + 1, dtype=float)

    def f(x):
        x = np.asarray(x)
        return 0.4 * np.sum(np.sin(k * x), axis=-1) + 0.2 * x[..., 0] ** 2

    def grad_f(x):
        x = np.asarray(x)
        g = 0.4 * k * np.cos(k * x)
        g[..., 0] += 0.4 * x[..., 0]
        return g

    return bohm.GaugeField(bohm.uniform_potential(A0), f, grad_f), A0


def bohm_run(cfg: RunConfig) -> Outcome:
    params = cfg.params()
    st = two_fermion_state(cfg.d, params)
    n = st.n_particles
    rng = np.random.default_rng(cfg.seed)
    q0 = rng.normal(size=n * cfg.d)
    sigma = P.transposition(n, 1, 2)
    tr1 = bohm.integrate(st, q0, cfg.t_end, tol=1e-9)
    tr2 = bohm.integrate(st, bohm.permute_config(q0, sigma, cfg.d), cfg.t_end, tol=1e-9)
    perm_gap = float(np.max(np.abs(tr2.configs - np.array([bohm.permute_config(q, sigma, cfg.d)
                                                            for q in tr1.configs]))))
    proj_gap = float(np.max(np.abs(bohm.project_trajectory(tr1) - bohm.project_trajectory(tr2))))
    # single-particle gauge pair: psi solves the equation with uniform A0 exactly
    gauge, A0 = gauge_demo_field(cfg.d)
    one = bohm.SlaterState([bohm.Orbital(np.zeros(cfg.d), np.full(cfg.d, 0.5), 1.0)], params)
    psiA = bohm.PhasedWave(one, lambda x: np.asarray(x) @ A0, lambda x: np.broadcast_to(A0, np.shape(x)),
                           params.hbar)
    psiB, gaugeB = bohm.gauge_transform(psiA, gauge)
    x0 = rng.normal(size=cfg.d)
    ta = bohm.integrate(psiA, x0, cfg.t_end, tol=1e-9, gauge=gauge)
    tb = bohm.integrate(psiB, x0, cfg.t_end, tol=1e-9, gauge=gaugeB)
    gauge_gap = float(np.max(np.abs(ta.configs - tb.configs)))
    res = {"q0": q0.tolist(), "permutation_gap": perm_gap, "projection_gap": proj_gap,
           "gauge_gap": gauge_gap, "diagnostics": [tr1.diagnostics, tr2.diagnostics],
           "complete": tr1.complete and tr2.complete and ta.complete and tb.complete}
    header = ["t"] + [f"x{k + 1}" for k in range(n * cfg.d)]
    tables = {"trajectory": (header, [[t, *q] for t, q in zip(tr1.times, tr1.configs)]),
              "trajectory_permuted": (header, [[t, *q] for t, q in zip(tr2.times, tr2.configs)])}
    ok = res["complete"] and perm_gap <= 1e-6 and gauge_gap <= 1e-6
    return Outcome(res, ok, tables)


def bohm_ensemble(cfg: RunConfig) -> Outcome:
    st = two_fermion_state(cfg.d, cfg.params())
    rep = bohm.equivariance_test(st, cfg.samples, cfg.t_end, seed=cfg.seed)
    return Outcome(rep, rep["p_value"] > 0.01 and not rep["degraded"])


def fock_demo(cfg: RunConfig) -> Outcome:
    space = fock.build_gamma(cfg.box(), cfg.n_max)
    rng = np.random.default_rng(cfg.seed)
    st = fock.random_sector_state(space, rng)
    out = {"sector_sizes": space.sector_sizes(), "total_measure": space.total_measure()}
    ok = True
    for kind in ("fermi", "bose"):
        funcs = fock.assemble_fock(st, kind)
        norms = [space.sectors[n].ordered.measure * float(np.sum(np.abs(f) ** 2)) if n else
                 float(np.sum(np.abs(f) ** 2)) for n, f in enumerate(funcs)]
        add_gap = abs(sum(norms) - st.norm2())
        sec_gap = float(np.max(np.abs(np.array(norms) - st.sector_norms2())))
        st2 = fock.SectorState(space, st.values, rng.uniform(0, 2 * np.pi, space.n_max + 1))
        funcs2 = fock.assemble_fock(st2, kind)
        dens_gap = max(float(np.max(np.abs(np.abs(a) ** 2 - np.abs(b) ** 2))) for a, b in zip(funcs, funcs2))
        born_gap = 0.0
        for n in range(1, space.n_max + 1):
            pair = space.sectors[n]
            fiber_sum = np.bincount(pair.projection, weights=np.abs(funcs[n]) ** 2,
                                    minlength=pair.quotient.n_vertices)
            born_gap = max(born_gap, float(np.max(np.abs(fiber_sum - np.abs(st.values[n]) ** 2))))
        out[kind] = {"norm_additivity_gap": add_gap, "sector_norm_gap": sec_gap,
                     "phase_density_gap": dens_gap, "born_gap": born_gap}
        ok &= max(add_gap, sec_gap, dens_gap, born_gap) <= 1e-12
    return Outcome(out, ok)


RUNNERS = {
    "holonomy-audit": holonomy_audit,
    "constructions-compare": constructions_compare,
    "equivalence": equivalence,
    "anyon-sweep": anyon_sweep,
    "d1-boundary": d1_boundary,
    "bohm-run": bohm_run,
    "bohm-ensemble": bohm_ensemble,
    "fock-demo": fock_demo,
}
