"""Seeded Monte-Carlo trials and the statistical test battery built on them.

A trial samples one field, normalizes it, builds the LFPP graph and then
extracts every observable the tests need: variation measures of three
flavours, boundary GMC masses, coalescence records, Busemann samples,
restricted distances and Weyl residuals. Trial seeds depend only on
``(master_seed, index)``, so results do not depend on scheduling.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .geodesics import (
    box_edge_sources,
    classify_good,
    coalescence_record,
    coalescence_records,
    far_arc_sources,
)
from .gff import FieldGrid, GridSpec, add_function, circle_average, normalize, sample_grid
from .gmc import boundary_gmc
from .metric import _edge_weights, build_graph, mollify, restricted_distance, shortest_paths
from .params import CoalescenceConfig, LqgParams, check_alpha, psi
from .profile import (
    MIN_CELLS_PER_LEVEL,
    busemann_variation_measure,
    distance_profile,
    dyadic_points,
    local_proxy_measure,
    variation_measure,
)
from .stats import LogLogSlope, bootstrap, mean_stderr

__all__ = [
    "TrialConfig",
    "TrialResult",
    "ExperimentSummary",
    "TrialError",
    "DominationError",
    "trial_seed",
    "worker_count",
    "sample_trial_field",
    "analyze_field",
    "run_trial",
    "run_experiment",
    "estimate_kappa",
    "ratio_convergence_test",
    "weyl_exactness_test",
    "coordinate_change_test",
    "busemann_symmetry_test",
    "nongood_mass_test",
    "distance_moment_scaling_test",
    "summarize",
    "FLAVORS",
]

FLAVORS = ("profile", "local_proxy", "busemann")
DOMINATION_RTOL = 1e-12
IDENTITY_TOL = 1e-9
THREADS_ENV = "LQGLAB_THREADS"


class TrialError(RuntimeError):
    pass


class DominationError(AssertionError):
    pass


def _dyadic_level(r):
    k = -math.log2(r)
    if r <= 0 or abs(k - round(k)) > 1e-12:
        raise ValueError(f"{r!r} is not a dyadic scale 2^-k")
    return int(round(k))


@dataclass(frozen=True)
class TrialConfig:
    """Everything a trial needs; validated on construction.

    Intervals are half-open ``[a, b)``. ``references`` holds the bulk points
    ``z1, z2``: the profile measure uses ``z1`` and both serve as reference
    trees for good points. ``far_radius = None`` puts the far sources on the
    box edges away from the boundary; otherwise on an arc of that radius
    about ``far_centre``.
    """

    params: LqgParams = field(default_factory=LqgParams)
    coalescence: CoalescenceConfig = field(default_factory=CoalescenceConfig)
    grid: GridSpec = field(default_factory=lambda: GridSpec(512, 256, 1.0 / 128))
    epsilon: float | None = None
    a_eps: float = 1.0
    gmc_epsilon: float | None = None
    levels: tuple = (2, 3, 4)
    intervals: tuple = tuple((-1.0 + k / 4.0, -0.75 + k / 4.0) for k in range(8))
    references: tuple = (1j, 0.5 + 1j)
    far_radius: float | None = None
    far_centre: float = 0.0
    kappa_scale: float = 0.25
    symmetry_shift: float = 0.25
    separations: tuple = ()
    anchors: tuple = (-0.5, 0.0, 0.5)
    weyl_shifts: tuple = (1.0,)
    weyl_pairs: int = 64
    method: str = "spectral"
    pad: int = 2
    master_seed: int = 0
    trials: int = 1
    check_margin: bool = True

    def __post_init__(self):
        g = self.grid
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", g.spacing)
        if self.gmc_epsilon is None:
            object.__setattr__(self, "gmc_epsilon", 2.0 * g.spacing)
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        object.__setattr__(self, "intervals", tuple((float(a), float(b)) for a, b in self.intervals))
        object.__setattr__(self, "references", tuple(complex(z) for z in self.references))
        for name in ("separations", "anchors", "weyl_shifts"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not check_alpha(self.coalescence, self.params):
            raise ValueError("alpha2 violates the coalescence exponent condition")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.levels or not self.intervals:
            raise ValueError("need at least one level and one interval")
        for n in self.levels:
            cells = 2.0 ** (-n) / g.spacing
            if abs(cells - round(cells)) > 1e-9 or round(cells) < MIN_CELLS_PER_LEVEL:
                raise ValueError(f"level {n}: 2^-{n} must be a multiple of the spacing spanning >= {MIN_CELLS_PER_LEVEL} cells")
        for a, b in self.intervals:
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b})")
        iv = sorted(self.intervals)
        for (a0, b0), (a1, b1) in zip(iv, iv[1:]):
            if a1 < b0:
                raise ValueError("intervals must be disjoint")
        if len(self.references) != 2 or self.references[0] == self.references[1]:
            raise ValueError("need two distinct reference points")
        for z in self.references:
            if z.imag <= 0:
                raise ValueError("reference points must lie in the open upper half-plane")
        _dyadic_level(self.kappa_scale)
        for s in self.separations:
            _dyadic_level(s)
        if self.check_margin:
            self._check_margin()

    def _check_margin(self):
        g = self.grid
        width = g.nx * g.spacing
        m = 0.25 * width
        x_lo, x_hi, y_hi = g.origin_x + m, g.origin_x + width - m, g.ny * g.spacing - m
        pts = [z for z in self.references]
        lo = min(a for a, _ in self.intervals)
        hi = max(b for _, b in self.intervals)
        pts += [complex(lo, 0), complex(hi, 0)]
        for z in pts:
            if not (x_lo - 1e-12 <= z.real <= x_hi + 1e-12 and z.imag <= y_hi + 1e-12):
                raise ValueError(f"point {z} violates the truncation margin (25% of the box width)")

    @property
    def span(self):
        return min(a for a, _ in self.intervals), max(b for _, b in self.intervals)

    def as_dict(self):
        g = self.grid
        return {
            "params": self.params.as_dict(),
            "coalescence": self.coalescence.as_dict(),
            "grid": {"nx": g.nx, "ny": g.ny, "spacing": g.spacing, "origin_x": g.origin_x},
            "epsilon": self.epsilon,
            "a_eps": self.a_eps,
            "gmc_epsilon": self.gmc_epsilon,
            "levels": list(self.levels),
            "intervals": [list(iv) for iv in self.intervals],
            "references": [[z.real, z.imag] for z in self.references],
            "far_radius": self.far_radius,
            "far_centre": self.far_centre,
            "kappa_scale": self.kappa_scale,
            "symmetry_shift": self.symmetry_shift,
            "separations": list(self.separations),
            "anchors": list(self.anchors),
            "weyl_shifts": list(self.weyl_shifts),
            "weyl_pairs": self.weyl_pairs,
            "method": self.method,
            "pad": self.pad,
            "master_seed": self.master_seed,
            "trials": self.trials,
        }


@dataclass
class TrialResult:
    """Per-field observables; arrays are indexed ``[level, interval]`` unless noted."""

    index: int
    seed: int
    levels: tuple
    intervals: tuple
    masses: dict
    nongood_mass: np.ndarray
    good_fraction: np.ndarray
    gmc_mass: np.ndarray
    atoms: dict
    records: dict
    kappa_pair: dict
    identity_residual: dict
    restricted: np.ndarray
    weyl_residual: float

    def digest(self) -> str:
        """Content hash, independent of object identity and process."""
        h = hashlib.sha256()
        _feed(h, {f.name: getattr(self, f.name) for f in fields(self)})
        return h.hexdigest()


def _feed(h, obj):
    if isinstance(obj, dict):
        h.update(b"d%d" % len(obj))
        for k in sorted(obj, key=repr):
            _feed(h, k)
            _feed(h, obj[k])
    elif isinstance(obj, (list, tuple)):
        h.update(b"l%d" % len(obj))
        for v in obj:
            _feed(h, v)
    elif isinstance(obj, np.ndarray):
        a = np.ascontiguousarray(obj)
        h.update(f"a{a.dtype.str}{a.shape}".encode())
        h.update(a.tobytes())
    else:
        h.update(repr(obj.item() if isinstance(obj, np.generic) else obj).encode())


def trial_seed(master_seed: int, index: int) -> int:
    """Stateless 64-bit mix of ``(master_seed, index)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def worker_count(default=1):
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1")
    return n


def sample_trial_field(config: TrialConfig, index: int) -> FieldGrid:
    """The normalized field of trial ``index``."""
    seed = trial_seed(config.master_seed, index)
    return normalize(sample_grid(config.grid, seed, method=config.method, pad=config.pad))


def _far_tree(config, graph):
    spec = config.grid
    if config.far_radius is None:
        src = box_edge_sources(spec)
    else:
        src = far_arc_sources(spec, config.far_centre, config.far_radius)
    return shortest_paths(graph, src)


def _weyl_on_graph(graph, config, rng):
    # Weyl residual on a central window of at most 128 x 64 vertices
    k = int(config.weyl_pairs)
    if k <= 0 or not config.weyl_shifts:
        return 0.0
    ny, nx = graph.spec.shape
    w = min(nx, 128)
    i0 = (nx - w) // 2
    sub = graph.window(i0, i0 + w, min(ny, 64))
    n = sub.spec.size
    src = np.unique(rng.integers(0, n, min(k, 4)))
    tgt = rng.integers(0, n, k)
    base = dijkstra(sub.csr(), directed=True, indices=src)
    sm = sub.smoothed
    worst = 0.0
    for c in config.weyl_shifts:
        ws = _edge_weights(sm + c, sub.spec.spacing, sub.xi, sub.a_eps)
        g2 = replace(sub, smoothed=sm + c, weights=ws)
        d2 = dijkstra(g2.csr(), directed=True, indices=src)
        worst = max(worst, _weyl_residual(base, d2, config.params.xi, c, tgt))
    return worst


def _weyl_residual(d1, d2, xi, c, cols):
    a = d1[:, cols]
    b = d2[:, cols]
    ok = np.isfinite(a) & (a > 0)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(b[ok] - math.exp(xi * c) * a[ok]) / a[ok]))


def analyze_field(config: TrialConfig, field: FieldGrid, index: int = 0, seed: int | None = None) -> TrialResult:
    """Run the per-field pipeline on an already sampled, normalized field."""
    params = config.params
    spec = field.spec
    if seed is None:
        seed = int(field.seed)
    field = normalize(field)
    smoothed = mollify(field, config.epsilon)
    graph = build_graph(field, params, config.epsilon, config.a_eps, smoothed=smoothed)
    far = _far_tree(config, graph)
    refs = [shortest_paths(graph, [spec.vertex(z.real, z.imag)]) for z in config.references]
    lo, hi = config.span
    L, J = len(config.levels), len(config.intervals)
    masses = {f: np.zeros((L, J)) for f in FLAVORS}
    nongood = np.zeros((L, J))
    good_frac = np.zeros(L)
    atoms, records = {}, {}
    res_a, res_b, n_good = 0.0, 0.0, 0
    profile = distance_profile(refs[0], (lo, hi))
    d1, d2 = refs[0].dist, refs[1].dist
    for li, n in enumerate(config.levels):
        mu = variation_measure(profile, n, params, (lo, hi))
        prox = local_proxy_measure(graph, n, params, (lo, hi))
        recs = coalescence_records(far, mu.points, n)
        recs = classify_good(recs, n, config.coalescence, reference_trees=refs)
        bus = busemann_variation_measure(recs, n, params, (lo, hi))
        if not (np.array_equal(mu.points, prox.points) and np.array_equal(mu.points, bus.points)):
            raise AssertionError("measure flavours disagree on the dyadic points")
        limit = prox.atoms * (1.0 + DOMINATION_RTOL)
        bad = np.flatnonzero((mu.atoms > limit) | (bus.atoms > limit))
        if bad.size:
            raise DominationError(
                f"trial {index}: level {n}: local proxy fails to dominate at u={mu.points[bad[0]]!r}"
            )
        good = np.array([r.good for r in recs], dtype=bool)
        for j, (a, b) in enumerate(config.intervals):
            masses["profile"][li, j] = mu.mass(a, b)
            masses["local_proxy"][li, j] = prox.mass(a, b)
            masses["busemann"][li, j] = bus.mass(a, b)
            nongood[li, j] = mu.mass(a, b, where=~good)
        inside = np.zeros(mu.points.size, dtype=bool)
        for a, b in config.intervals:
            inside |= (mu.points >= a - 1e-12) & (mu.points < b - 1e-12)
        good_frac[li] = float(good[inside].mean()) if inside.any() else float("nan")
        for r in recs:
            if r.good:
                n_good += 1
                inc1 = d1[r.vertex_u] - d1[r.vertex_u_plus]
                inc2 = d2[r.vertex_u] - d2[r.vertex_u_plus]
                res_a = max(res_a, abs(inc1 - inc2))
                res_b = max(res_b, abs(inc1 - r.busemann))
        atoms[n] = {
            "u": mu.points.copy(),
            "good": good,
            "profile": mu.atoms,
            "local_proxy": prox.atoms,
            "busemann": bus.atoms,
        }
        records[n] = {
            "u": np.array([r.u for r in recs]),
            "coalesced": np.array([r.coalesced for r in recs], dtype=bool),
            "radius": np.array([r.coalescence_radius for r in recs]),
            "good": good,
            "busemann": np.array([r.busemann for r in recs]),
        }
    gmc = boundary_gmc(field, params.gamma_prime, config.gmc_epsilon, (lo, hi))
    gmc_mass = np.array([gmc.mass(a, b) for a, b in config.intervals])

    r = config.kappa_scale
    kr = _dyadic_level(r)
    x0 = config.symmetry_shift
    rec0 = coalescence_record(far, 0.0, kr)
    rec1 = rec0 if x0 == 0 else coalescence_record(far, x0, kr)
    kappa_pair = {
        "b_origin": rec0.busemann,
        "coalesced_origin": rec0.coalesced,
        "b_shift": rec1.busemann,
        "coalesced_shift": rec1.coalesced,
        "h_r0": circle_average(field, 0.0, r) if r >= 2 * spec.spacing else 0.0,
        "h1_x0": circle_average(field, x0, 1.0),
    }

    rd = np.zeros((len(config.separations), len(config.anchors)))
    for a, s in enumerate(config.separations):
        for b, m in enumerate(config.anchors):
            rd[a, b] = restricted_distance(graph, m - 0.5 * s, m + 0.5 * s, radius=s)

    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    weyl = _weyl_on_graph(graph, config, rng)

    return TrialResult(
        index=int(index),
        seed=int(seed),
        levels=config.levels,
        intervals=config.intervals,
        masses=masses,
        nongood_mass=nongood,
        good_fraction=good_frac,
        gmc_mass=gmc_mass,
        atoms=atoms,
        records=records,
        kappa_pair=kappa_pair,
        identity_residual={"reference": res_a, "busemann": res_b, "good_points": n_good},
        restricted=rd,
        weyl_residual=weyl,
    )


def run_trial(config: TrialConfig, index: int) -> TrialResult:
    """Sample, normalize and analyse the field of trial ``index``."""
    try:
        f = sample_trial_field(config, index)
        return analyze_field(config, f, index, f.seed)
    except DominationError:
        raise
    except Exception as exc:
        raise TrialError(f"trial {index}: {type(exc).__name__}: {exc}") from exc


def _run_one(args):
    config, index = args
    return run_trial(config, index)


def run_experiment(config: TrialConfig, workers: int | None = None, trials: int | None = None) -> list[TrialResult]:
    """All trials in index order; ``workers`` defaults to ``$LQGLAB_THREADS`` or 1."""
    n = config.trials if trials is None else int(trials)
    w = worker_count() if workers is None else int(workers)
    jobs = [(config, i) for i in range(n)]
    if w <= 1 or n <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(_run_one, jobs, chunksize=1))


# ---------------------------------------------------------------------------
# statistical tests


def _boot_stderr(stat, data, n_boot=500, rng=0):
    data = np.asarray(data)
    if data.shape[0] < 2:
        return float("nan")
    reps = bootstrap(stat, data, n_boot, rng)
    return float(np.std(reps, ddof=1))


def estimate_kappa(results, params: LqgParams, scale: float | None = None, exponent: float | None = None,
                   min_samples: int = 100, n_boot: int = 1000):
    """Mean of ``|B(0, 1)|^exponent`` with bootstrap stderr.

    Each trial contributes ``r^{-xi Q} e^{-xi h_r(0)} B(0, r)``, the scaling
    image of ``B(0, 1)``; pairs that never coalesced are excluded and counted.
    """
    if scale is None:
        scale = 0.25
    p = params.exponent if exponent is None else float(exponent)
    kept, excluded = [], 0
    for res in results:
        kp = res.kappa_pair
        if not kp["coalesced_origin"]:
            excluded += 1
            continue
        b = scale ** (-params.xi * params.q) * math.exp(-params.xi * kp["h_r0"]) * kp["b_origin"]
        kept.append(abs(b) ** p)
    if not kept:
        raise ArithmeticError("no coalesced pairs: kappa cannot be estimated")
    if len(kept) < min_samples:
        raise ValueError(f"need at least {min_samples} Busemann samples, got {len(kept)}")
    x = np.asarray(kept)
    return {
        "mean": float(x.mean()),
        "stderr": _boot_stderr(np.mean, x, n_boot),
        "excluded": int(excluded),
        "samples": int(x.size),
    }


def _pooled_log_corr(mu, nu):
    a, b = np.log(mu.ravel()), np.log(nu.ravel())
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    if a.size < 3 or a.std() == 0 or b.std() == 0:
        return float("nan") if a.size < 3 else (1.0 if np.allclose(a - a.mean(), b - b.mean()) else 0.0)
    return float(np.corrcoef(a, b)[0, 1])


def _median_ratio_cv(mu, nu):
    # per interval: coefficient of variation of mu / nu across trials; median over intervals
    r = mu / nu
    cv = r.std(axis=0, ddof=1) / r.mean(axis=0)
    return float(np.median(cv)), np.median(r, axis=0)


def _median_spread(mu, nu):
    med = np.median(mu / nu, axis=0)
    return float(med.std(ddof=1) / med.mean())


def ratio_convergence_test(results, levels=None, gmc=None, min_trials=200, min_intervals=8, n_boot=200):
    """Across-interval agreement between level-n variation masses and GMC masses.

    Correlation is the Pearson correlation of log masses over all
    (trial, interval) pairs. Dispersion ``cv`` is the across-trial
    coefficient of variation of ``mu_n(I) / nu(I)``, median over intervals.
    ``median_spread`` (across-interval CV of the per-interval median ratio)
    is reported but not tested.
    ``gmc`` overrides the GMC masses (shape ``(trials, intervals)``).
    """
    results = list(results)
    if len(results) < min_trials:
        raise ValueError(f"need at least {min_trials} trials, got {len(results)}")
    levels = tuple(results[0].levels) if levels is None else tuple(levels)
    if len(levels) < 2:
        raise ValueError("need at least two dyadic levels")
    J = len(results[0].intervals)
    if J < min_intervals:
        raise ValueError(f"need at least {min_intervals} intervals")
    nu = np.stack([r.gmc_mass for r in results]) if gmc is None else np.asarray(gmc, dtype=float)
    per_n = []
    for n in levels:
        li = results[0].levels.index(n)
        mu = np.stack([r.masses["profile"][li] for r in results])
        corr = _pooled_log_corr(mu, nu)
        cv, med = _median_ratio_cv(mu, nu)
        both = np.concatenate([mu, nu], axis=1)
        corr_se = _boot_stderr(lambda d: _pooled_log_corr(d[:, :J], d[:, J:]), both, n_boot)
        cv_se = _boot_stderr(lambda d: _median_ratio_cv(d[:, :J], d[:, J:])[0], both, n_boot)
        ratio_se = [
            _boot_stderr(lambda d: np.median(d[:, 0] / d[:, 1]), np.stack([mu[:, j], nu[:, j]], axis=1), n_boot)
            for j in range(J)
        ]
        per_n.append({
            "n": int(n),
            "correlation": corr,
            "correlation_stderr": corr_se,
            "cv": cv,
            "cv_stderr": cv_se,
            "median_spread": _median_spread(mu, nu),
            "median_ratio": [float(v) for v in med],
            "median_ratio_stderr": ratio_se,
        })
    corrs = [p["correlation"] for p in per_n]
    cvs = [p["cv"] for p in per_n]
    return {
        "trials": len(results),
        "intervals": [list(iv) for iv in results[0].intervals],
        "per_n": per_n,
        "correlation_increasing": bool(all(b > a for a, b in zip(corrs, corrs[1:]))),
        "cv_decreasing": bool(all(b < a for a, b in zip(cvs, cvs[1:]))),
    }


def weyl_exactness_test(field: FieldGrid, c, params: LqgParams, epsilon: float | None = None,
                        pairs: int = 1000, seed: int = 0, a_eps: float = 1.0, n_sources: int = 32) -> float:
    """Max of ``|D_{h+c} - e^{xi c} D_h| / D_h`` over random vertex pairs.

    ``c`` may be a sequence of shifts. Pairs draw their first vertex from a
    pool of ``n_sources`` random vertices so one Dijkstra run serves many pairs.
    """
    eps = field.spacing if epsilon is None else epsilon
    g1 = build_graph(field, params, eps, a_eps)
    rng = np.random.default_rng(seed)
    n = field.spec.size
    pool = np.unique(rng.integers(0, n, min(int(n_sources), pairs)))
    inv = rng.integers(0, pool.size, pairs)
    tgt = rng.integers(0, n, pairs)
    tgt = np.where(tgt == pool[inv], (tgt + 1) % n, tgt)
    d1 = dijkstra(g1.csr(), directed=True, indices=pool)[inv, tgt]
    ok = np.isfinite(d1) & (d1 > 0)
    worst = 0.0
    for ci in np.atleast_1d(np.asarray(c, dtype=float)):
        g2 = build_graph(add_function(field, float(ci)), params, eps, a_eps)
        d2 = dijkstra(g2.csr(), directed=True, indices=pool)[inv, tgt]
        if ok.any():
            r = np.abs(d2[ok] - math.exp(params.xi * ci) * d1[ok]) / d1[ok]
            worst = max(worst, float(np.max(r)))
    return worst


def _separation_table(results, separations):
    seps = list(separations)
    return np.stack([r.restricted for r in results]), seps


def coordinate_change_test(results, r: float, params: LqgParams, separations):
    """Mean log restricted distance at ``r s`` minus at ``s`` versus ``xi Q log r``.

    Trials give paired differences (averaged over anchors); each pair of
    separations passes when it lies within 3 standard errors of the target.
    """
    k = math.log2(r)
    if abs(k - round(k)) > 1e-12:
        raise ValueError(f"r={r!r} is not a power of 2")
    if r == 1:
        return {"r": 1.0, "target": 0.0, "pairs": [], "pass": True}
    D, seps = _separation_table(results, separations)
    target = params.xi * params.q * math.log(r)
    rows = []
    for i, s in enumerate(seps):
        for k, s2 in enumerate(seps):
            if abs(s2 - r * s) <= 1e-12 * s:
                diff = np.log(D[:, k, :]).mean(axis=1) - np.log(D[:, i, :]).mean(axis=1)
                m, se = mean_stderr(diff)
                rows.append({"s": s, "rs": s2, "estimate": m, "stderr": se,
                             "pass": bool(abs(m - target) <= 3 * se)})
    if not rows:
        raise ValueError(f"no separation pair with ratio {r}")
    return {"r": float(r), "target": target, "pairs": rows, "pass": all(p["pass"] for p in rows)}


def _moment_ci(x, stat, n_boot, rng):
    reps = bootstrap(stat, x, n_boot, rng)
    return [float(np.quantile(reps, 0.025)), float(np.quantile(reps, 0.975))]


def busemann_symmetry_test(results, x0: float, r: float, params: LqgParams, n_boot: int = 1000):
    """Translation symmetry ``B(0, r) =d e^{-xi h_1(x0)} B(x0, x0 + r)``.

    Compares mean and variance of ``|.|^exponent`` with bootstrap 95%
    intervals; passes when both pairs of intervals overlap.
    """
    p = params.exponent
    a, b = [], []
    for res in results:
        kp = res.kappa_pair
        if kp["coalesced_origin"]:
            a.append(abs(kp["b_origin"]) ** p)
        if kp["coalesced_shift"]:
            shift = kp["b_shift"] if x0 == 0 else math.exp(-params.xi * kp["h1_x0"]) * kp["b_shift"]
            b.append(abs(shift) ** p)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("insufficient Busemann samples")
    a, b = np.asarray(a), np.asarray(b)
    out = {"x0": float(x0), "r": float(r), "samples": [int(a.size), int(b.size)]}
    ok = True
    for name, stat in (("mean", np.mean), ("variance", lambda x: np.var(x, ddof=1))):
        ca = _moment_ci(a, stat, n_boot, 1)
        cb = _moment_ci(b, stat, n_boot, 2)
        overlap = ca[0] <= cb[1] and cb[0] <= ca[1]
        out[name] = {"origin": float(stat(a)), "shifted": float(stat(b)), "ci_origin": ca, "ci_shifted": cb,
                     "overlap": bool(overlap)}
        ok &= overlap
    out["pass"] = bool(ok)
    return out


def nongood_mass_test(results):
    """Mean non-good profile mass per level; passes when nonincreasing within 1 sigma."""
    results = list(results)
    levels = results[0].levels
    per_n = []
    for li, n in enumerate(levels):
        x = np.array([r.nongood_mass[li].sum() for r in results])
        m, se = mean_stderr(x)
        g = np.array([r.good_fraction[li] for r in results])
        per_n.append({"n": int(n), "mean": m, "stderr": 0.0 if math.isnan(se) else se,
                      "good_fraction": float(np.nanmean(g))})
    ok = all(b["mean"] - b["stderr"] <= a["mean"] + a["stderr"] for a, b in zip(per_n, per_n[1:]))
    return {"trials": len(results), "per_n": per_n, "pass": bool(ok)}


def distance_moment_scaling_test(results, params: LqgParams, separations, min_scales=4, min_trials=500,
                                 tolerance=0.10, n_boot=1000):
    """Slope of ``log E[D(x, y; half-disk)^exponent]`` against ``log |y - x|``."""
    results = list(results)
    D, seps = _separation_table(results, separations)
    if len(seps) < min_scales:
        raise ValueError(f"need at least {min_scales} separations")
    if len(results) < min_trials:
        raise ValueError(f"need at least {min_trials} trials")
    Y = (D ** params.exponent).mean(axis=2)
    est = LogLogSlope(p=1.0, n_boot=n_boot).fit(Y, seps)
    target = psi(params.gamma, params.gamma_prime / params.gamma)
    return {"name": "restricted_distance_moment", "target": float(target), "estimate": est.slope_,
            "stderr": est.stderr_, "pass": bool(abs(est.slope_ - target) <= tolerance)}


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class ExperimentSummary:
    config_echo: dict
    seed: int
    trials: int
    kappa: dict
    slopes: list
    ratio_test: dict
    passes: list
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "config_echo": self.config_echo,
            "seed": self.seed,
            "trials": self.trials,
            "kappa": self.kappa,
            "slopes": self.slopes,
            "ratio_test": self.ratio_test,
            "pass": self.passes,
        }
        d.update(self.extra)
        return d


def summarize(config: TrialConfig, results) -> ExperimentSummary:
    """Run every applicable test; tests whose preconditions fail are reported as skipped."""
    results = list(results)
    if not results:
        raise ValueError("no trials to summarize")
    params = config.params
    passes = []
    extra = {}

    def attempt(name, fn):
        try:
            return fn()
        except (ValueError, ArithmeticError) as exc:
            extra.setdefault("skipped", {})[name] = str(exc)
            return None

    kappa = attempt("kappa", lambda: estimate_kappa(results, params, config.kappa_scale, min_samples=min(100, len(results))))
    if kappa is None:
        kappa = {"mean": None, "stderr": None, "excluded": sum(not r.kappa_pair["coalesced_origin"] for r in results)}

    slopes = []
    if len(config.separations) >= 2:
        s = attempt("restricted_distance_moment",
                    lambda: distance_moment_scaling_test(results, params, config.separations,
                                                         min_scales=2, min_trials=2))
        if s is not None:
            passes.append({"name": s["name"], "passed": s.pop("pass")})
            slopes.append(s)
        cc = attempt("coordinate_change", lambda: coordinate_change_test(results, 2.0, params, config.separations))
        if cc is not None:
            extra["coordinate_change"] = cc
            passes.append({"name": "coordinate_change", "passed": cc["pass"]})

    ratio = attempt("ratio_test", lambda: ratio_convergence_test(results, min_trials=2, min_intervals=2))
    if ratio is None:
        ratio = {"per_n": []}
    else:
        first = ratio["per_n"][0]["correlation"]
        passes.append({"name": "ratio_correlation", "passed": bool(first >= 0.5 and ratio["correlation_increasing"])})
        passes.append({"name": "ratio_dispersion", "passed": ratio["cv_decreasing"]})

    ng = nongood_mass_test(results)
    extra["nongood"] = ng
    passes.append({"name": "nongood_mass", "passed": ng["pass"]})

    sym = attempt("busemann_symmetry", lambda: busemann_symmetry_test(results, config.symmetry_shift,
                                                                      config.kappa_scale, params))
    if sym is not None:
        extra["busemann_symmetry"] = sym
        passes.append({"name": "busemann_symmetry", "passed": sym["pass"]})

    res_a = max(r.identity_residual["reference"] for r in results)
    res_b = max(r.identity_residual["busemann"] for r in results)
    extra["good_point_identity"] = {
        "max_reference_residual": res_a,
        "max_busemann_residual": res_b,
        "good_points": int(sum(r.identity_residual["good_points"] for r in results)),
        "violations": int(sum((r.identity_residual["reference"] > IDENTITY_TOL) or
                              (r.identity_residual["busemann"] > IDENTITY_TOL) for r in results)),
    }
    passes.append({"name": "good_point_identity", "passed": extra["good_point_identity"]["violations"] == 0})
    # a domination failure raises inside the trial, so reaching here means none occurred
    extra["domination_violations"] = 0
    passes.append({"name": "domination", "passed": True})
    w = max(r.weyl_residual for r in results)
    extra["weyl"] = {"max_residual": w, "shifts": list(config.weyl_shifts)}
    passes.append({"name": "weyl_exactness", "passed": bool(w <= 1e-9)})

    extra["approximations"] = {
        "field_sampler": "spectral (approximate covariance)" if config.method == "spectral" else "exact",
        "gmc": f"fixed regularization epsilon={config.gmc_epsilon!r}",
        "busemann": "far-set proxy: " + ("box edges" if config.far_radius is None
                                         else f"arc of radius {config.far_radius!r}"),
        "good_points": "geometric proxy: coalescence radius and containment thresholds",
    }
    return ExperimentSummary(config.as_dict(), int(config.master_seed), len(results), kappa, slopes, ratio,
                             passes, extra)
