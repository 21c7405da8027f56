"""Horvitz-Thompson / Hajek estimators, analytic variances and the Monte Carlo lab."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .graph import Graph
from .samplers import LayerPlan, SampledLayer, SamplerConfig, make_plan
from .solver import DomainError, Neighborhood, gather_neighborhood

FEATURE_DOMAIN = 0x4645415400000004
FEATURE_KINDS = ("unit_rows", "normal", "standardized")


class MissingFeatureError(KeyError):
    pass


# ---------------------------------------------------------------------------
# synthetic features


def synthetic_features(
    num_vertices: int,
    dim: int = 8,
    seed: int = 0,
    kind: str = "unit_rows",
    support=None,
) -> np.ndarray:
    """Deterministic feature rows, one per vertex.

    Row ``v`` depends only on ``(seed, v)``.  ``normal`` gives i.i.d.
    standard normals; ``unit_rows`` rescales each row to a mean square of
    one; ``standardized`` centers and scales every column over the vertices
    in ``support`` to mean zero and population variance one.
    """
    if kind not in FEATURE_KINDS:
        raise ValueError(f"feature kind must be one of {FEATURE_KINDS}")
    v = np.arange(num_vertices, dtype=np.int64)[:, None]
    j = np.arange(dim, dtype=np.int64)[None, :]
    u1 = _kernels.hash_uniform(seed, 1, FEATURE_DOMAIN, v, 2 * j)
    u2 = _kernels.hash_uniform(seed, 1, FEATURE_DOMAIN, v, 2 * j + 1)
    m = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    if kind == "unit_rows":
        norms = np.sqrt(np.mean(m * m, axis=1, keepdims=True))
        m = m / np.where(norms > 0, norms, 1.0)
    elif kind == "standardized":
        idx = np.arange(num_vertices) if support is None else np.unique(np.asarray(support))
        if idx.size < 2:
            raise ValueError("standardized features need at least two support vertices")
        sub = m[idx]
        sub = sub - sub.mean(axis=0)
        sub = sub / sub.std(axis=0)
        m = m.copy()
        m[idx] = sub
    return m


def _check_features(m: np.ndarray, vertices: np.ndarray) -> None:
    if vertices.size and vertices.max() >= m.shape[0]:
        raise MissingFeatureError(f"no feature row for vertex {int(vertices.max())}")


# ---------------------------------------------------------------------------
# estimators


def exact_aggregate(g: Graph | Neighborhood, seeds=None, features=None, weighted: bool = False):
    """``H_s = sum_t A_ts M_t / A_*s`` per seed.

    Returns ``(H, empty)`` where ``empty`` flags zero-degree seeds, whose
    rows are zero.
    """
    nb = g if isinstance(g, Neighborhood) else gather_neighborhood(g, seeds, weighted)
    m = np.asarray(features, dtype=np.float64)
    _check_features(m, nb.candidates)
    out = np.zeros((nb.seeds.size, m.shape[1]))
    np.add.at(out, nb.seg_of, nb.edge_weight[:, None] * m[nb.src])
    norm = nb.seed_weight_sums()
    empty = norm == 0
    out[~empty] /= norm[~empty, None]
    return out, empty


def _seed_of(layer: SampledLayer) -> np.ndarray:
    return np.repeat(np.arange(layer.seeds.size), np.diff(layer.seg_ptr))


def ht_estimate(layer: SampledLayer, features) -> np.ndarray:
    """``(1/A_*s) sum count * A_ts M_t / p_ts`` over sampled edges."""
    m = np.asarray(features, dtype=np.float64)
    _check_features(m, layer.src)
    if np.any(layer.prob <= 0):
        raise DomainError("sampled edge with zero inclusion probability")
    contrib = (layer.count * layer.edge_weight / layer.prob)[:, None] * m[layer.src]
    out = np.zeros((layer.seeds.size, m.shape[1]))
    np.add.at(out, _seed_of(layer), contrib)
    nz = layer.seed_norm > 0
    out[nz] /= layer.seed_norm[nz, None]
    return out


def hajek_estimate(layer: SampledLayer, features):
    """Self-normalized estimate ``sum_e weight_e M_t``.

    Returns ``(H, excluded)``; seeds without any sampled edge are excluded
    and their rows are zero.
    """
    m = np.asarray(features, dtype=np.float64)
    _check_features(m, layer.src)
    out = np.zeros((layer.seeds.size, m.shape[1]))
    np.add.at(out, _seed_of(layer), layer.weight[:, None] * m[layer.src])
    return out, layer.sampled_degree == 0


# ---------------------------------------------------------------------------
# analytic variances (unit-variance features)


def ns_variance(d_s: int, d_tilde: int) -> float:
    """Without-replacement variance ``(d - d~)/(d - 1) / d~``."""
    if d_tilde < 1 or d_tilde > d_s:
        raise DomainError("need 1 <= d_tilde <= d_s")
    if d_s == 1:
        return 0.0
    return (d_s - d_tilde) / (d_s - 1) / d_tilde


def poisson_variance(pi_row, d_s: int | None = None) -> float:
    """Horvitz-Thompson Poisson variance ``sum(1/pi)/d^2 - 1/d``, with pi clamped to 1."""
    pi = np.asarray(pi_row, dtype=np.float64).ravel()
    if pi.size == 0 or np.any(pi <= 0):
        raise DomainError("inclusion probabilities must be positive")
    pi = np.minimum(pi, 1.0)
    d = pi.size if d_s is None else int(d_s)
    return float(np.sum(1.0 / pi) / d**2 - 1.0 / d)


def weighted_poisson_variance(weights_row, p_row, a_star: float | None = None) -> float:
    a = np.asarray(weights_row, dtype=np.float64)
    p = np.minimum(np.asarray(p_row, dtype=np.float64), 1.0)
    a_star = a.sum() if a_star is None else a_star
    return float((np.sum(a * a / p) - np.sum(a * a)) / a_star**2)


def with_replacement_variance(weights_row, q_row, n: int, a_star: float | None = None) -> float:
    """Variance of the with-replacement HT estimator, ``sum A^2/q / (n A_*^2)``."""
    a = np.asarray(weights_row, dtype=np.float64)
    q = np.asarray(q_row, dtype=np.float64)
    a_star = a.sum() if a_star is None else a_star
    return float(np.sum(a * a / q) / (n * a_star**2))


def calibration_gap(d_s: int, k: int) -> float:
    """Zero when the Poisson target, scaled by ``d/(d-1)``, equals the NS variance."""
    return d_s / (d_s - 1) * (1.0 / k - 1.0 / d_s) - (d_s - k) / (d_s - 1) / k


def analytic_variances(plan: LayerPlan, cfg: SamplerConfig) -> tuple[np.ndarray, str]:
    """Per-seed unit-variance reference for the sampler and its kind."""
    nb = plan.nb
    deg = nb.degrees
    out = np.zeros(nb.seeds.size)
    if cfg.algorithm == "NS":
        for j, d in enumerate(deg):
            if d > 0:
                out[j] = ns_variance(int(d), int(min(cfg.fanout, d)))
        return out, "ns_without_replacement"
    for j in range(nb.seeds.size):
        lo, hi = nb.seg_ptr[j], nb.seg_ptr[j + 1]
        if hi == lo:
            continue
        a = nb.edge_weight[lo:hi]
        if cfg.algorithm == "LADIES":
            out[j] = with_replacement_variance(a, plan.prob[lo:hi] / plan.num_draws, plan.num_draws)
        else:
            out[j] = weighted_poisson_variance(a, plan.prob[lo:hi])
    kind = "with_replacement" if cfg.algorithm == "LADIES" else "poisson"
    return out, kind


def conditional_variances(plan: LayerPlan, cfg: SamplerConfig, m: np.ndarray) -> np.ndarray:
    """Exact sampling variance given the realized features, element-averaged.

    NaN where no closed form applies (sequential LABOR, NS on weighted rows).
    """
    nb = plan.nb
    out = np.full(nb.seeds.size, np.nan)
    for j in range(nb.seeds.size):
        lo, hi = nb.seg_ptr[j], nb.seg_ptr[j + 1]
        d = hi - lo
        if d == 0:
            out[j] = 0.0
            continue
        a = nb.edge_weight[lo:hi]
        mm = m[nb.src[lo:hi]]
        a_star = a.sum()
        if cfg.algorithm == "NS":
            if np.all(a == a[0]):
                kk = min(cfg.fanout, d)
                pop = mm.var(axis=0)
                out[j] = 0.0 if d == 1 else float(np.mean((d - kk) / (d - 1) * pop / kk))
        elif cfg.algorithm == "LADIES":
            q = plan.prob[lo:hi] / plan.num_draws
            h = (a[:, None] * mm).sum(axis=0) / a_star
            second = ((a * a / q)[:, None] * mm * mm).sum(axis=0) / a_star**2
            out[j] = float(np.mean((second - h * h) / plan.num_draws))
        elif plan.rule == "poisson":
            p = plan.prob[lo:hi]
            out[j] = float(np.mean(((a * a * (1.0 / p - 1.0))[:, None] * mm * mm).sum(axis=0)) / a_star**2)
    return out


# ---------------------------------------------------------------------------
# Monte Carlo report


@dataclass
class SeedStats:
    seed: int
    d: int
    d_tilde_mean: float
    d_tilde_se: float
    bias_z: float
    var_emp: float
    var_emp_se: float
    var_analytic: float
    var_conditional: float | None
    var_emp_ht: float
    var_emp_hajek: float | None
    hajek_trials: int


@dataclass
class McReport:
    sampler: str
    trials: int
    feature_kind: str
    analytic_kind: str
    estimator: str
    seeds: list[SeedStats]
    mean_distinct: float
    distinct_se: float
    mean_draws: float
    expected_size: float
    warnings: list[str] = field(default_factory=list)

    def records(self) -> list[dict]:
        return [
            {
                "seed": s.seed,
                "d": s.d,
                "d_tilde_mean": s.d_tilde_mean,
                "bias_z": s.bias_z,
                "var_emp": s.var_emp,
                "var_analytic": s.var_analytic,
            }
            for s in self.seeds
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["records"] = self.records()
        return out

    def to_json(self) -> str:
        return json.dumps(_finite(self.to_dict()), indent=2)


def _finite(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def trial_seeds(base: int, start: int, count: int) -> np.ndarray:
    """Run seeds for trials ``start .. start+count-1`` under one base seed."""
    base = np.uint64(int(base) & ((1 << 64) - 1))
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return (base * np.uint64(0x9E3779B97F4A7C15)) ^ (idx + np.uint64(1))


class _Moments:
    """Sums of powers of deviations, combined chunk by chunk in a fixed order."""

    def __init__(self, shape):
        self.n = np.zeros(shape[:1], dtype=np.int64)
        self.s = [np.zeros(shape) for _ in range(4)]

    def add(self, x: np.ndarray, valid: np.ndarray | None = None):
        # x: (trials, seeds, dim)
        if valid is not None:
            x = np.where(valid[:, :, None], x, 0.0)
            self.n += valid.sum(axis=0)
        else:
            self.n += x.shape[0]
        p = x
        for i in range(4):
            self.s[i] += p.sum(axis=0)
            p = p * x

    def stats(self):
        n = np.maximum(self.n, 1)[:, None].astype(np.float64)
        m1 = self.s[0] / n
        m2 = self.s[1] / n
        m3 = self.s[2] / n
        m4 = self.s[3] / n
        var = np.maximum(m2 - m1 * m1, 0.0)
        mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1**4
        nn = np.maximum(self.n - 1, 1)[:, None]
        unbiased = var * n / nn
        return m1, unbiased, np.maximum(mu4 - var * var, 0.0), n


def _chunk_stats(plan: LayerPlan, m: np.ndarray, exact: np.ndarray, seeds: np.ndarray, layer_tag: int):
    nb = plan.nb
    counts = plan.draw_counts_many(seeds, layer_tag).astype(np.float64)
    ntr = counts.shape[0]
    nseed = nb.seeds.size
    dim = m.shape[1]
    y = counts * (nb.edge_weight / np.where(plan.prob > 0, plan.prob, 1.0))[None, :]
    num = np.zeros((ntr, nseed, dim))
    den = np.zeros((ntr, nseed))
    dtil = np.zeros((ntr, nseed))
    mf = m[nb.src]
    for j in range(nseed):
        lo, hi = nb.seg_ptr[j], nb.seg_ptr[j + 1]
        if hi > lo:
            num[:, j, :] = y[:, lo:hi] @ mf[lo:hi]
            den[:, j] = y[:, lo:hi].sum(axis=1)
            dtil[:, j] = counts[:, lo:hi].sum(axis=1)
    norm = nb.seed_weight_sums()
    safe_norm = np.where(norm > 0, norm, 1.0)
    ht = num / safe_norm[None, :, None] - exact[None]
    valid = den > 0
    hajek = np.where(valid[:, :, None], num / np.where(valid, den, 1.0)[:, :, None], 0.0) - exact[None]
    if nb.num_edges:
        order = np.argsort(nb.cand_index, kind="stable")
        starts = np.flatnonzero(np.r_[True, np.diff(nb.cand_index[order]) != 0])
        present = np.maximum.reduceat(counts[:, order], starts, axis=1) > 0
        distinct = present.sum(axis=1).astype(np.float64)
        draws = distinct
    else:
        distinct = draws = np.zeros(ntr)
    if plan.rule == "draws":
        draws = np.full(ntr, float(plan.num_draws))
    return ht, hajek, valid, dtil, distinct, draws


def monte_carlo_report(
    g: Graph,
    seeds,
    cfg: SamplerConfig,
    trials: int = 100_000,
    feature_seed: int = 0,
    feature_kind: str = "unit_rows",
    dim: int = 8,
    run_seed: int | None = None,
    layer_tag: int = 0,
    chunk: int = 2048,
    workers: int = 1,
    features: np.ndarray | None = None,
) -> McReport:
    """Resample one layer ``trials`` times with fixed features and compare
    empirical estimator moments with the analytic variances."""
    if trials < 2:
        raise ValueError("need at least two trials")
    notes = []
    if trials < 1000:
        notes.append(f"only {trials} trials; variance comparisons are unreliable below 1000")
    plan = make_plan(g, seeds, cfg)
    nb = plan.nb
    if features is None:
        support = nb.candidates if feature_kind == "standardized" else None
        m = synthetic_features(g.num_vertices, dim, feature_seed, feature_kind, support)
    else:
        m = np.asarray(features, dtype=np.float64)
    exact, empty = exact_aggregate(nb, features=m)
    base = cfg.seed if run_seed is None else run_seed

    shape = (nb.seeds.size, m.shape[1])
    ht_mom, hj_mom = _Moments(shape), _Moments(shape)
    dt_sum = np.zeros(nb.seeds.size)
    dt_sq = np.zeros(nb.seeds.size)
    dist = [0.0, 0.0]
    draws_sum = 0.0

    starts = list(range(0, trials, chunk))

    def work(start):
        count = min(chunk, trials - start)
        return _chunk_stats(plan, m, exact, trial_seeds(base, start, count), layer_tag)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(work, starts)
            results = list(results)
    else:
        results = map(work, starts)
    for ht, hajek, valid, dtil, distinct, draws in results:
        ht_mom.add(ht)
        hj_mom.add(hajek, valid)
        dt_sum += dtil.sum(axis=0)
        dt_sq += (dtil * dtil).sum(axis=0)
        dist[0] += distinct.sum()
        dist[1] += (distinct * distinct).sum()
        draws_sum += draws.sum()

    analytic, kind = analytic_variances(plan, cfg)
    conditional = conditional_variances(plan, cfg, m)
    use_hajek = cfg.algorithm == "NS"
    ht_mean, ht_var, ht_v4, n_ht = ht_mom.stats()
    hj_mean, hj_var, hj_v4, n_hj = hj_mom.stats()

    records = []
    for j, s in enumerate(nb.seeds.tolist()):
        se = np.sqrt(ht_var[j] / trials)
        # errors at rounding level count as zero, else a census row gives 1e-17 / 0
        tiny = np.abs(ht_mean[j]) <= 1e-12 * (1.0 + np.abs(exact[j]))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(tiny, 0.0, np.where(se > 0, ht_mean[j] / se, np.inf))
        zi = int(np.argmax(np.abs(z)))
        if use_hajek:
            var_e, v4, nn = hj_var[j], hj_v4[j], n_hj[j, 0]
        else:
            var_e, v4, nn = ht_var[j], ht_v4[j], n_ht[j, 0]
        var_se = float(np.mean(np.sqrt(v4 / max(nn, 1.0))))
        dmean = dt_sum[j] / trials
        dvar = max(dt_sq[j] / trials - dmean * dmean, 0.0) * trials / (trials - 1)
        hcount = int(hj_mom.n[j])
        records.append(
            SeedStats(
                seed=int(s),
                d=int(nb.degrees[j]),
                d_tilde_mean=float(dmean),
                d_tilde_se=float(math.sqrt(dvar / trials)),
                bias_z=float(z[zi]),
                var_emp=float(np.mean(var_e)),
                var_emp_se=var_se,
                var_analytic=float(analytic[j]),
                var_conditional=None if np.isnan(conditional[j]) else float(conditional[j]),
                var_emp_ht=float(np.mean(ht_var[j])),
                var_emp_hajek=float(np.mean(hj_var[j])) if hcount > 1 else None,
                hajek_trials=hcount,
            )
        )
    if np.any(empty):
        notes.append(f"{int(empty.sum())} zero-degree seeds carry no estimate")
    dmean = dist[0] / trials
    dvar = max(dist[1] / trials - dmean * dmean, 0.0) * trials / (trials - 1)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return McReport(
        sampler=cfg.label,
        trials=trials,
        feature_kind=feature_kind if features is None else "custom",
        analytic_kind=kind,
        estimator="hajek" if use_hajek else "horvitz_thompson",
        seeds=records,
        mean_distinct=float(dmean),
        distinct_se=float(math.sqrt(dvar / trials)),
        mean_draws=float(draws_sum / trials),
        expected_size=float(plan.expected_size),
        warnings=notes,
    )
