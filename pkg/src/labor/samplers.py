"""Neighbor sampling, LADIES, PLADIES and LABOR-i.

Each sampler is split into a deterministic *plan* (inclusion probabilities,
ranking scales) and a *draw* that only consumes keyed variates.  Sampling
the same plan under many keys is how the Monte Carlo lab stays fast.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _kernels
from .graph import Graph
from .solver import (
    CONVERGE,
    FixedPointResult,
    Neighborhood,
    _parse_iterations,
    edge_probabilities,
    gather_neighborhood,
    labor_fixed_point,
)
from .variates import (
    DRAW_DOMAIN,
    EDGE_DOMAIN,
    VERTEX_DOMAIN,
    VariateKey,
    draw_variates,
    edge_variates,
    trial_variates,
    vertex_variates,
)

ALGORITHMS = ("NS", "LADIES", "PLADIES", "LABOR")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: str = "LABOR"
    fanout: int | None = 10
    budget: int | None = None
    importance_iterations: int | str = 0
    fixed_fanout: bool = False
    layer_dependency: bool = False
    weighted: bool = False
    algorithm1_weights: bool = False
    per_edge_variates: bool = False
    variance_target: float | None = None
    seed: int = 0

    def __post_init__(self):
        algo = self.algorithm.upper()
        object.__setattr__(self, "algorithm", algo)
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if algo in ("NS", "LABOR"):
            if self.fanout is None or int(self.fanout) < 1:
                raise ConfigError(f"{algo} needs fanout >= 1")
        elif self.budget is None or int(self.budget) < 1:
            raise ConfigError(f"{algo} needs budget >= 1")
        if self.fixed_fanout and algo != "LABOR":
            raise ConfigError("fixed_fanout requires LABOR")
        if self.algorithm1_weights and (algo != "LABOR" or self.weighted):
            raise ConfigError("algorithm1_weights applies to unweighted LABOR only")
        if self.per_edge_variates and algo != "LABOR":
            raise ConfigError("per_edge_variates applies to LABOR only")
        iters = self.importance_iterations
        if isinstance(iters, str) and iters.strip().upper() in (CONVERGE, "*", "INF"):
            object.__setattr__(self, "importance_iterations", CONVERGE)
        else:
            try:
                _parse_iterations(iters)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            object.__setattr__(self, "importance_iterations", int(iters))
        if self.variance_target is not None and self.variance_target < 0:
            raise ConfigError("variance_target must be >= 0")

    @property
    def label(self) -> str:
        if self.algorithm != "LABOR":
            return self.algorithm
        i = self.importance_iterations
        return f"LABOR-{'*' if i == CONVERGE else i}"

    def with_size(self, size: int) -> "SamplerConfig":
        """Copy with the per-layer size (fanout or budget) replaced."""
        if self.algorithm in ("NS", "LABOR"):
            return replace(self, fanout=int(size))
        return replace(self, budget=int(size))

    @property
    def size(self) -> int:
        return int(self.fanout if self.algorithm in ("NS", "LABOR") else self.budget)

    # flat key = value files

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            if isinstance(val, bool):
                val = "true" if val else "false"
            lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SamplerConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.read_string("[sampler]\n" + text)
        return cls.from_mapping(dict(parser["sampler"]))

    @classmethod
    def from_mapping(cls, data: dict) -> "SamplerConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            name = key.strip().lower().replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown sampler config key {key!r}")
            kwargs[name] = _coerce(name, raw)
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return asdict(self)


_BOOL_KEYS = {"fixed_fanout", "layer_dependency", "weighted", "algorithm1_weights", "per_edge_variates"}


def _coerce(name: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if name in _BOOL_KEYS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if name in ("fanout", "budget", "seed"):
            return None if raw.lower() in ("", "none") else int(raw, 0)
        if name == "variance_target":
            return None if raw.lower() in ("", "none") else float(raw)
        if name == "importance_iterations":
            return raw if raw.upper() in (CONVERGE, "*", "INF") else int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return raw


def load_config(path) -> SamplerConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return SamplerConfig.from_text(fh.read())


# ---------------------------------------------------------------------------


@dataclass
class SampledLayer:
    """One sampled bipartite layer: edges ``src -> dst`` into ``seeds``.

    ``weight`` holds the Hajek-normalized estimator weights (summing to one
    per seed with at least one sampled edge).  ``prob`` is the inclusion
    probability of each sampled edge, or its expected multiplicity for
    with-replacement draws, and ``count`` the realized multiplicity.
    """

    seeds: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    prob: np.ndarray
    count: np.ndarray
    edge_weight: np.ndarray
    seed_norm: np.ndarray
    sampled_degree: np.ndarray
    expected_size: float
    seg_ptr: np.ndarray

    @property
    def sampled_vertices(self) -> np.ndarray:
        return np.unique(self.src)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def next_seeds(self) -> np.ndarray:
        """``S ∪ T`` for the next layer."""
        return np.union1d(self.seeds, self.src)


@dataclass
class LayerPlan:
    """Everything a draw needs besides the variates."""

    nb: Neighborhood
    rule: str  # poisson | sequential | draws
    prob: np.ndarray  # per edge: inclusion probability or expected count
    hajek_base: np.ndarray  # per edge weight numerator before per-seed normalization
    variate_mode: str = "vertex"  # vertex | edge
    scale: np.ndarray | None = None  # sequential ranking scale per edge
    take: np.ndarray | None = None  # sequential per-seed sample size
    draw_cdf: np.ndarray | None = None  # with-replacement candidate cdf
    num_draws: int = 0
    expected_size: float = 0.0
    fixed_point: FixedPointResult | None = None

    # -- single draw

    def _variates(self, key: VariateKey) -> np.ndarray:
        nb = self.nb
        if self.variate_mode == "edge":
            return edge_variates(key, nb.src, nb.dst)
        return vertex_variates(key, nb.candidates)[nb.cand_index]

    def draw_counts(self, key: VariateKey) -> np.ndarray:
        """Per-edge multiplicities of one sample under ``key``."""
        nb = self.nb
        if self.rule == "poisson":
            return (self._variates(key) <= self.prob).astype(np.int64)
        if self.rule == "sequential":
            with np.errstate(divide="ignore"):
                keys = self._variates(key) / self.scale
            return _kernels.bottom_k_segments(nb.seg_ptr, keys, nb.src, self.take).astype(np.int64)
        if self.rule == "draws":
            cand = _draw_candidates(self.draw_cdf, draw_variates(key, self.num_draws))
            per_cand = np.bincount(cand, minlength=nb.num_candidates)
            return per_cand[nb.cand_index]
        raise ValueError(f"unknown rule {self.rule!r}")

    def draw(self, key: VariateKey) -> SampledLayer:
        return self.to_layer(self.draw_counts(key))

    def to_layer(self, counts: np.ndarray) -> SampledLayer:
        nb = self.nb
        keep = counts > 0
        cnt = counts[keep]
        base = self.hajek_base[keep] * cnt
        seg = nb.seg_of[keep]
        totals = np.bincount(seg, weights=base, minlength=nb.seeds.size)
        weight = base / totals[seg] if base.size else base
        sampled_degree = np.bincount(seg, weights=cnt, minlength=nb.seeds.size).astype(np.int64)
        kept_per_seed = np.bincount(seg, minlength=nb.seeds.size)
        seg_ptr = np.zeros(nb.seeds.size + 1, dtype=np.int64)
        np.cumsum(kept_per_seed, out=seg_ptr[1:])
        return SampledLayer(
            seeds=nb.seeds,
            src=nb.src[keep],
            dst=nb.dst[keep],
            weight=weight,
            prob=self.prob[keep],
            count=cnt,
            edge_weight=nb.edge_weight[keep],
            seed_norm=nb.seed_weight_sums(),
            sampled_degree=sampled_degree,
            expected_size=self.expected_size,
            seg_ptr=seg_ptr,
        )

    # -- many draws at once

    def draw_counts_many(self, run_seeds, layer_tag: int) -> np.ndarray:
        """Counts matrix ``(len(run_seeds), num_edges)``; row ``i`` equals
        ``draw_counts(VariateKey(run_seeds[i], layer_tag))``."""
        nb = self.nb
        run_seeds = np.asarray(run_seeds, dtype=np.uint64)
        if self.rule == "draws":
            u = trial_variates(run_seeds, layer_tag, DRAW_DOMAIN, np.arange(self.num_draws))
            cand = _draw_candidates(self.draw_cdf, u)
            ntr, ncand = run_seeds.size, nb.num_candidates
            flat = (np.arange(ntr)[:, None] * ncand + cand).ravel()
            per_cand = np.bincount(flat, minlength=ntr * ncand).reshape(ntr, ncand)
            return per_cand[:, nb.cand_index]
        if self.variate_mode == "edge":
            r = trial_variates(run_seeds, layer_tag, EDGE_DOMAIN, nb.src, (nb.dst + 1)[None, :])
        else:
            r = trial_variates(run_seeds, layer_tag, VERTEX_DOMAIN, nb.candidates)[:, nb.cand_index]
        if self.rule == "poisson":
            return (r <= self.prob[None, :]).astype(np.int64)
        with np.errstate(divide="ignore"):
            keys = r / self.scale[None, :]
        out = np.zeros(keys.shape, dtype=np.int64)
        for j in range(nb.seeds.size):
            lo, hi = nb.seg_ptr[j], nb.seg_ptr[j + 1]
            m = int(self.take[j])
            if m >= hi - lo:
                out[:, lo:hi] = 1
            elif m > 0:
                # columns are in ascending source id, so a stable sort breaks ties by id
                order = np.argsort(keys[:, lo:hi], axis=1, kind="stable")[:, :m]
                np.put_along_axis(out[:, lo:hi], order, 1, axis=1)
        return out


def _draw_candidates(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, cdf.size - 1)


# ---------------------------------------------------------------------------
# plans


def _ns_expected_distinct(nb: Neighborhood, p_edge: np.ndarray) -> float:
    """``sum_t 1 - prod_s (1 - p_ts)`` for independent per-seed decisions."""
    if nb.num_edges == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        logq = np.log1p(-np.minimum(p_edge, 1.0))
    miss = np.exp(np.bincount(nb.cand_index, weights=logq, minlength=nb.num_candidates))
    return float(np.sum(1.0 - miss))


def plan_neighbor(nb: Neighborhood, k: int) -> LayerPlan:
    deg = nb.degrees
    take = np.minimum(k, deg)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_seed = np.where(deg > 0, take / np.maximum(deg, 1), 0.0)
    prob = p_seed[nb.seg_of]
    return LayerPlan(
        nb,
        "sequential",
        prob,
        hajek_base=nb.edge_weight / prob if prob.size else prob,
        variate_mode="edge",
        scale=np.ones(nb.num_edges),
        take=take,
        expected_size=_ns_expected_distinct(nb, prob),
    )


def plan_labor(nb: Neighborhood, cfg: SamplerConfig) -> LayerPlan:
    k = int(cfg.fanout)
    fp = labor_fixed_point(
        nb, k=k, iterations=cfg.importance_iterations, weighted=cfg.weighted,
        variance_target=cfg.variance_target,
    )
    scale = fp.cs.c[nb.seg_of] * fp.pi_edge
    prob = edge_probabilities(nb, fp.pi_edge, fp.cs)
    if cfg.algorithm1_weights:
        hajek_base = 1.0 / fp.pi_edge
    else:
        hajek_base = nb.edge_weight / prob
    mode = "edge" if cfg.per_edge_variates else "vertex"
    if mode == "edge":
        expected = _ns_expected_distinct(nb, prob)
    else:
        expected = fp.objective
    if cfg.fixed_fanout:
        take = np.minimum(k, nb.degrees)
        return LayerPlan(nb, "sequential", prob, hajek_base, mode, scale=scale, take=take,
                         expected_size=expected, fixed_point=fp)
    return LayerPlan(nb, "poisson", prob, hajek_base, mode, expected_size=expected, fixed_point=fp)


def layer_base_weights(nb: Neighborhood) -> np.ndarray:
    """``q_t ∝ sum_{s in S, t->s} A_ts^2`` over candidates (unnormalized)."""
    return np.bincount(nb.cand_index, weights=nb.edge_weight**2, minlength=nb.num_candidates)


def budget_scale(q: np.ndarray, n: float, tol: float | None = None) -> float:
    """Bisection for ``c`` with ``sum_t min(1, c q_t) = n``; ``inf`` if ``n >= len(q)``."""
    if n >= q.size:
        return float("inf")
    tol = 1e-9 * n if tol is None else tol
    lo, hi = 0.0, 1.0 / q.min()
    f = lambda c: float(np.sum(np.minimum(1.0, c * q)))  # noqa: E731
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - n) <= tol:
            return mid
        if val < n:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-300:
            break
    return 0.5 * (lo + hi)


def plan_pladies(nb: Neighborhood, n: int) -> LayerPlan:
    q = layer_base_weights(nb)
    c = budget_scale(q, n)
    p_cand = np.ones_like(q) if np.isinf(c) else np.minimum(1.0, c * q)
    prob = p_cand[nb.cand_index]
    return LayerPlan(nb, "poisson", prob, nb.edge_weight / prob, "vertex",
                     expected_size=float(p_cand.sum()))


def plan_ladies(nb: Neighborhood, n: int) -> LayerPlan:
    q = layer_base_weights(nb)
    if q.size == 0:
        return LayerPlan(nb, "draws", np.zeros(0), np.zeros(0), draw_cdf=np.ones(1), num_draws=0)
    q = q / q.sum()
    cdf = np.cumsum(q)
    cdf /= cdf[-1]
    expected_count = n * q[nb.cand_index]
    with np.errstate(divide="ignore"):
        distinct = float(np.sum(-np.expm1(n * np.log1p(-q))))
    return LayerPlan(nb, "draws", expected_count, nb.edge_weight / expected_count,
                     draw_cdf=cdf, num_draws=int(n), expected_size=distinct)


def make_plan(g: Graph | Neighborhood, seeds, cfg: SamplerConfig) -> LayerPlan:
    if isinstance(g, Neighborhood):
        nb = g
    else:
        if cfg.weighted and not g.is_weighted:
            raise ConfigError("weighted sampling needs a weighted graph")
        nb = gather_neighborhood(g, seeds, cfg.weighted)
    if cfg.algorithm == "NS":
        return plan_neighbor(nb, int(cfg.fanout))
    if cfg.algorithm == "LABOR":
        return plan_labor(nb, cfg)
    if cfg.algorithm == "PLADIES":
        return plan_pladies(nb, int(cfg.budget))
    return plan_ladies(nb, int(cfg.budget))


# ---------------------------------------------------------------------------
# public sampling entry points


def sample_layer(g: Graph, seeds, cfg: SamplerConfig, key: VariateKey) -> SampledLayer:
    return make_plan(g, seeds, cfg).draw(key)


def neighbor_sample(g: Graph, seeds, k: int, key: VariateKey) -> SampledLayer:
    return sample_layer(g, seeds, SamplerConfig("NS", fanout=k), key)


def labor_sample(g: Graph, seeds, cfg: SamplerConfig, key: VariateKey) -> SampledLayer:
    if cfg.algorithm != "LABOR":
        raise ConfigError("labor_sample needs algorithm LABOR")
    return sample_layer(g, seeds, cfg, key)


def weighted_labor_sample(g: Graph, seeds, cfg: SamplerConfig, key: VariateKey) -> SampledLayer:
    if not g.is_weighted:
        raise ConfigError("weighted LABOR needs a weighted graph")
    return labor_sample(g, seeds, replace(cfg, weighted=True), key)


def pladies_sample(g: Graph, seeds, n: int, key: VariateKey) -> SampledLayer:
    return sample_layer(g, seeds, SamplerConfig("PLADIES", fanout=None, budget=n), key)


def ladies_sample(g: Graph, seeds, n: int, key: VariateKey) -> SampledLayer:
    return sample_layer(g, seeds, SamplerConfig("LADIES", fanout=None, budget=n), key)


def config_from_string(text: str) -> SamplerConfig:
    """Parse shorthand like ``NS:10``, ``LABOR-1:10``, ``LABOR-*:10``, ``PLADIES:500``."""
    name, _, size = text.partition(":")
    name = name.strip().upper()
    size = int(size) if size else None
    if name.startswith("LABOR"):
        its = name[5:].lstrip("-") or "0"
        return SamplerConfig("LABOR", fanout=size or 10, importance_iterations=its)
    if name in ("NS", "NEIGHBOR"):
        return SamplerConfig("NS", fanout=size or 10)
    if name in ("LADIES", "PLADIES"):
        if size is None:
            raise ConfigError(f"{name} needs a budget, e.g. {name}:500")
        return SamplerConfig(name, fanout=None, budget=size)
    raise ConfigError(f"unknown sampler shorthand {text!r}")
