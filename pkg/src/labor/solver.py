"""Per-seed scale factors ``c_s`` and the importance fixed point for LABOR."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .graph import Graph, check_seeds

CONVERGE = "CONVERGE"
CONVERGE_RTOL = 1e-4
CONVERGE_MAX_ROUNDS = 100


class DomainError(ValueError):
    """Inputs outside the domain of a formula (e.g. non-positive probabilities)."""


@dataclass(frozen=True)
class Neighborhood:
    """The edges into a seed batch, grouped by seed.

    Edge ``e`` is ``src[e] -> dst[e]``; the edges of ``seeds[j]`` occupy
    ``seg_ptr[j]:seg_ptr[j + 1]`` with ``src`` ascending.  ``candidates`` is
    ``N(S)`` sorted and ``cand_index[e]`` locates ``src[e]`` in it.
    """

    seeds: np.ndarray
    seg_ptr: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    seg_of: np.ndarray
    edge_weight: np.ndarray
    candidates: np.ndarray
    cand_index: np.ndarray

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.seg_ptr)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def num_candidates(self) -> int:
        return int(self.candidates.size)

    def seed_weight_sums(self) -> np.ndarray:
        """``A_*s`` per seed (``d_s`` for uniform weights)."""
        return _segment_sum(self.seg_ptr, self.edge_weight)


def gather_neighborhood(g: Graph, seeds, weighted: bool = False) -> Neighborhood:
    seeds = check_seeds(g, seeds)
    if weighted and not g.is_weighted:
        raise ValueError("weighted sampling requested on an unweighted graph")
    starts = g.in_indptr[seeds]
    deg = g.in_indptr[seeds + 1] - starts
    seg_ptr = np.zeros(seeds.size + 1, dtype=np.int64)
    np.cumsum(deg, out=seg_ptr[1:])
    total = int(seg_ptr[-1])
    eid = np.repeat(starts - seg_ptr[:-1], deg) + np.arange(total, dtype=np.int64)
    src = g.in_indices[eid]
    seg_of = np.repeat(np.arange(seeds.size, dtype=np.int64), deg)
    dst = seeds[seg_of]
    if weighted:
        edge_weight = g.edge_weights[eid].astype(np.float64)
    else:
        edge_weight = np.ones(total)
    candidates, cand_index = np.unique(src, return_inverse=True)
    return Neighborhood(
        seeds, seg_ptr, src, dst, seg_of, edge_weight, candidates, cand_index.astype(np.int64).ravel()
    )


def _segment_sum(seg_ptr: np.ndarray, x: np.ndarray) -> np.ndarray:
    deg = np.diff(seg_ptr)
    out = np.zeros(deg.size)
    nz = deg > 0
    if nz.any():
        out[nz] = np.add.reduceat(x, seg_ptr[:-1][nz])
    return out


# ---------------------------------------------------------------------------
# scalar solves


class ScaleSolve(NamedTuple):
    c: float
    iterations: int
    residual: float
    saturated: bool


def _check_positive(name: str, x: np.ndarray) -> None:
    if x.size == 0:
        raise DomainError(f"{name} must be non-empty")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be positive and finite")


def solve_cs(pi_row, k: int, d_s: int | None = None) -> ScaleSolve:
    """Solve ``sum_t 1/min(1, c*pi_t) = d_s**2 / k`` for one seed.

    When ``k >= d_s`` the seed takes its whole neighborhood and
    ``c = max_t 1/pi_t``.
    """
    pi = np.asarray(pi_row, dtype=np.float64).ravel()
    _check_positive("pi_row", pi)
    d = pi.size if d_s is None else int(d_s)
    if d != pi.size:
        raise ValueError("d_s must equal len(pi_row)")
    if k < 1:
        raise ValueError("fanout must be >= 1")
    saturate = d <= k
    c, it, res = _kernels.solve_scale_segments(
        np.array([0, d]), pi, None, np.array([d * d / k]), np.array([saturate])
    )
    return ScaleSolve(float(c[0]), int(it[0]), float(res[0]), saturate)


def ns_variance_target(d_s, k):
    """``1/k - 1/d_s`` clipped at zero (no variance once ``d_s <= k``)."""
    d = np.asarray(d_s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(d > k, 1.0 / k - 1.0 / d, 0.0)


def weighted_solve_cs(
    weights_row,
    pi_row,
    a_star: float | None = None,
    v_s: float | None = None,
    k: int | None = None,
) -> ScaleSolve:
    """Solve ``(sum A^2/min(1, c*pi) - sum A^2) / A_*^2 = v_s`` for one seed.

    ``v_s`` defaults to ``1/k - 1/d_s``.  A zero target forces saturation,
    ``c = max 1/pi``.
    """
    a = np.asarray(weights_row, dtype=np.float64).ravel()
    pi = np.asarray(pi_row, dtype=np.float64).ravel()
    _check_positive("weights_row", a)
    _check_positive("pi_row", pi)
    if a.shape != pi.shape:
        raise ValueError("weights_row and pi_row must have equal length")
    if v_s is None:
        if k is None:
            raise ValueError("need either v_s or k")
        v_s = float(ns_variance_target(a.size, k))
    if v_s < 0 or not math.isfinite(v_s):
        raise DomainError("variance target must be a finite value >= 0")
    a_star = float(a.sum()) if a_star is None else float(a_star)
    if not a_star > 0:
        raise DomainError("A_*s must be positive")
    saturate = v_s == 0.0
    target = v_s * a_star**2 + float(np.sum(a * a))
    c, it, res = _kernels.solve_scale_segments(
        np.array([0, a.size]), pi, a * a, np.array([target]), np.array([saturate])
    )
    return ScaleSolve(float(c[0]), int(it[0]), float(res[0]), saturate)


def cs_iterates(pi_row, target: float, weights2_row=None) -> list[float]:
    """Every iterate of the ``c_s`` update for one unsaturated row.

    Same recurrence as the batched kernels, written out scalar by scalar so
    the sequence itself can be inspected.
    """
    pi = np.asarray(pi_row, dtype=np.float64).ravel()
    _check_positive("pi_row", pi)
    w2 = np.ones_like(pi) if weights2_row is None else np.asarray(weights2_row, dtype=np.float64)
    c = float(np.sum(w2 / pi)) / target
    v, nsat_prev = 0.0, 0
    out = [c]
    for _ in range(pi.size + 1):
        lhs = float(np.sum(w2 / np.minimum(1.0, c * pi)))
        c = max(c, c / (target - v) * (lhs - v))
        out.append(c)
        sat = c * pi >= 1.0
        v = float(np.sum(w2[sat]))
        if int(sat.sum()) == nsat_prev:
            break
        nsat_prev = int(sat.sum())
    return out


# ---------------------------------------------------------------------------
# batched solves over a neighborhood


@dataclass
class CsSolution:
    seeds: np.ndarray
    c: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    saturated: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.seeds.tolist(), self.c.tolist()))


@dataclass
class ProbAssignment:
    """Importance probabilities over candidates (vertex mode) or edges."""

    mode: str
    values: np.ndarray
    vertices: np.ndarray
    edges: tuple[np.ndarray, np.ndarray] | None = None

    def as_dict(self) -> dict:
        if self.mode == "vertex_keyed":
            return dict(zip(self.vertices.tolist(), self.values.tolist()))
        src, dst = self.edges
        return {(t, s): p for t, s, p in zip(src.tolist(), dst.tolist(), self.values.tolist())}


def solve_cs_batch(
    nb: Neighborhood,
    pi_edge: np.ndarray,
    k: int,
    weighted: bool = False,
    variance_target=None,
) -> CsSolution:
    """Solve for ``c_s`` of every seed given per-edge probabilities."""
    deg = nb.degrees
    if weighted or variance_target is not None:
        w = nb.edge_weight
        a_star = _segment_sum(nb.seg_ptr, w)
        w2 = w * w
        v = ns_variance_target(deg, k) if variance_target is None else np.broadcast_to(
            np.asarray(variance_target, dtype=np.float64), deg.shape
        )
        if np.any(v < 0):
            raise DomainError("variance target must be >= 0")
        target = v * a_star**2 + _segment_sum(nb.seg_ptr, w2)
        saturate = v <= 0
    else:
        w2 = None
        target = deg.astype(np.float64) ** 2 / k
        saturate = deg <= k
    c, it, res = _kernels.solve_scale_segments(nb.seg_ptr, pi_edge, w2, target, saturate)
    return CsSolution(nb.seeds, c, it, res, saturate | (deg == 0))


def edge_probabilities(nb: Neighborhood, pi_edge: np.ndarray, cs: CsSolution) -> np.ndarray:
    """Per-edge inclusion probability ``min(1, c_s * pi)``."""
    return np.minimum(1.0, cs.c[nb.seg_of] * pi_edge)


def objective(nb: Neighborhood, pi_edge: np.ndarray, cs: CsSolution) -> float:
    """Expected number of distinct sampled vertices, ``sum_t min(1, max_s c_s pi)``."""
    if nb.num_edges == 0:
        return 0.0
    top = _kernels.scatter_max(nb.cand_index, cs.c[nb.seg_of] * pi_edge, nb.num_candidates)
    return float(np.sum(np.minimum(1.0, top)))


@dataclass
class FixedPointResult:
    pi: ProbAssignment
    cs: CsSolution
    pi_edge: np.ndarray
    rounds: int
    objective_trace: list[float] = field(default_factory=list)
    max_c_trace: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def _parse_iterations(iterations) -> tuple[int, bool]:
    if isinstance(iterations, str):
        if iterations.strip().upper() in (CONVERGE, "*", "INF"):
            return CONVERGE_MAX_ROUNDS, True
        iterations = int(iterations)
    if iterations < 0:
        raise ValueError("importance iterations must be >= 0 or CONVERGE")
    return int(iterations), False


def labor_fixed_point(
    g: Graph | Neighborhood,
    seeds=None,
    k: int = 10,
    iterations=0,
    weighted: bool = False,
    variance_target=None,
) -> FixedPointResult:
    """Run the alternating ``c = c(pi)``, ``pi <- pi * max c`` iteration.

    Uniform weights keep one ``pi_t`` per candidate, starting from 1.  In
    weighted mode ``pi`` lives on edges and starts at ``A_ts``; each round
    sets every edge out of ``t`` to ``max_{t->s'} c_s' pi_ts'``.  After the
    last update ``c`` is recomputed so it matches the returned ``pi``.
    """
    nb = g if isinstance(g, Neighborhood) else gather_neighborhood(g, seeds, weighted)
    if k < 1:
        raise ValueError("fanout must be >= 1")
    rounds_max, until_converged = _parse_iterations(iterations)

    if weighted:
        pi_edge = nb.edge_weight.copy()
    else:
        pi_cand = np.ones(nb.num_candidates)
        pi_edge = pi_cand[nb.cand_index]

    cs = solve_cs_batch(nb, pi_edge, k, weighted, variance_target)
    trace = [objective(nb, pi_edge, cs)]
    cmax = [float(np.nanmax(cs.c)) if np.any(np.isfinite(cs.c)) else float("nan")]
    rounds = 0
    while rounds < rounds_max and nb.num_edges:
        top = _kernels.scatter_max(nb.cand_index, cs.c[nb.seg_of] * pi_edge, nb.num_candidates)
        if weighted:
            pi_edge = top[nb.cand_index]
        else:
            pi_cand = pi_cand * _kernels.scatter_max(nb.cand_index, cs.c[nb.seg_of], nb.num_candidates)
            pi_edge = pi_cand[nb.cand_index]
        cs = solve_cs_batch(nb, pi_edge, k, weighted, variance_target)
        rounds += 1
        trace.append(objective(nb, pi_edge, cs))
        cmax.append(float(np.nanmax(cs.c)))
        if until_converged and abs(trace[-2] - trace[-1]) < CONVERGE_RTOL * trace[-2]:
            break

    if weighted:
        pi = ProbAssignment("edge_keyed", pi_edge, nb.candidates, (nb.src, nb.dst))
    else:
        pi = ProbAssignment("vertex_keyed", pi_cand, nb.candidates)
    return FixedPointResult(pi, cs, pi_edge, rounds, trace, cmax)


class SampleSizeExpectation(NamedTuple):
    total: float
    per_seed: np.ndarray


def expected_sample_size(nb: Neighborhood, pi_edge: np.ndarray, cs: CsSolution) -> SampleSizeExpectation:
    """``E[|T|]`` and per-seed ``E[d~_s] = sum_t min(1, c_s pi_t)``."""
    p = edge_probabilities(nb, pi_edge, cs)
    return SampleSizeExpectation(objective(nb, pi_edge, cs), _segment_sum(nb.seg_ptr, p))


# ---------------------------------------------------------------------------
# diagnostics


def marginal_variance_derivative(d_tilde) -> float:
    """Derivative of ``1/d~ - 1/d`` with respect to ``d~``; independent of ``d``."""
    if d_tilde < 1:
        raise DomainError("sampled degree must be >= 1")
    return -1.0 / (d_tilde * d_tilde)


def neediest_seed(d_tilde) -> int:
    """Index of the seed whose variance drops most from one more sampled edge."""
    d_tilde = np.asarray(d_tilde)
    if np.any(d_tilde < 1):
        raise DomainError("sampled degrees must be >= 1")
    return int(np.argmin(d_tilde))


def weighted_variance_slope(weights_row, pi_row, c: float, a_star: float | None = None) -> float:
    """``d v_s / d E[d~_s]`` for the weighted variance at scale ``c``."""
    a = np.asarray(weights_row, dtype=np.float64)
    pi = np.asarray(pi_row, dtype=np.float64)
    a_star = a.sum() if a_star is None else a_star
    open_ = c * pi < 1.0
    dv = -np.sum(a[open_] ** 2 / (c * c * pi[open_])) / a_star**2
    dn = np.sum(pi[open_])
    if dn == 0:
        return 0.0
    return float(dv / dn)
