"""Slow, obviously-correct reference computations used by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np


def bisection_cs(pi, target, w2=None, tol=1e-15):
    """Root of ``sum w2/min(1, c*pi) = target`` by plain bisection on ``c``."""
    pi = np.asarray(pi, dtype=float)
    w2 = np.ones_like(pi) if w2 is None else np.asarray(w2, dtype=float)
    f = lambda c: float(np.sum(w2 / np.minimum(1.0, c * pi))) - target  # noqa: E731
    lo, hi = 0.0, 1.0 / pi.min()
    while f(hi) > 0:
        hi *= 2
    lo = hi
    while f(lo) < 0:
        lo /= 2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def ns_subset_variance(x, k):
    """Exact variance of the mean of a uniform random ``k``-subset of ``x``."""
    x = np.asarray(x, dtype=float)
    mu = x.mean()
    ests = [x[list(c)].mean() for c in itertools.combinations(range(x.size), k)]
    return float(np.mean((np.asarray(ests) - mu) ** 2))


def poisson_subset_variance(x, pi):
    """Exact HT variance by enumerating all ``2^d`` Poisson outcomes."""
    x = np.asarray(x, dtype=float)
    pi = np.asarray(pi, dtype=float)
    d = x.size
    truth = x.mean()
    var = 0.0
    total = 0.0
    for mask in itertools.product((0, 1), repeat=d):
        m = np.asarray(mask, dtype=bool)
        prob = float(np.prod(np.where(m, pi, 1.0 - pi)))
        est = float(np.sum(x[m] / pi[m])) / d
        var += prob * (est - truth) ** 2
        total += prob
    assert abs(total - 1.0) < 1e-12
    return var


def ns_expected_distinct_star(m, d, k):
    """``E|T|`` when ``m`` seeds share the same ``d`` neighbors and each takes ``k``.

    Inclusion-exclusion over seeds reduces to one complement term per vertex.
    """
    miss_one = math.comb(d - 1, k) / math.comb(d, k)
    return d * (1.0 - miss_one**m)


def khop_bfs(adj_in, seeds, hops):
    """Vertices reachable backwards along in-edges within ``hops`` steps."""
    seen = set(int(s) for s in seeds)
    frontier = set(seen)
    for _ in range(hops):
        nxt = set()
        for v in frontier:
            nxt.update(int(u) for u in adj_in.get(v, ()))
        nxt -= seen
        seen |= nxt
        frontier = nxt
    return sorted(seen)
