"""Stateless keyed uniform variates.

Every variate is a pure function of ``(run_seed, layer_tag, entity)``, so all
seeds of a batch see the same ``r_t`` for a shared candidate ``t`` and any
number of workers reproduce the same sample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels

MASK64 = (1 << 64) - 1

# domain separation so vertex, edge and draw streams never coincide
VERTEX_DOMAIN = 0x5645525445580001
EDGE_DOMAIN = 0x4544474500000002
DRAW_DOMAIN = 0x4452415700000003


@dataclass(frozen=True)
class VariateKey:
    run_seed: int
    layer_tag: int = 0

    def __post_init__(self):
        object.__setattr__(self, "run_seed", int(self.run_seed) & MASK64)
        if self.layer_tag < 0:
            raise ValueError("layer_tag must be non-negative")

    def for_layer(self, layer: int, layer_dependency: bool = False) -> "VariateKey":
        """Key for sampling layer ``layer``; a shared tag when layers are dependent."""
        return replace(self, layer_tag=0 if layer_dependency else int(layer))


def vertex_variates(key: VariateKey, t) -> np.ndarray:
    """``r_t`` for each vertex id in ``t``."""
    t = np.asarray(t, dtype=np.int64)
    return _kernels.hash_uniform(key.run_seed, key.layer_tag, VERTEX_DOMAIN, t, 0)


def edge_variates(key: VariateKey, t, s) -> np.ndarray:
    """``r_ts`` for each edge ``t -> s``."""
    t = np.asarray(t, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    return _kernels.hash_uniform(key.run_seed, key.layer_tag, EDGE_DOMAIN, t, s + 1)


def draw_variates(key: VariateKey, count: int) -> np.ndarray:
    """``count`` variates indexed by draw number (with-replacement sampling)."""
    return _kernels.hash_uniform(key.run_seed, key.layer_tag, DRAW_DOMAIN, np.arange(count), 0)


def vertex_variate(key: VariateKey, t: int) -> float:
    return float(vertex_variates(key, [t])[0])


def edge_variate(key: VariateKey, t: int, s: int) -> float:
    return float(edge_variates(key, [t], [s])[0])


def trial_variates(run_seeds, layer_tag: int, domain: int, a, b=0) -> np.ndarray:
    """Variates for many run seeds at once, shape ``(len(run_seeds), len(a))``.

    Row ``i`` equals what the single-key functions return for
    ``VariateKey(run_seeds[i], layer_tag)``.
    """
    from . import _pure

    seeds = np.asarray(run_seeds, dtype=np.uint64)[:, None]
    a = np.asarray(a, dtype=np.int64)[None, :]
    return _pure.hash_uniform(seeds, layer_tag, domain, a, b)
