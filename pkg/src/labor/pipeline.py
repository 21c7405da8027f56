"""Multi-layer sampling, the subgraph-size benchmark and report writers."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, check_seeds, parse_graph_spec
from .samplers import SampledLayer, SamplerConfig, config_from_string, sample_layer
from .variates import VariateKey, MASK64


@dataclass
class LayerStack:
    """Layers ordered outward from the seeds.

    ``vertex_counts[i]`` is ``|V^i|`` (``V^0`` are the seeds, ``V^{i+1}`` the
    seeds of layer ``i`` plus what it sampled) and ``edge_counts[i]`` is
    ``|E^i|``.
    """

    layers: list[SampledLayer]
    frontiers: list[np.ndarray]
    vertex_counts: list[int] = field(default_factory=list)
    edge_counts: list[int] = field(default_factory=list)
    new_vertex_counts: list[int] = field(default_factory=list)


def sample_multilayer(
    g: Graph,
    seeds,
    fanouts,
    cfg: SamplerConfig,
    key: VariateKey,
) -> LayerStack:
    """Sample ``len(fanouts)`` layers, each from the previous frontier ``S ∪ T``."""
    fanouts = list(fanouts)
    if not fanouts:
        raise ValueError("need at least one layer")
    frontier = np.sort(check_seeds(g, seeds))
    stack = LayerStack([], [frontier], [int(frontier.size)], [], [int(frontier.size)])
    current = check_seeds(g, seeds)
    for i, size in enumerate(fanouts):
        layer_cfg = cfg.with_size(size)
        layer = sample_layer(g, current, layer_cfg, key.for_layer(i, cfg.layer_dependency))
        nxt = layer.next_seeds()
        stack.layers.append(layer)
        stack.frontiers.append(nxt)
        stack.edge_counts.append(layer.num_edges)
        stack.vertex_counts.append(int(nxt.size))
        stack.new_vertex_counts.append(int(nxt.size - current.size))
        current = nxt
    return stack


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkSpec:
    graph: str
    fanouts: list[int]
    samplers: list[SamplerConfig]
    batch_size: int = 1000
    batches_per_epoch: int | None = None
    repetitions: int = 1
    seed: int = 0
    seed_pool: object = "all"
    weighted: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.fanouts:
            raise ValueError("need at least one layer")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.samplers:
            raise ValueError("need at least one sampler")

    @property
    def num_layers(self) -> int:
        return len(self.fanouts)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | None = None) -> "BenchmarkSpec":
        data = dict(data)
        samplers = []
        for item in data.pop("samplers"):
            if isinstance(item, str):
                samplers.append(config_from_string(item))
            else:
                samplers.append(SamplerConfig.from_mapping(item))
        graph = str(data.pop("graph"))
        if base_dir and ":" not in graph and not os.path.isabs(graph):
            graph = os.path.join(base_dir, graph)
        pool = data.pop("seed_pool", "all")
        if isinstance(pool, str) and pool != "all" and base_dir and not os.path.isabs(pool):
            pool = os.path.join(base_dir, pool)
        known = {"fanouts", "batch_size", "batches_per_epoch", "repetitions", "seed", "weighted"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown benchmark keys: {sorted(extra)}")
        return cls(graph=graph, samplers=samplers, seed_pool=pool, **data)

    @classmethod
    def load(cls, path) -> "BenchmarkSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), os.path.dirname(os.path.abspath(path)))


@dataclass
class MetricsRow:
    algorithm: str
    layer: int
    mean_vertices: float
    std_vertices: float
    mean_edges: float | None
    std_edges: float | None
    ms_per_batch: float
    mean_new_vertices: float
    std_new_vertices: float


COLUMNS = (
    "algorithm",
    "layer",
    "mean_vertices",
    "std_vertices",
    "mean_edges",
    "std_edges",
    "ms_per_batch",
    "mean_new_vertices",
    "std_new_vertices",
)


@dataclass
class MetricsReport:
    rows: list[MetricsRow]
    # label -> int array (repetitions, batches, layers + 1)
    vertex_counts: dict[str, np.ndarray]
    edge_counts: dict[str, np.ndarray]

    def row(self, algorithm: str, layer: int) -> MetricsRow:
        for r in self.rows:
            if r.algorithm == algorithm and r.layer == layer:
                return r
        raise KeyError((algorithm, layer))

    def repetition_means(self, algorithm: str, layer: int) -> np.ndarray:
        """Mean ``|V^layer|`` of each repetition."""
        return self.vertex_counts[algorithm][:, :, layer].mean(axis=1)


def resolve_seed_pool(spec: BenchmarkSpec, g: Graph) -> np.ndarray:
    pool = spec.seed_pool
    if pool is None or pool == "all":
        return np.arange(g.num_vertices, dtype=np.int64)
    if isinstance(pool, dict):
        frac = float(pool["fraction"])
        rng = np.random.default_rng([spec.seed & MASK64, 0x5EED])
        n = int(round(frac * g.num_vertices))
        return np.sort(rng.choice(g.num_vertices, size=n, replace=False))
    if isinstance(pool, (list, tuple, np.ndarray)):
        return check_seeds(g, pool)
    with open(pool, "r", encoding="utf-8") as fh:
        ids = [int(tok) for line in fh if not line.lstrip().startswith("#") for tok in line.split()]
    return check_seeds(g, ids)


def _batch_key(seed: int, rep: int, batch: int) -> VariateKey:
    h = (seed & MASK64) * 0x100000001B3 ^ (rep + 1) * 0x9E3779B97F4A7C15 ^ (batch + 1) * 0xC2B2AE3D27D4EB4F
    return VariateKey(h & MASK64)


def _exact_stats(values: np.ndarray) -> tuple[float, float]:
    # integer sums keep the result independent of evaluation order
    vals = [int(v) for v in values.ravel()]
    n = len(vals)
    s1 = sum(vals)
    s2 = sum(v * v for v in vals)
    mean = s1 / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt((n * s2 - s1 * s1) / (n * (n - 1)))


def run_benchmark(spec: BenchmarkSpec, graph: Graph | None = None, threads: int = 1) -> MetricsReport:
    g = graph if graph is not None else parse_graph_spec(spec.graph)
    pool = resolve_seed_pool(spec, g)
    if spec.batch_size > pool.size:
        raise ValueError(f"batch_size {spec.batch_size} exceeds seed pool of {pool.size}")
    nb = math.ceil(pool.size / spec.batch_size)
    if spec.batches_per_epoch is not None:
        nb = min(nb, int(spec.batches_per_epoch))

    batches = []
    for rep in range(spec.repetitions):
        perm = np.random.default_rng([spec.seed & MASK64, rep]).permutation(pool)
        for b in range(nb):
            batches.append((rep, b, perm[b * spec.batch_size : (b + 1) * spec.batch_size]))

    rows, vcounts, ecounts = [], {}, {}
    nl = spec.num_layers
    for cfg in spec.samplers:
        if spec.weighted and not cfg.weighted:
            cfg = SamplerConfig.from_mapping({**cfg.to_mapping(), "weighted": True})

        def work(item, cfg=cfg):
            rep, b, seeds = item
            st = sample_multilayer(g, seeds, spec.fanouts, cfg, _batch_key(spec.seed, rep, b))
            return st.vertex_counts, st.edge_counts, st.new_vertex_counts

        t0 = time.perf_counter()
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(work, batches))
        else:
            results = [work(item) for item in batches]
        ms = 1000.0 * (time.perf_counter() - t0) / len(batches)

        v = np.array([r[0] for r in results], dtype=np.int64).reshape(spec.repetitions, nb, nl + 1)
        e = np.array([r[1] for r in results], dtype=np.int64).reshape(spec.repetitions, nb, nl)
        nv = np.array([r[2] for r in results], dtype=np.int64).reshape(spec.repetitions, nb, nl + 1)
        label = cfg.label
        if label in vcounts:
            label = f"{label}#{len(vcounts)}"
        vcounts[label], ecounts[label] = v, e
        for layer in range(nl + 1):
            mv, sv = _exact_stats(v[:, :, layer])
            mn, sn = _exact_stats(nv[:, :, layer])
            me = se = None
            if layer < nl:
                me, se = _exact_stats(e[:, :, layer])
            rows.append(MetricsRow(label, layer, mv, sv, me, se, ms, mn, sn))
    return MetricsReport(rows, vcounts, ecounts)


# ---------------------------------------------------------------------------
# report output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return ""
    return format(x, ".17g")


def report_json(report: MetricsReport, timings: bool = True) -> str:
    parts = []
    for r in report.rows:
        fields = []
        for col in COLUMNS:
            if col == "ms_per_batch" and not timings:
                continue
            val = getattr(r, col)
            if isinstance(val, str):
                text = json.dumps(val)
            else:
                text = _fmt(val) or "null"
            fields.append(f"{json.dumps(col)}: {text}")
        parts.append("  {" + ", ".join(fields) + "}")
    return "[\n" + ",\n".join(parts) + "\n]\n"


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, col)) for col in COLUMNS])
    return buf.getvalue()


def emit_report(report: MetricsReport, fmt: str, path) -> None:
    if fmt == "json":
        text = report_json(report)
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_report_csv(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        out = {}
        for k, v in rec.items():
            if k == "algorithm":
                out[k] = v
            elif k == "layer":
                out[k] = int(v)
            else:
                out[k] = float(v) if v != "" else None
        rows.append(out)
    return rows


def stack_to_records(stack: LayerStack) -> list[dict]:
    """COO edge lists with weights, one record per layer."""
    out = []
    for i, layer in enumerate(stack.layers):
        out.append(
            {
                "layer": i,
                "num_seeds": int(layer.seeds.size),
                "src": layer.src.tolist(),
                "dst": layer.dst.tolist(),
                "weight": layer.weight.tolist(),
                "prob": layer.prob.tolist(),
                "count": layer.count.tolist(),
            }
        )
    return out
