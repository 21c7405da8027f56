"""In-edge CSR graph storage, file formats and synthetic generators."""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

MAGIC = b"LBRG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQB")


class GraphFormatError(ValueError):
    """Raised for malformed graph files (bad magic, version, parse errors)."""


class GraphCorruptionError(GraphFormatError):
    """Raised when a binary graph file is truncated or inconsistent."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph stored as in-edge CSR.

    ``in_indices[in_indptr[s]:in_indptr[s + 1]]`` are the sources ``t`` of the
    edges ``t -> s``, sorted and deduplicated.
    """

    num_vertices: int
    in_indptr: np.ndarray
    in_indices: np.ndarray
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.in_indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.in_indices, dtype=np.int64)
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "in_indptr", indptr)
        object.__setattr__(self, "in_indices", indices)
        if self.edge_weights is not None:
            w = np.ascontiguousarray(self.edge_weights, dtype=np.float64)
            w.setflags(write=False)
            object.__setattr__(self, "edge_weights", w)
        object.__setattr__(self, "num_vertices", int(self.num_vertices))

    @property
    def is_weighted(self) -> bool:
        return self.edge_weights is not None

    @property
    def num_edges(self) -> int:
        return int(self.in_indices.shape[0])

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def degree(self, s: int) -> int:
        return int(self.in_indptr[s + 1] - self.in_indptr[s])

    def in_neighbors(self, s: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[s] : self.in_indptr[s + 1]]

    def in_weights(self, s: int) -> np.ndarray:
        lo, hi = self.in_indptr[s], self.in_indptr[s + 1]
        if self.edge_weights is None:
            return np.ones(hi - lo)
        return self.edge_weights[lo:hi]

    def validate(self) -> None:
        """Check the CSR invariants, raising ``ValueError`` on violation."""
        n = self.num_vertices
        indptr, indices = self.in_indptr, self.in_indices
        if n < 0:
            raise ValueError("num_vertices must be non-negative")
        if indptr.shape != (n + 1,):
            raise ValueError(f"in_indptr must have length {n + 1}")
        if indptr[0] != 0 or indptr[-1] != indices.shape[0]:
            raise ValueError("in_indptr must start at 0 and end at num_edges")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("in_indptr must be non-decreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise ValueError("in_indices out of range")
        if indices.size > 1:
            # strictly increasing within each destination slice
            step = np.diff(indices)
            boundary = np.zeros(indices.size - 1, dtype=bool)
            starts = indptr[1:-1]
            starts = starts[(starts > 0) & (starts < indices.size)]
            boundary[starts - 1] = True
            if np.any((step <= 0) & ~boundary):
                raise ValueError("sources within a slice must be strictly increasing")
        if self.edge_weights is not None:
            w = self.edge_weights
            if w.shape != indices.shape:
                raise ValueError("edge_weights must have one entry per edge")
            if np.any(~(w > 0)):
                raise ValueError("edge weights must be positive")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.num_vertices != other.num_vertices or self.is_weighted != other.is_weighted:
            return False
        if not (
            np.array_equal(self.in_indptr, other.in_indptr)
            and np.array_equal(self.in_indices, other.in_indices)
        ):
            return False
        if self.is_weighted:
            return self.edge_weights.tobytes() == other.edge_weights.tobytes()
        return True

    __hash__ = None


def from_edges(
    src: Iterable[int],
    dst: Iterable[int],
    num_vertices: int | None = None,
    weights: Iterable[float] | None = None,
) -> Graph:
    """Build a graph from edge arrays ``src[i] -> dst[i]``.

    Duplicate pairs collapse to a single edge; in weighted mode their weights
    are summed.
    """
    src = np.asarray(src, dtype=np.int64).ravel()
    dst = np.asarray(dst, dtype=np.int64).ravel()
    if src.shape != dst.shape:
        raise ValueError("src and dst must have the same length")
    if src.size and (src.min() < 0 or dst.min() < 0):
        raise ValueError("vertex ids must be non-negative")
    seen = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    n = seen if num_vertices is None else int(num_vertices)
    if n < seen:
        raise ValueError(f"num_vertices={n} but ids up to {seen - 1} present")

    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != src.shape:
            raise ValueError("weights must have one entry per edge")
        if np.any(~(w > 0)):
            raise ValueError("edge weights must be positive")

    order = np.lexsort((src, dst))
    src, dst = src[order], dst[order]
    if src.size:
        first = np.ones(src.size, dtype=bool)
        first[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
    else:
        first = np.zeros(0, dtype=bool)
    if w is not None:
        w = w[order]
        group = np.cumsum(first) - 1
        w = np.bincount(group, weights=w, minlength=int(first.sum())) if w.size else w
    src, dst = src[first], dst[first]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
    return Graph(n, indptr, src, w)


def load_edge_list(source: TextIO | str | os.PathLike, weighted: bool = False) -> Graph:
    """Parse a whitespace edge list with lines ``t s`` or ``t s w``.

    ``#`` starts a comment line.  A comment of the form ``# vertices: N``
    fixes ``num_vertices``.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_edge_list(fh, weighted=weighted)

    src, dst, wts = [], [], []
    header_n = None
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip().lower()
            if body.startswith("vertices:"):
                try:
                    header_n = int(body.split(":", 1)[1])
                except ValueError as exc:
                    raise GraphFormatError(f"line {lineno}: bad vertex header") from exc
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 't s' or 't s w', got {line!r}")
        try:
            t, s = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: non-integer vertex id") from exc
        if t < 0 or s < 0:
            raise GraphFormatError(f"line {lineno}: negative vertex id")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from exc
            if not w > 0:
                raise ValueError(f"line {lineno}: weight must be positive, got {w}")
        src.append(t)
        dst.append(s)
        wts.append(w)
    return from_edges(src, dst, header_n, wts if weighted else None)


def save_edge_list(g: Graph, dest: TextIO | str | os.PathLike) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            return save_edge_list(g, fh)
    dest.write(f"# vertices: {g.num_vertices}\n")
    dst = np.repeat(np.arange(g.num_vertices), g.in_degrees())
    if g.is_weighted:
        for t, s, w in zip(g.in_indices.tolist(), dst.tolist(), g.edge_weights.tolist()):
            dest.write(f"{t} {s} {w!r}\n")
    else:
        for t, s in zip(g.in_indices.tolist(), dst.tolist()):
            dest.write(f"{t} {s}\n")


def save_binary_csr(g: Graph, path: str | os.PathLike) -> None:
    if g.num_vertices > 2**32:
        raise ValueError("binary format stores vertex ids as u32")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, g.num_vertices, g.num_edges, int(g.is_weighted)))
        fh.write(g.in_indptr.astype("<u8").tobytes())
        fh.write(g.in_indices.astype("<u4").tobytes())
        if g.is_weighted:
            fh.write(g.edge_weights.astype("<f8").tobytes())


def load_binary_csr(path: str | os.PathLike) -> Graph:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise GraphFormatError(f"{path}: not a binary CSR graph (bad magic)")
    if len(data) < _HEADER.size:
        raise GraphCorruptionError(f"{path}: truncated header")
    _, version, n, m, weighted = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise GraphFormatError(f"{path}: unsupported format version {version}")
    if weighted not in (0, 1):
        raise GraphCorruptionError(f"{path}: bad weighted flag {weighted}")
    expected = _HEADER.size + 8 * (n + 1) + 4 * m + (8 * m if weighted else 0)
    if len(data) != expected:
        raise GraphCorruptionError(f"{path}: expected {expected} bytes, found {len(data)}")
    off = _HEADER.size
    indptr = np.frombuffer(data, "<u8", n + 1, off).astype(np.int64)
    off += 8 * (n + 1)
    indices = np.frombuffer(data, "<u4", m, off).astype(np.int64)
    off += 4 * m
    weights = np.frombuffer(data, "<f8", m, off).astype(np.float64) if weighted else None
    g = Graph(n, indptr, indices, weights)
    try:
        g.validate()
    except ValueError as exc:
        raise GraphCorruptionError(f"{path}: {exc}") from exc
    return g


def load_graph(path: str | os.PathLike, weighted: bool = False) -> Graph:
    """Load either format, sniffing the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return load_binary_csr(path)
    return load_edge_list(path, weighted=weighted)


def save_graph(g: Graph, path: str | os.PathLike) -> None:
    if str(path).endswith((".lbrg", ".bin")):
        save_binary_csr(g, path)
    else:
        save_edge_list(g, path)


def khop_neighborhood(g: Graph, seeds, hops: int) -> np.ndarray:
    """Return ``N^l(S)`` as a sorted array, expanding one hop at a time."""
    if hops < 1:
        raise ValueError("hop count must be >= 1")
    frontier = np.unique(np.asarray(seeds, dtype=np.int64))
    _check_ids(g, frontier)
    for _ in range(hops):
        if frontier.size == 0:
            break
        frontier = np.unique(np.concatenate([g.in_neighbors(s) for s in frontier]))
    return frontier


def _check_ids(g: Graph, ids: np.ndarray) -> None:
    if ids.size and (ids.min() < 0 or ids.max() >= g.num_vertices):
        raise ValueError("vertex id out of range")


def check_seeds(g: Graph, seeds) -> np.ndarray:
    """Validate a seed batch: distinct, in-range vertex ids."""
    seeds = np.asarray(seeds, dtype=np.int64).ravel()
    _check_ids(g, seeds)
    if np.unique(seeds).size != seeds.size:
        raise ValueError("seed batch contains duplicates")
    return seeds


# ---------------------------------------------------------------------------
# synthetic graphs


def erdos_renyi(n: int, p: float, seed: int = 0, self_loops: bool = False) -> Graph:
    if n < 0 or not 0.0 <= p <= 1.0:
        raise ValueError("erdos_renyi needs n >= 0 and p in [0, 1]")
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    if not self_loops:
        np.fill_diagonal(adj, False)
    src, dst = np.nonzero(adj)
    return from_edges(src, dst, n)


def power_law(n: int, exponent: float = 2.1, mean_degree: float = 10.0, seed: int = 0) -> Graph:
    """Chung-Lu style graph whose expected degrees follow ``i^(-1/(exponent-1))``.

    ``n * mean_degree`` endpoint pairs are drawn with both endpoints chosen
    proportionally to the expected-degree weights; duplicates collapse.
    """
    if n < 1 or exponent <= 1.0 or mean_degree <= 0:
        raise ValueError("power_law needs n >= 1, exponent > 1, mean_degree > 0")
    rng = np.random.default_rng(seed)
    w = np.arange(1, n + 1, dtype=np.float64) ** (-1.0 / (exponent - 1.0))
    w /= w.sum()
    m = int(round(n * mean_degree))
    perm = rng.permutation(n)
    src = perm[rng.choice(n, size=m, p=w)]
    dst = perm[rng.choice(n, size=m, p=w)]
    return from_edges(src, dst, n)


def shared_star(m: int, d: int) -> Graph:
    """``m`` destinations ``0..m-1`` sharing the source set ``m..m+d-1``."""
    if m < 1 or d < 0:
        raise ValueError("shared_star needs m >= 1 and d >= 0")
    sources = np.arange(m, m + d)
    src = np.tile(sources, m)
    dst = np.repeat(np.arange(m), d)
    return from_edges(src, dst, m + d)


def gen_synthetic(kind: str, seed: int = 0, **params) -> Graph:
    if kind == "erdos_renyi":
        return erdos_renyi(params["n"], params["p"], seed=seed)
    if kind == "power_law":
        return power_law(
            params["n"], params.get("exponent", 2.1), params.get("mean_degree", 10.0), seed=seed
        )
    if kind == "shared_star":
        return shared_star(params["m"], params["d"])
    raise ValueError(f"unknown synthetic graph kind {kind!r}")


def parse_graph_spec(text: str) -> Graph:
    """Resolve ``er:N:P[:SEED]``, ``pl:N:EXP[:MEANDEG[:SEED]]``, ``star:M:D`` or a path."""
    parts = text.split(":")
    try:
        if parts[0] == "er" and len(parts) in (3, 4):
            return erdos_renyi(int(parts[1]), float(parts[2]), seed=int(parts[3]) if len(parts) == 4 else 0)
        if parts[0] == "pl" and 3 <= len(parts) <= 5:
            mean = float(parts[3]) if len(parts) > 3 else 10.0
            sd = int(parts[4]) if len(parts) > 4 else 0
            return power_law(int(parts[1]), float(parts[2]), mean, seed=sd)
        if parts[0] == "star" and len(parts) == 3:
            return shared_star(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad synthetic graph spec {text!r}: {exc}") from exc
    return load_graph(text)


def edge_list_text(g: Graph) -> str:
    buf = io.StringIO()
    save_edge_list(g, buf)
    return buf.getvalue()
