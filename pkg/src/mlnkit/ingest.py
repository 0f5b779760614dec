"""Layer builders: raw tables to layer graphs.

Every builder works on dense vertex ids and a ``universe_size``; the
``read_*`` helpers turn comma-separated text files into name-keyed rows that
callers intern through a :class:`~mlnkit.model.VertexUniverse`.

Builders that can drop input (out-of-range band values, zero-variance
vectors) record what they dropped in an optional :class:`BuildReport`
instead of raising, so one bad row does not sink a whole layer.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, ParseError, ValueOutOfRange
from .graph import Graph, from_edge_list, from_keys
from .model import VertexUniverse

HEADER_TOKENS = frozenset({"u", "src", "source", "from", "node", "node_id", "name", "id"})

# Covid percent-change bands: big dip, dip, flat-ish rise, rise, spike
DEFAULT_PERCENT_CHANGE_BANDS = (-math.inf, -50.0, 0.0, 50.0, 100.0, math.inf)

PEARSON_TOL = 1e-12


@dataclass
class BuildReport:
    layer_id: str = ""
    out_of_range: list = field(default_factory=list)
    zero_variance: list = field(default_factory=list)
    skipped_rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)

    def lines(self) -> list[str]:
        out = list(self.warnings)
        if self.out_of_range:
            out.append(f"{self.layer_id}: {len(self.out_of_range)} value(s) outside the band range left isolated")
        if self.zero_variance:
            out.append(f"{self.layer_id}: {len(self.zero_variance)} zero-variance vector(s) left unconnected")
        return out


# -- readers ----------------------------------------------------------------

def _load(source, path=None) -> tuple[str, str | None]:
    """Text and display path for a file path, open text handle, or literal text."""
    if isinstance(source, io.TextIOBase):
        return source.read(), path or getattr(source, "name", None)
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                           and os.path.exists(source)):
        p = os.fspath(source)
        with open(p, encoding="utf-8", newline="") as fh:
            return fh.read(), path or p
    return source, path


def read_rows(source, path=None, header_tokens=HEADER_TOKENS):
    """Comma-separated rows as ``(line_number, fields)``, plus the display path.

    Blank lines and ``#`` comments are dropped. The first data row is treated
    as a header when its first field is one of ``header_tokens``.
    """
    text, path = _load(source, path)
    rows: list[tuple[int, list[str]]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([s]))]
        if not rows and fields[0].lower() in header_tokens:
            continue
        rows.append((lineno, fields))
    return rows, path


def _drop_numeric_header(rows, col: int):
    """A first row whose numeric column does not parse is a header."""
    if rows and len(rows[0][1]) > col:
        try:
            float(rows[0][1][col])
        except ValueError:
            return rows[1:]
    return rows


def _need(fields: list[str], k: int, lineno: int, path, what: str) -> None:
    if len(fields) < k or any(f == "" for f in fields[:k]):
        raise ParseError(f"expected {what}, got {','.join(fields)!r}", path, lineno)


def read_pairs(source, path=None) -> list[tuple[int, str, str]]:
    rows, path = read_rows(source, path)
    out = []
    for lineno, f in rows:
        _need(f, 2, lineno, path, "'u,v'")
        out.append((lineno, f[0], f[1]))
    return out


def read_pair_counts(source, path=None) -> list[tuple[int, str, str, int]]:
    rows, path = read_rows(source, path, header_tokens=())
    rows = _drop_numeric_header(rows, 2)
    out = []
    for lineno, f in rows:
        _need(f, 2, lineno, path, "'u,v[,count]'")
        count = 1
        if len(f) > 2 and f[2] != "":
            try:
                count = int(f[2])
            except ValueError:
                raise ParseError(f"count {f[2]!r} is not an integer", path, lineno) from None
            if count < 0:
                raise ParseError(f"negative count {count}", path, lineno)
        out.append((lineno, f[0], f[1], count))
    return out


def read_scalars(source, path=None, as_int: bool = False) -> list[tuple[int, str, float]]:
    rows, path = read_rows(source, path, header_tokens=())
    rows = _drop_numeric_header(rows, 1)
    out = []
    for lineno, f in rows:
        _need(f, 2, lineno, path, "'node,value'")
        try:
            val = int(f[1]) if as_int else float(f[1])
        except ValueError:
            raise ParseError(f"value {f[1]!r} is not {'an integer' if as_int else 'numeric'}", path, lineno) from None
        out.append((lineno, f[0], val))
    return out


def read_vectors(source, path=None) -> list[tuple[int, str, list[float]]]:
    rows, path = read_rows(source, path, header_tokens=())
    rows = _drop_numeric_header(rows, 1)
    out = []
    for lineno, f in rows:
        _need(f, 2, lineno, path, "'node,c1,...'")
        try:
            vec = [float(x) for x in f[1:]]
        except ValueError:
            raise ParseError("vector component is not numeric", path, lineno) from None
        out.append((lineno, f[0], vec))
    return out


# -- builders ---------------------------------------------------------------

def build_explicit(source, universe: VertexUniverse, path=None) -> Graph:
    """Edge-list layer. Names are interned unless the universe is frozen."""
    intern = universe.id_of if universe.frozen else universe.intern
    pairs = []
    for lineno, a, b in read_pairs(source, path):
        try:
            pairs.append((intern(a), intern(b)))
        except KeyError as exc:
            raise type(exc)(f"{path or '<input>'}:{lineno}: {exc}") from None
    return from_edge_list(pairs, len(universe))


def build_count_threshold(pair_counts: Iterable[tuple[int, int, int]], min_count: int,
                          universe_size: int) -> Graph:
    """Edge ``{u, v}`` iff the summed count over duplicate rows is at least ``min_count``."""
    if int(min_count) < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    arr = np.asarray(list(pair_counts), dtype=np.int64).reshape(-1, 3)
    if arr.size == 0:
        return Graph(universe_size)
    if (arr[:, 2] < 0).any():
        raise ParseError("negative pair count")
    # validate endpoints and self-loops through the edge-list constructor
    from_edge_list(arr[:, :2], universe_size)
    lo, hi = arr[:, :2].min(axis=1), arr[:, :2].max(axis=1)
    keys, inv = np.unique(lo * universe_size + hi, return_inverse=True)
    totals = np.bincount(inv, weights=arr[:, 2]).astype(np.int64)
    return from_keys(keys[totals >= int(min_count)], universe_size)


def _clique_keys(groups: np.ndarray, members: np.ndarray, n: int) -> np.ndarray:
    """Edge keys of the disjoint cliques induced by equal ``groups`` labels."""
    if members.size < 2:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((members, groups))
    g, m = groups[order], members[order]
    cuts = np.flatnonzero(np.diff(g)) + 1
    parts = []
    for block in np.split(m, cuts):
        if block.size < 2:
            continue
        i, j = np.triu_indices(block.size, 1)
        parts.append(block[i] * n + block[j])
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(parts))


def _check_bands(band_edges: Sequence[float]) -> np.ndarray:
    edges = np.asarray(band_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0) or np.isnan(edges).any():
        raise ConfigError(f"band_edges must be strictly increasing with at least 2 entries: {list(band_edges)}")
    return edges


def band_index(values: np.ndarray, band_edges: Sequence[float]) -> np.ndarray:
    """Half-open band ``[b_i, b_i+1)`` per value, or -1 outside the range."""
    edges = _check_bands(band_edges)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[(values < edges[0]) | (values >= edges[-1]) | np.isnan(values)] = -1
    return idx


def build_band_similarity(values: Mapping[int, float], band_edges: Sequence[float],
                          universe_size: int, report: BuildReport | None = None,
                          strict: bool = False) -> Graph:
    """Vertices falling in the same half-open band form a clique."""
    edges = _check_bands(band_edges)
    if not values:
        return Graph(universe_size)
    verts = np.fromiter(values.keys(), dtype=np.int64, count=len(values))
    vals = np.fromiter(values.values(), dtype=float, count=len(values))
    idx = band_index(vals, edges)
    bad = idx < 0
    if bad.any():
        if strict:
            v = int(verts[bad][0])
            raise ValueOutOfRange(f"vertex {v} value {vals[bad][0]} outside [{edges[0]}, {edges[-1]})")
        if report is not None:
            report.out_of_range.extend(zip(verts[bad].tolist(), vals[bad].tolist()))
    return Graph(universe_size, _clique_keys(idx[~bad], verts[~bad], universe_size))


def build_correlation_similarity(vectors: Mapping[int, Sequence[float]], min_correlation: float,
                                 universe_size: int, report: BuildReport | None = None,
                                 block: int = 1024) -> Graph:
    """Edge ``{u, v}`` iff the Pearson correlation of their vectors reaches the threshold."""
    if not -1.0 <= float(min_correlation) <= 1.0:
        raise ConfigError(f"min_correlation must lie in [-1, 1], got {min_correlation}")
    if not vectors:
        return Graph(universe_size)
    verts = np.fromiter(vectors.keys(), dtype=np.int64, count=len(vectors))
    dims = {len(v) for v in vectors.values()}
    if len(dims) != 1:
        raise DimensionMismatch(f"vectors have differing dimensions {sorted(dims)}")
    d = dims.pop()
    if d < 2:
        raise DimensionMismatch(f"vectors need dimension >= 2, got {d}")
    X = np.array(list(vectors.values()), dtype=np.float64)
    order = np.argsort(verts, kind="stable")
    verts, X = verts[order], X[order]
    Z = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt((Z * Z).sum(axis=1))
    flat = np.ptp(X, axis=1) == 0
    if flat.any() and report is not None:
        report.zero_variance.extend(verts[flat].tolist())
    keep = ~flat
    verts, Z = verts[keep], Z[keep] / norms[keep, None]
    thr = float(min_correlation) - PEARSON_TOL
    parts = []
    for s in range(0, verts.size, block):
        r = np.clip(Z[s:s + block] @ Z.T, -1.0, 1.0)
        i, j = np.nonzero(r >= thr)
        i = i + s
        upper = i < j
        parts.append(verts[i[upper]] * universe_size + verts[j[upper]])
    keys = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return from_keys(keys, universe_size)


def build_interval_clique(keys: Mapping[int, int], interval_k: int, universe_size: int) -> Graph:
    """Bucket keys into ``[min + i*k, min + (i+1)*k)`` and make each bucket a clique."""
    k = int(interval_k)
    if k < 1:
        raise ConfigError(f"interval_k must be >= 1, got {interval_k}")
    if not keys:
        return Graph(universe_size)
    verts = np.fromiter(keys.keys(), dtype=np.int64, count=len(keys))
    vals = np.fromiter(keys.values(), dtype=np.int64, count=len(keys))
    buckets = (vals - vals.min()) // k
    return Graph(universe_size, _clique_keys(buckets, verts, universe_size))


def pearson(u: Sequence[float], v: Sequence[float]) -> float:
    """Reference Pearson r by the textbook formula; NaN at zero variance."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du, dv = u - u.mean(), v - v.mean()
    den = math.sqrt(float(du @ du) * float(dv @ dv))
    return float("nan") if den == 0 else float(du @ dv) / den
