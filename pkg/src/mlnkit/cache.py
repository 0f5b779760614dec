"""Content-addressed store for per-layer analysis results.

Layout: ``<root>/<graph hash>/<psi>.bin`` (npz payload) next to a readable
``<psi>.csv``. Keys are (graph content hash, analysis kind, parameters), so a
rebuilt layer with identical edges reuses earlier work. Writes go through a
temp file and ``os.replace``; readers never see a partial file.
"""

from __future__ import annotations

import hashlib
import io
import os
import shutil
import tempfile
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import AnyGraph, Partition
from .model import PsiKind
from .psi import CommunitySet, NodeScores, compute_psi

DEFAULT_PARAMS = {"resolution": 1.0, "min_gain": 1e-9, "sweep_tol": 1e-7}


def default_cache_dir() -> Path:
    env = os.environ.get("MLNKIT_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "mlnkit"


def _param_tag(kind: PsiKind, params: dict) -> str:
    if kind is not PsiKind.COMMUNITY:
        return kind.value
    p = {**DEFAULT_PARAMS, **params}
    if p == DEFAULT_PARAMS:
        return kind.value
    text = ";".join(f"{k}={p[k]!r}" for k in sorted(p))
    return f"{kind.value}-{hashlib.sha1(text.encode()).hexdigest()[:10]}"


def _encode(result) -> bytes:
    buf = io.BytesIO()
    if isinstance(result, CommunitySet):
        np.savez(buf, labels=result.partition.labels, modularity=np.float64(result.modularity))
    else:
        np.savez(buf, scores=result.scores)
    return buf.getvalue()


def _decode(kind: PsiKind, data: bytes, layer_id: str):
    with np.load(io.BytesIO(data)) as z:
        if kind is PsiKind.COMMUNITY:
            return CommunitySet(layer_id, Partition.from_labels(z["labels"]), float(z["modularity"]))
        return NodeScores(layer_id, kind, z["scores"].copy())


def _readable(result) -> str:
    if isinstance(result, CommunitySet):
        lines = ["community_id,node_id"]
        lines += [f"{c},{v}" for v, c in enumerate(result.partition.labels.tolist())]
    else:
        lines = ["node_id,score"] + [f"{v},{s!r}" for v, s in enumerate(result.scores.tolist())]
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _worker(graph, kind, params):
    return compute_psi(graph, kind, **params)


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    disk_hits: int = 0

    def as_dict(self) -> dict:
        return {"hits": self.hits, "misses": self.misses, "disk_hits": self.disk_hits}


class PsiCache:
    """Memo in front of an optional directory. ``root=None`` keeps results in memory only."""

    def __init__(self, root: str | os.PathLike | None = None):
        self.root = Path(root) if root is not None else None
        self._memo: dict[tuple, bytes] = {}
        self._lock = threading.Lock()
        self.stats = CacheStats()

    def _path(self, ghash: str, kind: PsiKind, params: dict) -> Path | None:
        if self.root is None:
            return None
        return self.root / ghash / f"{_param_tag(kind, params)}.bin"

    def lookup(self, graph: AnyGraph, kind, params: dict | None = None, layer_id: str = ""):
        """Cached result or ``None``; does not touch the counters."""
        kind = PsiKind(kind)
        params = dict(params or {})
        key = (graph.content_hash(), kind, _param_tag(kind, params))
        data = self._memo.get(key)
        if data is None:
            path = self._path(key[0], kind, params)
            if path is None or not path.exists():
                return None
            data = path.read_bytes()
            with self._lock:
                self._memo[key] = data
                self.stats.disk_hits += 1
        return _decode(kind, data, layer_id)

    def store(self, graph: AnyGraph, kind, params: dict | None, result) -> None:
        kind = PsiKind(kind)
        params = dict(params or {})
        ghash = graph.content_hash()
        data = _encode(result)
        with self._lock:
            self._memo[(ghash, kind, _param_tag(kind, params))] = data
        path = self._path(ghash, kind, params)
        if path is not None:
            _atomic_write(path, data)
            _atomic_write(path.with_suffix(".csv"), _readable(result).encode())

    def get(self, graph: AnyGraph, kind, params: dict | None = None, layer_id: str = ""):
        kind = PsiKind(kind)
        params = dict(params or {})
        found = self.lookup(graph, kind, params, layer_id)
        if found is not None:
            self.stats.hits += 1
            return found
        self.stats.misses += 1
        result = compute_psi(graph, kind, layer_id, **params)
        self.store(graph, kind, params, result)
        return result

    def get_many(self, items, jobs: int = 1) -> list:
        """Results for ``(layer_id, graph, kind, params)`` items, computing misses once.

        With ``jobs > 1`` the missing results are computed in worker processes.
        """
        out: list = []
        todo: list[int] = []
        for i, (layer_id, graph, kind, params) in enumerate(items):
            found = self.lookup(graph, kind, params, layer_id)
            out.append(found)
            if found is None:
                todo.append(i)
        self.stats.hits += len(items) - len(todo)
        self.stats.misses += len(todo)
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {i: pool.submit(_worker, items[i][1], PsiKind(items[i][2]), dict(items[i][3] or {}))
                           for i in todo}
                computed = {i: f.result() for i, f in futures.items()}
        else:
            computed = {i: compute_psi(items[i][1], PsiKind(items[i][2]), items[i][0], **dict(items[i][3] or {}))
                        for i in todo}
        for i, res in computed.items():
            layer_id, graph, kind, params = items[i]
            self.store(graph, kind, params, res)
            out[i] = _decode(PsiKind(kind), _encode(res), layer_id)
        return out

    def precompute(self, items, jobs: int = 1) -> int:
        """Warm the cache; returns how many results had to be computed."""
        before = self.stats.misses
        self.get_many(items, jobs)
        return self.stats.misses - before

    def clear_memory(self) -> None:
        with self._lock:
            self._memo.clear()

    def entries(self) -> list[tuple[str, str, int]]:
        if self.root is None or not self.root.exists():
            return []
        out = []
        for d in sorted(p for p in self.root.iterdir() if p.is_dir()):
            for f in sorted(d.glob("*.bin")):
                out.append((d.name, f.stem, f.stat().st_size))
        return out

    def clear(self) -> int:
        n = len(self.entries())
        self.clear_memory()
        if self.root is not None and self.root.exists():
            for d in self.root.iterdir():
                if d.is_dir() and len(d.name) == 64:
                    shutil.rmtree(d)
        return n
