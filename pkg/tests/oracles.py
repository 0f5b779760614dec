"""Independent reference implementations used as test oracles.

Each one is deliberately naive (pure Python sets, exhaustive search) so it
shares no code path with the library.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from functools import lru_cache
from itertools import combinations


def edge_set(g) -> set[frozenset]:
    return {frozenset((int(u), int(v))) for u, v in g.edges()}


def all_pairs(n: int) -> set[frozenset]:
    return {frozenset(p) for p in combinations(range(n), 2)}


def bfs(n: int, edges: set[frozenset], src: int) -> dict[int, int]:
    adj = {v: set() for v in range(n)}
    for e in edges:
        a, b = tuple(e)
        adj[a].add(b)
        adj[b].add(a)
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def components(n: int, edges: set[frozenset]) -> list[frozenset]:
    seen, out = set(), []
    for v in range(n):
        if v not in seen:
            comp = frozenset(bfs(n, edges, v))
            seen |= comp
            out.append(comp)
    return out


def closeness_wf(n: int, edges: set[frozenset]) -> list[float]:
    out = []
    for v in range(n):
        d = bfs(n, edges, v)
        r = len(d)
        total = sum(d.values())
        out.append(0.0 if total == 0 else ((r - 1) / (n - 1)) * ((r - 1) / total))
    return out


def modularity_exact(n: int, edges: set[frozenset], blocks) -> Fraction:
    m = len(edges)
    if m == 0:
        return Fraction(0)
    deg = [0] * n
    for e in edges:
        for v in e:
            deg[v] += 1
    q = Fraction(0)
    for b in blocks:
        b = set(b)
        inner = sum(1 for e in edges if e <= b)
        dsum = sum(deg[v] for v in b)
        q += Fraction(inner, m) - Fraction(dsum, 2 * m) ** 2
    return q


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]
        yield [[first]] + p


def best_partition(n: int, edges: set[frozenset]):
    """Exhaustive modularity maximum over every partition of ``range(n)``."""
    best, arg = None, None
    for p in set_partitions(range(n)):
        q = modularity_exact(n, edges, p)
        if best is None or q > best:
            best, arg = q, p
    return best, sorted(sorted(b) for b in arg)


def max_matching_weight(w) -> int:
    """Exact maximum-weight bipartite matching by DP over subsets of used columns."""
    rows = len(w)
    cols = len(w[0]) if rows else 0

    @lru_cache(maxsize=None)
    def go(i: int, used: int) -> int:
        if i == rows:
            return 0
        best = go(i + 1, used)
        for j in range(cols):
            if w[i][j] > 0 and not used >> j & 1:
                best = max(best, w[i][j] + go(i + 1, used | 1 << j))
        return best

    return go(0, 0)


def all_matchings(w):
    """Every matching as a sorted list of (row, col) pairs over positive entries."""
    rows = len(w)
    cols = len(w[0]) if rows else 0

    def go(i, used):
        if i == rows:
            yield []
            return
        yield from go(i + 1, used)
        for j in range(cols):
            if w[i][j] > 0 and j not in used:
                for rest in go(i + 1, used | {j}):
                    yield [(i, j)] + rest

    return list(go(0, frozenset()))
