"""Maximal clique enumeration over a region graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpp import SERIAL, Backend
from .graph import RegionGraph

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True, eq=False)
class CliqueSet:
    """Flattened maximal cliques, each sorted, the list in lexicographic order."""

    offsets: np.ndarray
    members: np.ndarray

    def __len__(self) -> int:
        return self.offsets.shape[0] - 1

    def __getitem__(self, i: int) -> np.ndarray:
        return self.members[self.offsets[i]:self.offsets[i + 1]]

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in self[i]) for i in range(len(self))]

    @classmethod
    def from_lists(cls, cliques) -> "CliqueSet":
        cliques = sorted(tuple(sorted(int(v) for v in c)) for c in cliques)
        sizes = np.array([len(c) for c in cliques], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        members = np.array([v for c in cliques for v in c], dtype=np.int64)
        return cls(offsets, members)


def _lexicographic(rows_by_size: list[np.ndarray]) -> CliqueSet:
    """Merge per-size clique matrices into one lexicographically ordered set.

    No maximal clique is a prefix of another, so padding short rows with -1
    does not affect the order.
    """
    rows_by_size = [r for r in rows_by_size if r.shape[0]]
    if not rows_by_size:
        return CliqueSet(np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    width = max(r.shape[1] for r in rows_by_size)
    padded = np.concatenate([np.pad(r, ((0, 0), (0, width - r.shape[1])), constant_values=-1)
                             for r in rows_by_size])
    order = np.lexsort(padded.T[::-1])
    padded = padded[order]
    sizes = (padded >= 0).sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return CliqueSet(offsets, padded[padded >= 0].astype(np.int64))


def enumerate_maximal_cliques(graph: RegionGraph, backend: Backend = SERIAL) -> CliqueSet:
    """All maximal cliques, grown level by level as flat arrays.

    Level ``k`` holds every ``k``-clique as a sorted row.  For each row the
    neighbours of its first member are expanded (scan + gather) and tested
    against the remaining members through binary search in the sorted edge
    keys.  A row with no common neighbour is maximal; rows are extended only
    by common neighbours larger than their last member, so every clique is
    generated once.  Isolated vertices come out as singleton cliques.
    """
    bk = backend
    R = graph.n_vertices
    if R == 0:
        return _lexicographic([])
    edge_keys = graph.edge_keys()
    degree = graph.degree
    offsets, neighbors = graph.offsets, graph.neighbors

    def adjacent(a, b):
        keys = a * R + b
        pos = np.searchsorted(edge_keys, keys).clip(max=max(edge_keys.shape[0] - 1, 0))
        return edge_keys[pos] == keys if edge_keys.shape[0] else np.zeros(keys.shape, dtype=bool)

    level = np.arange(R, dtype=np.int64)[:, None]
    maximal = []
    while level.shape[0]:
        k = level.shape[1]
        first = level[:, 0]
        seg, rank = bk.expand(bk.gather(first, degree))
        cand = bk.gather(bk.map(lambda s, r: offsets[first[s]] + r, seg, rank), neighbors)
        common = np.ones(cand.shape[0], dtype=bool)
        for j in range(1, k):
            member = bk.gather(seg, level[:, j])
            common &= bk.map(adjacent, member, cand)
        seg_c, cand_c = bk.compact(common, seg, cand)
        hit_rows, hits = bk.reduce_by_key(seg_c, np.ones(seg_c.shape[0], dtype=np.int64), np.add)
        n_common = bk.scatter(hits, hit_rows, level.shape[0], fill=0)
        maximal.append(level[n_common == 0])
        grow = bk.map(lambda s, c: c > level[s, k - 1], seg_c, cand_c)
        parent, new = bk.compact(grow, seg_c, cand_c)
        level = np.concatenate([level[parent], new[:, None]], axis=1)
    return _lexicographic(maximal)


def brute_force_cliques(graph: RegionGraph) -> CliqueSet:
    """Exhaustive subset enumeration; the oracle for small graphs."""
    R = graph.n_vertices
    if R > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} vertices, got {R}")
    adj = [0] * R
    for v in range(R):
        for u in graph.neighbors_of(v):
            adj[v] |= 1 << int(u)
    cliques = []
    for mask in range(1, 1 << R):
        members = [v for v in range(R) if mask >> v & 1]
        if any(mask & ~adj[v] & ~(1 << v) for v in members):
            continue
        if any(not mask >> u & 1 and adj[u] & mask == mask for u in range(R)):
            continue
        cliques.append(members)
    return CliqueSet.from_lists(cliques)


def degeneracy(graph: RegionGraph) -> int:
    """Graph degeneracy by repeated minimum-degree removal."""
    deg = graph.degree.astype(np.int64).copy()
    removed = np.zeros(graph.n_vertices, dtype=bool)
    best = 0
    for _ in range(graph.n_vertices):
        v = int(np.argmin(np.where(removed, np.iinfo(np.int64).max, deg)))
        best = max(best, int(deg[v]))
        removed[v] = True
        deg[graph.neighbors_of(v)] -= 1
    return best
