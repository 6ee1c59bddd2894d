"""1-neighbourhoods grown from maximal cliques."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cliques import CliqueSet
from .dpp import SERIAL, Backend
from .graph import RegionGraph


@dataclass(frozen=True, eq=False)
class NeighborhoodSet:
    """Flattened neighbourhoods; ``hoods[offsets[h]:offsets[h+1]]`` is sorted."""

    offsets: np.ndarray
    hoods: np.ndarray
    source_clique: np.ndarray

    def __len__(self) -> int:
        return self.offsets.shape[0] - 1

    def __getitem__(self, h: int) -> np.ndarray:
        return self.hoods[self.offsets[h]:self.offsets[h + 1]]

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def slot_hood(self) -> np.ndarray:
        """Neighbourhood id of every slot of ``hoods``."""
        return np.repeat(np.arange(len(self), dtype=np.int64), self.sizes)

    @classmethod
    def from_lists(cls, hoods) -> "NeighborhoodSet":
        sizes = np.array([len(h) for h in hoods], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        flat = np.array([v for h in hoods for v in h], dtype=np.int64)
        return cls(offsets, flat, np.arange(len(hoods), dtype=np.int64))


def build_neighborhoods(graph: RegionGraph, cliques: CliqueSet, k: int = 1,
                        backend: Backend = SERIAL) -> NeighborhoodSet:
    """One neighbourhood per clique: its members plus every vertex one hop away.

    Follows the four flat steps: count each member's neighbours outside the
    clique, scan the counts to size the output, write neighbours and members
    into one array keyed by ``clique * R + vertex``, then sort and drop
    adjacent duplicates.
    """
    if k != 1:
        raise ValueError("only 1-neighbourhoods are supported")
    bk = backend
    R = graph.n_vertices
    C = len(cliques)
    members = cliques.members
    member_clique, _ = bk.expand(cliques.sizes)
    member_keys = bk.map(lambda c, v: c * R + v, member_clique, members)

    def outside(c, u):
        keys = c * R + u
        if member_keys.shape[0] == 0:
            return np.ones(keys.shape, dtype=bool)
        pos = np.searchsorted(member_keys, keys).clip(max=member_keys.shape[0] - 1)
        return member_keys[pos] != keys

    # find neighbours: (member slot, rank) for every CSR entry of every member
    pair, rank = bk.expand(bk.gather(members, graph.degree))
    nb = bk.gather(bk.map(lambda p, r: graph.offsets[members[p]] + r, pair, rank),
                   graph.neighbors)
    pair_clique = bk.gather(pair, member_clique)
    keep = bk.map(outside, pair_clique, nb)

    # count neighbours, scan to size the output
    counts = bk.reduce_by_key(pair, keep.astype(np.int64), np.add)
    per_member = bk.scatter(counts[1], counts[0], members.shape[0], fill=0)
    out_offsets = bk.scan_exclusive(per_member, np.add, 0)
    total = int(out_offsets[-1] + per_member[-1]) if per_member.shape[0] else 0

    # get neighbours: compaction lands each kept neighbour at out_offsets[pair] + j
    nb_clique, nb_vertex = bk.compact(keep, pair_clique, nb)
    assert nb_vertex.shape[0] == total
    keys = np.concatenate([bk.map(lambda c, u: c * R + u, nb_clique, nb_vertex), member_keys])

    # remove duplicate neighbours
    keys, _ = bk.sort_by_key(keys, np.zeros(keys.shape[0], dtype=np.int8))
    keys = bk.unique(keys)
    hood_of = bk.map(lambda x: x // R, keys)
    hoods = bk.map(lambda x: x % R, keys)
    ids, sizes = bk.reduce_by_key(hood_of, np.ones(keys.shape[0], dtype=np.int64), np.add)
    sizes = bk.scatter(sizes, ids, C, fill=0)
    offsets = bk.scan_exclusive(np.append(sizes, 0), np.add, 0)
    return NeighborhoodSet(offsets.astype(np.int64), hoods.astype(np.int64),
                           np.arange(C, dtype=np.int64))
