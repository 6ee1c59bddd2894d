"""Region adjacency graph built from an image and its oversegmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dpp import SERIAL, Backend


class LabelMapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """Undirected CSR adjacency over regions plus per-region statistics."""

    n_vertices: int
    offsets: np.ndarray
    neighbors: np.ndarray
    mean: np.ndarray
    pixel_count: np.ndarray

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def n_edges(self) -> int:
        return self.neighbors.shape[0] // 2

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def row_ids(self) -> np.ndarray:
        """Source vertex of every CSR entry."""
        return np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.degree)

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * R + v`` keys of both edge directions."""
        return self.row_ids() * self.n_vertices + self.neighbors

    def check(self) -> None:
        """Raise ``AssertionError`` if a CSR invariant is broken."""
        R = self.n_vertices
        off, nb = self.offsets, self.neighbors
        assert off.shape == (R + 1,) and off[0] == 0 and off[-1] == nb.shape[0]
        assert np.all(np.diff(off) >= 0)
        rows = self.row_ids()
        assert np.all(nb != rows), "self-loop"
        same_row = rows[1:] == rows[:-1]
        assert np.all(nb[1:][same_row] > nb[:-1][same_row]), "unsorted or duplicate neighbours"
        keys = np.sort(nb * R + rows)
        assert np.array_equal(keys, self.edge_keys()), "asymmetric adjacency"

    @classmethod
    def from_edges(cls, n_vertices: int, edges, mean=None, pixel_count=None) -> "RegionGraph":
        """Build a graph from an undirected edge list (used for synthetic graphs)."""
        R = int(n_vertices)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        e = e[e[:, 0] != e[:, 1]]
        keys = np.unique(np.concatenate([e[:, 0] * R + e[:, 1], e[:, 1] * R + e[:, 0]]))
        src, dst = keys // R, keys % R
        offsets = np.zeros(R + 1, dtype=np.int64)
        np.add.at(offsets, src + 1, 1)
        mean = np.zeros(R) if mean is None else np.asarray(mean, dtype=float)
        pixel_count = np.ones(R, dtype=np.int64) if pixel_count is None else np.asarray(pixel_count)
        return cls(R, np.cumsum(offsets), dst, mean, pixel_count)


def validate_label_map(labels) -> int:
    """Check region ids are contiguous and each region is 4-connected.

    Returns the number of regions.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise LabelMapError("label map must be a non-empty 2-D array")
    if labels.dtype.kind not in "iu":
        raise LabelMapError("region ids must be integers")
    if labels.min() < 0:
        raise LabelMapError("region ids must be non-negative")
    R = int(labels.max()) + 1
    used = np.zeros(R, dtype=bool)
    used[labels.ravel()] = True
    if not used.all():
        raise LabelMapError(f"region ids are not contiguous: {int((~used).sum())} ids in 0..{R - 1} unused")
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols = [], []
    for a, b, la, lb in ((idx[:, :-1], idx[:, 1:], labels[:, :-1], labels[:, 1:]),
                         (idx[:-1, :], idx[1:, :], labels[:-1, :], labels[1:, :])):
        same = la == lb
        rows.append(a[same])
        cols.append(b[same])
    r, c = np.concatenate(rows), np.concatenate(cols)
    pix = coo_matrix((np.ones(r.shape[0], dtype=np.int8), (r, c)), shape=(h * w, h * w))
    n_comp, _ = connected_components(pix, directed=False)
    if n_comp != R:
        raise LabelMapError(f"{n_comp - R} region(s) are not 4-connected")
    return R


def grid_oversegment(image, block_size: int) -> np.ndarray:
    """Partition the image into ``block_size`` squares, ids in row-major block order."""
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    h, w = np.shape(image)[:2]
    nbx = -(-w // block_size)
    r = np.arange(h)[:, None] // block_size
    c = np.arange(w)[None, :] // block_size
    return (r * nbx + c).astype(np.int64)


def build_region_graph(image, labels, backend: Backend = SERIAL,
                       validate: bool = True) -> RegionGraph:
    """Region adjacency graph with 4-connectivity between pixels.

    Adjacent pixel pairs with differing labels are emitted as ``a * R + b``
    keys, sorted and deduplicated, then turned into CSR offsets with a
    segmented count and an exclusive scan.  Region means come from a
    sort by region id followed by integer segmented sums.
    """
    image = np.asarray(image)
    labels = np.asarray(labels)
    if image.shape != labels.shape:
        raise ValueError(f"image shape {image.shape} does not match label map shape {labels.shape}")
    if validate:
        R = validate_label_map(labels)
    else:
        R = int(labels.max()) + 1
    bk = backend
    lab = labels.astype(np.int64)

    pairs = []
    for a, b in ((lab[:, :-1], lab[:, 1:]), (lab[:-1, :], lab[1:, :])):
        a, b = a.ravel(), b.ravel()
        pairs.append(bk.map(lambda x, y: np.where(x != y, x * R + y, -1), a, b))
        pairs.append(bk.map(lambda x, y: np.where(x != y, y * R + x, -1), a, b))
    keys = np.concatenate(pairs)
    keys, _ = bk.sort_by_key(keys, np.zeros(keys.shape[0], dtype=np.int8))
    keys = bk.unique(keys)
    keys = keys[1:] if keys.shape[0] and keys[0] < 0 else keys

    src = bk.map(lambda k: k // R, keys)
    dst = bk.map(lambda k: k % R, keys)
    rows, counts = bk.reduce_by_key(src, np.ones(src.shape[0], dtype=np.int64), np.add)
    degree = bk.scatter(counts, rows, R, fill=0).astype(np.int64)
    offsets = bk.scan_exclusive(np.append(degree, 0), np.add, 0)

    flat_lab, flat_pix = bk.sort_by_key(lab.ravel(), image.ravel().astype(np.int64))
    _, sums = bk.reduce_by_key(flat_lab, flat_pix, np.add)
    _, npix = bk.reduce_by_key(flat_lab, np.ones(flat_lab.shape[0], dtype=np.int64), np.add)
    mean = bk.map(lambda s, n: s / n, sums, npix)
    return RegionGraph(R, offsets, dst.astype(np.int64), mean.astype(np.float64), npix)

