"""Data-parallel primitives over 1-D numpy arrays.

Every kernel is available on two backends:

``Serial``
    runs each kernel as a single chunk on the calling thread.
``Threaded``
    splits the input into contiguous chunks of ``chunk_size`` elements and
    runs them on a fixed-size thread pool.  numpy drops the GIL inside the
    per-chunk work, so chunks do run concurrently.

Both backends give bit-identical results.  Floating point reductions use a
pairwise tree whose shape depends only on element positions: node ``i`` at
level ``l`` covers ``[i * 2**l, (i + 1) * 2**l)``.  The threaded backend
reduces power-of-two aligned blocks, which are exact subtrees of that tree,
and then finishes the top of the tree serially.

Operators passed to ``reduce``, ``scan_exclusive`` and ``reduce_by_key`` are
binary numpy ufuncs (``np.add``, ``np.minimum``, ...).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = ["Backend", "Serial", "Threaded", "make_backend", "SERIAL"]

_EXACT_UFUNCS = (np.minimum, np.maximum, np.fmin, np.fmax,
                 np.logical_and, np.logical_or, np.bitwise_and,
                 np.bitwise_or, np.bitwise_xor)


@lru_cache(maxsize=None)
def _pool(threads: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=threads, thread_name_prefix="dpp")


def _as_array(x) -> np.ndarray:
    return np.asarray(x)


def _tree_reduce(x: np.ndarray, op) -> np.ndarray:
    """Pairwise tree fold of a non-empty array, returns a 0-d result."""
    while x.shape[0] > 1:
        n = x.shape[0]
        half = n // 2
        y = op(x[0:2 * half:2], x[1:2 * half:2])
        if n % 2:
            y = np.concatenate([y, x[-1:]])
        x = y
    return x[0]


def _segmented_tree_reduce(values: np.ndarray, seg: np.ndarray, op) -> np.ndarray:
    """Per-segment pairwise tree fold.

    ``seg`` holds non-decreasing segment ids for contiguous runs.  Pairing at
    every level is on positions local to the segment, so each run is folded
    with the same tree ``_tree_reduce`` would use on it alone.
    """
    while True:
        n = values.shape[0]
        if n == 0:
            return values
        starts = np.flatnonzero(np.concatenate([[True], seg[1:] != seg[:-1]]))
        run_len = np.diff(np.append(starts, n))
        if run_len.max() == 1:
            return values
        local = np.arange(n) - np.repeat(starts, run_len)
        keep = local % 2 == 0
        idx = np.flatnonzero(keep)
        has_next = np.zeros(idx.shape[0], dtype=bool)
        inb = idx + 1 < n
        has_next[inb] = seg[idx[inb] + 1] == seg[idx[inb]]
        out = values[idx].copy()
        j = idx[has_next]
        out[has_next] = op(values[j], values[j + 1])
        values, seg = out, seg[idx]


def _run_starts(keys: np.ndarray) -> np.ndarray:
    if keys.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if keys.ndim == 1:
        diff = keys[1:] != keys[:-1]
    else:
        diff = np.any(keys[1:] != keys[:-1], axis=1)
    return np.concatenate([[True], diff])


def _stable_order(keys: np.ndarray) -> np.ndarray:
    if keys.ndim == 1:
        return np.argsort(keys, kind="stable")
    return np.lexsort(keys.T[::-1])


class Backend:
    """Serial kernel backend.  Subclassed by :class:`Threaded`."""

    kind = "serial"
    threads = 1

    def __init__(self, debug: bool = False):
        self.debug = debug

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- chunk plumbing -------------------------------------------------
    def chunks(self, n: int) -> list[tuple[int, int]]:
        return [(0, n)]

    def _run(self, fn: Callable[[int, int], object], ranges) -> list:
        return [fn(a, b) for a, b in ranges]

    # -- kernels ----------------------------------------------------------
    def map(self, f: Callable, *arrays) -> np.ndarray:
        """Apply the vectorised elementwise ``f`` to aligned slices of ``arrays``."""
        arrays = [_as_array(a) for a in arrays]
        n = arrays[0].shape[0]
        if any(a.shape[0] != n for a in arrays):
            raise ValueError("map: input arrays differ in length")
        if n == 0:
            return np.asarray(f(*arrays))
        parts = self._run(lambda a, b: np.asarray(f(*(x[a:b] for x in arrays))),
                          self.chunks(n))
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def reduce(self, values, op, identity):
        values = _as_array(values)
        n = values.shape[0]
        if n == 0:
            return identity
        return self._reduce(values, op)

    def _reduce(self, values, op):
        return _tree_reduce(values, op)

    def scan_exclusive(self, values, op, identity) -> np.ndarray:
        values = _as_array(values)
        n = values.shape[0]
        head = np.asarray([identity], dtype=values.dtype if n else None)
        if n == 0:
            return values.copy()
        if self._scan_parallel_ok(values, op):
            return self._scan(values, op, head)
        return op.accumulate(np.concatenate([head, values[:-1]]))

    def _scan_parallel_ok(self, values, op) -> bool:
        return False

    def _scan(self, values, op, head):
        raise NotImplementedError

    def reduce_by_key(self, keys, values, op) -> tuple[np.ndarray, np.ndarray]:
        keys, values = _as_array(keys), _as_array(values)
        if keys.shape[0] != values.shape[0]:
            raise ValueError("reduce_by_key: keys and values differ in length")
        flags = _run_starts(keys)
        if keys.shape[0] == 0:
            return keys.copy(), values.copy()
        seg = np.cumsum(flags) - 1
        starts = np.flatnonzero(flags)
        parts = self._run(
            lambda a, b: _segmented_tree_reduce(values[a:b], seg[a:b], op),
            self._key_aligned_chunks(starts, keys.shape[0]))
        reduced = parts[0] if len(parts) == 1 else np.concatenate(parts)
        return keys[starts], reduced

    def _key_aligned_chunks(self, starts, n):
        return [(0, n)]

    def sort_by_key(self, keys, values) -> tuple[np.ndarray, np.ndarray]:
        keys, values = _as_array(keys), _as_array(values)
        if keys.shape[0] != values.shape[0]:
            raise ValueError("sort_by_key: keys and values differ in length")
        order = self._sort_order(keys)
        return keys[order], values[order]

    def _sort_order(self, keys):
        return _stable_order(keys)

    def unique(self, values) -> np.ndarray:
        values = _as_array(values)
        return self.compact(_run_starts(values), values)

    def scatter(self, values, indices, size: int, fill=0) -> np.ndarray:
        """Write ``values[i]`` to ``out[indices[i]]``.

        ``fill`` is a scalar or an array of length ``size`` giving the
        contents of slots that are not written.
        """
        values, indices = _as_array(values), _as_array(indices)
        if values.shape[0] != indices.shape[0]:
            raise ValueError("scatter: values and indices differ in length")
        if np.ndim(fill):
            out = np.array(fill, copy=True)
            if out.shape[0] != size:
                raise ValueError("scatter: fill array does not match output size")
        else:
            out = np.full(size, fill, dtype=values.dtype if values.size else np.asarray(fill).dtype)
        if indices.shape[0] == 0:
            return out
        if indices.min() < 0 or indices.max() >= size:
            raise IndexError("scatter: index out of range")
        if self.debug and np.unique(indices).shape[0] != indices.shape[0]:
            raise ValueError("scatter: duplicate write target")

        def work(a, b):
            out[indices[a:b]] = values[a:b]

        self._run(work, self.chunks(indices.shape[0]))
        return out

    def gather(self, indices, source) -> np.ndarray:
        indices, source = _as_array(indices), _as_array(source)
        if indices.shape[0] and (indices.min() < 0 or indices.max() >= source.shape[0]):
            raise IndexError("gather: index out of range")
        if indices.shape[0] == 0:
            return source[:0].copy()
        parts = self._run(lambda a, b: source[indices[a:b]], self.chunks(indices.shape[0]))
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    # -- composites used throughout the engine ----------------------------
    def compact(self, flags, *arrays):
        """Keep the elements whose flag is set, preserving order."""
        flags = _as_array(flags).astype(bool)
        arrays = [_as_array(a) for a in arrays]
        out = []
        for a in arrays:
            parts = self._run(lambda i, j: a[i:j][flags[i:j]], self.chunks(flags.shape[0]))
            out.append(a[:0].copy() if not parts else
                       parts[0] if len(parts) == 1 else np.concatenate(parts))
        return out[0] if len(out) == 1 else tuple(out)

    def expand(self, counts) -> tuple[np.ndarray, np.ndarray]:
        """For each output slot of a ragged expansion, its segment and rank.

        ``counts[s]`` slots are produced for segment ``s``.
        """
        counts = _as_array(counts).astype(np.int64)
        offsets = self.scan_exclusive(counts, np.add, 0)
        total = int(offsets[-1] + counts[-1]) if counts.shape[0] else 0
        ends = offsets + counts
        slot = np.arange(total, dtype=np.int64)
        seg = self.map(lambda s: np.searchsorted(ends, s, side="right"), slot)
        rank = self.map(lambda s, g: s - offsets[g], slot, seg)
        return seg.astype(np.int64), rank.astype(np.int64)


class Threaded(Backend):
    """Chunked kernels on a shared pool of ``threads`` workers."""

    kind = "threaded"

    def __init__(self, threads: int = 4, chunk_size: int | None = None, debug: bool = False):
        super().__init__(debug=debug)
        if threads < 1:
            raise ValueError("threads must be positive")
        if chunk_size is not None and chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        self.threads = threads
        self.chunk_size = chunk_size

    def __repr__(self):
        return f"Threaded(threads={self.threads}, chunk_size={self.chunk_size})"

    def effective_chunk(self, n: int) -> int:
        if self.chunk_size is not None:
            return self.chunk_size
        return max(1024, math.ceil(n / (8 * self.threads)))

    def chunks(self, n):
        c = self.effective_chunk(n)
        return [(a, min(a + c, n)) for a in range(0, n, c)]

    def _run(self, fn, ranges):
        ranges = list(ranges)
        if len(ranges) <= 1 or self.threads == 1:
            return [fn(a, b) for a, b in ranges]
        return list(_pool(self.threads).map(lambda r: fn(*r), ranges))

    def _block(self, n):
        # power-of-two blocks keep each chunk an exact subtree of the fold
        return 1 << max(0, (self.effective_chunk(n) - 1).bit_length())

    def _reduce(self, values, op):
        n = values.shape[0]
        b = self._block(n)
        if b >= n:
            return _tree_reduce(values, op)
        parts = self._run(lambda a, e: _tree_reduce(values[a:e], op),
                          [(a, min(a + b, n)) for a in range(0, n, b)])
        return _tree_reduce(np.asarray(parts, dtype=values.dtype), op)

    def _scan_parallel_ok(self, values, op):
        exact = values.dtype.kind in "biu" or op in _EXACT_UFUNCS
        return exact and len(self.chunks(values.shape[0])) > 1

    def _scan(self, values, op, head):
        ranges = self.chunks(values.shape[0])
        totals = np.asarray(self._run(lambda a, b: op.reduce(values[a:b]), ranges),
                            dtype=values.dtype)
        carry = op.accumulate(np.concatenate([head, totals[:-1]]))

        def local(j):
            a, b = ranges[j]
            return op.accumulate(np.concatenate([carry[j:j + 1], values[a:b - 1]]))

        return np.concatenate(self._run(lambda j, _: local(j),
                                        [(j, None) for j in range(len(ranges))]))

    def _key_aligned_chunks(self, starts, n):
        c = self.effective_chunk(n)
        cuts = np.unique(starts[np.searchsorted(starts, np.arange(0, n, c))
                                .clip(max=starts.shape[0] - 1)])
        bounds = [int(x) for x in cuts] + [n]
        return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)
                if bounds[i] < bounds[i + 1]]

    def _sort_order(self, keys):
        n = keys.shape[0]
        ranges = self.chunks(n)
        if len(ranges) <= 1:
            return _stable_order(keys)
        runs = self._run(lambda a, b: a + _stable_order(keys[a:b]), ranges)
        while len(runs) > 1:
            pairs = [(i, i + 1) for i in range(0, len(runs) - 1, 2)]

            def merge(i, j):
                idx = np.concatenate([runs[i], runs[j]])
                return idx[_stable_order(keys[idx])]

            merged = self._run(merge, pairs)
            if len(runs) % 2:
                merged.append(runs[-1])
            runs = merged
        return runs[0]


class Serial(Backend):
    pass


SERIAL = Serial()


def make_backend(kind: str = "serial", threads: int = 1,
                 chunk_size: int | None = None, debug: bool = False) -> Backend:
    if kind == "serial":
        return Serial(debug=debug)
    if kind == "threaded":
        return Threaded(threads=threads, chunk_size=chunk_size, debug=debug)
    raise ValueError(f"unknown backend kind {kind!r}")

