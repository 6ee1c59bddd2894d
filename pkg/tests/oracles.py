"""Independent slow oracles used by the test-suite."""

import itertools

import numpy as np
from scipy import ndimage

from dppmrf.graph import RegionGraph


def naive_region_graph(image, labels) -> RegionGraph:
    """Double-loop pixel adjacency builder, kept as an independent oracle."""
    image = np.asarray(image)
    labels = np.asarray(labels)
    h, w = labels.shape
    R = int(labels.max()) + 1
    adj = [set() for _ in range(R)]
    sums = [0] * R
    counts = [0] * R
    for y in range(h):
        for x in range(w):
            a = int(labels[y, x])
            sums[a] += int(image[y, x])
            counts[a] += 1
            for dy, dx in ((0, 1), (1, 0)):
                yy, xx = y + dy, x + dx
                if yy < h and xx < w:
                    b = int(labels[yy, xx])
                    if a != b:
                        adj[a].add(b)
                        adj[b].add(a)
    offsets = [0]
    nbrs = []
    for v in range(R):
        nbrs.extend(sorted(adj[v]))
        offsets.append(len(nbrs))
    return RegionGraph(R, np.array(offsets, dtype=np.int64), np.array(nbrs, dtype=np.int64),
                       np.array([s / c for s, c in zip(sums, counts)]),
                       np.array(counts, dtype=np.int64))


# -- kernel oracles: plain Python loops over lists -----------------------------

def naive_map(f, *arrays):
    return [f(*xs) for xs in zip(*arrays)]


def naive_tree_reduce(xs, op):
    """Pairwise fold: adjacent pairs at every level, an odd tail carried up."""
    xs = list(xs)
    while len(xs) > 1:
        nxt = [op(xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)]
        if len(xs) % 2:
            nxt.append(xs[-1])
        xs = nxt
    return xs[0]


def naive_reduce(xs, op, identity):
    return identity if len(xs) == 0 else naive_tree_reduce(xs, op)


def naive_scan_exclusive(xs, op, identity):
    out, acc = [], identity
    for x in xs:
        out.append(acc)
        acc = op(acc, x)
    return out


def naive_reduce_by_key(keys, values, op):
    out_k, out_v = [], []
    i = 0
    while i < len(keys):
        j = i
        while j < len(keys) and keys[j] == keys[i]:
            j += 1
        out_k.append(keys[i])
        out_v.append(naive_tree_reduce(values[i:j], op))
        i = j
    return out_k, out_v


def naive_sort_by_key(keys, values):
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    return [keys[i] for i in order], [values[i] for i in order]


def naive_unique(xs):
    return [x for i, x in enumerate(xs) if i == 0 or xs[i - 1] != x]


def naive_scatter(values, indices, size, fill):
    out = [fill] * size
    for v, i in zip(values, indices):
        out[i] = v
    return out


def naive_gather(indices, source):
    return [source[i] for i in indices]


# -- graph oracles -------------------------------------------------------------

def random_graph(n, p, rng) -> RegionGraph:
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    return RegionGraph.from_edges(n, edges)


def naive_maximal_cliques(graph: RegionGraph):
    """All maximal cliques by checking every vertex subset, sorted lexicographically."""
    n = graph.n_vertices
    adj = [set(graph.neighbors_of(v).tolist()) for v in range(n)]
    cliques = []
    for size in range(1, n + 1):
        for sub in itertools.combinations(range(n), size):
            if all(b in adj[a] for a, b in itertools.combinations(sub, 2)):
                cliques.append(set(sub))
    maximal = [c for c in cliques if not any(c < d for d in cliques)]
    return sorted(tuple(sorted(c)) for c in maximal)


def naive_neighborhood(graph: RegionGraph, clique):
    hood = set(clique)
    for c in clique:
        hood.update(graph.neighbors_of(c).tolist())
    return sorted(hood)


def graph_corpus(count=500, max_vertices=12, seed=0):
    """Random graphs with 0..max_vertices vertices and edge probability 0.1..0.9."""
    rng = np.random.default_rng(seed)
    densities = np.round(np.arange(0.1, 0.95, 0.1), 1)
    for i in range(count):
        n = int(rng.integers(0, max_vertices + 1))
        yield random_graph(n, densities[i % densities.shape[0]], rng)


def random_label_map(rng, h, w, classes=4):
    """Connected-component relabelling of a blurred random class image."""
    raw = ndimage.uniform_filter(rng.random((h, w)), size=int(rng.integers(1, 4)))
    cls = np.minimum((raw * classes).astype(int), classes - 1)
    out = np.full((h, w), -1, dtype=np.int64)
    nxt = 0
    for c in range(classes):
        comp, n = ndimage.label(cls == c)
        out[comp > 0] = comp[comp > 0] - 1 + nxt
        nxt += n
    # make ids contiguous in first-appearance order
    _, inv = np.unique(out, return_inverse=True)
    return inv.reshape(h, w)


CYCLE4 = RegionGraph.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])
TRIANGLE_TAIL = RegionGraph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
