"""scikit-learn style front end for the region-MRF segmenter."""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .cliques import enumerate_maximal_cliques
from .dpp import make_backend
from .graph import build_region_graph, grid_oversegment
from .mrf import LabelParams, OptimizerConfig, make_plan, map_inference, optimize
from .neighborhoods import build_neighborhoods
from .reference import optimize_reference


def check_image(X) -> np.ndarray:
    """Validate a 2-D 8-bit grayscale image and return it as uint8."""
    X = check_array(X, dtype=None, ensure_min_samples=1, ensure_min_features=1)
    if X.dtype.kind not in "uif":
        raise ValueError(f"image must be numeric, got dtype {X.dtype}")
    if X.min() < 0 or X.max() > 255 or (X.dtype.kind == "f" and not np.all(X == np.rint(X))):
        raise ValueError("image must hold integer intensities in [0, 255]")
    return X.astype(np.uint8)


class MRFSegmenter(ClusterMixin, BaseEstimator):
    """Binary image segmentation with a Markov random field over image regions.

    The image is cut into regions (a regular grid of ``block_size`` squares
    unless an oversegmentation is passed to ``fit``), the region adjacency
    graph and its maximal cliques are built, and the labelling is optimised
    by EM over 1-neighbourhoods of the cliques.

    Parameters
    ----------
    n_labels : int, default=2
        Number of classes.  Only 2 is supported.
    block_size : int, default=4
        Side of the grid regions used when no oversegmentation is given.
    beta : float, default=1.0
        Weight of the Potts smoothness term.
    em_max_iter, map_max_iter : int, default=20, 10
        Iteration caps of the outer EM loop and the inner MAP loop.
    window : int, default=3
        Number of previous iterations compared by the convergence checks.
    tol : float, default=1e-4
        Convergence threshold on energy drift.
    method : {"dpp", "reference"}, default="dpp"
        ``"dpp"`` runs the flat data-parallel optimiser, ``"reference"``
        the one-neighbourhood-at-a-time baseline.
    backend : {"serial", "threaded"}, default="serial"
    n_threads : int, default=1
    chunk_size : int or None, default=None
        Elements per task of the threaded backend.
    foreground : {"dark", "bright"} or None, default="dark"
        Which phase receives label 1 after fitting; ``None`` keeps the
        optimiser's arbitrary label order.
    n_init : int, default=1
        Number of optimiser runs from different random initialisations
        (seeds ``random_state + i``); the run with the lowest final energy
        is kept.  Random parameter draws occasionally leave one label empty
        from the first sweep on, which a restart escapes.
    random_state : int, RandomState or None
        Seed of the random parameter and label initialisation.

    Attributes
    ----------
    labels_ : ndarray of shape (height, width)
        Per-pixel label of the fitted image.
    region_labels_ : ndarray of shape (n_regions,)
    mu_, sigma_ : ndarray of shape (n_labels,)
    graph_, cliques_, hoods_
        Intermediate structures of the fitted image.
    trace_ : Trace
        Per-iteration energies and convergence flags.
    timings_ : dict
        Wall time in seconds of the ``graph``, ``cliques``, ``hoods`` and
        ``optimize`` stages.
    """

    def __init__(self, n_labels=2, block_size=4, beta=1.0, em_max_iter=20, map_max_iter=10,
                 window=3, tol=1e-4, method="dpp", backend="serial", n_threads=1,
                 chunk_size=None, foreground="dark", n_init=1, random_state=None):
        self.n_labels = n_labels
        self.block_size = block_size
        self.beta = beta
        self.em_max_iter = em_max_iter
        self.map_max_iter = map_max_iter
        self.window = window
        self.tol = tol
        self.method = method
        self.backend = backend
        self.n_threads = n_threads
        self.chunk_size = chunk_size
        self.foreground = foreground
        self.n_init = n_init
        self.random_state = random_state

    def _config(self) -> OptimizerConfig:
        seed = self.random_state
        if not isinstance(seed, (int, np.integer)):
            seed = int(check_random_state(seed).randint(np.iinfo(np.int32).max))
        return OptimizerConfig(em_max_iter=self.em_max_iter, map_max_iter=self.map_max_iter,
                               window=self.window, tol=self.tol, beta=self.beta, seed=int(seed))

    def _validate_params(self):
        if self.n_labels != 2:
            raise ValueError(f"only n_labels=2 is supported, got {self.n_labels}")
        if self.method not in ("dpp", "reference"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.foreground not in ("dark", "bright", None):
            raise ValueError(f"unknown foreground {self.foreground!r}")
        if int(self.block_size) < 1:
            raise ValueError("block_size must be positive")
        if int(self.n_init) < 1:
            raise ValueError("n_init must be positive")

    def _regions(self, X, oversegmentation):
        if oversegmentation is None:
            return grid_oversegment(X, int(self.block_size))
        regions = np.asarray(oversegmentation)
        if regions.shape != X.shape:
            raise ValueError(f"oversegmentation shape {regions.shape} does not match image {X.shape}")
        return regions.astype(np.int64)

    def fit(self, X, y=None, oversegmentation=None):
        self._validate_params()
        X = check_image(X)
        config = self._config()
        seed0 = config.seed
        bk = make_backend(self.backend, self.n_threads, self.chunk_size)
        timings = {}

        t0 = time.perf_counter()
        regions = self._regions(X, oversegmentation)
        graph = build_region_graph(X, regions, bk)
        t1 = time.perf_counter()
        cliques = enumerate_maximal_cliques(graph, bk)
        t2 = time.perf_counter()
        hoods = build_neighborhoods(graph, cliques, backend=bk)
        t3 = time.perf_counter()
        result = None
        for i in range(int(self.n_init)):
            config.seed = seed0 + i
            if self.method == "dpp":
                run = optimize(graph, hoods, config, bk, self.n_labels)
            else:
                run = optimize_reference(graph, hoods, config, self.n_labels)
            if result is None or run.trace.final_energy < result.trace.final_energy:
                result = run
        t4 = time.perf_counter()
        timings.update(graph=t1 - t0, cliques=t2 - t1, hoods=t3 - t2, optimize=t4 - t3)

        labels, params = result.labels, result.params
        swap = ((self.foreground == "dark" and params.mu[1] > params.mu[0])
                or (self.foreground == "bright" and params.mu[1] < params.mu[0]))
        if swap:
            labels = 1 - labels
            params = LabelParams(params.mu[::-1].copy(), params.sigma[::-1].copy())

        self.region_map_ = regions
        self.graph_, self.cliques_, self.hoods_ = graph, cliques, hoods
        self.region_labels_ = labels
        self.mu_, self.sigma_ = params.mu, params.sigma
        self.trace_ = result.trace
        self.n_iter_ = result.trace.n_em
        self.labels_swapped_ = bool(swap)
        self.timings_ = timings
        self.labels_ = labels[regions].astype(np.uint8)
        return self

    def predict(self, X, oversegmentation=None):
        """Label a new image with the fitted parameters (MAP sweeps only)."""
        check_is_fitted(self, "mu_")
        X = check_image(X)
        bk = make_backend(self.backend, self.n_threads, self.chunk_size)
        regions = self._regions(X, oversegmentation)
        graph = build_region_graph(X, regions, bk)
        hoods = build_neighborhoods(graph, enumerate_maximal_cliques(graph, bk), backend=bk)
        params = LabelParams(self.mu_.copy(), self.sigma_.copy())
        # start from the data term alone
        dev = graph.mean[:, None] - params.mu[None, :]
        data = dev * dev / (2 * params.sigma ** 2) + np.log(params.sigma)
        labels = np.argmin(data, axis=1).astype(np.int64)
        labels, _ = map_inference(make_plan(graph, hoods, self.n_labels, bk), labels,
                                  params, self._config(), bk)
        return labels[regions].astype(np.uint8)
