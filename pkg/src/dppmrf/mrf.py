"""EM / MAP optimisation of a binary MRF over label-replicated neighbourhoods.

The energy of vertex ``v`` under trial label ``l`` is a Gaussian negative
log-likelihood of the region mean plus a Potts penalty::

    (mean[v] - mu[l])**2 / (2 * sigma[l]**2) + log(sigma[l])
        + beta * #{u adjacent to v : label[u] != l}

Each neighbourhood is copied once per label so that every (slot, label)
energy is an independent element of one flat array; the optimiser is a
sequence of gathers, maps, sorts and segmented reductions over it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dpp import SERIAL, Backend
from .graph import RegionGraph
from .neighborhoods import NeighborhoodSet

SIGMA_MIN = 1e-3


@dataclass
class LabelParams:
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def n_labels(self) -> int:
        return self.mu.shape[0]

    def copy(self) -> "LabelParams":
        return LabelParams(self.mu.copy(), self.sigma.copy())


@dataclass(frozen=True, eq=False)
class ReplicatedIndex:
    test_label: np.ndarray
    old_index: np.ndarray
    hood_id: np.ndarray

    def __len__(self) -> int:
        return self.test_label.shape[0]


@dataclass
class OptimizerConfig:
    em_max_iter: int = 20
    map_max_iter: int = 10
    window: int = 3
    tol: float = 1e-4
    beta: float = 1.0
    seed: int = 0
    # run EM on the data term alone until it converges, then switch on beta
    warmup: bool = True

    def __post_init__(self):
        if self.em_max_iter < 0 or self.map_max_iter < 1:
            raise ValueError("iteration limits must be positive")
        if self.window < 1 or self.window >= self.map_max_iter:
            raise ValueError("window must satisfy 1 <= window < map_max_iter")
        if self.tol <= 0 or self.beta < 0:
            raise ValueError("tol must be positive and beta non-negative")


@dataclass
class EMStep:
    """Bookkeeping of one EM iteration.

    ``hood_energy[t]`` and ``converged[t]`` are the per-neighbourhood energy
    sums and convergence flags after MAP iteration ``t``.
    """

    hood_energy: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    total_energy: float = float("nan")
    em_converged: bool = False
    beta: float = 0.0
    mu: np.ndarray | None = None
    sigma: np.ndarray | None = None

    @property
    def map_iterations(self) -> int:
        return len(self.hood_energy)


@dataclass
class Trace:
    steps: list = field(default_factory=list)

    @property
    def totals(self) -> np.ndarray:
        return np.array([s.total_energy for s in self.steps])

    @property
    def final_energy(self) -> float:
        return self.steps[-1].total_energy if self.steps else float("nan")

    @property
    def n_em(self) -> int:
        return len(self.steps)


@dataclass
class OptimizeResult:
    labels: np.ndarray
    params: LabelParams
    trace: Trace

    def __iter__(self):
        return iter((self.labels, self.params, self.trace))


# -- building blocks ----------------------------------------------------------

def init_random(n_labels: int, n_vertices: int, seed) -> tuple[LabelParams, np.ndarray]:
    if n_labels != 2:
        raise ValueError(f"only binary segmentation is supported, got {n_labels} labels")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.0, 255.0, n_labels)
    sigma = np.maximum(rng.uniform(0.0, 255.0, n_labels), SIGMA_MIN)
    labels = rng.integers(0, n_labels, n_vertices).astype(np.int64)
    return LabelParams(mu, sigma), labels


def replicate_by_label(hoods: NeighborhoodSet, n_labels: int = 2,
                       backend: Backend = SERIAL) -> ReplicatedIndex:
    """Copy each neighbourhood once per label, label-major inside a neighbourhood."""
    bk = backend
    sizes = hoods.sizes
    hood_id, rank = bk.expand(bk.map(lambda s: s * n_labels, sizes))
    size = bk.gather(hood_id, sizes)
    test_label = bk.map(lambda r, s: r // s, rank, size)
    start = bk.gather(hood_id, hoods.offsets[:-1])
    old_index = bk.map(lambda b, r, s: b + r % s, start, rank, size)
    return ReplicatedIndex(test_label.astype(np.int64), old_index.astype(np.int64), hood_id)


class _Plan:
    """Arrays that stay fixed over an optimisation run."""

    def __init__(self, rep, graph, hoods, backend):
        bk = backend
        self.rep = rep
        self.graph = graph
        self.hoods = hoods
        self.vertex = bk.gather(rep.old_index, hoods.hoods)
        self.vertex_mean = bk.gather(self.vertex, graph.mean)
        self.rows = graph.row_ids()
        self.slot_hood = hoods.slot_hood()
        self.sorted_slot, self.slot_perm = bk.sort_by_key(
            rep.old_index, np.arange(len(rep), dtype=np.int64))
        self.sorted_label = bk.gather(self.slot_perm, rep.test_label)


def _disagreement(graph: RegionGraph, labels, n_labels, rows, backend):
    """``out[v * M + l]`` counts neighbours of ``v`` whose label is not ``l``."""
    bk = backend
    R = graph.n_vertices
    nb_label = bk.gather(graph.neighbors, labels)
    degree = graph.degree
    table = np.empty((R, n_labels), dtype=np.int64)
    for lab in range(n_labels):
        ids, same = bk.reduce_by_key(rows, bk.map(lambda x: (x == lab).astype(np.int64), nb_label), np.add)
        table[:, lab] = degree - bk.scatter(same, ids, R, fill=0)
    return table.ravel()


def compute_energies(rep: ReplicatedIndex, graph: RegionGraph, labels, params: LabelParams,
                     hoods: NeighborhoodSet, beta: float, backend: Backend = SERIAL,
                     plan: _Plan | None = None) -> np.ndarray:
    bk = backend
    plan = plan or _Plan(rep, graph, hoods, bk)
    M = params.n_labels
    dis = _disagreement(graph, labels, M, plan.rows, bk)
    vert_dis = bk.gather(bk.map(lambda v, l: v * M + l, plan.vertex, rep.test_label), dis)
    label_mu = bk.gather(rep.test_label, params.mu)
    label_two_var = bk.gather(rep.test_label, 2.0 * params.sigma * params.sigma)
    label_log_sigma = bk.gather(rep.test_label, np.log(params.sigma))

    def energy(x, m, tv, ls, d):
        dev = x - m
        return dev * dev / tv + ls + beta * d

    return bk.map(energy, plan.vertex_mean, label_mu, label_two_var, label_log_sigma, vert_dis)


def min_label_energies(energies, rep: ReplicatedIndex, n_labels: int = 2,
                       backend: Backend = SERIAL, plan: _Plan | None = None):
    """Per hood slot: minimum energy over labels and the smallest label attaining it."""
    bk = backend
    if plan is None:
        slot, perm = bk.sort_by_key(rep.old_index, np.arange(len(rep), dtype=np.int64))
        label = bk.gather(perm, rep.test_label)
    else:
        slot, perm, label = plan.sorted_slot, plan.slot_perm, plan.sorted_label
    e = bk.gather(perm, energies)
    _, min_energy = bk.reduce_by_key(slot, e, np.minimum)
    at_min = bk.map(lambda x, m, l: np.where(x == m, l, n_labels), e, bk.gather(slot, min_energy), label)
    _, argmin = bk.reduce_by_key(slot, at_min, np.minimum)
    return min_energy, argmin.astype(np.int64)


def neighborhood_energy_sums(min_energy, slot_hood, n_hoods: int | None = None,
                             backend: Backend = SERIAL) -> np.ndarray:
    bk = backend
    ids, sums = bk.reduce_by_key(slot_hood, np.asarray(min_energy, dtype=np.float64), np.add)
    n = n_hoods if n_hoods is not None else (int(ids[-1]) + 1 if ids.shape[0] else 0)
    return bk.scatter(sums, ids, n, fill=0.0)


def check_convergence(history, window: int, tol: float, backend: Backend = SERIAL):
    """Flag series whose last value moved less than ``tol`` over ``window`` steps.

    ``history`` is ordered oldest first; each entry is a scalar or an array
    with one value per series.
    """
    history = list(history)
    shape = np.shape(history[-1]) if history else ()
    if len(history) < window + 1:
        return np.zeros(shape, dtype=bool) if shape else False
    cur = np.atleast_1d(np.asarray(history[-1], dtype=np.float64))
    drift = np.zeros(cur.shape[0])
    for i in range(1, window + 1):
        past = np.atleast_1d(np.asarray(history[-1 - i], dtype=np.float64))
        drift = backend.map(lambda d, a, b: np.maximum(d, np.abs(a - b)), drift, cur, past)
    flags = drift < tol
    return flags if shape else bool(flags[0])


def update_labels(argmin, hoods: NeighborhoodSet, labels, backend: Backend = SERIAL) -> np.ndarray:
    """Scatter each vertex's winning label; the lowest neighbourhood id wins."""
    bk = backend
    labels = np.asarray(labels)
    if hoods.hoods.shape[0] == 0:
        return labels.copy()
    vert, slot = bk.sort_by_key(hoods.hoods, np.arange(hoods.hoods.shape[0], dtype=np.int64))
    first = np.concatenate([[True], bk.map(lambda a, b: a != b, vert[1:], vert[:-1])])
    vert, slot = bk.compact(first, vert, slot)
    return bk.scatter(bk.gather(slot, argmin), vert, labels.shape[0], fill=labels)


def update_parameters(labels, graph: RegionGraph, prev: LabelParams,
                      backend: Backend = SERIAL) -> LabelParams:
    """Per-label mean and population std of region means; empty labels keep ``prev``."""
    bk = backend
    M = prev.n_labels
    lab, x = bk.sort_by_key(np.asarray(labels, dtype=np.int64), graph.mean)
    ids, sums = bk.reduce_by_key(lab, x, np.add)
    _, counts = bk.reduce_by_key(lab, np.ones(lab.shape[0], dtype=np.int64), np.add)
    means = bk.map(lambda s, n: s / n, sums, counts)
    slot_of_label = bk.scatter(np.arange(ids.shape[0]), ids, M, fill=-1)
    m = bk.gather(bk.gather(lab, slot_of_label), means)
    _, ssd = bk.reduce_by_key(lab, bk.map(lambda a, b: (a - b) * (a - b), x, m), np.add)
    sd = bk.map(lambda s, n: np.maximum(np.sqrt(s / n), SIGMA_MIN), ssd, counts)
    return LabelParams(bk.scatter(means, ids, M, fill=prev.mu),
                       bk.scatter(sd, ids, M, fill=prev.sigma))


def total_energy(hood_energy, backend: Backend = SERIAL) -> float:
    return float(backend.reduce(np.asarray(hood_energy, dtype=np.float64), np.add, 0.0))


# -- drivers ------------------------------------------------------------------

def map_inference(plan: _Plan, labels, params: LabelParams, config: OptimizerConfig,
                  backend: Backend = SERIAL, beta: float | None = None) -> tuple[np.ndarray, EMStep]:
    """MAP sweeps with fixed parameters until every neighbourhood settles."""
    bk = backend
    M = params.n_labels
    H = len(plan.hoods)
    beta = config.beta if beta is None else beta
    step = EMStep(beta=beta)
    history = deque(maxlen=config.window + 1)
    for _ in range(config.map_max_iter):
        energies = compute_energies(plan.rep, plan.graph, labels, params, plan.hoods,
                                    beta, bk, plan)
        min_energy, argmin = min_label_energies(energies, plan.rep, M, bk, plan)
        sums = neighborhood_energy_sums(min_energy, plan.slot_hood, H, bk)
        labels = update_labels(argmin, plan.hoods, labels, bk)
        history.append(sums)
        flags = check_convergence(history, config.window, config.tol, bk)
        step.hood_energy.append(sums)
        step.converged.append(flags)
        # every hood converged iff the scanned count of unconverged hoods is zero
        if H == 0 or int(bk.reduce((~flags).astype(np.int64), np.add, 0)) == 0:
            break
    step.total_energy = total_energy(step.hood_energy[-1], bk)
    return labels, step


def optimize(graph: RegionGraph, hoods: NeighborhoodSet, config: OptimizerConfig | None = None,
             backend: Backend = SERIAL, n_labels: int = 2) -> OptimizeResult:
    """EM over label-replicated neighbourhoods.

    Each EM iteration runs MAP sweeps with fixed parameters, re-estimates the
    per-label mean and std from the new labelling, then checks the drift of
    the total energy over the last ``window`` EM iterations.

    With ``config.warmup`` the smoothness weight is held at zero until that
    check first passes; the energy history is then reset and EM continues
    with ``config.beta``.  A Potts term evaluated on the random initial
    labels otherwise tends to wipe out one class before the parameters have
    separated.
    """
    config = config or OptimizerConfig()
    bk = backend
    params, labels = init_random(n_labels, graph.n_vertices, config.seed)
    trace = Trace()
    if config.em_max_iter == 0:
        return OptimizeResult(labels, params, trace)
    rep = replicate_by_label(hoods, n_labels, bk)
    plan = _Plan(rep, graph, hoods, bk)
    schedule = _BetaSchedule(config)
    em_history = deque(maxlen=config.window + 1)
    for _ in range(config.em_max_iter):
        labels, step = map_inference(plan, labels, params, config, bk, beta=schedule.beta)
        params = update_parameters(labels, graph, params, bk)
        step.mu, step.sigma = params.mu.copy(), params.sigma.copy()
        em_history.append(step.total_energy)
        step.em_converged = check_convergence(em_history, config.window, config.tol, bk)
        trace.steps.append(step)
        if step.em_converged:
            if not schedule.advance():
                break
            em_history.clear()
    return OptimizeResult(labels, params, trace)


class _BetaSchedule:
    def __init__(self, config: OptimizerConfig):
        self.target = config.beta
        self.beta = 0.0 if config.warmup else config.beta

    def advance(self) -> bool:
        """Move to the smoothing phase; False once already there."""
        if self.beta == self.target:
            return False
        self.beta = self.target
        return True


def make_plan(graph: RegionGraph, hoods: NeighborhoodSet, n_labels: int = 2,
              backend: Backend = SERIAL) -> _Plan:
    return _Plan(replicate_by_label(hoods, n_labels, backend), graph, hoods, backend)
