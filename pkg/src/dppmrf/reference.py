"""Coarse-grained baseline optimiser: one neighbourhood at a time.

Used as the serial baseline for speedup figures and as a semantic oracle for
the data-parallel optimiser.  Labels written by a neighbourhood are visible to
the neighbourhoods processed after it within the same sweep.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .graph import RegionGraph
from .mrf import (SIGMA_MIN, EMStep, LabelParams, OptimizeResult, OptimizerConfig,
                  Trace, init_random)
from .neighborhoods import NeighborhoodSet


def _window_converged(history, window, tol):
    if len(history) < window + 1:
        return None
    cur = history[-1]
    return [all(abs(cur[h] - history[-1 - i][h]) < tol for i in range(1, window + 1))
            for h in range(len(cur))]


def _parameters(labels: np.ndarray, mean: np.ndarray, prev: LabelParams) -> LabelParams:
    mu, sigma = prev.mu.copy(), prev.sigma.copy()
    for lab in range(prev.n_labels):
        x = mean[labels == lab]
        if x.size:
            mu[lab] = x.mean()
            sigma[lab] = max(np.sqrt(((x - x.mean()) ** 2).mean()), SIGMA_MIN)
    return LabelParams(mu, sigma)


def optimize_reference(graph: RegionGraph, hoods: NeighborhoodSet,
                       config: OptimizerConfig | None = None,
                       n_labels: int = 2) -> OptimizeResult:
    config = config or OptimizerConfig()
    params, labels = init_random(n_labels, graph.n_vertices, config.seed)
    trace = Trace()
    if config.em_max_iter == 0:
        return OptimizeResult(labels, params, trace)

    beta = 0.0 if config.warmup else config.beta
    adjacency = [graph.neighbors_of(v).tolist() for v in range(graph.n_vertices)]
    hood_lists = [hoods[h].tolist() for h in range(len(hoods))]
    x = labels.tolist()
    em_totals = []

    for _ in range(config.em_max_iter):
        dev0 = graph.mean - params.mu[0]
        dev1 = graph.mean - params.mu[1]
        data0 = (dev0 * dev0 / (2 * params.sigma[0] ** 2) + np.log(params.sigma[0])).tolist()
        data1 = (dev1 * dev1 / (2 * params.sigma[1] ** 2) + np.log(params.sigma[1])).tolist()

        step = EMStep(beta=beta)
        history = deque(maxlen=config.window + 1)
        for _ in range(config.map_max_iter):
            sums = []
            for verts in hood_lists:
                total = 0.0
                chosen = []
                for v in verts:
                    nbrs = adjacency[v]
                    ones = sum(x[u] for u in nbrs)
                    e0 = data0[v] + beta * ones
                    e1 = data1[v] + beta * (len(nbrs) - ones)
                    if e1 < e0:
                        chosen.append(1)
                        total += e1
                    else:
                        chosen.append(0)
                        total += e0
                for v, lab in zip(verts, chosen):
                    x[v] = lab
                sums.append(total)
            history.append(sums)
            flags = _window_converged(history, config.window, config.tol)
            step.hood_energy.append(np.array(sums))
            step.converged.append(np.array(flags if flags is not None else [False] * len(sums)))
            if flags is not None and all(flags):
                break
        step.total_energy = float(sum(step.hood_energy[-1]))
        labels = np.array(x, dtype=np.int64)
        params = _parameters(labels, graph.mean, params)
        step.mu, step.sigma = params.mu.copy(), params.sigma.copy()
        em_totals.append([step.total_energy])
        flags = _window_converged(em_totals, config.window, config.tol)
        step.em_converged = bool(flags and flags[0])
        trace.steps.append(step)
        if step.em_converged:
            if beta == config.beta:
                break
            beta = config.beta
            em_totals = []
    return OptimizeResult(np.array(x, dtype=np.int64), params, trace)
