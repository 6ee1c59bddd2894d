"""Region-based Markov random field segmentation built on data-parallel primitives."""

from .cliques import CliqueSet, enumerate_maximal_cliques
from .dpp import Serial, Threaded, make_backend
from .estimator import MRFSegmenter
from .graph import RegionGraph, build_region_graph, grid_oversegment
from .metrics import confusion, metrics, porosity
from .mrf import LabelParams, OptimizerConfig, optimize
from .neighborhoods import NeighborhoodSet, build_neighborhoods
from .reference import optimize_reference
from .synth import PhantomSpec, make_dataset

__version__ = "0.1.0"

__all__ = [
    "CliqueSet", "LabelParams", "MRFSegmenter", "NeighborhoodSet", "OptimizerConfig",
    "PhantomSpec", "RegionGraph", "Serial", "Threaded", "build_neighborhoods",
    "build_region_graph", "confusion", "enumerate_maximal_cliques", "grid_oversegment",
    "make_backend", "make_dataset", "metrics", "optimize", "optimize_reference", "porosity",
]
