"""Biased random walks on Galton-Watson trees.

Lazily sampled GW, size-biased, IGW and IGWR trees; the lambda-biased walk
on them; harmonic coordinates at the critical bias; electric-network
identities; the GW-to-IGW excursion coupling; regeneration estimators for
the transient regime; and the statistical checks tying these together.
"""

from .errors import GWError
from .offspring import (OffspringDistribution, WPool, build_w_pool, estimate_eta,
                        make_distribution, parse_law, sample_degree)
from .rng import make_stream
from .tree import Kind, Tree, new_tree
from .walk import WalkRecord, run_walk, transition

__all__ = [
    "GWError", "OffspringDistribution", "WPool", "build_w_pool", "estimate_eta",
    "make_distribution", "parse_law", "sample_degree", "make_stream", "Kind", "Tree",
    "new_tree", "WalkRecord", "run_walk", "transition",
]
__version__ = "0.1.0"
