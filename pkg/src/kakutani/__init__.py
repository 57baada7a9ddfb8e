"""Kakutani's interval-splitting process: simulation, embeddings and verification."""
from .core import (GapPartition, PathObservables, Watch, dirichlet_run, edf_endpoints,
                   edf_gaps, new_partition, run, split_max)
from .rng import DEFAULT_SEED, RandomStream

__all__ = [
    "GapPartition", "PathObservables", "Watch", "RandomStream", "DEFAULT_SEED",
    "new_partition", "split_max", "run", "edf_gaps", "edf_endpoints", "dirichlet_run",
]
__version__ = "0.1.0"
