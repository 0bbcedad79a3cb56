"""Multi-centroid contrastive training for cross-domain retrieval.

The heavy lifting lives in the compiled _core module; this package just
re-exports it.
"""

from ._core import (
    ablate,
    assignment_score,
    canonical_config,
    config_hash,
    cosine_sim,
    dbscan,
    evaluate_checkpoint,
    hungarian_max,
    l2_normalize,
    map_cmc,
    run_experiment,
    sweep,
)

__all__ = [
    "ablate",
    "assignment_score",
    "canonical_config",
    "config_hash",
    "cosine_sim",
    "dbscan",
    "evaluate_checkpoint",
    "hungarian_max",
    "l2_normalize",
    "map_cmc",
    "run_experiment",
    "sweep",
]
