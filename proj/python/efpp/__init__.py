from ._efpp import (
    CostModel,
    PointSet,
    Window,
    brute_force_geodesic,
    estimate_mu,
    euclidean_mst,
    minimax_distance,
    passage_time,
    run_experiment,
    variance_scaling,
    wandering_scaling,
    windowed_passage_time,
    __version__,
)

__all__ = [
    "CostModel",
    "PointSet",
    "Window",
    "brute_force_geodesic",
    "estimate_mu",
    "euclidean_mst",
    "minimax_distance",
    "passage_time",
    "run_experiment",
    "variance_scaling",
    "wandering_scaling",
    "windowed_passage_time",
    "__version__",
]
