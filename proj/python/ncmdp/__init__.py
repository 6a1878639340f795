"""Python access to the ncmdp library."""

from ._ncmdp import (
    Error,
    Objective,
    ObjectiveState,
    bootstrap_ci,
    grid_oracle,
    grid_tiles,
    objective_ids,
    run_grid,
    toy_returns,
    verify,
)

__all__ = [
    "Error",
    "Objective",
    "ObjectiveState",
    "bootstrap_ci",
    "grid_oracle",
    "grid_tiles",
    "objective_ids",
    "run_grid",
    "toy_returns",
    "verify",
]
