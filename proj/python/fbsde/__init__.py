"""Forward-backward SDE solvers with one-step Malliavin estimates."""

from ._fbsde import (
    ConfigError,
    DivergenceError,
    Model,
    Solution,
    abm,
    bcos_solve,
    deep_solve,
    example1,
    example2,
    example3,
    riccati,
    run_config,
    simulate,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "Model",
    "Solution",
    "abm",
    "bcos_solve",
    "deep_solve",
    "example1",
    "example2",
    "example3",
    "riccati",
    "run_config",
    "simulate",
]
