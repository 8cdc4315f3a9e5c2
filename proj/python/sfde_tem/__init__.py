"""Truncated Euler-Maruyama scheme for super-linear stochastic functional differential equations."""

from ._core import (
    ConfigError,
    DomainError,
    Model,
    NumericalError,
    admissible_nu,
    brownian_increments,
    coarsen,
    example1,
    example2,
    fit_rate,
    gamma_inverse_numeric,
    gbm,
    make_builtin,
    moment_estimate,
    rate_lambda,
    simulate,
    stability_decay,
    strong_error,
    truncate,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Model",
    "NumericalError",
    "admissible_nu",
    "brownian_increments",
    "coarsen",
    "example1",
    "example2",
    "fit_rate",
    "gamma_inverse_numeric",
    "gbm",
    "make_builtin",
    "moment_estimate",
    "rate_lambda",
    "simulate",
    "stability_decay",
    "strong_error",
    "truncate",
]
