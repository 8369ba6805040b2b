"""Gaussian tangential vector fields on the sphere.

Thin Python layer over the compiled ``_tmm`` extension: covariance
construction, exact simulation, likelihood evaluation and fitting,
cokriging with proper scores, and empirical diagnostics.  Locations are
``(n, 2)`` latitude/longitude arrays in degrees; replicated fields are
``(n_reps, 2n)`` matrices with interleaved ``(u, v)`` columns.
"""

from _tmm import (
    TmmError,
    cokrige,
    cov_matrix,
    cross_cov_matrix,
    crps_gaussian,
    empirical_cov,
    fibonacci_latlon,
    fit,
    matern,
    nll,
    regular_grid_latlon,
    rho_bound,
    score_predictions,
    simulate,
    veof,
)

__all__ = [
    "TmmError",
    "cokrige",
    "cov_matrix",
    "cross_cov_matrix",
    "crps_gaussian",
    "empirical_cov",
    "fibonacci_latlon",
    "fit",
    "matern",
    "nll",
    "regular_grid_latlon",
    "rho_bound",
    "score_predictions",
    "simulate",
    "veof",
]
