"""Online clustering of Dirichlet process mixtures with split sequential Monte Carlo."""

from ._core import (
    ALGORITHMS,
    bcubed,
    bell_number,
    cluster,
    crp_assignment_log_prior,
    ewens_log_posterior,
    exact_posterior,
    gen_circles,
    gen_gmm,
    nig_log_marginal,
)

__all__ = [
    "ALGORITHMS",
    "bcubed",
    "bell_number",
    "cluster",
    "crp_assignment_log_prior",
    "ewens_log_posterior",
    "exact_posterior",
    "gen_circles",
    "gen_gmm",
    "nig_log_marginal",
]
