"""Bayesian inference adjusted for Lasso selection.

The selection event of the Lasso is a polytope in response space; the
selection-adjusted posterior multiplies the usual posterior by the inverse
selection probability. This package approximates that probability with
either a projection (Chernoff) bound or a log-barrier surrogate, samples
the adjusted posterior with an unadjusted Langevin walk, and provides
selective point estimates, randomized and data-carving variants, a
frequentist layer (approximate UMVUE and conditional density grids), exact
and Monte Carlo oracles, and the empirical studies built on top.
"""

from .adjustment import (AdjustmentResult, admm_project, barrier_adjustment,
                         barrier_value, chernoff_adjustment, find_interior)
from .errors import (ContractViolationError, ConvergenceError,
                     DegenerateDesignError, DivergenceError,
                     EmptySelectionError, GridRangeError,
                     InfeasibleStartError, InsufficientSamplesError,
                     InvalidSplitError, LowAcceptanceError, OutOfEventError,
                     SelectiveBayesError, UnsupportedPriorError,
                     WrongRegimeError)
from .estimation import (EstimateResult, general_mle, map_estimate,
                         mle_saturated_closed_form, randomized_mle)
from .experiments import (ConsistencyConfig, ConsistencyReport, CurveTable,
                          FcrConfig, FcrReport, consistency_experiment,
                          run_fcr_experiment, univariate_curves)
from .frequentist import (DensityGrid, selective_pvalue_from_grid,
                          umpu_density_grid, umvue_randomized)
from .model import (GenerativeModel, Polytope, Prior, TargetMap,
                    log_prior_and_grad, polytope_slack, target_map,
                    vacuous_polytope)
from .oracle import (McEstimate, exact_univariate_log_survival,
                     exact_univariate_mle, mc_adjustment, mc_truncated_moment,
                     truncated_normal_quantile)
from .posterior import (PosteriorChain, PosteriorSpec, credible_interval,
                        default_init, default_step, langevin_sample,
                        log_posterior_grad, posterior_mean, sample_posterior)
from .report import content_hash, parse_report, render_report
from .rng import task_rng
from .selection import (SelectionContext, carve_split, lasso_fit,
                        lasso_polytope, randomize, selection_context)

__version__ = "0.1.0"

__all__ = [
    "AdjustmentResult", "admm_project", "barrier_adjustment", "barrier_value",
    "chernoff_adjustment", "find_interior",
    "SelectiveBayesError", "ContractViolationError", "ConvergenceError",
    "DegenerateDesignError", "DivergenceError", "EmptySelectionError",
    "GridRangeError", "InfeasibleStartError", "InsufficientSamplesError",
    "InvalidSplitError", "LowAcceptanceError", "OutOfEventError",
    "UnsupportedPriorError", "WrongRegimeError",
    "EstimateResult", "general_mle", "map_estimate",
    "mle_saturated_closed_form", "randomized_mle",
    "ConsistencyConfig", "ConsistencyReport", "CurveTable", "FcrConfig",
    "FcrReport", "consistency_experiment", "run_fcr_experiment",
    "univariate_curves",
    "DensityGrid", "selective_pvalue_from_grid", "umpu_density_grid",
    "umvue_randomized",
    "GenerativeModel", "Polytope", "Prior", "TargetMap", "log_prior_and_grad",
    "polytope_slack", "target_map", "vacuous_polytope",
    "McEstimate", "exact_univariate_log_survival", "exact_univariate_mle",
    "mc_adjustment", "mc_truncated_moment", "truncated_normal_quantile",
    "PosteriorChain", "PosteriorSpec", "credible_interval", "default_init",
    "default_step", "langevin_sample", "log_posterior_grad", "posterior_mean",
    "sample_posterior",
    "content_hash", "parse_report", "render_report",
    "task_rng",
    "SelectionContext", "carve_split", "lasso_fit", "lasso_polytope",
    "randomize", "selection_context",
    "__version__",
]
