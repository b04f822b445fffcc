"""Bayesian distributional regression with structured additive predictors.

Every parameter of a log-normal, inverse Gaussian, gamma or Dagum response
gets its own additive predictor of linear, P-spline, varying-coefficient,
random and spatial (Markov random field) effects.  Posterior inference uses
Metropolis-Hastings with IWLS proposals and Gibbs updates of the smoothing
variances.
"""
from .design import (MRF, AdjacencyMap, Dataset, DesignError, ExtrapolationError, Linear,
                     ModelSpec, ParamSpec, PSpline, RandomEffect, Spatial,
                     VaryingCoefficient)
from .families import FAMILIES, Dagum, Gamma, InverseGaussian, LogNormal, get_family
from .sampler import PosteriorStore, SamplerConfig, SamplerError, build_model, fit, run_chain
from .modelsel import (cross_validate, crps_quantile_curve, dic, pit_values,
                       quantile_residuals, score_crps, score_log, score_quadratic,
                       score_spherical)
from .derived import (dagum_gini, dagum_moments, family_moments_gini, posterior_mean_density,
                      simultaneous_band)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMap", "Dataset", "DesignError", "ExtrapolationError", "Linear", "MRF",
    "ModelSpec", "ParamSpec", "PSpline", "RandomEffect", "Spatial", "VaryingCoefficient",
    "FAMILIES", "Dagum", "Gamma", "InverseGaussian", "LogNormal", "get_family",
    "PosteriorStore", "SamplerConfig", "SamplerError", "build_model", "fit", "run_chain",
    "cross_validate", "crps_quantile_curve", "dic", "pit_values", "quantile_residuals",
    "score_crps", "score_log", "score_quadratic", "score_spherical",
    "dagum_gini", "dagum_moments", "family_moments_gini", "posterior_mean_density",
    "simultaneous_band",
]
