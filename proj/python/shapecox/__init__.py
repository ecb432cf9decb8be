"""Shape-restricted partial likelihood estimation for the partly linear additive Cox model."""

from ._shapecox import (
    Component,
    CumulativeHazard,
    Dataset,
    Error,
    FitError,
    FittedModel,
    ParseError,
    SchemaError,
    SingularError,
    SplitVariance,
    TcrFit,
    ValidationError,
    breslow,
    chisq_cdf,
    chisq_quantile,
    curvature_weights,
    fit_shape,
    fit_smple,
    fit_tcr,
    generate,
    isotonic,
    log_partial_likelihood,
    normal_cdf,
    normal_quantile,
    risk_set_sizes,
    run_study,
    score,
    split_sizes,
    split_variance,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
