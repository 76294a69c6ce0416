"""Model-based curve clustering with polynomial, spline and B-spline regression mixtures.

The robust fitter (:func:`fit_robust`) starts with one component per curve and
lets an entropy penalty on the mixing proportions discard redundant components,
so the number of clusters is estimated along with the parameters.
"""

from .basis import (
    DesignSpec,
    augment_knots,
    bspline_design,
    design_matrix,
    equispaced_knots,
    polynomial_design,
    spline_design,
)
from .dataset import Curve, Dataset, DatasetError, read_csv, validate, write_csv
from .em import EmConfig, FitError, e_step, fit_em, m_step_proportions, m_step_regression
from .metrics import EvalReport, approx_error, misclassification_error, rand_index
from .mixture import (
    Designs,
    RegressionMixture,
    build_designs,
    entropy_penalty,
    log_component_density,
    loglik,
    map_partition,
    penalized_loglik,
)
from .robust import (
    FitTrace,
    RobustConfig,
    fit_robust,
    init_robust,
    lambda_update,
    prune,
    robust_pi_update,
)
from .simulators import gen_three_class, gen_waveform

__version__ = "0.1.0"

__all__ = [
    "Curve",
    "Dataset",
    "DatasetError",
    "DesignSpec",
    "Designs",
    "EmConfig",
    "EvalReport",
    "FitError",
    "FitTrace",
    "RegressionMixture",
    "RobustConfig",
    "approx_error",
    "augment_knots",
    "bspline_design",
    "build_designs",
    "design_matrix",
    "e_step",
    "entropy_penalty",
    "equispaced_knots",
    "fit_em",
    "fit_robust",
    "gen_three_class",
    "gen_waveform",
    "init_robust",
    "lambda_update",
    "log_component_density",
    "loglik",
    "m_step_proportions",
    "m_step_regression",
    "map_partition",
    "misclassification_error",
    "penalized_loglik",
    "polynomial_design",
    "prune",
    "rand_index",
    "read_csv",
    "robust_pi_update",
    "spline_design",
    "validate",
    "write_csv",
]
