"""Differentially private inference on the ratio of two weighted means.

The pipeline: compute exact summary sums of bounded records, privatize them
with the Gaussian or Laplace mechanism under an evenly split budget, then
post-process the released sums into point estimates and Wald intervals whose
variance accounts for the injected noise (by Monte Carlo or in closed form).
A simulation harness measures coverage, width, and interval score of the
interval methods over replicated synthetic datasets.
"""

from ._kernels import BACKEND
from .core import (
    Bounds,
    Moments,
    Profile,
    Record,
    SumVector,
    compute_sums,
    compute_sums_from_arrays,
    kish_effective_n,
    read_dataset_csv,
    sensitivity_per_sum,
)
from .errors import (
    BoundsViolationError,
    DatasetFormatError,
    DegenerateDenominatorError,
    DegenerateNumeratorError,
    DegenerateVarianceError,
    DPRatioError,
    EmptyDatasetError,
    InvalidBudgetError,
    InvalidConfigError,
    InvalidIntervalError,
    InvalidSplitError,
    InvalidSumsError,
    MechanismMismatchError,
    ScaleMismatchError,
)
from .inference import (
    Method,
    RatioEstimate,
    Scale,
    TwoRatioTest,
    ci_analytical,
    ci_monte_carlo,
    ci_no_correction,
    log_ratio_variance,
    plug_in_moments,
    point_estimate,
    public_estimate,
    ratio_variance,
    two_ratio_test,
    wald_interval,
)
from .mechanisms import (
    MechanismKind,
    PrivacyBudget,
    ReleasedSums,
    draw_noise,
    exact_release,
    gaussian_sigma,
    laplace_scale,
    release,
    split_budget,
)
from .simulation import (
    ExperimentRow,
    SimulationConfig,
    generate_arrays,
    generate_dataset,
    interval_score,
    run_experiment,
    write_rows_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Bounds",
    "BoundsViolationError",
    "DatasetFormatError",
    "DegenerateDenominatorError",
    "DegenerateNumeratorError",
    "DegenerateVarianceError",
    "DPRatioError",
    "EmptyDatasetError",
    "ExperimentRow",
    "InvalidBudgetError",
    "InvalidConfigError",
    "InvalidIntervalError",
    "InvalidSplitError",
    "InvalidSumsError",
    "MechanismKind",
    "MechanismMismatchError",
    "Method",
    "Moments",
    "PrivacyBudget",
    "Profile",
    "RatioEstimate",
    "Record",
    "ReleasedSums",
    "Scale",
    "ScaleMismatchError",
    "SimulationConfig",
    "SumVector",
    "TwoRatioTest",
    "ci_analytical",
    "ci_monte_carlo",
    "ci_no_correction",
    "compute_sums",
    "compute_sums_from_arrays",
    "draw_noise",
    "exact_release",
    "generate_arrays",
    "generate_dataset",
    "gaussian_sigma",
    "interval_score",
    "kish_effective_n",
    "laplace_scale",
    "log_ratio_variance",
    "plug_in_moments",
    "point_estimate",
    "public_estimate",
    "ratio_variance",
    "read_dataset_csv",
    "release",
    "run_experiment",
    "sensitivity_per_sum",
    "split_budget",
    "two_ratio_test",
    "wald_interval",
    "write_rows_csv",
]
