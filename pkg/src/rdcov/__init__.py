"""Sharp regression-discontinuity estimation with covariate adjustment,
heterogeneity analysis and robust bias-corrected inference."""

from .bandwidth import BandwidthReport, coverage_shrinkage_report, select_bandwidth
from .errors import DataError, InsufficientDataError, NumericalError, RankDeficiencyError, RDError
from .heterogeneity import HteResult, estimate_hte, estimate_hte_with_covariates, test_effect_equality
from .inference import InferenceConfig, RdEstimate, estimate_rd, falsification_estimate
from .ingest import ColumnMap, Dataset, discretize_covariate, from_arrays, from_frame, load_table
from .kernels import Kernel, kernel_value, localized_weights
from .local_fit import FitSpec, fit_covariate_adjusted, fit_interacted, fit_side, intercept_difference
from .rdplot import BinnedSeries, auto_bin_count, build_rdplot
from .wls import LocalFit, sandwich_cov, wald_test, wls_fit

__version__ = "0.1.0"

__all__ = [
    "BandwidthReport", "BinnedSeries", "ColumnMap", "DataError", "Dataset", "FitSpec", "HteResult",
    "InferenceConfig", "InsufficientDataError", "Kernel", "LocalFit", "NumericalError", "RDError",
    "RankDeficiencyError", "RdEstimate", "auto_bin_count", "build_rdplot", "coverage_shrinkage_report",
    "discretize_covariate", "estimate_hte", "estimate_hte_with_covariates", "estimate_rd",
    "falsification_estimate", "fit_covariate_adjusted", "fit_interacted", "fit_side", "from_arrays",
    "from_frame", "intercept_difference", "kernel_value", "load_table", "localized_weights",
    "sandwich_cov", "select_bandwidth", "test_effect_equality", "wald_test", "wls_fit",
]
