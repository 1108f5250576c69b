"""GPlag: Gaussian-process kernels for lead-lag relationships between time series."""

from .data import TimeSeriesSet, center_series, from_series, load_csv, save_csv, train_test_split
from .exceptions import (FormatError, GPlagError, NumericalError, OptimizationError, ParseError,
                         SamplerError, ValidationError)
from .inference import FitConfig, FitResult, fit_mle, log_marginal_likelihood
from .kernels import KernelFamily, MultiParams, PairwiseParams, covariance_matrix, kernel_eval
from .predict import blup_predict

__version__ = "0.1.0"
