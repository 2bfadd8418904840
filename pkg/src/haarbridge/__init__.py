"""Monte Carlo checks for random truncations of Haar matrices and their bridge limits."""

from .ensembles import EnsembleKind, RngStream, WeightMatrix, sample_matrix, weight_matrix
from .limits import CovKernel2D, KernelKind, MarginalLimitLaw
from .montecarlo import EstimateWithCI, ExperimentConfig, ExperimentResult, KsResult
from .processes import GridSpec, ProcessSample, TruncationDraw

__version__ = "0.1.0"
