"""Nonparametric sphericity and identity tests for the row or column covariance
of high-dimensional transposable data with Kronecker dependence."""

__version__ = "0.1.0"

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    HDTDError,
    InvalidConfig,
    InvalidSample,
    MalformedFile,
    NonpositiveScale,
    NotPositiveSemiDefinite,
    NullAlternative,
    SampleTooSmall,
    SingularMatrix,
)
from .hypothesis_tests import (
    NullKind,
    NullSpec,
    PowerBoundInputs,
    ScaleMode,
    Target,
    TestOutcome,
    identity_test,
    known_covariance_test,
    power_bound_identity,
    power_bound_sphericity,
    run_test,
    sphericity_test,
)
from .matrix_core import MatrixSample, pairwise_gram, sym_inv_sqrt, sym_sqrt, transpose_sample
from .simulation import CovConfig, InnovationLaw, ModelSpec, sample_dataset
from .trace_estimators import TraceEstimates, estimate_all, t1n, t2n_fast, t2n_star_fast

__all__ = [name for name in dir() if not name.startswith("_")]
