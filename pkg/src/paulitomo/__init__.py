"""Sparse density-matrix tomography by thresholding Pauli measurement averages."""

from .errors import (
    ConvergenceError,
    FormatError,
    GenerationError,
    InputError,
    TomographyError,
)
from .estimator import (
    EstimateReport,
    ThresholdPolicy,
    apply_threshold,
    estimate,
    individual_threshold,
    optimal_threshold_search,
    psd_project,
    simplex_projection,
    universal_threshold,
)
from .measurement import (
    AverageOutcomes,
    MeasurementRecord,
    all_nonidentity_labels,
    averages,
    load_record,
    sample_measurements,
    save_record,
)
from .norms import (
    ErrorReport,
    error_report,
    frobenius_error_sq,
    norm_inequality_check,
    schatten_error,
    spectral_error,
)
from .pauli import (
    PauliExpansion,
    expansion_matvec,
    format_label,
    index_to_label,
    label_to_index,
    parse_label,
    pauli_dense,
    pauli_matvec,
    trace_product,
)
from .state import (
    DensityState,
    SparsityModel,
    SupportRule,
    coefficient,
    from_dense,
    load_state,
    min_eigenvalue,
    random_sparse_state,
    save_state,
    sparsity_norm,
    to_dense,
)

__version__ = "0.1.0"
FILE_FORMATS = ("pauli-state v1", "pauli-counts v1")
