"""Certified ownership verification for embedding models.

Defend released embeddings with calibrated Gaussian noise, estimate the
mutual information a suspect model shares with them, and issue an
auditable certificate with finite-sample error bounds.
"""

from ._version import __version__
from .certification import (
    Certificate,
    CertificationParams,
    DECISION_INDEPENDENT,
    DECISION_SURROGATE,
    bounded_difference_constant,
    credit_threshold,
    parse_certificate,
    render_certificate,
    type1_bound,
    type2_bound,
    verify,
    write_certificate,
)
from .embedding_io import (
    EmbeddingMatrix,
    clip_embeddings,
    load_embeddings,
    save_embeddings,
)
from .errors import (
    CalibrationError,
    CreditError,
    DataError,
    DomainError,
    FormatError,
    IoError,
    MarginError,
    ParamError,
    RankError,
    SensitivityError,
    TightnessViolation,
    TruncationError,
)
from .gaussian_mechanism import (
    DefenseParams,
    apply_mechanism,
    calibrate_sigma_dp,
    mi_upper_bound,
    row_noise,
)
from .ksg_mi import KsgConfig, digamma, knn_joint_radii, ksg_estimate
from .oracles import (
    ChannelSpec,
    McReport,
    TightnessReport,
    TrialGenerator,
    binary_channel_mi,
    gaussian_mi_closed_form,
    monte_carlo_error_rates,
    tightness_check,
)
from .simulation import (
    DecorrelationResult,
    ExperimentConfig,
    SeparationResult,
    SyntheticModel,
    auc_score,
    decorrelation_attack,
    extract_surrogate,
    make_independent,
    make_teacher,
    relative_fit_error,
    relative_output_error,
    run_separation_experiment,
)
from .tradeoff import (
    TradeoffConfig,
    TradeoffRow,
    binary_entropy,
    covariance_spectrum,
    default_sigma_grid,
    evaluate_grid,
    select_sigma,
    tradeoff_table_csv,
    utility_entropy_gain,
    verification_entropy,
)

__all__ = [
    "__version__",
    "Certificate",
    "CertificationParams",
    "ChannelSpec",
    "CreditError",
    "CalibrationError",
    "DataError",
    "DecorrelationResult",
    "DefenseParams",
    "DomainError",
    "DECISION_INDEPENDENT",
    "DECISION_SURROGATE",
    "EmbeddingMatrix",
    "ExperimentConfig",
    "FormatError",
    "IoError",
    "KsgConfig",
    "MarginError",
    "McReport",
    "ParamError",
    "RankError",
    "SensitivityError",
    "SeparationResult",
    "SyntheticModel",
    "TightnessReport",
    "TightnessViolation",
    "TradeoffConfig",
    "TradeoffRow",
    "TrialGenerator",
    "TruncationError",
    "apply_mechanism",
    "auc_score",
    "binary_channel_mi",
    "binary_entropy",
    "bounded_difference_constant",
    "calibrate_sigma_dp",
    "clip_embeddings",
    "covariance_spectrum",
    "credit_threshold",
    "decorrelation_attack",
    "default_sigma_grid",
    "digamma",
    "evaluate_grid",
    "extract_surrogate",
    "gaussian_mi_closed_form",
    "knn_joint_radii",
    "ksg_estimate",
    "load_embeddings",
    "make_independent",
    "make_teacher",
    "mi_upper_bound",
    "monte_carlo_error_rates",
    "parse_certificate",
    "relative_fit_error",
    "relative_output_error",
    "render_certificate",
    "row_noise",
    "run_separation_experiment",
    "save_embeddings",
    "select_sigma",
    "tightness_check",
    "tradeoff_table_csv",
    "type1_bound",
    "type2_bound",
    "utility_entropy_gain",
    "verification_entropy",
    "verify",
    "write_certificate",
]
