"""repsel: repeated-selection ranking models.

Plackett-Luce, contextual repeated selection (full and factorized), and
Mallows models over full and top-k rankings, with maximum-likelihood
fitting, exact sampling, spectral identifiability certificates,
cross-validated evaluation, and risk-convergence simulations.
"""

from .core import (
    ChoiceObservation,
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    ModelParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
    pair_index,
    pair_unindex,
    validate_dataset,
)
from .decompose import ChoiceDataset, repeated_selection, stage_counts
from .estimate import (
    DivergenceError,
    FitConfig,
    FitReport,
    fit,
    fit_mallows,
    mga_reference,
    nll_and_grad,
)
from .evaluate import (
    CVResult,
    PositionProfile,
    RiskExperimentConfig,
    kfold_eval,
    position_profile,
    risk_experiment,
    tail_bundle_stats,
)
from .io import (
    parse_preflib,
    read_params,
    write_params,
    write_results_csv,
    export_cayley,
)
from .models import (
    SampleConfig,
    cdm_choice_logprob,
    choice_logprob,
    enumerate_pmf,
    kendall_tau,
    mallows_choice_logprob,
    mnl_choice_logprob,
    ranking_logprob,
    sample_rankings,
)
from .spectral import (
    SpectralCertificate,
    build_cdm_gram,
    build_pl_laplacian,
    certify,
    lambda2,
)

__version__ = "0.1.0"

__all__ = [
    "ChoiceDataset",
    "ChoiceObservation",
    "CRSFactorParams",
    "CRSFullParams",
    "CVResult",
    "DivergenceError",
    "FitConfig",
    "FitReport",
    "MallowsParams",
    "ModelParams",
    "PLParams",
    "PositionProfile",
    "Ranking",
    "RankingDataset",
    "RiskExperimentConfig",
    "SampleConfig",
    "SpectralCertificate",
    "Universe",
    "build_cdm_gram",
    "build_pl_laplacian",
    "cdm_choice_logprob",
    "certify",
    "choice_logprob",
    "enumerate_pmf",
    "export_cayley",
    "fit",
    "fit_mallows",
    "kendall_tau",
    "kfold_eval",
    "lambda2",
    "mallows_choice_logprob",
    "mga_reference",
    "mnl_choice_logprob",
    "nll_and_grad",
    "pair_index",
    "pair_unindex",
    "parse_preflib",
    "position_profile",
    "ranking_logprob",
    "read_params",
    "repeated_selection",
    "risk_experiment",
    "sample_rankings",
    "stage_counts",
    "tail_bundle_stats",
    "validate_dataset",
    "write_params",
    "write_results_csv",
    "__version__",
]
