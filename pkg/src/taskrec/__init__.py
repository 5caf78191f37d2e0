"""Implicit-feedback task recommendation for crowdsourcing platforms.

Two models learn from worker task-completion counts plus binary task
features:

* :func:`fit_feat_nnls` -- per-worker non-negative feature preferences.
* :func:`fit_ifts` -- confidence-weighted ALS with a task-similarity penalty.

Two comparison methods (:func:`fit_implicit_als_neg`, :func:`fit_feature_reg`)
and a holdout evaluation harness (MPR, precision-recall curve) are included.
"""

from .baselines import BaselineConfig, fit_feature_reg, fit_implicit_als_neg
from .data import (
    ConfidenceWeights,
    InteractionMatrix,
    PreferenceMatrix,
    SimilarityMatrix,
    TaskFeatureMatrix,
    build_confidence,
    build_preference,
    task_similarity_matrix,
)
from .evaluation import (
    EvalReport,
    HoldoutSplit,
    ModelConfig,
    mpr,
    percentile_ranks,
    pr_curve,
    run_protocol,
    split_holdout,
)
from .feat_nnls import FeatModel, assemble_worker_system, fit_feat_nnls, predict_feat
from .ifts import (
    LatentModel,
    fit_ifts,
    init_factors,
    objective_ifts,
    predict_latent,
    update_task_factors,
    update_user_factors,
)
from .solvers import (
    NnlsConvergenceError,
    NnlsResult,
    NotPositiveDefiniteError,
    SolverError,
    nnls,
    spd_solve,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "ConfidenceWeights",
    "EvalReport",
    "FeatModel",
    "HoldoutSplit",
    "InteractionMatrix",
    "LatentModel",
    "ModelConfig",
    "NnlsConvergenceError",
    "NnlsResult",
    "NotPositiveDefiniteError",
    "PreferenceMatrix",
    "SimilarityMatrix",
    "SolverError",
    "TaskFeatureMatrix",
    "assemble_worker_system",
    "build_confidence",
    "build_preference",
    "fit_feat_nnls",
    "fit_feature_reg",
    "fit_ifts",
    "fit_implicit_als_neg",
    "init_factors",
    "mpr",
    "nnls",
    "objective_ifts",
    "percentile_ranks",
    "pr_curve",
    "predict_feat",
    "predict_latent",
    "run_protocol",
    "spd_solve",
    "split_holdout",
    "task_similarity_matrix",
    "update_task_factors",
    "update_user_factors",
]
