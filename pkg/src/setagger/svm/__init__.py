"""Binary kernel SVC (SMO), linear SVC (dual coordinate descent) and
Crammer-Singer multiclass SVM."""

from .base import (
    KERNELS,
    LOSSES,
    GramWorkspace,
    KernelSpec,
    SvmError,
    TrainConfig,
    TrainingDiagnostics,
    kernel_eval,
    kernel_matrix,
)
from .crammer_singer import CsModel, cs_scores, solve_cs_subproblem, train_crammer_singer
from .linear import LinearModel, train_linear_dcd
from .smo import BinarySvmModel, decision_value, dual_objective, train_svc_smo

__all__ = [
    "KERNELS",
    "LOSSES",
    "BinarySvmModel",
    "CsModel",
    "GramWorkspace",
    "KernelSpec",
    "LinearModel",
    "SvmError",
    "TrainConfig",
    "TrainingDiagnostics",
    "cs_scores",
    "decision_value",
    "dual_objective",
    "kernel_eval",
    "kernel_matrix",
    "solve_cs_subproblem",
    "train_crammer_singer",
    "train_linear_dcd",
    "train_svc_smo",
]
