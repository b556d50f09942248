"""Counterfactual explanations via linear programming, with action mappings
for correlation-aware (actionable) and convex-hull (plausible) changes."""

from .codebook import Codebook, decode, encode, learn_codebook
from .covariance import (CorrelationMatrix, CovarianceEstimate,
                         correlation_from_covariance, empirical_covariance,
                         graphical_lasso)
from .dataset import (FoldPlan, LabeledDataset, Standardizer,
                      fit_standardizer, load_builtin, load_csv, make_folds)
from .engine import (ActionMapping, CounterfactualRequest,
                     CounterfactualResult, baseline_counterfactual,
                     compute_counterfactual, hull_membership)
from .harness import (ExperimentConfig, ExperimentReport, feature_overlap,
                      run_dependency_experiment, run_plausibility_experiment)
from .models import (AffineConstraintSet, GlvqModel, SoftmaxRegression,
                     predict, target_constraints, train_glvq, train_softmax)
from .solver import (LinearProgram, LpSolution, LpStatus, l1_epigraph,
                     solve_lp)

__version__ = "0.1.0"

__all__ = [
    "ActionMapping", "AffineConstraintSet", "Codebook", "CorrelationMatrix",
    "CounterfactualRequest", "CounterfactualResult", "CovarianceEstimate",
    "ExperimentConfig", "ExperimentReport", "FoldPlan", "GlvqModel",
    "LabeledDataset", "LinearProgram", "LpSolution", "LpStatus",
    "SoftmaxRegression", "Standardizer", "baseline_counterfactual",
    "compute_counterfactual", "correlation_from_covariance", "decode",
    "empirical_covariance", "encode", "feature_overlap", "fit_standardizer",
    "graphical_lasso", "hull_membership", "l1_epigraph", "learn_codebook",
    "load_builtin", "load_csv", "make_folds", "predict",
    "run_dependency_experiment", "run_plausibility_experiment", "solve_lp",
    "target_constraints", "train_glvq", "train_softmax",
]
