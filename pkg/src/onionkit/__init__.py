"""Confounder-robust learning: ONION basis removal, DANN, simulation and evaluation."""

from .data_core import (CovariateSet, Dataset, PreprocessorState, apply_preprocessor,
                        center_columns, depth_normalize, fit_preprocessor, pca_reduce)
from .onion import OnionFitReport, OrthonormalBasis, onion_fit, onion_transform, power_iteration
from .models import (NetworkParams, TrainConfig, ancova_filter, dann_fit, logreg_fit, mlp_fit,
                     predict_proba)
from .simulate import SimConfig, confound_split, sim_draw, sim_world
from .confound import BiasSubsampleRule, GcProfile, at_dropout, biased_subsample, gc_confound_rule
from .evaluation import (ExperimentReport, auc, confounded_test_subset, make_folds,
                         run_experiment)

__version__ = "0.1.0"
