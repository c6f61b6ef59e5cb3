"""Hierarchical classification: tree math, likelihoods, losses, inference and operating curves."""
from .hierarchy import (Hierarchy, HierarchyError, build_hierarchy, lca, project_to_subtree,
                        random_cut, relations, sum_over_ancestors, sum_over_descendants)
from .likelihoods import InvalidLikelihoodError, Method, exclusive_likelihood, likelihood, param_dim
from .losses import (HXE, CondSigmoidBCE, CondSoftmaxNLL, DeepRTC, FlatNLL, MultilabelFocal,
                     SoftMaxDescendant, SoftMaxMargin, loss_value_and_grad)
from .metrics import MetricKind, effective_prediction, evaluate
from .inference import InferenceSpec, Rule
from .curves import (Curve, construct_dataset_curve, construct_dataset_curves, f1_at_rule,
                     ordered_pareto_set, pair_curve, summary_metrics)

__version__ = "0.1.0"
