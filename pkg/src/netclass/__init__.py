"""Classify networks by the random-graph model that most plausibly generated them.

Pipeline: simulate labelled graphs, compute 18 structural features, train a
multiclass boosted-tree classifier, then explain it with SHAP values,
partial dependence and H-statistics.
"""

from .dataset import LabeledDataset, SplitSpec, kfold, smote, stratified_split
from .evaluation import EvalReport, cross_validate, evaluate, search_hyperparams
from .explain import h_statistics, partial_dependence, shap_global_summary, shap_values, tree_shap
from .features import FEATURE_NAMES, FeatureVector, feature_vector
from .gbt import GbtModel, Hyperparams, load_model, save_model, train
from .generators import ModelClass, SimulationManifest, desk_manifest, generate, simulate_corpus
from .graph import Graph, build_graph, read_edge_list

__version__ = "0.1.0"
