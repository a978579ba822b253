"""Monte-Carlo search in growing single-rooted DAGs by best-arm and
best-leaf identification, with a feature-selection front end."""

from .bai import BaiParams, BaiReport, run_bai
from .bounds import ExplorationFn, beta_practical, beta_theory, leaf_interval
from .dag import SearchDag
from .feature_space import FeatureLattice, FixedDepthLattice, FixedDepthTree, RaveTable
from .oracles import Dataset, OracleSpec, knn_auc, make_fs_oracles

__version__ = "0.1.0"

__all__ = [
    "BaiParams",
    "BaiReport",
    "Dataset",
    "ExplorationFn",
    "FeatureLattice",
    "FixedDepthLattice",
    "FixedDepthTree",
    "OracleSpec",
    "RaveTable",
    "SearchDag",
    "beta_practical",
    "beta_theory",
    "knn_auc",
    "leaf_interval",
    "make_fs_oracles",
    "run_bai",
]
