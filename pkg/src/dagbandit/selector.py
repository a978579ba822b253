"""scikit-learn compatible feature selection via best-leaf identification.

``McdsFeatureSelector`` wraps the best-leaf search in the standard
fit/transform selector API so it composes with pipelines and model
selection: ``fit`` runs the search on (X, y), ``get_support`` exposes the
recommended subset, ``transform`` projects onto it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from .bai import initial_dag
from .bli import BliParams, run_bli
from .bounds import ExplorationFn
from .feature_space import FeatureLattice, RaveTable
from .oracles import Dataset, make_fs_oracles

__all__ = ["McdsFeatureSelector"]


class McdsFeatureSelector(SelectorMixin, BaseEstimator):
    """Feature selector backed by confidence-bound DAG search.

    Parameters mirror the search: accuracy ``epsilon`` and risk ``delta`` of
    the stagewise best-arm problems, expansion parameter ``b``, exploration
    function ``beta``, subsample size ``m`` / neighbour count ``k`` /
    continuation ``q`` of the evaluation oracles, RAVE blend constant
    ``c_l`` and stage-initialization width ``init_width``.  ``max_steps``
    caps the number of leaf evaluations; a capped run still yields the best
    subset found so far (``report_.stopped`` tells which case occurred).
    """

    def __init__(
        self,
        epsilon: float = 0.005,
        delta: float = 0.1,
        b: float = 0.3,
        beta: str = "practical",
        m: int = 50,
        k: int = 5,
        q: float = 0.9,
        init_width: int = 7,
        c_l: float = 100.0,
        max_steps: int = 5_000_000,
        random_state: int = 0,
    ):
        self.epsilon = epsilon
        self.delta = delta
        self.b = b
        self.beta = beta
        self.m = m
        self.k = k
        self.q = q
        self.init_width = init_width
        self.c_l = c_l
        self.max_steps = max_steps
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes = np.unique(y)
        if len(classes) != 2:
            raise ValueError("binary labels required")
        y01 = (y == classes[1]).astype(np.int64)
        data = Dataset(
            X=X, y=y01, feature_names=[f"v{i}" for i in range(X.shape[1])]
        )
        domain = FeatureLattice(data.n_features)
        oracles = make_fs_oracles(data, m=self.m, k=self.k, q=self.q)
        dag = initial_dag(domain, ExplorationFn(self.beta, self.delta))
        params = BliParams(
            epsilon=self.epsilon,
            delta=self.delta,
            b=self.b,
            max_steps=self.max_steps,
            seed=self.random_state,
            init_width=self.init_width,
        )
        report = run_bli(
            dag, domain, oracles, params, rave=RaveTable(c_l=self.c_l)
        )
        features = report.recommended[0]
        self.n_features_in_ = X.shape[1]
        self.support_ = np.zeros(X.shape[1], dtype=bool)
        self.support_[list(features)] = True
        self.report_ = report
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
