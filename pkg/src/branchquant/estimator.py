"""Scikit-learn style wrapper around the branched quantization solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .measures import DiscreteMeasure
from .quantizer import solve_quantization
from .solver import SolverConfig


class BranchedQuantizer(BaseEstimator, ClusterMixin):
    """Quantize a weighted point cloud with a branched transport cost.

    Fitting places ``n_sites`` sites and assigns every sample to a basin;
    the per-site transport networks are kept on the fitted instance.

    Parameters
    ----------
    n_sites : target number of sites (the quantizer may use fewer).
    alpha : branched transport exponent, in (1 - 1/d, 1].
    multistarts : outer multistart count.
    topology_moves : local-search rounds per basin solve.
    seed : RNG seed; fixed seed gives reproducible fits.
    """

    def __init__(self, n_sites=8, alpha=0.85, multistarts=4,
                 topology_moves=10, seed=0):
        self.n_sites = n_sites
        self.alpha = alpha
        self.multistarts = multistarts
        self.topology_moves = topology_moves
        self.seed = seed

    def _config(self):
        return SolverConfig(
            multistarts=int(self.multistarts),
            topology_moves=int(self.topology_moves),
            seed=int(self.seed),
        )

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=float)
        if sample_weight is None:
            sample_weight = np.full(len(X), 1.0 / len(X))
        else:
            sample_weight = np.asarray(sample_weight, dtype=float)
            if sample_weight.shape != (len(X),):
                raise ValueError("sample_weight must have shape (n_samples,)")
            sample_weight = sample_weight / sample_weight.sum()
        nu = DiscreteMeasure(X, sample_weight)
        q = solve_quantization(nu, int(self.n_sites), float(self.alpha),
                               self._config())
        self.quantizer_ = q
        self.sites_ = np.array(q.sites)
        self.site_masses_ = np.array(q.masses)
        self.cost_ = float(q.total_cost)
        self.n_features_in_ = X.shape[1]
        # labels in the order of the (merged) atoms of nu
        idx = {tuple(p): i for i, p in enumerate(nu.points)}
        self.labels_ = np.array(
            [q.assignment[idx[tuple(x)]] for x in X], dtype=int
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "sites_"):
            raise NotFittedError("fit must be called first")

    def predict(self, X):
        """Nearest-site basin index for new points (exact for alpha = 1 with
        convex support; an approximation otherwise)."""
        self._check_fitted()
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature dimension mismatch")
        d = np.linalg.norm(X[:, None, :] - self.sites_[None, :, :], axis=2)
        return np.argmin(d, axis=1)

    def transform(self, X):
        """Distances from each point to each site."""
        self._check_fitted()
        X = check_array(X, dtype=float)
        return np.linalg.norm(X[:, None, :] - self.sites_[None, :, :], axis=2)

    def fit_predict(self, X, y=None, sample_weight=None):
        return self.fit(X, sample_weight=sample_weight).labels_
