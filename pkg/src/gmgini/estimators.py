"""scikit-learn style wrappers around the fitter and the Gini estimators.

``GammaMixture`` follows the density-estimator conventions of
``sklearn.mixture`` (``fit``, ``score_samples``, ``predict_proba``, ...).
``BiasCorrectedGini`` fits a mixture (or takes known parameters) and stores
the sample Gini together with its bias-corrected value.
"""
from __future__ import annotations

import numpy as np
from scipy import special as sc
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_positive_sample
from .fit import FitConfig, em_fit
from .gini import bias, sample_gini
from .mixture import logpdf, sample, validate

__all__ = ["GammaMixture", "BiasCorrectedGini"]


class GammaMixture(DensityMixin, BaseEstimator):
    """Gamma mixture with a shared rate, fitted by multi-start EM.

    Parameters
    ----------
    n_components : int, default=2
    max_iter, tol, n_starts, floor_shape, floor_weight
        Passed through to :class:`~gmgini.fit.FitConfig`.
    random_state : int, default=0
        Non-negative seed for the jittered starts and reseeding.

    Attributes
    ----------
    weights_, shapes_ : ndarray of shape (n_components,)
        Sorted by ascending shape.
    rate_ : float
    params_ : MixtureParams
    loglik_ : float
        Total log-likelihood of the training data.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        n_components=2,
        *,
        max_iter=500,
        tol=1e-8,
        n_starts=8,
        floor_shape=1e-2,
        floor_weight=1e-3,
        random_state=0,
    ):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.n_starts = n_starts
        self.floor_shape = floor_shape
        self.floor_weight = floor_weight
        self.random_state = random_state

    def _fit_config(self):
        return FitConfig(
            m=check_positive_int(self.n_components, "n_components"),
            max_iter=self.max_iter,
            tol=self.tol,
            n_starts=self.n_starts,
            seed=self.random_state,
            floor_shape=self.floor_shape,
            floor_weight=self.floor_weight,
        )

    def fit(self, X, y=None):
        """Fit to positive observations ``X`` (1-d or a single column)."""
        cfg = self._fit_config()
        x = check_positive_sample(X, min_samples=max(2, 2 * cfg.m))
        res = em_fit(x, cfg)
        self.params_ = res.params
        self.weights_ = res.params.weights.copy()
        self.shapes_ = res.params.shapes.copy()
        self.rate_ = res.params.rate
        self.loglik_ = res.loglik
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.n_features_in_ = 1
        return self

    def _component_log_joint(self, x):
        a = self.shapes_
        lam = self.rate_
        return (
            np.log(self.weights_)
            + a * np.log(lam)
            - sc.gammaln(a)
            + (a - 1.0) * np.log(x)[:, None]
            - lam * x[:, None]
        )

    def score_samples(self, X):
        """Log density of each observation."""
        check_is_fitted(self, "params_")
        x = check_positive_sample(X, min_samples=1)
        return np.atleast_1d(logpdf(self.params_, x))

    def score(self, X, y=None):
        """Mean log-likelihood per observation."""
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        """Posterior component probabilities, shape ``(n, n_components)``."""
        check_is_fitted(self, "params_")
        x = check_positive_sample(X, min_samples=1)
        L = self._component_log_joint(x)
        return np.exp(L - sc.logsumexp(L, axis=1, keepdims=True))

    def predict(self, X):
        """Most probable component for each observation."""
        return self.predict_proba(X).argmax(axis=1)

    def sample(self, n_samples=1, random_state=None):
        """Draw ``(X, labels)`` from the fitted mixture."""
        check_is_fitted(self, "params_")
        seed = self.random_state if random_state is None else random_state
        return sample(self.params_, check_positive_int(n_samples, "n_samples"), seed, return_labels=True)


class BiasCorrectedGini(BaseEstimator):
    """Sample Gini with the finite-sample bias of a fitted mixture removed.

    Parameters
    ----------
    n_components : int, default=2
        Components of the mixture fitted when ``mixture_params`` is None.
    mixture_params : MixtureParams or mapping, optional
        Known population parameters; skips fitting.
    n_starts, random_state
        Forwarded to :class:`GammaMixture`.

    Attributes
    ----------
    gini_ : float
        Sample Gini of the training data.
    bias_ : float
        Bias of the sample Gini at the fitted parameters and this ``n``.
    gini_bc_ : float
        ``gini_ - bias_``.
    mixture_ : MixtureParams
    n_samples_ : int
    """

    def __init__(self, n_components=2, *, mixture_params=None, n_starts=8, random_state=0):
        self.n_components = n_components
        self.mixture_params = mixture_params
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.mixture_params is None:
            m = check_positive_int(self.n_components, "n_components")
            x = check_positive_sample(X, min_samples=max(2, 2 * m))
            gm = GammaMixture(m, n_starts=self.n_starts, random_state=self.random_state).fit(x)
            params = gm.params_
        else:
            x = check_positive_sample(X)
            params = validate(self.mixture_params)
        self.mixture_ = params
        self.n_samples_ = x.size
        self.gini_ = sample_gini(x)
        self.bias_ = bias(params, x.size).bias
        self.gini_bc_ = self.gini_ - self.bias_
        return self

    def transform(self, X=None):
        """``[[gini_, gini_bc_]]``; the input is ignored."""
        check_is_fitted(self, "gini_bc_")
        return np.array([[self.gini_, self.gini_bc_]])

    def fit_transform(self, X, y=None):
        return self.fit(X).transform()

