"""scikit-learn style wrappers: ``fit`` takes one sample per client and runs
the corresponding protocol on them.

>>> est = LocalizeRefineEstimator(n_symbols=4, bits=1).fit([1, 1, 2, 4] * 50)
>>> est.probs_.shape
(4,)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_symbols
from .distributions import Distribution
from .losses import estimation_losses
from .protocol import SchemeConfig, simulate_localize_refine, simulate_minimax
from .round1 import clamp_renormalize


class _DistributionEstimatorMixin:
    def score_samples(self, X):
        """Estimated mass of each sample's symbol."""
        check_is_fitted(self, "probs_")
        x, _ = check_symbols(X, self.n_symbols_)
        return self.probs_[x - 1]

    def loss(self, p_true, q=None):
        check_is_fitted(self, "probs_")
        truth = p_true.probs if isinstance(p_true, Distribution) else np.asarray(p_true)
        return estimation_losses(self.probs_, truth, self.q if q is None else q)

    def _config(self, n_clients):
        return SchemeConfig(n=n_clients, d=self.n_symbols_, b=self.bits, q=self.q)


class UniformGroupingEstimator(_DistributionEstimatorMixin, BaseEstimator):
    """Non-interactive uniform grouping over all clients (the minimax baseline).

    Attributes set by ``fit``: ``probs_`` (raw frequency estimate),
    ``n_symbols_``, ``transcript_``.
    """

    def __init__(self, n_symbols=None, bits=2, q=2.0):
        self.n_symbols = n_symbols
        self.bits = bits
        self.q = q

    def fit(self, X, y=None):
        x, self.n_symbols_ = check_symbols(X, self.n_symbols)
        coarse, self.transcript_ = simulate_minimax(x, self._config(x.size))
        self.probs_ = coarse.p_hat
        return self


class LocalizeRefineEstimator(_DistributionEstimatorMixin, BaseEstimator):
    """Two-round localize-and-refine estimator.

    The first half of the samples (rounded up) localize, the rest refine.
    ``q`` selects the loss the allocation is tuned for (2 for squared l2,
    1 for l1). Attributes set by ``fit``: ``probs_``, ``coarse_probs_``,
    ``group_plan_``, ``transcript_``, ``n_symbols_``.
    """

    def __init__(self, n_symbols=None, bits=2, q=2.0, grouping="wraparound", renormalize=False):
        self.n_symbols = n_symbols
        self.bits = bits
        self.q = q
        self.grouping = grouping
        self.renormalize = renormalize

    def fit(self, X, y=None):
        x, self.n_symbols_ = check_symbols(X, self.n_symbols)
        p_check, p_hat, transcript = simulate_localize_refine(
            x, self._config(x.size), grouping=self.grouping
        )
        self.raw_probs_ = p_check
        self.probs_ = clamp_renormalize(p_check) if self.renormalize else p_check
        self.coarse_probs_ = p_hat.p_hat
        self.group_plan_ = transcript.round2_plan
        self.transcript_ = transcript
        return self
