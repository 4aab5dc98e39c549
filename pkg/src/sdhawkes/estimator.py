"""scikit-learn style front end.

>>> from sdhawkes import StateDependentHawkes
>>> est = StateDependentHawkes(n_random_starts=2).fit(seq)   # doctest: +SKIP
>>> est.alpha_.shape                                          # doctest: +SKIP
(2, 5, 2)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import diagnostics, likelihood
from .estimate import FitConfig, fit
from .intensity import IntensityState, intensity_at
from .simulate import SimulationConfig, make_rng, simulate
from .validation import check_model_arg, check_sequence, infer_dimensions


class StateDependentHawkes(BaseEstimator):
    """State-dependent Hawkes process with exponential kernels, fitted by maximum likelihood.

    Parameters
    ----------
    event_labels, state_labels : tuple of str, optional
        Names of event types and states; inferred from the data when omitted.
    n_random_starts : int
        Random starting points per event type.
    warm_start : SdHawkesModel, optional
        Extra starting point, tried before the random ones.
    ordinary_warm_start : bool
        Also start from a fitted state-independent Hawkes process.
    max_iter, tol : int, float
        L-BFGS-B iteration cap and projected-gradient tolerance.
    random_state : int
        Seed for the random starts and for :meth:`sample`.
    n_jobs : int
        Workers used to run the starts.

    Attributes
    ----------
    model_ : SdHawkesModel
    nu_, alpha_, beta_, phi_ : ndarray
    log_likelihood_ : float
    result_ : EstimateResult
        Per-start traces, chosen starts and the likelihood breakdown.
    """

    def __init__(self, event_labels=None, state_labels=None, n_random_starts=3, warm_start=None,
                 ordinary_warm_start=False, max_iter=1000, tol=1e-7, random_state=0, n_jobs=1):
        self.event_labels = event_labels
        self.state_labels = state_labels
        self.n_random_starts = n_random_starts
        self.warm_start = warm_start
        self.ordinary_warm_start = ordinary_warm_start
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _fit_config(self):
        warm = () if self.warm_start is None else (check_model_arg(self.warm_start),)
        return FitConfig(
            n_random_starts=self.n_random_starts, warm_starts=warm,
            ordinary_warm_start=self.ordinary_warm_start, max_iterations=self.max_iter,
            gradient_tolerance=self.tol, seed=0 if self.random_state is None else int(self.random_state),
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None, **window):
        """Fit to one path. ``window`` may hold ``initial_state``, ``t0`` and ``T`` for raw arrays."""
        seq = check_sequence(X, **window)
        dims = infer_dimensions(seq, self.event_labels, self.state_labels)
        self.result_ = fit(seq, dims, self._fit_config())
        self.model_ = self.result_.model
        self.nu_ = self.model_.nu
        self.alpha_ = self.model_.alpha
        self.beta_ = self.model_.beta
        self.phi_ = self.model_.phi
        self.log_likelihood_ = self.result_.log_likelihood
        return self

    def score(self, X, y=None, **window):
        """Log-likelihood of ``X`` under the fitted model."""
        check_is_fitted(self, "model_")
        return likelihood.log_likelihood(self.model_, check_sequence(X, **window)).total

    def transform(self, X, **window):
        """Time-changed event gaps: for every in-window event, the integral of its
        type's intensity since the previous event of that type (or the window start)."""
        check_is_fitted(self, "model_")
        seq = check_sequence(X, **window)
        res = diagnostics.event_residuals(self.model_, seq)
        ev = seq.events[seq.n_history:]
        out = np.empty(len(ev))
        for e, r in res.event.items():
            out[ev == e] = r
        return out

    def residuals(self, X, **window):
        check_is_fitted(self, "model_")
        return diagnostics.residuals(self.model_, check_sequence(X, **window))

    def predict_proba(self, X, **window):
        """Probability of each event type at every in-window event time, ``lambda_e(t-) / sum``."""
        check_is_fitted(self, "model_")
        seq = check_sequence(X, **window)
        model = self.model_
        state = IntensityState.from_sequence(model, seq)
        h = seq.n_history
        out = np.empty((seq.n_events, model.d_e))
        for i, (t, e, x) in enumerate(zip(seq.times[h:], seq.events[h:], seq.states[h:])):
            state.advance_to(float(t))
            lam = intensity_at(model, state)
            out[i] = lam / lam.sum()
            state.on_event(int(e), int(x))
        return out

    def predict(self, X, **window):
        """Most likely event type at every in-window event time."""
        return np.argmax(self.predict_proba(X, **window), axis=1)

    def sample(self, horizon=None, n_events=None, initial_state=0, random_state=None):
        """Simulate a path from the fitted model."""
        check_is_fitted(self, "model_")
        seed = self.random_state if random_state is None else random_state
        config = SimulationConfig(
            initial_state=initial_state, horizon=np.inf if horizon is None else horizon,
            n_events=n_events, seed=0 if seed is None else int(seed),
        )
        return simulate(self.model_, config, rng=make_rng(config.seed))
