"""Log-likelihood of an sdHawkes path, its gradient, and the closed-form phi estimate.

The log-likelihood separates into a transition term that only involves
``phi`` and a point-process term ``l_plus - l_minus`` that only involves
``(nu, alpha, beta)``. The latter further splits into one independent
term per event type, which :mod:`sdhawkes.estimate` exploits.
"""

from dataclasses import dataclass

import numpy as np

from . import _core
from .exceptions import InvalidInputError, NumericalError


@dataclass(frozen=True)
class LikelihoodBreakdown:
    transition_term: float
    l_plus: float
    l_minus: float
    #: True when an observed transition has probability zero under ``phi``.
    impossible_transition: bool = False

    @property
    def total(self):
        return self.transition_term + self.l_plus - self.l_minus

    @property
    def point_process_term(self):
        return self.l_plus - self.l_minus

    def to_dict(self):
        return {
            "transition_term": self.transition_term,
            "l_plus": self.l_plus,
            "l_minus": self.l_minus,
            "total": self.total,
            "impossible_transition": self.impossible_transition,
        }


def _arrays(seq):
    return (
        np.ascontiguousarray(seq.times, dtype=np.float64),
        np.ascontiguousarray(seq.events, dtype=np.int64),
        np.ascontiguousarray(seq.states, dtype=np.int64),
    )


def _prepare(model, seq):
    seq.check_dims(model.dims)
    if np.any(model.nu <= 0):
        raise NumericalError("base rates must be strictly positive for a finite likelihood")
    if np.any(model.beta <= 0):
        raise InvalidInputError("decay coefficients must be strictly positive")
    return _arrays(seq)


def transition_term(phi, seq):
    """``sum_n ln phi_{e_n}(x_{n-1}, x_n)`` over in-window events."""
    phi = np.asarray(phi)
    h = seq.n_history
    probs = phi[seq.events[h:], seq.previous_states(), seq.states[h:]]
    if np.any(probs <= 0):
        return -np.inf
    return float(np.log(probs).sum())


def event_type_terms(model, seq, e, want_grad=False, arrays=None):
    """``(l_plus_e, l_minus_e, g_nu, g_alpha, g_beta)`` for the type-``e`` subproblem.

    Gradients (with respect to ``nu[e]``, ``alpha[:, :, e]``, ``beta[:, :, e]``)
    are those of ``l_plus_e - l_minus_e``.
    """
    t, ev, st = arrays if arrays is not None else _prepare(model, seq)
    lp, lm, g_nu, g_a, g_b, min_lam = _core.loglik_event_type(
        t, ev, st, seq.t0, seq.T, e,
        float(model.nu[e]),
        np.ascontiguousarray(model.alpha[:, :, e]),
        np.ascontiguousarray(model.beta[:, :, e]),
        want_grad,
    )
    if min_lam <= 0:
        raise NumericalError(f"zero intensity at an event of type {e}")
    return lp, lm, g_nu, g_a, g_b


def log_likelihood(model, seq):
    """Exact log-likelihood via the O(N) exponential recursions."""
    arrays = _prepare(model, seq)
    lp = lm = 0.0
    for e in range(model.d_e):
        a, b, *_ = event_type_terms(model, seq, e, arrays=arrays)
        lp += a
        lm += b
    tt = transition_term(model.phi, seq)
    return LikelihoodBreakdown(tt, lp, lm, impossible_transition=bool(np.isneginf(tt)))


def log_likelihood_naive(model, seq):
    """Direct O(N^2) evaluation without recursions; an independent cross-check."""
    seq.check_dims(model.dims)
    t0, T = seq.t0, seq.T
    times, events, states = seq.times, seq.events, seq.states
    nu, alpha, beta = model.nu, model.alpha, model.beta
    l_plus = 0.0
    for n in range(len(times)):
        if times[n] <= t0:
            continue
        e = events[n]
        past = slice(0, n)
        a = alpha[events[past], states[past], e]
        b = beta[events[past], states[past], e]
        lam = nu[e] + np.sum(a * np.exp(-b * (times[n] - times[past])))
        if lam <= 0:
            raise NumericalError(f"zero intensity at event {n}")
        l_plus += np.log(lam)
    l_minus = float(np.sum(nu)) * (T - t0)
    for i in range(len(times)):
        a = alpha[events[i], states[i], :]
        b = beta[events[i], states[i], :]
        start = max(t0, times[i])
        l_minus += np.sum(a / b * (np.exp(-b * (start - times[i])) - np.exp(-b * (T - times[i]))))
    tt = transition_term(model.phi, seq)
    return LikelihoodBreakdown(tt, float(l_plus), float(l_minus), bool(np.isneginf(tt))).total


@dataclass(frozen=True)
class Gradient:
    """Partials of ``l_plus - l_minus``; shapes follow the model arrays."""

    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def gradient(model, seq):
    arrays = _prepare(model, seq)
    g_nu = np.zeros(model.d_e)
    g_alpha = np.zeros(model.alpha.shape)
    g_beta = np.zeros(model.beta.shape)
    for e in range(model.d_e):
        _, _, gn, ga, gb = event_type_terms(model, seq, e, want_grad=True, arrays=arrays)
        g_nu[e] = gn
        g_alpha[:, :, e] = ga
        g_beta[:, :, e] = gb
    return Gradient(g_nu, g_alpha, g_beta)


@dataclass(frozen=True)
class TransitionEstimate:
    phi: np.ndarray
    counts: np.ndarray
    #: ``unobserved[e, x]`` marks rows filled uniformly because no event of
    #: type ``e`` ever occurred in state ``x``.
    unobserved: np.ndarray


def transition_counts(seq, dims):
    seq.check_dims(dims)
    counts = np.zeros((dims.d_e, dims.d_x, dims.d_x), dtype=np.int64)
    h = seq.n_history
    np.add.at(counts, (seq.events[h:], seq.previous_states(), seq.states[h:]), 1)
    return counts


def transition_mle(seq, dims):
    """Empirical transition frequencies; unobserved rows are uniform and flagged."""
    counts = transition_counts(seq, dims)
    totals = counts.sum(axis=2)
    unobserved = totals == 0
    phi = np.empty(counts.shape, dtype=float)
    seen = ~unobserved
    phi[seen] = counts[seen] / totals[seen][:, None]
    phi[unobserved] = 1.0 / dims.d_x
    return TransitionEstimate(phi, counts, unobserved)
