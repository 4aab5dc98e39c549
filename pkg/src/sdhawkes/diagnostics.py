"""Time-change residuals and goodness-of-fit summaries.

Under the fitted model the residuals of each stream are i.i.d. Exp(1).
The first residual of every stream integrates from the window start ``t0``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _core
from .exceptions import InvalidInputError
from .likelihood import _prepare


@dataclass
class ResidualSet:
    """``event[e]`` and ``total[(e, x)]`` residual arrays.

    ``terminal[e]`` is the integral of ``lambda_e`` from the last type-``e``
    event (or ``t0``) to ``T``, so that ``event[e].sum() + terminal[e]`` equals
    the ``l_minus`` contribution of ``e``. ``short_streams`` lists the
    ``(e, x)`` pairs with fewer than two events, whose total residuals are
    left empty.
    """

    event: dict = field(default_factory=dict)
    total: dict = field(default_factory=dict)
    terminal: dict = field(default_factory=dict)
    short_streams: list = field(default_factory=list)


def _segment_sums(values, ends):
    """Sums of ``values`` over ``(ends[i-1], ends[i]]`` with an implicit start at 0."""
    if len(ends) == 0:
        return np.empty(0)
    starts = np.concatenate([[0], ends[:-1] + 1])
    if ends[-1] + 1 < len(values):
        starts = np.append(starts, ends[-1] + 1)
    return np.add.reduceat(values, starts)[: len(ends)]


def _gaps(model, seq):
    t, ev, st = _prepare(model, seq)
    return _core.gap_integrals(
        t, ev, st, seq.t0, seq.T,
        np.ascontiguousarray(model.nu), np.ascontiguousarray(model.alpha), np.ascontiguousarray(model.beta),
    )


def event_residuals(model, seq, _gaps_cache=None):
    gaps, tail = _gaps_cache if _gaps_cache is not None else _gaps(model, seq)
    h = seq.n_history
    events = seq.events[h:]
    out = ResidualSet()
    for e in range(model.d_e):
        idx = np.flatnonzero(events == e)
        out.event[e] = _segment_sums(gaps[:, e], idx)
        after = idx[-1] + 1 if len(idx) else 0
        out.terminal[e] = float(gaps[after:, e].sum() + tail[e])
    return out


def total_residuals(model, seq, _gaps_cache=None):
    """Residuals of every lifted stream ``(e, x)`` using ``phi_e(X(t-), x) * lambda_e``."""
    gaps, _ = _gaps_cache if _gaps_cache is not None else _gaps(model, seq)
    h = seq.n_history
    events = seq.events[h:]
    states = seq.states[h:]
    prev = seq.previous_states()
    out = ResidualSet()
    for e in range(model.d_e):
        for x in range(model.d_x):
            idx = np.flatnonzero((events == e) & (states == x))
            if len(idx) < 2:
                out.total[(e, x)] = np.empty(0)
                out.short_streams.append((e, x))
                continue
            weighted = model.phi[e, prev, x] * gaps[:, e]
            out.total[(e, x)] = _segment_sums(weighted, idx)
    return out


def residuals(model, seq):
    """Both residual families from a single pass over the data."""
    cache = _gaps(model, seq)
    ev = event_residuals(model, seq, cache)
    tot = total_residuals(model, seq, cache)
    ev.total = tot.total
    ev.short_streams = tot.short_streams
    return ev


def qq_points(residuals):
    """``(Exp(1) quantile, empirical quantile)`` pairs at plotting positions ``(i - 0.5) / n``."""
    r = np.sort(np.asarray(residuals, dtype=float))
    n = len(r)
    if n == 0:
        return np.empty((0, 2))
    p = (np.arange(1, n + 1) - 0.5) / n
    return np.column_stack([-np.log1p(-p), r])


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n: int


def ks_exp1(residuals):
    """One-sample Kolmogorov-Smirnov test against ``1 - exp(-x)`` (asymptotic p-value)."""
    r = np.asarray(residuals, dtype=float)
    if len(r) < 2:
        raise InvalidInputError("the KS test needs at least two residuals")
    res = stats.kstest(r, stats.expon.cdf, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue), len(r))


@dataclass(frozen=True)
class Correlogram:
    lags: np.ndarray
    acf: np.ndarray
    #: True when the series has zero variance and autocorrelations are undefined
    degenerate: bool


def correlogram(residuals, max_lag=20):
    r = np.asarray(residuals, dtype=float)
    if len(r) < 2:
        raise InvalidInputError("a correlogram needs at least two residuals")
    max_lag = min(int(max_lag), len(r) - 1)
    lags = np.arange(1, max_lag + 1)
    c = r - r.mean()
    denom = np.dot(c, c)
    if denom == 0:
        return Correlogram(lags, np.full(len(lags), np.nan), True)
    acf = np.array([np.dot(c[:-k], c[k:]) / denom for k in lags])
    return Correlogram(lags, acf, False)


def summary(name, residuals, max_lag=20):
    """JSON-ready summary ``{stream, n, ks, p, acf}`` for one residual stream."""
    r = np.asarray(residuals, dtype=float)
    out = {"stream": name, "n": int(len(r)), "ks": None, "p": None, "acf": []}
    if len(r) >= 2:
        k = ks_exp1(r)
        cg = correlogram(r, max_lag)
        out.update(ks=k.statistic, p=k.pvalue, acf=[None if np.isnan(a) else float(a) for a in cg.acf])
    return out
