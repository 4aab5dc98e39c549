"""Maximum-likelihood estimation.

``phi`` is estimated in closed form. The remaining parameters are fitted by
``d_e`` independent bound-constrained problems, one per event type ``e``,
each over ``nu[e]``, ``alpha[:, :, e]`` and ``beta[:, :, e]``, started from
every warm start and random start; the best final value wins.
"""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from . import _core
from . import likelihood as lk
from .exceptions import EstimationError, InvalidInputError
from .model import Dimensions, SdHawkesModel, check_model


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    ``warm_starts`` holds :class:`SdHawkesModel` instances (only their
    ``nu``, ``alpha`` and ``beta`` are used). Objective values are divided by
    the number of type-``e`` events so ``gradient_tolerance`` is scale free.
    """

    n_random_starts: int = 3
    warm_starts: tuple = ()
    ordinary_warm_start: bool = False
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-7
    function_tolerance: float = 1e-13
    nu_lower: float = 1e-8
    alpha_lower: float = 0.0
    beta_lower: float = 1e-8
    seed: int = 0
    n_jobs: int | None = 1

    def __post_init__(self):
        object.__setattr__(self, "warm_starts", tuple(self.warm_starts))
        if self.n_random_starts < 0:
            raise InvalidInputError("n_random_starts must be non-negative")
        if self.nu_lower <= 0 or self.beta_lower <= 0 or self.alpha_lower < 0:
            raise InvalidInputError("nu and beta lower bounds must be > 0, alpha lower bound >= 0")
        if self.n_random_starts == 0 and not self.warm_starts and not self.ordinary_warm_start:
            raise InvalidInputError("no starting point: give warm starts or random starts")


@dataclass
class StartTrace:
    event_type: int
    start_id: int
    origin: str
    iterations: int
    evaluations: int
    initial_value: float
    final_value: float
    converged: bool
    message: str
    #: subproblem objective ``l_plus_e - l_minus_e`` at each accepted iterate
    path: list = field(default_factory=list)

    def to_dict(self, with_path=False):
        d = {
            "event_type": self.event_type,
            "start_id": self.start_id,
            "origin": self.origin,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "initial_value": self.initial_value,
            "final_value": self.final_value,
            "converged": self.converged,
            "message": self.message,
        }
        if with_path:
            d["path"] = list(self.path)
        return d


@dataclass
class EstimateResult:
    model: SdHawkesModel
    log_likelihood: float
    breakdown: lk.LikelihoodBreakdown
    traces: list
    chosen_start: list
    transition: lk.TransitionEstimate

    @property
    def unobserved_rows(self):
        return self.transition.unobserved

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "log_likelihood": self.log_likelihood,
            "breakdown": self.breakdown.to_dict(),
            "chosen_start": list(self.chosen_start),
            "unobserved_rows": np.argwhere(self.transition.unobserved).tolist(),
            "traces": [t.to_dict() for t in self.traces],
        }


def _random_start(rng, dims, rate):
    d_e, d_x = dims.d_e, dims.d_x
    shape = (d_e, d_x, d_e)

    def log_uniform(lo, hi, size):
        return np.exp(rng.uniform(np.log(lo), np.log(hi), size))

    nu = log_uniform(0.1 * rate, 10.0 * rate, d_e) / d_e
    beta = log_uniform(1e-1, 1e5, shape)
    # keep the summed kernel norm near or below one at the upper end
    ratio = log_uniform(1e-2, 1e2, shape) / (100.0 * d_e * d_x)
    return nu, ratio * beta, beta


class _Subproblem:
    """Negative normalised ``l_plus_e - l_minus_e`` in scaled coordinates."""

    def __init__(self, seq, arrays, dims, e, scale):
        self.seq = seq
        self.arrays = arrays
        self.e = e
        self.d_e, self.d_x = dims.d_e, dims.d_x
        self.scale = scale
        h = seq.n_history
        self.norm = max(1, int(np.count_nonzero(seq.events[h:] == e)))
        self._last = (None, None)

    def unpack(self, u):
        theta = u * self.scale
        k = self.d_e * self.d_x
        return theta[0], theta[1:1 + k].reshape(self.d_e, self.d_x), theta[1 + k:].reshape(self.d_e, self.d_x)

    def loglik(self, theta):
        """Subproblem objective at natural-scale parameters (no normalisation)."""
        k = self.d_e * self.d_x
        t, ev, st = self.arrays
        lp, lm, *_ = _core.loglik_event_type(
            t, ev, st, self.seq.t0, self.seq.T, self.e, float(theta[0]),
            np.ascontiguousarray(theta[1:1 + k].reshape(self.d_e, self.d_x)),
            np.ascontiguousarray(theta[1 + k:].reshape(self.d_e, self.d_x)), False,
        )
        return lp - lm

    def __call__(self, u):
        nu, a, b = self.unpack(u)
        t, ev, st = self.arrays
        lp, lm, g_nu, g_a, g_b, _ = _core.loglik_event_type(
            t, ev, st, self.seq.t0, self.seq.T, self.e, float(nu),
            np.ascontiguousarray(a), np.ascontiguousarray(b), True,
        )
        val = lp - lm
        grad = np.concatenate([[g_nu], g_a.ravel(), g_b.ravel()]) * self.scale
        f = -val / self.norm
        g = -grad / self.norm
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            f, g = np.inf, np.zeros_like(g)
        self._last = (u.copy(), val)
        return f, g

    def value_at(self, u):
        x, _ = self._last
        if x is None or not np.array_equal(x, u):
            self(u)
        return self._last[1]


def _solve(seq, arrays, dims, e, start_id, origin, theta0, config):
    k = dims.d_e * dims.d_x
    nu0, a0, b0 = theta0[0], theta0[1:1 + k], theta0[1 + k:]
    nu0 = max(nu0, config.nu_lower)
    a0 = np.maximum(a0, config.alpha_lower)
    b0 = np.maximum(b0, config.beta_lower)
    scale = np.concatenate([[nu0], np.maximum.reduce([a0, 1e-2 * b0, np.full(k, 1e-8)]), b0])
    lower = np.concatenate([[config.nu_lower], np.full(k, config.alpha_lower), np.full(k, config.beta_lower)])
    u0 = np.concatenate([[nu0], a0, b0]) / scale
    bounds = [(lo, None) for lo in lower / scale]
    prob = _Subproblem(seq, arrays, dims, e, scale)
    f0, _ = prob(u0)
    initial = prob._last[1]
    path = [initial]
    if not np.isfinite(f0):
        trace = StartTrace(e, start_id, origin, 0, 1, float(initial), -np.inf, False, "non-finite start", path)
        return trace, None

    def callback(uk):
        path.append(float(prob.value_at(uk)))

    res = minimize(
        prob, u0, jac=True, method="L-BFGS-B", bounds=bounds, callback=callback,
        options={
            "maxiter": config.max_iterations,
            "gtol": config.gradient_tolerance,
            "ftol": config.function_tolerance,
            "maxfun": 20 * config.max_iterations,
        },
    )
    theta = np.maximum(res.x * scale, lower)
    final = prob.loglik(theta)
    if not np.isfinite(final):
        trace = StartTrace(e, start_id, origin, int(res.nit), int(res.nfev), float(initial), -np.inf,
                           False, str(res.message), path)
        return trace, None
    trace = StartTrace(e, start_id, origin, int(res.nit), int(res.nfev), float(initial), float(final),
                       bool(res.success), str(res.message), path)
    return trace, theta


def _starts(seq, dims, config):
    """List of ``(start_id, origin, nu, alpha, beta)`` full parameter sets."""
    starts = []
    for m in config.warm_starts:
        if m.alpha.shape != (dims.d_e, dims.d_x, dims.d_e):
            raise InvalidInputError(f"warm start has shape {m.alpha.shape}, expected {(dims.d_e, dims.d_x, dims.d_e)}")
        starts.append(("warm", np.asarray(m.nu, float), np.asarray(m.alpha, float), np.asarray(m.beta, float)))
    if config.ordinary_warm_start and dims.d_x > 1:
        sub = FitConfig(
            n_random_starts=max(config.n_random_starts, 1), max_iterations=config.max_iterations,
            gradient_tolerance=config.gradient_tolerance, function_tolerance=config.function_tolerance,
            nu_lower=config.nu_lower, alpha_lower=config.alpha_lower, beta_lower=config.beta_lower,
            seed=config.seed, n_jobs=config.n_jobs,
        )
        ordinary = fit_ordinary(seq, dims.event_labels, sub).model
        starts.append((
            "ordinary",
            np.asarray(ordinary.nu, float),
            np.repeat(ordinary.alpha, dims.d_x, axis=1),
            np.repeat(ordinary.beta, dims.d_x, axis=1),
        ))
    rate = max(seq.n_events, 1) / (seq.T - seq.t0)
    for r in range(config.n_random_starts):
        rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), r]))
        starts.append(("random", *_random_start(rng, dims, rate)))
    return [(i, *s) for i, s in enumerate(starts)]


def fit(seq, dims, config=None):
    """Fit ``(phi, nu, alpha, beta)`` to ``seq`` by maximum likelihood."""
    config = config or FitConfig()
    seq.check_dims(dims)
    transition = lk.transition_mle(seq, dims)
    arrays = lk._arrays(seq)
    starts = _starts(seq, dims, config)
    jobs = []
    for e in range(dims.d_e):
        for start_id, origin, nu, alpha, beta in starts:
            theta0 = np.concatenate([[nu[e]], alpha[:, :, e].ravel(), beta[:, :, e].ravel()])
            jobs.append((e, start_id, origin, theta0))
    if config.n_jobs in (None, 1) or len(jobs) == 1:
        results = [_solve(seq, arrays, dims, e, sid, origin, th, config) for e, sid, origin, th in jobs]
    else:
        results = Parallel(n_jobs=config.n_jobs)(
            delayed(_solve)(seq, arrays, dims, e, sid, origin, th, config) for e, sid, origin, th in jobs
        )
    results.sort(key=lambda r: (r[0].event_type, r[0].start_id))
    traces = [tr for tr, _ in results]

    k = dims.d_e * dims.d_x
    nu = np.empty(dims.d_e)
    alpha = np.empty((dims.d_e, dims.d_x, dims.d_e))
    beta = np.empty_like(alpha)
    chosen = []
    for e in range(dims.d_e):
        best = None
        for tr, theta in results:
            if tr.event_type != e or theta is None:
                continue
            # strict comparison keeps the lowest start id among ties
            if best is None or tr.final_value > best[0].final_value:
                best = (tr, theta)
        if best is None:
            raise EstimationError(f"every start failed for event type {e}", traces)
        tr, theta = best
        chosen.append(tr.start_id)
        nu[e] = theta[0]
        alpha[:, :, e] = theta[1:1 + k].reshape(dims.d_e, dims.d_x)
        beta[:, :, e] = theta[1 + k:].reshape(dims.d_e, dims.d_x)

    model = SdHawkesModel(nu, alpha, beta, transition.phi, dims.event_labels, dims.state_labels)
    check_model(model)
    breakdown = lk.log_likelihood(model, seq)
    return EstimateResult(model, breakdown.total, breakdown, traces, chosen, transition)


def fit_ordinary(seq, event_labels=None, config=None):
    """Fit an ordinary (single-state) Hawkes process to the event times and types.

    Applied to a lifted sequence this fits the ``d_e * d_x``-type alternative
    in which every (event, state) pair has its own intensity and kernels.
    """
    if event_labels is None:
        d_e = int(seq.events.max()) + 1 if len(seq.events) else 1
        event_labels = tuple(f"e{i}" for i in range(d_e))
    dims = Dimensions(tuple(event_labels), ("*",))
    return fit(seq.erase_states(), dims, config)
