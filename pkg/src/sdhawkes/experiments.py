"""Monte Carlo consistency study and parametric bootstrap.

Every replication draws from its own generator ``make_rng(seed, ...)`` so
results do not depend on scheduling or on the number of workers.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .analysis import curve_array, default_time_grid
from .estimate import FitConfig, fit
from .exceptions import InvalidInputError, EstimationError, SdHawkesError
from .model import check_model
from .simulate import SimulationConfig, make_rng, simulate

log = logging.getLogger(__name__)

GROUPS = ("phi", "nu", "alpha", "beta")


def worst_relative_error(theta_hat, theta):
    """Signed ``(theta_hat[j] - theta[j]) / theta[j]`` at the worst coordinate ``j``.

    Ties go to the lowest index.
    """
    th = np.asarray(theta, dtype=float).ravel()
    est = np.asarray(theta_hat, dtype=float).ravel()
    if th.shape != est.shape:
        raise InvalidInputError(f"length mismatch: {est.shape} vs {th.shape}")
    if th.size == 0:
        raise InvalidInputError("empty parameter vector")
    if np.any(th <= 0):
        raise InvalidInputError("true values must be strictly positive; use worst_absolute_error")
    rel = (est - th) / th
    return float(rel[np.argmax(np.abs(rel))])


def worst_absolute_error(theta_hat, theta):
    """Signed ``theta_hat[j] - theta[j]`` at the worst coordinate (lowest index on ties)."""
    th = np.asarray(theta, dtype=float).ravel()
    est = np.asarray(theta_hat, dtype=float).ravel()
    if th.shape != est.shape:
        raise InvalidInputError(f"length mismatch: {est.shape} vs {th.shape}")
    if th.size == 0:
        raise InvalidInputError("empty parameter vector")
    diff = est - th
    return float(diff[np.argmax(np.abs(diff))])


def group_errors(fitted, true):
    """Worst errors of the four parameter groups; absolute for ``phi``.

    ``alpha`` and ``beta`` are compared only where the true ``alpha`` is positive.
    """
    # kernels with zero true alpha have no identifiable decay and no relative
    # alpha error, so both kernel groups are scored on the active kernels only
    active = true.alpha > 0
    if active.any():
        alpha = worst_relative_error(fitted.alpha[active], true.alpha[active])
        beta = worst_relative_error(fitted.beta[active], true.beta[active])
    else:
        alpha = beta = math.nan
    return {
        "phi": worst_absolute_error(fitted.phi, true.phi),
        "nu": worst_relative_error(fitted.nu, true.nu),
        "alpha": alpha,
        "beta": beta,
    }


@dataclass(frozen=True)
class ReplicationResult:
    n_events: int
    replication: int
    errors: dict
    status: str = "ok"


@dataclass
class WorstErrorReport:
    """All replication results, grouped by sample size."""

    results: list = field(default_factory=list)

    @property
    def sample_sizes(self):
        return sorted({r.n_events for r in self.results})

    def errors(self, group, n_events):
        return np.array([r.errors[group] for r in self.results
                         if r.n_events == n_events and r.status == "ok"])

    def median_abs(self, group, n_events):
        e = self.errors(group, n_events)
        return float(np.median(np.abs(e))) if len(e) else math.nan

    def n_failed(self, n_events=None):
        return sum(r.status != "ok" for r in self.results if n_events in (None, r.n_events))

    def summary(self):
        return {
            str(n): {
                "replications": sum(r.n_events == n for r in self.results),
                "failed": self.n_failed(n),
                "median_abs_error": {g: self.median_abs(g, n) for g in GROUPS},
            }
            for n in self.sample_sizes
        }

    def rows(self):
        for r in self.results:
            for g in GROUPS:
                yield r.n_events, r.replication, g, r.errors.get(g, math.nan), r.status


def run_replication(model, n_events, replication, seed=0, fit_config=None, initial_state=0):
    """Simulate ``n_events`` events and fit with the true parameters as the only start."""
    rng = make_rng(seed, n_events, replication)
    config = fit_config or FitConfig(n_random_starts=0, warm_starts=(model,))
    try:
        seq = simulate(model, SimulationConfig(initial_state=initial_state, n_events=n_events), rng=rng)
        fitted = fit(seq, model.dims, config).model
    except (SdHawkesError, ArithmeticError, ValueError) as exc:
        log.warning("replication %d at N=%d failed: %s", replication, n_events, exc)
        return ReplicationResult(n_events, replication, {g: math.nan for g in GROUPS}, f"failed: {exc}")
    return ReplicationResult(n_events, replication, group_errors(fitted, model))


def monte_carlo_consistency(model, sample_sizes, n_replications=20, seed=0, n_jobs=1,
                            fit_config=None, initial_state=0):
    """Worst-error study over ``sample_sizes`` with ``n_replications`` paths each."""
    check_model(model)
    if n_replications < 0:
        raise InvalidInputError("n_replications must be non-negative")
    tasks = [(int(n), r) for n in sample_sizes for r in range(n_replications)]
    if any(n < 1 for n, _ in tasks):
        raise InvalidInputError("sample sizes must be positive")
    if n_jobs in (None, 1) or len(tasks) <= 1:
        results = [run_replication(model, n, r, seed, fit_config, initial_state) for n, r in tasks]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(run_replication)(model, n, r, seed, fit_config, initial_state) for n, r in tasks
        )
    results.sort(key=lambda r: (r.n_events, r.replication))
    return WorstErrorReport(results)


def write_mc_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_events", "replication", "group", "value", "status"])
        for n, rep, g, v, status in report.rows():
            w.writerow([n, rep, g, repr(float(v)), status])


# bootstrap -------------------------------------------------------------------

def parameter_names(model):
    names = [f"nu[{e}]" for e in range(model.d_e)]
    for key in ("alpha", "beta"):
        names += [f"{key}[{i},{x},{e}]" for i, x, e in np.ndindex(model.alpha.shape)]
    names += [f"phi[{e},{x},{y}]" for e, x, y in np.ndindex(model.phi.shape)]
    return names


def parameter_vector(model):
    return np.concatenate([model.nu, model.alpha.ravel(), model.beta.ravel(), model.phi.ravel()])


@dataclass
class BootstrapResult:
    """Empirical quantile bands from re-fitted bootstrap paths.

    ``parameter_bands`` has shape ``(n_quantiles, n_parameters)`` ordered as
    :func:`parameter_names`; ``curve_bands`` has shape
    ``(n_quantiles, d_e, d_x, d_e, len(grid))`` indexed by
    ``(source, state, target, t)``.
    """

    quantiles: np.ndarray
    grid: np.ndarray
    parameter_names: list
    estimates: np.ndarray
    parameter_bands: np.ndarray
    curve_bands: np.ndarray
    n_success: int
    n_failed: int
    replications: list

    def band(self, lower_q, upper_q):
        qs = list(self.quantiles)
        return self.curve_bands[qs.index(lower_q)], self.curve_bands[qs.index(upper_q)]

    def coverage(self, model, lower_q=None, upper_q=None):
        """Fraction of grid points where ``model``'s truncated-norm curves lie in the band."""
        lower_q = self.quantiles[0] if lower_q is None else lower_q
        upper_q = self.quantiles[-1] if upper_q is None else upper_q
        lo, hi = self.band(lower_q, upper_q)
        true = curve_array(model, self.grid)
        inside = (true >= lo) & (true <= hi)
        return float(inside.mean())

    def to_dict(self):
        return {
            "quantiles": self.quantiles.tolist(),
            "n_success": self.n_success,
            "n_failed": self.n_failed,
            "parameters": {
                name: self.parameter_bands[:, j].tolist() for j, name in enumerate(self.parameter_names)
            },
        }


def _bootstrap_one(model, horizon, stream, seed, config, initial_state, grid):
    rng = make_rng(seed, stream)
    try:
        seq = simulate(model, SimulationConfig(initial_state=initial_state, horizon=horizon), rng=rng)
        fitted = fit(seq, model.dims, config).model
    except (SdHawkesError, ArithmeticError, ValueError) as exc:
        log.warning("bootstrap path %d failed: %s", stream, exc)
        return None
    return parameter_vector(fitted), curve_array(fitted, grid)


def parametric_bootstrap(model, horizon, n_boot=100, seed=0, quantiles=(0.005, 0.995), grid=None,
                         fit_config=None, n_jobs=1, initial_state=0, min_success=0.5, streams=None):
    """Simulate ``n_boot`` paths on ``(0, horizon]`` at ``model``, re-fit each, take quantiles.

    ``streams`` overrides the per-path random stream ids (default
    ``0 .. n_boot - 1``). At least ``max(2, ceil(min_success * n_boot))``
    fits must succeed.
    """
    check_model(model)
    if n_boot < 2:
        raise InvalidInputError("the bootstrap needs at least two paths")
    streams = list(range(n_boot)) if streams is None else [int(s) for s in streams]
    if len(streams) != n_boot:
        raise InvalidInputError("need one stream id per bootstrap path")
    quantiles = np.sort(np.asarray(quantiles, dtype=float))
    if np.any((quantiles < 0) | (quantiles > 1)):
        raise InvalidInputError("quantiles must lie in [0, 1]")
    grid = default_time_grid() if grid is None else np.asarray(grid, dtype=float)
    config = fit_config or FitConfig(n_random_starts=0, warm_starts=(model,))
    if n_jobs in (None, 1):
        out = [_bootstrap_one(model, horizon, s, seed, config, initial_state, grid) for s in streams]
    else:
        out = Parallel(n_jobs=n_jobs)(
            delayed(_bootstrap_one)(model, horizon, s, seed, config, initial_state, grid) for s in streams
        )
    ok = [o for o in out if o is not None]
    needed = max(2, math.ceil(min_success * n_boot))
    if len(ok) < needed:
        raise EstimationError(f"only {len(ok)} of {n_boot} bootstrap fits succeeded (need {needed})", [])
    params = np.array([p for p, _ in ok])
    curves = np.array([c for _, c in ok])
    return BootstrapResult(
        quantiles=quantiles,
        grid=grid,
        parameter_names=parameter_names(model),
        estimates=params,
        parameter_bands=np.quantile(params, quantiles, axis=0),
        curve_bands=np.quantile(curves, quantiles, axis=0),
        n_success=len(ok),
        n_failed=n_boot - len(ok),
        replications=[s for s, o in zip(streams, out) if o is not None],
    )


def write_bootstrap_csv(result, path):
    """Long format: one row per (replication, parameter)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", "parameter", "value"])
        for rep, row in zip(result.replications, result.estimates):
            for name, v in zip(result.parameter_names, row):
                w.writerow([rep, name, repr(float(v))])


def write_band_csv(result, path, labels=None):
    """Curve bands: ``source,target,state,t,q_lo,...``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target", "state", "t", *[f"q{q:g}" for q in result.quantiles]])
        d_e, d_x = result.curve_bands.shape[1:3]
        for src, x, dst in np.ndindex(d_e, d_x, d_e):
            for k, t in enumerate(result.grid):
                w.writerow([src, dst, x, repr(float(t)),
                            *[repr(float(result.curve_bands[q, src, x, dst, k]))
                              for q in range(len(result.quantiles))]])
