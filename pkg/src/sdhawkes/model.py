"""Domain types for state-dependent Hawkes processes with exponential kernels.

Array conventions (0-based throughout):

* ``nu[e]`` base rate of event type ``e``;
* ``alpha[e', x', e]`` / ``beta[e', x', e]`` impact and decay of the kernel
  from an event of type ``e'`` after which the state is ``x'`` onto type ``e``;
* ``phi[e, x, x']`` probability that an event of type ``e`` moves the state
  from ``x`` to ``x'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError

#: Row sums of transition matrices must equal one within this tolerance.
ROW_SUM_TOL = 1e-12


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dimensions:
    """Event and state spaces, identified by their labels."""

    event_labels: tuple
    state_labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "event_labels", tuple(str(s) for s in self.event_labels))
        object.__setattr__(self, "state_labels", tuple(str(s) for s in self.state_labels))
        for name, labels in (("event", self.event_labels), ("state", self.state_labels)):
            if len(labels) < 1:
                raise InvalidInputError(f"need at least one {name} label")
            if len(set(labels)) != len(labels):
                raise InvalidInputError(f"{name} labels must be distinct: {labels}")

    @classmethod
    def from_sizes(cls, d_e, d_x):
        if d_e < 1 or d_x < 1:
            raise InvalidInputError(f"d_e and d_x must be positive, got {d_e}, {d_x}")
        return cls(tuple(f"e{i}" for i in range(d_e)), tuple(f"x{i}" for i in range(d_x)))

    @property
    def d_e(self):
        return len(self.event_labels)

    @property
    def d_x(self):
        return len(self.state_labels)

    def composite_index(self, e, x):
        """Index of the pair ``(e, x)`` in the lifted event space (event-major)."""
        if not (0 <= e < self.d_e and 0 <= x < self.d_x):
            raise InvalidInputError(f"pair ({e}, {x}) out of range for d_e={self.d_e}, d_x={self.d_x}")
        return e * self.d_x + x

    def split_index(self, k):
        if not 0 <= k < self.d_e * self.d_x:
            raise InvalidInputError(f"composite index {k} out of range")
        return divmod(k, self.d_x)


class SdHawkesModel:
    """Parameters ``(phi, nu, alpha, beta)`` of an sdHawkes process.

    Construction only checks array shapes. Value-level invariants (positivity,
    stochastic rows) are reported by :func:`validate` so that infeasible
    parameter sets can still be represented and inspected.
    """

    def __init__(self, nu, alpha, beta, phi, event_labels=None, state_labels=None):
        nu = _frozen(nu)
        alpha = _frozen(alpha)
        beta = _frozen(beta)
        phi = _frozen(phi)
        if nu.ndim != 1:
            raise InvalidInputError(f"nu must be 1-D, got shape {nu.shape}")
        d_e = nu.shape[0]
        if alpha.ndim != 3 or alpha.shape[0] != d_e or alpha.shape[2] != d_e:
            raise InvalidInputError(f"alpha must have shape (d_e, d_x, d_e), got {alpha.shape}")
        d_x = alpha.shape[1]
        if beta.shape != alpha.shape:
            raise InvalidInputError(f"beta shape {beta.shape} differs from alpha shape {alpha.shape}")
        if phi.shape != (d_e, d_x, d_x):
            raise InvalidInputError(f"phi must have shape {(d_e, d_x, d_x)}, got {phi.shape}")
        if event_labels is None:
            event_labels = tuple(f"e{i}" for i in range(d_e))
        if state_labels is None:
            state_labels = tuple(f"x{i}" for i in range(d_x))
        dims = Dimensions(tuple(event_labels), tuple(state_labels))
        if dims.d_e != d_e or dims.d_x != d_x:
            raise InvalidInputError(
                f"labels ({dims.d_e} events, {dims.d_x} states) do not match arrays ({d_e}, {d_x})"
            )
        self.dims = dims
        self.nu = nu
        self.alpha = alpha
        self.beta = beta
        self.phi = phi

    @property
    def d_e(self):
        return self.dims.d_e

    @property
    def d_x(self):
        return self.dims.d_x

    @property
    def n_hawkes_params(self):
        return self.d_e + 2 * self.alpha.size

    def replace(self, **changes):
        kwargs = dict(
            nu=self.nu,
            alpha=self.alpha,
            beta=self.beta,
            phi=self.phi,
            event_labels=self.dims.event_labels,
            state_labels=self.dims.state_labels,
        )
        kwargs.update(changes)
        return SdHawkesModel(**kwargs)

    def kernel_norms(self):
        """Full L1 norms ``alpha / beta`` with the same indexing as alpha."""
        return self.alpha / self.beta

    def to_dict(self):
        return {
            "event_labels": list(self.dims.event_labels),
            "state_labels": list(self.dims.state_labels),
            "nu": self.nu.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "phi": self.phi.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                nu=d["nu"],
                alpha=d["alpha"],
                beta=d["beta"],
                phi=d["phi"],
                event_labels=d.get("event_labels"),
                state_labels=d.get("state_labels"),
            )
        except KeyError as exc:
            raise InvalidInputError(f"model document lacks field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed model document: {exc}") from None

    def __eq__(self, other):
        if not isinstance(other, SdHawkesModel):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.nu, other.nu)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.phi, other.phi)
        )

    __hash__ = None

    def __repr__(self):
        return f"SdHawkesModel(d_e={self.d_e}, d_x={self.d_x}, nu={self.nu.tolist()})"


@dataclass(frozen=True, eq=False)
class MarkedSequence:
    """A realisation ``{(t_n, e_n, x_n)}`` observed on the window ``(t0, T]``.

    Events with ``t_n <= t0`` form a history prefix: they feed the intensity
    but are not themselves part of the likelihood. ``initial_state`` is the
    state at ``t0``; when a history prefix exists it must equal the state
    after the last history event.
    """

    times: np.ndarray
    events: np.ndarray
    states: np.ndarray
    initial_state: int
    t0: float
    T: float
    n_history: int = field(init=False)

    def __post_init__(self):
        times = _frozen(self.times, float).reshape(-1)
        events = _frozen(self.events, np.int64).reshape(-1)
        states = _frozen(self.states, np.int64).reshape(-1)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial_state", int(self.initial_state))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        if not (len(times) == len(events) == len(states)):
            raise InvalidInputError(
                f"times/events/states lengths differ: {len(times)}, {len(events)}, {len(states)}"
            )
        if not np.all(np.isfinite(times)):
            raise InvalidInputError("times must be finite")
        if not self.t0 < self.T:
            raise InvalidInputError(f"window requires t0 < T, got ({self.t0}, {self.T})")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            k = int(np.argmax(np.diff(times) <= 0))
            raise InvalidInputError(f"times must be strictly increasing (index {k + 1})")
        if len(times) and times[-1] > self.T:
            raise InvalidInputError(f"event at {times[-1]} lies after T={self.T}")
        if np.any(events < 0) or np.any(states < 0) or self.initial_state < 0:
            raise InvalidInputError("event and state indices must be non-negative")
        n_hist = int(np.searchsorted(times, self.t0, side="right"))
        object.__setattr__(self, "n_history", n_hist)
        if n_hist and states[n_hist - 1] != self.initial_state:
            raise InvalidInputError(
                f"initial_state={self.initial_state} disagrees with the state after the last "
                f"history event ({states[n_hist - 1]})"
            )

    @property
    def n_events(self):
        """Number of events inside the window."""
        return len(self.times) - self.n_history

    def __len__(self):
        return self.n_events

    def window(self):
        return self.t0, self.T

    def previous_states(self):
        """State before each in-window event (``x_{n-1}``)."""
        st = self.states[self.n_history:]
        prev = np.empty_like(st)
        if len(st):
            prev[0] = self.initial_state
            prev[1:] = st[:-1]
        return prev

    def check_dims(self, dims):
        if len(self.events) and self.events.max() >= dims.d_e:
            raise InvalidInputError(f"event index {self.events.max()} out of range for d_e={dims.d_e}")
        if len(self.states) and self.states.max() >= dims.d_x:
            raise InvalidInputError(f"state index {self.states.max()} out of range for d_x={dims.d_x}")
        if self.initial_state >= dims.d_x:
            raise InvalidInputError(f"initial_state {self.initial_state} out of range for d_x={dims.d_x}")

    def replace(self, **changes):
        kwargs = dict(
            times=self.times,
            events=self.events,
            states=self.states,
            initial_state=self.initial_state,
            t0=self.t0,
            T=self.T,
        )
        kwargs.update(changes)
        return MarkedSequence(**kwargs)

    def erase_states(self):
        """The same events with a single dummy state (ordinary Hawkes data)."""
        return self.replace(states=np.zeros_like(self.states), initial_state=0)

    def __eq__(self, other):
        if not isinstance(other, MarkedSequence):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.events, other.events)
            and np.array_equal(self.states, other.states)
            and self.initial_state == other.initial_state
            and self.t0 == other.t0
            and self.T == other.T
        )

    __hash__ = None


def validate(model):
    """Return the list of violated model invariants (empty when valid)."""
    problems = []
    if not np.all(np.isfinite(model.nu)) or np.any(model.nu <= 0):
        bad = np.flatnonzero(~(model.nu > 0)).tolist()
        problems.append(f"base rate not strictly positive for event types {bad}")
    if not np.all(np.isfinite(model.alpha)) or np.any(model.alpha < 0):
        problems.append("impact coefficients alpha must be finite and non-negative")
    if not np.all(np.isfinite(model.beta)) or np.any(model.beta <= 0):
        problems.append("decay coefficients beta must be finite and strictly positive")
    phi = model.phi
    if np.any(phi < 0) or np.any(phi > 1) or not np.all(np.isfinite(phi)):
        problems.append("transition probabilities must lie in [0, 1]")
    sums = phi.sum(axis=2)
    for e, x in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)):
        problems.append(f"row sum != 1 for phi[{e}][{x}] (sum={sums[e, x]:.15g})")
    return problems


def check_model(model):
    """Raise :class:`InvalidInputError` listing every violated invariant."""
    problems = validate(model)
    if problems:
        raise InvalidInputError("invalid model: " + "; ".join(problems))
    return model


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the two sufficient conditions for a unique non-explosive process.

    ``condition_ii_lhs[e, x]`` is the summed kernel norm onto ``e``;
    ``condition_ii_bound[e, x]`` is ``1 / max_x' phi_e(x', x)`` (``inf`` if that
    column is zero). ``margin = bound - lhs`` is positive where the condition holds.
    """

    bounded_kernels: bool
    condition_ii_lhs: np.ndarray
    condition_ii_bound: np.ndarray
    margin: np.ndarray
    condition_ii: np.ndarray

    @property
    def condition_ii_all(self):
        return bool(np.all(self.condition_ii))

    @property
    def stable(self):
        return self.bounded_kernels or self.condition_ii_all


def check_stability(model):
    # exponential kernels are bounded by alpha, so condition (i) always holds
    bounded = bool(np.all(np.isfinite(model.alpha)))
    total_norm = model.kernel_norms().sum(axis=(0, 1))  # onto each e
    lhs = np.repeat(total_norm[:, None], model.d_x, axis=1)
    col_max = model.phi.max(axis=1)  # [e, x] = max_x' phi_e(x', x)
    with np.errstate(divide="ignore"):
        bound = np.where(col_max > 0, 1.0 / np.where(col_max > 0, col_max, 1.0), np.inf)
    margin = bound - lhs
    return StabilityReport(bounded, lhs, bound, margin, lhs < bound)


def lift_sequence(seq, dims):
    """Map ``(e_n, x_n)`` to the composite type ``e_n * d_x + x_n`` with one dummy state."""
    seq.check_dims(dims)
    composite = seq.events * dims.d_x + seq.states
    return MarkedSequence(
        times=seq.times,
        events=composite,
        states=np.zeros_like(composite),
        initial_state=0,
        t0=seq.t0,
        T=seq.T,
    )


def unlift_sequence(lifted, dims, initial_state):
    """Inverse of :func:`lift_sequence`; ``initial_state`` is not encoded by the lift."""
    n = dims.d_e * dims.d_x
    if len(lifted.events) and (lifted.events.max() >= n or lifted.events.min() < 0):
        raise InvalidInputError(f"composite index out of range for {n} lifted types")
    if np.any(lifted.states != 0):
        raise InvalidInputError("a lifted sequence carries only the dummy state 0")
    events, states = np.divmod(lifted.events, dims.d_x)
    return MarkedSequence(
        times=lifted.times,
        events=events,
        states=states,
        initial_state=initial_state,
        t0=lifted.t0,
        T=lifted.T,
    )


def lifted_dimensions(dims):
    labels = [f"{e}|{x}" for e in dims.event_labels for x in dims.state_labels]
    return Dimensions(tuple(labels), ("*",))
