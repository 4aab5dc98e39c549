"""Exact simulation by Ogata thinning.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, *stream])``; see :func:`make_rng`. Each candidate
point consumes two uniforms (waiting time, acceptance) and each accepted
event two more (event type, new state), in that order, both in the
compiled loop and in :func:`simulate_next`.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from .exceptions import ExplosionError, InvalidInputError
from .intensity import IntensityState, right_limit_intensity
from .model import MarkedSequence, check_model

#: Identifies the random stream layout; bump when draws change meaning.
RNG_SCHEME = "numpy.PCG64+SeedSequence/thinning-v1"


def make_rng(seed, *stream):
    """Generator for ``(seed, *stream)``; replications pass their index as ``stream``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class SimulationConfig:
    """Stop at ``horizon`` or after ``n_events`` events, whichever comes first."""

    initial_state: int = 0
    horizon: float = math.inf
    seed: int = 0
    start_time: float = 0.0
    n_events: int | None = None
    max_events: int = 10_000_000

    def __post_init__(self):
        if self.max_events < 1:
            raise InvalidInputError("max_events must be at least 1")
        if not self.horizon > self.start_time:
            raise InvalidInputError(f"horizon {self.horizon} must exceed start time {self.start_time}")
        if self.n_events is None and math.isinf(self.horizon):
            raise InvalidInputError("give a finite horizon or a target number of events")
        if self.n_events is not None:
            if self.n_events < 1:
                raise InvalidInputError("n_events must be positive")
            if self.n_events > self.max_events:
                raise InvalidInputError("n_events exceeds max_events")


def _initial_sums(model, history):
    S = np.zeros(model.alpha.shape)
    if history is None:
        return S
    state = IntensityState.from_sequence(model, history, upto=history.T)
    return state.S.copy()


def simulate(model, config, history=None, rng=None):
    """Simulate a path on ``(start, horizon]``.

    With ``history`` (a sequence whose window ends at the start time) the
    intensity is initialised from its events, which are prepended to the
    output as a history prefix. The returned window ends at ``horizon``, or
    at the last event when stopping on ``n_events``.
    """
    check_model(model)
    start = config.start_time if history is None else history.T
    x0 = config.initial_state
    if history is not None:
        x0 = int(history.states[-1]) if len(history.times) else history.initial_state
    if not 0 <= x0 < model.d_x:
        raise InvalidInputError(f"initial state {x0} out of range")
    if rng is None:
        rng = make_rng(config.seed)
    S = _initial_sums(model, history)
    n_target = -1 if config.n_events is None else config.n_events
    times, events, states, status = _core.simulate_loop(
        np.ascontiguousarray(model.nu), np.ascontiguousarray(model.alpha),
        np.ascontiguousarray(model.beta), np.ascontiguousarray(model.phi),
        S, float(start), int(x0), float(config.horizon), int(n_target), int(config.max_events), rng,
    )
    if status == _core.STATUS_EXPLODED:
        raise ExplosionError(len(times) + 1, config.max_events)
    T = config.horizon
    if config.n_events is not None and len(times) == config.n_events:
        T = float(times[-1])
    if history is not None:
        times = np.concatenate([history.times, times])
        events = np.concatenate([history.events, events])
        states = np.concatenate([history.states, states])
    return MarkedSequence(times, events, states, initial_state=x0, t0=start, T=T)


def simulate_next(model, state, rng, horizon=math.inf):
    """One thinning step from ``state`` (an :class:`IntensityState`).

    ``rng`` needs only a ``random()`` method. On success the state is advanced
    to the new event, the event is recorded and ``(t, e, x)`` returned; if the
    next candidate falls beyond ``horizon`` the state is left at the last
    candidate and ``None`` is returned.
    """
    R = float(right_limit_intensity(model, state).sum())
    while True:
        wait = -math.log(1.0 - rng.random()) / R
        t_cand = state.current_time + wait
        if t_cand > horizon:
            return None
        state.advance(wait)
        lam = right_limit_intensity(model, state)
        R_new = float(lam.sum())
        if rng.random() < R_new / R:
            e = _pick(lam, rng.random() * R_new)
            x = _pick(model.phi[e, state.current_state], rng.random())
            state.on_event(e, x)
            return state.current_time, e, x
        R = R_new


def _pick(weights, target):
    c = 0.0
    last = 0
    for i, w in enumerate(weights):
        if w > 0:
            c += w
            last = i
            if c > target:
                return i
    return last
