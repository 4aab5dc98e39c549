"""Rolling evaluation of event and lifted intensities.

An :class:`IntensityState` carries, for every kernel component ``(e', x', e)``,

* ``S``  -- decayed sums ``sum_i exp(-beta (t - t_i))``,
* ``S1`` -- ``sum_i (t - t_i) exp(-beta (t - t_i))`` (used for beta-gradients),
* ``C``  -- ``sum_i alpha/beta * exp(-beta (max(t0, t_i) - t_i))``,

over all recorded events. ``advance`` applies multiplicative decay, so
updates cost O(d_e^2 d_x) regardless of history length.
"""

import numpy as np

from ._core import UNDERFLOW
from .exceptions import InvalidInputError


class IntensityState:
    """Mutable accumulator for one path; not shared between workers."""

    def __init__(self, model, start_time=0.0, initial_state=0, t0=None):
        shape = model.alpha.shape
        self.alpha = model.alpha
        self.beta = model.beta
        self.current_time = float(start_time)
        self.current_state = int(initial_state)
        self._state_before = self.current_state
        self.t0 = float(start_time if t0 is None else t0)
        self.S = np.zeros(shape)
        self.S1 = np.zeros(shape)
        self.C = np.zeros(shape)
        # contribution of events recorded exactly at current_time
        self._jump = np.zeros(shape)

    @classmethod
    def from_sequence(cls, model, seq, upto=None):
        """State after replaying every event of ``seq`` with time ``<= upto``.

        ``upto`` defaults to ``seq.t0``: the history prefix is absorbed and the
        state sits at the window start.
        """
        upto = seq.t0 if upto is None else float(upto)
        start = seq.t0
        if len(seq.times) and seq.times[0] < start:
            start = float(seq.times[0])
        state = cls(model, start_time=start, initial_state=seq.initial_state, t0=seq.t0)
        for t, e, x in zip(seq.times.tolist(), seq.events.tolist(), seq.states.tolist()):
            if t > upto:
                break
            state.advance_to(t)
            state.on_event(e, x)
        state.advance_to(max(upto, state.current_time))
        return state

    def copy(self):
        other = object.__new__(IntensityState)
        other.__dict__.update(self.__dict__)
        for name in ("S", "S1", "C", "_jump"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def advance(self, dt):
        if dt < 0:
            raise InvalidInputError(f"cannot advance by negative dt={dt}")
        if dt == 0:
            return self
        decay = np.exp(-self.beta * dt)
        self.S1 = decay * (self.S1 + dt * self.S)
        self.S = decay * self.S
        small = self.S < UNDERFLOW
        self.S[small] = 0.0
        self.S1[small] = 0.0
        self._jump[:] = 0.0
        self.current_time += dt
        return self

    def advance_to(self, t):
        return self.advance(t - self.current_time)

    def on_event(self, e, x):
        """Record an event of type ``e`` leaving the state in ``x`` at ``current_time``."""
        t = self.current_time
        self.S[e, x, :] += 1.0
        self._jump[e, x, :] += 1.0
        lag = max(self.t0, t) - t
        self.C[e, x, :] += self.alpha[e, x, :] / self.beta[e, x, :] * np.exp(-self.beta[e, x, :] * lag)
        self._state_before = self.current_state
        self.current_state = int(x)
        return self


def _excitation(model, S):
    return np.einsum("ije,ije->e", model.alpha, S)


def intensity_at(model, state):
    """``lambda_e(t)`` at ``state.current_time``, excluding any event recorded at that instant."""
    return model.nu + _excitation(model, state.S - state._jump)


def right_limit_intensity(model, state):
    """``lambda_e(t+)`` including the jump of an event recorded exactly at ``current_time``."""
    return model.nu + _excitation(model, state.S)


def lifted_intensity_at(model, state, right_limit=False):
    """``phi_e(X(t), x) * lambda_e(t)`` as a ``(d_e, d_x)`` matrix.

    ``X(t)`` is the state in force just before ``t``; with ``right_limit`` the
    state and intensity after an event at ``t`` are used instead.
    """
    if right_limit:
        lam = right_limit_intensity(model, state)
        x = state.current_state
    else:
        lam = intensity_at(model, state)
        x = state.current_state if not state._jump.any() else state._state_before
    return model.phi[:, x, :] * lam[:, None]


def compensator(model, state):
    """``int_{t0}^{t} lambda_e(u) du`` for every ``e`` using the C/S identity."""
    ratio = model.alpha / model.beta
    t = state.current_time
    S_left = state.S - state._jump
    C_left = state.C - state._jump * ratio
    return model.nu * (t - state.t0) + (C_left - ratio * S_left).sum(axis=(0, 1))
