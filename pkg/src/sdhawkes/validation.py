"""Input coercion for the estimator front end."""

import numpy as np

from .exceptions import InvalidInputError
from .model import Dimensions, MarkedSequence, SdHawkesModel, check_model


def check_sequence(X, *, initial_state=None, t0=None, T=None):
    """Coerce ``X`` into a :class:`MarkedSequence`.

    ``X`` may be a sequence (returned unchanged unless window arguments are
    given), a mapping with ``times``/``events``/``states`` keys, or an
    ``(n, 3)`` array of ``time, event, state`` rows. For raw arrays the
    window defaults to ``(0, last time]`` and the initial state to 0.
    """
    if isinstance(X, MarkedSequence):
        changes = {k: v for k, v in (("initial_state", initial_state), ("t0", t0), ("T", T)) if v is not None}
        return X.replace(**changes) if changes else X
    if isinstance(X, dict):
        try:
            times, events, states = X["times"], X["events"], X["states"]
        except KeyError as exc:
            raise InvalidInputError(f"sequence mapping lacks {exc.args[0]!r}") from None
        initial_state = X.get("initial_state", initial_state)
        t0 = X.get("t0", t0)
        T = X.get("T", T)
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise InvalidInputError(f"expected an (n, 3) array of time, event, state; got shape {arr.shape}")
        times = arr[:, 0]
        events, states = arr[:, 1], arr[:, 2]
        if np.any(events != np.round(events)) or np.any(states != np.round(states)):
            raise InvalidInputError("event and state columns must hold integers")
    times = np.asarray(times, dtype=float)
    t0 = 0.0 if t0 is None else t0
    if T is None:
        if len(times) == 0:
            raise InvalidInputError("an empty sequence needs an explicit end time T")
        T = float(times[-1])
    return MarkedSequence(
        times, np.asarray(events).astype(np.int64), np.asarray(states).astype(np.int64),
        initial_state=0 if initial_state is None else initial_state, t0=t0, T=T,
    )


def infer_dimensions(seq, event_labels=None, state_labels=None):
    """Dimensions from explicit labels, else from the largest indices in ``seq``."""
    if event_labels is None:
        d_e = int(seq.events.max()) + 1 if len(seq.events) else 1
        event_labels = tuple(str(i) for i in range(d_e))
    if state_labels is None:
        top = max([seq.initial_state, *seq.states.tolist()])
        state_labels = tuple(str(i) for i in range(top + 1))
    dims = Dimensions(tuple(event_labels), tuple(state_labels))
    seq.check_dims(dims)
    return dims


def check_model_arg(model):
    if not isinstance(model, SdHawkesModel):
        raise InvalidInputError(f"expected an SdHawkesModel, got {type(model).__name__}")
    check_model(model)
    return model
