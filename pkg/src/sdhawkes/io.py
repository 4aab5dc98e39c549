"""Model JSON documents and sequence CSV files with a JSON sidecar."""

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ParseError
from .model import MarkedSequence, SdHawkesModel


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from None
    return SdHawkesModel.from_dict(doc)


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def save_sequence(seq, path, event_labels=None, state_labels=None):
    """Write ``time,event,state`` rows and the ``{initial_state, t0, T}`` sidecar.

    Optional labels are stored in the sidecar as well.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "event", "state"])
        for t, e, x in zip(seq.times.tolist(), seq.events.tolist(), seq.states.tolist()):
            w.writerow([repr(t), e, x])
    side = {"initial_state": seq.initial_state, "t0": seq.t0, "T": seq.T}
    if event_labels is not None:
        side["event_labels"] = list(event_labels)
    if state_labels is not None:
        side["state_labels"] = list(state_labels)
    sidecar_path(path).write_text(json.dumps(side, indent=2) + "\n")


def load_sequence(path, sidecar=None):
    path = Path(path)
    sidecar = Path(sidecar) if sidecar is not None else sidecar_path(path)
    try:
        side = json.loads(sidecar.read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"missing sequence sidecar {sidecar}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{sidecar}: invalid JSON ({exc.msg})", exc.lineno) from None
    times, events, states = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time", "event", "state"]:
            raise ParseError(f"{path}: expected header 'time,event,state'", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, got {len(row)}", lineno)
            try:
                times.append(float(row[0]))
                events.append(int(row[1]))
                states.append(int(row[2]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    try:
        return MarkedSequence(
            times=np.array(times, dtype=float),
            events=np.array(events, dtype=np.int64),
            states=np.array(states, dtype=np.int64),
            initial_state=int(side["initial_state"]),
            t0=float(side["t0"]),
            T=float(side["T"]),
        )
    except KeyError as exc:
        raise InvalidInputError(f"sidecar {sidecar} lacks field {exc}") from None


def load_sequence_labels(path, sidecar=None):
    """``(event_labels, state_labels)`` from a sequence sidecar; ``None`` where absent."""
    sidecar = Path(sidecar) if sidecar is not None else sidecar_path(path)
    try:
        side = json.loads(sidecar.read_text())
    except (FileNotFoundError, json.JSONDecodeError):
        return None, None
    ev, st = side.get("event_labels"), side.get("state_labels")
    return (tuple(ev) if ev else None), (tuple(st) if st else None)
