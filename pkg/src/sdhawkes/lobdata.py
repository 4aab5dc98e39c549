"""LOBSTER-style message and order book ingestion.

A message file has six columns ``time,type,order_id,size,price,direction``
without a header; the book file has rows ``ask_price,ask_size,bid_price,bid_size``
aligned one-to-one with the messages, each row describing the book right
after its message. Prices are integers in units of 1e-4 currency.

Level-I events are labelled ``ask`` (0) or ``bid`` (1). Bid events are buy
market orders, buy limit orders at or inside the best bid, and cancellations
of sell orders at the best ask; ask events are the mirror image.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from enum import IntEnum

import numpy as np

from .exceptions import InvalidInputError, ParseError
from .model import MarkedSequence
from .presets import ASK_BID, QI_STATES, SPREAD_STATES

log = logging.getLogger(__name__)

ASK, BID = 0, 1
PRICE_SCALE = 10_000
NS = 1_000_000_000


class MessageType(IntEnum):
    SUBMISSION = 1
    PARTIAL_CANCEL = 2
    DELETION = 3
    EXECUTION_VISIBLE = 4
    EXECUTION_HIDDEN = 5
    AUCTION = 6
    HALT = 7


class UndefinedStateError(InvalidInputError):
    """The state variable is not defined for this book (e.g. an empty side)."""


@dataclass(frozen=True)
class LobMessage:
    time_ns: int
    msg_type: MessageType
    order_id: int
    size: int
    price: int
    direction: int
    line: int = 0

    @property
    def is_buy(self):
        return self.direction == 1


@dataclass(frozen=True)
class Level1Snapshot:
    ask_price: int
    ask_size: int
    bid_price: int
    bid_size: int

    @property
    def has_ask(self):
        return self.ask_size > 0

    @property
    def has_bid(self):
        return self.bid_size > 0


@dataclass(frozen=True)
class BookedMessage:
    """A message with the book before (``None`` for the first row) and after it."""

    message: LobMessage
    pre: Level1Snapshot | None
    post: Level1Snapshot | None


@dataclass(frozen=True)
class Level1Event:
    time_ns: int
    event: int
    post: Level1Snapshot
    line: int


@dataclass
class IngestReport:
    counts: Counter = field(default_factory=Counter)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {"counts": dict(sorted(self.counts.items())), "warnings": list(self.warnings)}


# parsing ---------------------------------------------------------------------

def _lines(source):
    if isinstance(source, (list, tuple)):
        return list(source)
    with open(source) as fh:
        return fh.read().splitlines()


def parse_time_ns(text):
    """Seconds after midnight as a decimal string -> integer nanoseconds (half-even)."""
    try:
        d = Decimal(text.strip())
    except InvalidOperation:
        raise InvalidInputError(f"bad time {text!r}") from None
    if not d.is_finite() or d < 0:
        raise InvalidInputError(f"bad time {text!r}")
    return int((d * NS).to_integral_value(rounding=ROUND_HALF_EVEN))


def format_time_ns(t_ns):
    return f"{t_ns // NS}.{t_ns % NS:09d}"


def _int_field(value, name):
    try:
        return int(value)
    except ValueError:
        raise InvalidInputError(f"{name} must be an integer, got {value!r}") from None


def parse_messages(source, report=None):
    """Parse a message file (path or list of lines) into :class:`LobMessage` objects.

    Decreasing timestamps are kept but noted in ``report.warnings``.
    """
    out = []
    prev = None
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip():
            continue
        parts = raw.strip().split(",")
        try:
            if len(parts) != 6:
                raise InvalidInputError(f"expected 6 fields, got {len(parts)}")
            t_ns = parse_time_ns(parts[0])
            code = _int_field(parts[1], "type")
            if code not in MessageType._value2member_map_:
                raise InvalidInputError(f"unknown message type {code}")
            order_id = _int_field(parts[2], "order id")
            size = _int_field(parts[3], "size")
            price = _int_field(parts[4], "price")
            direction = _int_field(parts[5], "direction")
            if direction not in (-1, 1):
                raise InvalidInputError(f"direction must be -1 or 1, got {direction}")
            mtype = MessageType(code)
            if size <= 0 and mtype in (MessageType.SUBMISSION, MessageType.EXECUTION_VISIBLE):
                raise InvalidInputError("size must be positive")
        except InvalidInputError as exc:
            raise ParseError(str(exc), lineno) from None
        if prev is not None and t_ns < prev:
            msg = f"line {lineno}: time decreases"
            log.warning(msg)
            if report is not None:
                report.warnings.append(msg)
        prev = t_ns
        out.append(LobMessage(t_ns, mtype, order_id, size, price, direction, lineno))
    return out


def format_message(msg):
    return ",".join([
        format_time_ns(msg.time_ns), str(int(msg.msg_type)), str(msg.order_id),
        str(msg.size), str(msg.price), str(msg.direction),
    ])


def parse_book(source):
    rows = []
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip():
            continue
        parts = raw.strip().split(",")
        try:
            if len(parts) < 4:
                raise InvalidInputError(f"expected at least 4 fields, got {len(parts)}")
            ap, asz, bp, bsz = (_int_field(p, "book field") for p in parts[:4])
            if asz < 0 or bsz < 0:
                raise InvalidInputError("negative queue size")
            if asz > 0 and bsz > 0 and ap <= bp:
                raise InvalidInputError(f"crossed book: ask {ap} <= bid {bp}")
        except InvalidInputError as exc:
            raise ParseError(str(exc), lineno) from None
        rows.append(Level1Snapshot(ap, asz, bp, bsz))
    return rows


def pair_with_book(messages, books=None):
    if books is None:
        return [BookedMessage(m, None, None) for m in messages]
    if len(books) != len(messages):
        raise InvalidInputError(f"{len(messages)} messages but {len(books)} book rows")
    return [BookedMessage(m, books[i - 1] if i else None, books[i]) for i, m in enumerate(messages)]


# event construction ----------------------------------------------------------

def aggregate_executions(records, report=None):
    """Merge consecutive visible executions with equal nanosecond time and direction.

    Accepts :class:`BookedMessage` or bare :class:`LobMessage` items. A merged
    record keeps the first message's id and pre-book, the summed size and the
    last message's post-book.
    """
    out = []
    for rec in records:
        booked = rec if isinstance(rec, BookedMessage) else BookedMessage(rec, None, None)
        m = booked.message
        if out and m.msg_type == MessageType.EXECUTION_VISIBLE:
            last = out[-1]
            lm = last.message
            if (lm.msg_type == MessageType.EXECUTION_VISIBLE and lm.time_ns == m.time_ns
                    and lm.direction == m.direction):
                merged = replace(lm, size=lm.size + m.size)
                out[-1] = BookedMessage(merged, last.pre, booked.post)
                if report is not None:
                    report.counts["aggregated"] += 1
                continue
        out.append(booked)
    if all(not isinstance(r, BookedMessage) for r in records):
        return [r.message for r in out]
    return out


_DROPPED = {
    MessageType.EXECUTION_HIDDEN: "dropped_hidden",
    MessageType.AUCTION: "dropped_auction",
    MessageType.HALT: "dropped_halt",
}


def classify_message(msg, pre):
    """``ASK``, ``BID``, or a string naming why the message is dropped."""
    t = msg.msg_type
    if t in _DROPPED:
        return _DROPPED[t]
    if t == MessageType.EXECUTION_VISIBLE:
        # a resting sell order filled means a buy market order hit the ask
        return BID if msg.direction == -1 else ASK
    if pre is None:
        return "dropped_no_book"
    if t == MessageType.SUBMISSION:
        if msg.is_buy:
            return BID if (not pre.has_bid or msg.price >= pre.bid_price) else "dropped_deeper"
        return ASK if (not pre.has_ask or msg.price <= pre.ask_price) else "dropped_deeper"
    # partial cancellation or deletion
    if msg.is_buy:
        return ASK if (pre.has_bid and msg.price >= pre.bid_price) else "dropped_deeper"
    return BID if (pre.has_ask and msg.price <= pre.ask_price) else "dropped_deeper"


def classify_level1(records, report=None):
    """Keep level-I messages as :class:`Level1Event` objects."""
    out = []
    for rec in records:
        label = classify_message(rec.message, rec.pre)
        if isinstance(label, str):
            if report is not None:
                report.counts[label] += 1
            continue
        if rec.post is None:
            raise InvalidInputError(f"line {rec.message.line}: no order book row")
        out.append(Level1Event(rec.message.time_ns, label, rec.post, rec.message.line))
    return out


# state variables -------------------------------------------------------------

def spread_state(snapshot, tick_size):
    """0 (``"1"``) if the spread is exactly one tick, else 1 (``"2+"``)."""
    if not (snapshot.has_ask and snapshot.has_bid):
        raise UndefinedStateError("spread undefined with an empty side")
    spread = snapshot.ask_price - snapshot.bid_price
    if spread <= 0:
        raise UndefinedStateError(f"non-positive spread {spread}")
    return 0 if spread == tick_size else 1


def queue_imbalance(snapshot):
    if not (snapshot.has_ask and snapshot.has_bid):
        raise UndefinedStateError("queue imbalance undefined with an empty side")
    b, a = snapshot.bid_size, snapshot.ask_size
    return (b - a) / (b + a)


def qi_state(snapshot):
    """Bin index of the queue imbalance, ``[-1,-.6), [-.6,-.2), [-.2,.2), [.2,.6), [.6,1]``.

    Thresholds are compared in integer arithmetic so boundary values land
    exactly: ``QI >= k/5`` iff ``5 (b - a) >= k (b + a)``.
    """
    if not (snapshot.has_ask and snapshot.has_bid):
        raise UndefinedStateError("queue imbalance undefined with an empty side")
    b, a = snapshot.bid_size, snapshot.ask_size
    diff5, total = 5 * (b - a), b + a
    return sum(diff5 >= k * total for k in (-3, -1, 1, 3))


@dataclass(frozen=True)
class StateVariableSpec:
    kind: str
    tick_size: int = 100

    def __post_init__(self):
        if self.kind not in ("spread", "qi"):
            raise InvalidInputError(f"unknown state variable {self.kind!r}")
        if self.tick_size <= 0:
            raise InvalidInputError("tick size must be positive")

    @property
    def labels(self):
        return SPREAD_STATES if self.kind == "spread" else QI_STATES

    def __call__(self, snapshot):
        if self.kind == "spread":
            return spread_state(snapshot, self.tick_size)
        return qi_state(snapshot)


def tick_from_price(tick):
    """Currency tick (e.g. 0.01) -> integer price units."""
    units = Decimal(str(tick)) * PRICE_SCALE
    if units <= 0 or units != units.to_integral_value():
        raise InvalidInputError(f"tick {tick} is not a positive multiple of 1e-4")
    return int(units)


_CLOCK = re.compile(r"^(\d{1,2}):(\d{2})(?::(\d{2}(?:\.\d+)?))?$")


def parse_clock(text):
    """``"12:00"``, ``"12:00:01.5"`` or plain seconds after midnight -> nanoseconds."""
    text = str(text).strip()
    m = _CLOCK.match(text)
    if not m:
        return parse_time_ns(text)
    h, mnt, sec = int(m.group(1)), int(m.group(2)), m.group(3) or "0"
    if mnt >= 60:
        raise InvalidInputError(f"bad clock time {text!r}")
    return (h * 3600 + mnt * 60) * NS + parse_time_ns(sec)


# assembly --------------------------------------------------------------------

def _state_at(records, t_ns, state_fn):
    """State of the last book row at or before ``t_ns`` (first row if none)."""
    last = None
    for rec in records:
        if rec.message.time_ns > t_ns:
            break
        last = rec.post
    if last is None:
        if not records:
            return None
        last = records[0].post
        log.warning("no book row before the window start; using the first row")
    return state_fn(last)


def build_sequence(events, state_fn, t_from_ns, t_to_ns, initial_state,
                   keep_history=False, report=None):
    """Assemble a :class:`MarkedSequence` on the window ``(t_from, t_to]``.

    Events whose state is undefined are skipped. Timestamps that do not
    increase are moved 1 ns past their predecessor, keeping input order.
    """
    if not t_to_ns > t_from_ns:
        raise InvalidInputError("window end must be after its start")
    counts = report.counts if report is not None else Counter()
    times, evs, states = [], [], []
    prev = None
    for ev in events:
        if ev.time_ns > t_to_ns:
            counts["after_window"] += 1
            continue
        if ev.time_ns <= t_from_ns and not keep_history:
            counts["before_window"] += 1
            continue
        try:
            x = state_fn(ev.post)
        except UndefinedStateError:
            counts["undefined_state"] += 1
            continue
        t = ev.time_ns
        if prev is not None and t <= prev:
            t = prev + 1
            counts["tie_nudged"] += 1
        prev = t
        times.append(t)
        evs.append(ev.event)
        states.append(x)
    if counts.get("tie_nudged"):
        log.info("moved %d tied timestamps by 1 ns", counts["tie_nudged"])
    t_arr = np.asarray(times, dtype=np.int64)
    n_hist = int(np.count_nonzero(t_arr <= t_from_ns))
    if n_hist:
        # the window starts in the state left by the last history event
        initial_state = states[n_hist - 1]
    if initial_state is None:
        raise InvalidInputError("no order book state available at the window start")
    return MarkedSequence(
        t_arr / NS, np.asarray(evs, dtype=np.int64), np.asarray(states, dtype=np.int64),
        initial_state=int(initial_state), t0=t_from_ns / NS, T=t_to_ns / NS,
    )


def ingest(messages, book, state="spread", t_from="12:00", t_to="14:30", tick=0.01,
           keep_history=False):
    """Full pipeline: parse, aggregate, classify and assemble.

    ``messages`` and ``book`` are paths or lists of lines. Returns
    ``(sequence, event_labels, state_labels, report)``.
    """
    report = IngestReport()
    msgs = parse_messages(messages, report)
    try:
        books = parse_book(book)
    except ParseError as exc:
        err = ParseError(f"book file, {exc}")
        err.line = exc.line
        raise err from None
    state_var = StateVariableSpec(state, tick_from_price(tick))
    t0, t1 = parse_clock(t_from), parse_clock(t_to)
    records = pair_with_book(msgs, books)
    merged = aggregate_executions(records, report)
    events = classify_level1(merged, report)
    try:
        x0 = _state_at(records, t0, state_var)
    except UndefinedStateError:
        x0 = None
    seq = build_sequence(events, state_var, t0, t1, x0, keep_history, report)
    report.counts["events"] = seq.n_events
    report.counts["history_events"] = seq.n_history
    return seq, ASK_BID, state_var.labels, report
