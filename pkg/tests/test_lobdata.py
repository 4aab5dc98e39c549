import json
from collections import Counter

import numpy as np
import pytest

from helpers import DATA
from sdhawkes.exceptions import InvalidInputError, ParseError
from sdhawkes.lobdata import (
    ASK,
    BID,
    BookedMessage,
    IngestReport,
    Level1Event,
    Level1Snapshot,
    LobMessage,
    MessageType,
    UndefinedStateError,
    aggregate_executions,
    build_sequence,
    classify_level1,
    classify_message,
    format_message,
    ingest,
    pair_with_book,
    parse_book,
    parse_clock,
    parse_messages,
    qi_state,
    queue_imbalance,
    spread_state,
    tick_from_price,
)

BOOK = Level1Snapshot(ask_price=505100, ask_size=200, bid_price=505000, bid_size=300)


def msg(t_ns, kind, size=100, price=505000, direction=1, order_id=1):
    return LobMessage(t_ns, MessageType(kind), order_id, size, price, direction)


class TestParsing:
    def test_field_mapping(self):
        (m,) = parse_messages(["34200.123456789,1,12345,100,505000,1"])
        assert m.time_ns == 34200123456789
        assert m.msg_type is MessageType.SUBMISSION
        assert (m.order_id, m.size, m.price, m.direction) == (12345, 100, 505000, 1)
        assert m.is_buy and m.price / 10_000 == 50.5

    def test_direction_zero_is_parse_error(self):
        with pytest.raises(ParseError) as info:
            parse_messages(["34200.1,1,1,100,505000,1", "34200.2,1,2,100,505000,0"])
        assert info.value.line == 2 and "line 2" in str(info.value)

    @pytest.mark.parametrize("row", ["34200.1,1,1,100,505000", "abc,1,1,100,505000,1",
                                     "34200.1,9,1,100,505000,1", "34200.1,1,1,0,505000,1",
                                     "34200.1,1,1,1.5,505000,1"])
    def test_malformed_rows(self, row):
        with pytest.raises(ParseError):
            parse_messages([row])

    def test_round_trip(self):
        lines = (DATA / "golden_messages.csv").read_text().splitlines()
        assert [format_message(m) for m in parse_messages(lines)] == lines

    def test_decreasing_time_is_a_warning(self):
        report = IngestReport()
        msgs = parse_messages(["34200.2,1,1,100,505000,1", "34200.1,1,2,100,505000,1"], report)
        assert len(msgs) == 2 and len(report.warnings) == 1

    def test_long_fraction_rounds_to_nanoseconds(self):
        (m,) = parse_messages(["1.0000000015,1,1,1,1,1"])
        assert m.time_ns == 1_000_000_002

    def test_book_rows(self):
        rows = parse_book(["505100,200,505000,300"])
        assert rows == [BOOK]
        with pytest.raises(ParseError):
            parse_book(["505000,200,505100,300"])

    def test_book_alignment(self):
        with pytest.raises(InvalidInputError):
            pair_with_book([msg(1, 1)], [])

    def test_clock(self):
        assert parse_clock("12:00") == 43200 * 10**9
        assert parse_clock("12:00:01.5") == 43201_500_000_000
        assert parse_clock("43200") == 43200 * 10**9

    def test_tick(self):
        assert tick_from_price(0.01) == 100
        with pytest.raises(InvalidInputError):
            tick_from_price(0.00001)


class TestAggregation:
    def test_tied_executions_merge(self):
        out = aggregate_executions([msg(5, 4, 100, direction=-1), msg(5, 4, 50, direction=-1, order_id=2)])
        assert len(out) == 1 and out[0].size == 150 and out[0].order_id == 1

    def test_one_nanosecond_apart_not_merged(self):
        assert len(aggregate_executions([msg(5, 4, direction=-1), msg(6, 4, direction=-1)])) == 2

    def test_mixed_direction_not_merged(self):
        assert len(aggregate_executions([msg(5, 4, direction=-1), msg(5, 4, direction=1)])) == 2

    def test_non_executions_not_merged(self):
        assert len(aggregate_executions([msg(5, 1), msg(5, 1)])) == 2

    def test_booked_merge_keeps_outer_books(self):
        pre, mid, post = BOOK, BOOK, Level1Snapshot(505200, 100, 505000, 300)
        recs = [BookedMessage(msg(5, 4, direction=-1), pre, mid), BookedMessage(msg(5, 4, direction=-1), mid, post)]
        report = IngestReport()
        (merged,) = aggregate_executions(recs, report)
        assert merged.pre is pre and merged.post is post and report.counts["aggregated"] == 1


class TestClassification:
    @pytest.mark.parametrize("kind,price,direction,expected", [
        (1, 505000, 1, BID),          # buy limit at the bid
        (1, 505050, 1, BID),          # buy limit inside the spread
        (1, 504800, 1, "dropped_deeper"),
        (1, 505100, -1, ASK),         # sell limit at the ask
        (1, 505200, -1, "dropped_deeper"),
        (3, 505100, -1, BID),         # sell deletion at the ask
        (2, 505100, -1, BID),         # sell partial cancel at the ask
        (3, 505000, 1, ASK),          # buy deletion at the bid
        (3, 504900, 1, "dropped_deeper"),
        (4, 505100, -1, BID),         # sell limit executed: buy market order
        (4, 505000, 1, ASK),          # buy limit executed: sell market order
        (5, 505000, 1, "dropped_hidden"),
        (6, 505000, 1, "dropped_auction"),
        (7, 505000, 1, "dropped_halt"),
    ])
    def test_rules(self, kind, price, direction, expected):
        assert classify_message(msg(1, kind, price=price, direction=direction), BOOK) == expected

    def test_first_row_without_book(self):
        assert classify_message(msg(1, 1), None) == "dropped_no_book"
        assert classify_message(msg(1, 4, direction=-1), None) == BID

    def test_classification_is_exhaustive(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            m = msg(1, int(rng.integers(1, 8)), price=int(rng.integers(504800, 505300)),
                    direction=int(rng.choice([-1, 1])))
            label = classify_message(m, BOOK)
            assert label in (ASK, BID) or label.startswith("dropped_")

    def test_counts(self):
        recs = pair_with_book([msg(1, 1), msg(2, 5), msg(3, 1, price=1)], [BOOK, BOOK, BOOK])
        report = IngestReport()
        events = classify_level1(recs, report)
        assert events == []
        assert report.counts == Counter(dropped_no_book=1, dropped_hidden=1, dropped_deeper=1)


class TestStates:
    def test_qi_values(self):
        assert queue_imbalance(Level1Snapshot(2, 100, 1, 300)) == 0.5
        assert qi_state(Level1Snapshot(2, 100, 1, 300)) == 3

    @pytest.mark.parametrize("bid,ask,state", [
        (300, 200, 3),     # QI = 0.2 exactly: right-open bin [0.2, 0.6)
        (200, 300, 2),     # QI = -0.2 exactly: inside [-0.2, 0.2)
        (800, 200, 4),     # QI = 0.6 exactly
        (200, 800, 1),     # QI = -0.6 exactly
        (100, 0 + 900, 0),
        (1000, 1, 4),
        (250, 250, 2),
    ])
    def test_qi_boundaries(self, bid, ask, state):
        assert qi_state(Level1Snapshot(2, ask, 1, bid)) == state

    def test_qi_empty_side(self):
        with pytest.raises(UndefinedStateError):
            qi_state(Level1Snapshot(2, 0, 1, 100))

    @pytest.mark.parametrize("spread,state", [(100, 0), (200, 1), (300, 1)])
    def test_spread(self, spread, state):
        assert spread_state(Level1Snapshot(505000 + spread, 1, 505000, 1), 100) == state

    def test_spread_empty_side(self):
        with pytest.raises(UndefinedStateError):
            spread_state(Level1Snapshot(505100, 0, 505000, 1), 100)


def _spread(snapshot):
    return spread_state(snapshot, 100)


class TestBuildSequence:
    def test_empty_window(self):
        seq = build_sequence([], _spread, 0, 10**9, initial_state=1)
        assert seq.n_events == 0 and seq.initial_state == 1

    def test_single_event(self):
        ev = Level1Event(43201 * 10**9, BID, Level1Snapshot(505100, 1, 505000, 1), 1)
        seq = build_sequence([ev], _spread, 43200 * 10**9, 52200 * 10**9, initial_state=0)
        assert seq.times.tolist() == [43201.0] and seq.events.tolist() == [BID] and seq.states.tolist() == [0]

    def test_residual_ties_are_nudged(self):
        snap = Level1Snapshot(505100, 1, 505000, 1)
        evs = [Level1Event(5, BID, snap, 1), Level1Event(5, ASK, snap, 2), Level1Event(5, ASK, snap, 3)]
        report = IngestReport()
        seq = build_sequence(evs, _spread, 0, 100, 0, report=report)
        assert np.rint(seq.times * 1e9).astype(int).tolist() == [5, 6, 7]
        assert seq.events.tolist() == [BID, ASK, ASK]
        assert report.counts["tie_nudged"] == 2

    def test_undefined_states_skipped(self):
        evs = [Level1Event(5, BID, Level1Snapshot(505100, 0, 505000, 1), 1)]
        report = IngestReport()
        seq = build_sequence(evs, qi_state, 0, 100, 0, report=report)
        assert seq.n_events == 0 and report.counts["undefined_state"] == 1

    def test_state_path_changes_only_at_events(self):
        seq, *_ = ingest(DATA / "golden_messages.csv", DATA / "golden_book.csv", "qi", "09:30:00.5", "09:31:40")
        # the sequence stores one state per event and nothing in between
        assert len(seq.states) == len(seq.times)


@pytest.fixture(scope="module")
def golden():
    return json.loads((DATA / "golden_expected.json").read_text())


@pytest.mark.parametrize("kind", ["spread", "qi"])
def test_golden_fixture(golden, kind):
    w = golden["window"]
    seq, ev_labels, st_labels, report = ingest(
        DATA / "golden_messages.csv", DATA / "golden_book.csv", kind, w["from"], w["to"], w["tick"])
    assert np.rint(seq.times * 1e9).astype(np.int64).tolist() == golden["times_ns"]
    assert seq.events.tolist() == golden["events"]
    assert seq.states.tolist() == golden[kind]["states"]
    assert seq.initial_state == golden[kind]["initial_state"]
    assert ev_labels == ("ask", "bid")
    for key, value in golden["counts"].items():
        assert report.counts[key] == value
    # the QI = 0.2 book (bid 300, ask 200) after the 34214 s event is "buy+"
    if kind == "qi":
        k = golden["times_ns"].index(34214000000000)
        assert st_labels[seq.states[k]] == "buy+"


@pytest.mark.parametrize("kind", ["spread", "qi"])
def test_golden_fixture_with_history(golden, kind):
    w = golden["window"]
    seq, *_ = ingest(DATA / "golden_messages.csv", DATA / "golden_book.csv", kind, w["from"], w["to"], w["tick"],
                     keep_history=True)
    h = golden["history"]
    assert seq.n_history == 1
    assert np.rint(seq.times[:1] * 1e9).astype(np.int64).tolist() == h["times_ns"]
    assert seq.events[:1].tolist() == h["events"]
    assert seq.states[:1].tolist() == h[f"{kind}_states"]
    assert seq.n_events == len(golden["times_ns"])


def _mirror_lines(msg_lines, book_lines):
    msgs, books = [], []
    for line in msg_lines:
        t, k, oid, size, price, d = line.split(",")
        msgs.append(",".join([t, k, oid, size, str(-int(price)), str(-int(d))]))
    for line in book_lines:
        ap, asz, bp, bsz = line.split(",")
        books.append(",".join([str(-int(bp)), bsz, str(-int(ap)), asz]))
    return msgs, books


def test_mirror_symmetry():
    msg_lines = (DATA / "golden_messages.csv").read_text().splitlines()
    book_lines = (DATA / "golden_book.csv").read_text().splitlines()
    m_msgs, m_books = _mirror_lines(msg_lines, book_lines)
    args = ("09:30:00.5", "09:31:40")
    plain, *_ = ingest(msg_lines, book_lines, "qi", *args)
    mirrored, *_ = ingest(m_msgs, m_books, "qi", *args)
    assert np.array_equal(plain.times, mirrored.times)
    assert np.array_equal(plain.events, 1 - mirrored.events)
    # mirroring negates QI; bins are right-open, so a book sitting exactly on an
    # edge lands one bin lower on the mirrored side
    edge = plain.times == 34214.0
    assert np.array_equal(plain.states[~edge], 4 - mirrored.states[~edge])
    assert np.array_equal(plain.states[edge] - 1, 4 - mirrored.states[edge])
    plain_s, *_ = ingest(msg_lines, book_lines, "spread", *args)
    mirrored_s, *_ = ingest(m_msgs, m_books, "spread", *args)
    assert np.array_equal(plain_s.states, mirrored_s.states)
