"""Property-based checks of the core invariants."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import random_model, random_path
from sdhawkes.analysis import perron_root, truncated_kernel_norm
from sdhawkes.diagnostics import event_residuals
from sdhawkes.experiments import worst_absolute_error, worst_relative_error
from sdhawkes.intensity import IntensityState
from sdhawkes.lobdata import Level1Snapshot, qi_state, spread_state
from sdhawkes.likelihood import log_likelihood, log_likelihood_naive, transition_mle
from sdhawkes.model import Dimensions, MarkedSequence, lift_sequence, unlift_sequence

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(0, 2**32 - 1)
dims = st.tuples(st.integers(1, 3), st.integers(1, 3))


@st.composite
def sequences(draw):
    d_e, d_x = draw(dims)
    n = draw(st.integers(0, 30))
    gaps = draw(arrays(float, n, elements=st.floats(1e-3, 5.0)))
    events = draw(arrays(np.int64, n, elements=st.integers(0, d_e - 1)))
    states = draw(arrays(np.int64, n, elements=st.integers(0, d_x - 1)))
    x0 = draw(st.integers(0, d_x - 1))
    times = np.cumsum(gaps)
    T = float(times[-1]) + 1.0 if n else 1.0
    return Dimensions.from_sizes(d_e, d_x), MarkedSequence(times, events, states, x0, 0.0, T)


@SETTINGS
@given(sequences())
def test_lift_round_trip(case):
    d, seq = case
    lifted = lift_sequence(seq, d)
    assert np.all(lifted.states == 0)
    back = unlift_sequence(lifted, d, seq.initial_state)
    assert np.array_equal(back.events, seq.events) and np.array_equal(back.states, seq.states)
    assert np.array_equal(back.times, seq.times)


@SETTINGS
@given(sequences())
def test_transition_rows_are_distributions(case):
    d, seq = case
    phi = transition_mle(seq, d).phi
    assert np.allclose(phi.sum(axis=2), 1.0) and np.all(phi >= 0)


@SETTINGS
@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_decay_semigroup(seed, a, b):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 2, 2)
    one = IntensityState(m)
    for e, x in ((0, 1), (1, 0), (1, 1)):
        one.on_event(e, x)
        one.advance(float(rng.uniform(0, 0.5)))
    two = one.copy()
    one.advance(a).advance(b)
    two.advance(a + b)
    assert np.allclose(one.S, two.S, rtol=1e-12, atol=1e-300)
    assert np.allclose(one.S1, two.S1, rtol=1e-10, atol=1e-300)


@SETTINGS
@given(seeds, dims, st.integers(0, 60), st.booleans())
def test_fast_likelihood_matches_direct_sum(seed, d, n, history):
    rng = np.random.default_rng(seed)
    m = random_model(rng, *d)
    if n == 0:
        seq = MarkedSequence([], [], [], 0, 0.0, 2.0)
    else:
        seq = random_path(rng, m, n, with_history=history)
    fast = log_likelihood(m, seq).total
    assert fast == pytest.approx(log_likelihood_naive(m, seq), rel=1e-8, abs=1e-10)


@SETTINGS
@given(seeds, dims)
def test_event_residuals_sum_to_compensator(seed, d):
    rng = np.random.default_rng(seed)
    m = random_model(rng, *d)
    seq = random_path(rng, m, 80, with_history=True)
    res = event_residuals(m, seq)
    total = sum(res.event[e].sum() + res.terminal[e] for e in range(m.d_e))
    assert total == pytest.approx(log_likelihood(m, seq).l_minus, rel=1e-9)


nonneg = arrays(float, st.tuples(st.integers(1, 6)).map(lambda t: (t[0], t[0])),
                elements=st.floats(0.0, 10.0))


@SETTINGS
@given(nonneg, st.floats(0.01, 100.0))
def test_perron_root_invariances(m, c):
    rho = perron_root(m)
    rows = m.sum(axis=1)
    cols = m.sum(axis=0)
    tol = 1e-9 * max(1.0, rows.max())
    assert max(rows.min(), cols.min()) - tol <= rho <= min(rows.max(), cols.max()) + tol
    assert perron_root(m.T) == pytest.approx(rho, rel=1e-8, abs=1e-12)
    assert perron_root(c * m) == pytest.approx(c * rho, rel=1e-8, abs=1e-12)


@SETTINGS
@given(nonneg)
def test_perron_root_matches_eigenvalues(m):
    ref = float(np.max(np.abs(np.linalg.eigvals(m))))
    assert perron_root(m) == pytest.approx(ref, rel=1e-7, abs=1e-9)


@SETTINGS
@given(st.floats(1e-3, 10.0), st.floats(1e-3, 50.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_truncated_norm_monotone_and_bounded(a, b, s, t):
    lo, hi = sorted((s, t))
    v_lo, v_hi = truncated_kernel_norm(a, b, lo), truncated_kernel_norm(a, b, hi)
    assert 0.0 <= v_lo <= v_hi <= a / b * (1 + 1e-15)


sizes = st.integers(1, 10_000)


def _qi_bin(bid, ask):
    # exact rational reference for the five right-open bins
    qi = Fraction(bid - ask, bid + ask)
    edges = [Fraction(-3, 5), Fraction(-1, 5), Fraction(1, 5), Fraction(3, 5)]
    return sum(qi >= e for e in edges)


@SETTINGS
@given(sizes, sizes)
def test_qi_state_matches_rational_bins(bid, ask):
    snap = Level1Snapshot(ask_price=101, ask_size=ask, bid_price=100, bid_size=bid)
    assert qi_state(snap) == _qi_bin(bid, ask)


@SETTINGS
@given(sizes, sizes)
def test_qi_mirror_off_edges(bid, ask):
    plain = qi_state(Level1Snapshot(101, ask, 100, bid))
    mirrored = qi_state(Level1Snapshot(101, bid, 100, ask))
    on_edge = 5 * abs(bid - ask) in ((bid + ask), 3 * (bid + ask))
    assert plain + mirrored == (4 if not on_edge else 5)


@SETTINGS
@given(st.integers(1, 50), st.integers(1, 200))
def test_spread_state_is_one_iff_wider_than_a_tick(ticks, tick):
    snap = Level1Snapshot(1000 + ticks * tick, 1, 1000, 1)
    assert spread_state(snap, tick) == int(ticks > 1)


vectors = st.integers(1, 12).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=st.floats(0.01, 100.0)),
                        arrays(float, n, elements=st.floats(0.0, 100.0))))


def _scan(est, true, denom):
    best, best_abs = 0.0, -1.0
    for j in range(len(true)):
        v = (est[j] - true[j]) / denom[j]
        if abs(v) > best_abs:
            best, best_abs = v, abs(v)
    return best


@SETTINGS
@given(vectors)
def test_worst_errors_match_scan(pair):
    theta, est = pair
    assert worst_relative_error(est, theta) == _scan(est, theta, theta)
    assert worst_absolute_error(est, theta) == _scan(est, theta, np.ones_like(theta))
    assert abs(worst_relative_error(est, theta)) == np.max(np.abs((est - theta) / theta))
