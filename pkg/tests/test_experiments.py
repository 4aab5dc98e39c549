import csv

import numpy as np
import pytest

from sdhawkes.analysis import curve_array
from sdhawkes.exceptions import InvalidInputError
from sdhawkes.experiments import (
    GROUPS,
    WorstErrorReport,
    group_errors,
    monte_carlo_consistency,
    parameter_names,
    parameter_vector,
    parametric_bootstrap,
    run_replication,
    worst_absolute_error,
    worst_relative_error,
    write_band_csv,
    write_bootstrap_csv,
    write_mc_csv,
)
from sdhawkes.presets import contrasting_qi_model, toggle_excitation_model


@pytest.mark.parametrize("theta_hat,theta,expected", [
    ((1.2, 1.9), (1.0, 2.0), 0.2),
    ((3.0, 4.0), (3.0, 4.0), 0.0),
    ((1.1, 0.9), (1.0, 1.0), 0.1),
    ((0.75, 1.25), (1.0, 1.0), -0.25),
])
def test_worst_relative(theta_hat, theta, expected):
    assert worst_relative_error(theta_hat, theta) == pytest.approx(expected, abs=1e-15)


def test_worst_relative_rejects_zero_truth():
    with pytest.raises(InvalidInputError):
        worst_relative_error([0.1, 1.0], [0.0, 1.0])
    with pytest.raises(InvalidInputError):
        worst_relative_error([1.0], [1.0, 2.0])


@pytest.mark.parametrize("phi_hat,phi,expected", [
    ((0.75,), (0.8,), -0.05),
    ((0.5, 0.5), (0.5, 0.5), 0.0),
    ((0.53, 0.43), (0.5, 0.5), -0.07),
])
def test_worst_absolute(phi_hat, phi, expected):
    assert worst_absolute_error(phi_hat, phi) == pytest.approx(expected, abs=1e-15)


def test_zero_replications_give_empty_report():
    rep = monte_carlo_consistency(contrasting_qi_model(), [100], n_replications=0)
    assert rep.results == [] and rep.summary() == {}


def test_replications_independent_of_schedule():
    m = contrasting_qi_model()
    tasks = [(300, 0), (300, 1), (600, 0), (600, 1)]
    forward = {t: run_replication(m, *t, seed=3) for t in tasks}
    backward = {t: run_replication(m, *t, seed=3) for t in reversed(tasks)}
    assert forward == backward
    report = monte_carlo_consistency(m, [600, 300], n_replications=2, seed=3)
    assert [forward[(r.n_events, r.replication)] for r in report.results] == report.results


def test_report_helpers_and_csv(tmp_path):
    m = contrasting_qi_model()
    report = monte_carlo_consistency(m, [300], n_replications=2, seed=1)
    assert report.sample_sizes == [300] and report.n_failed() == 0
    for g in GROUPS:
        assert report.median_abs(g, 300) == pytest.approx(np.median(np.abs(report.errors(g, 300))))
    path = tmp_path / "mc.csv"
    write_mc_csv(report, path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 2 * len(GROUPS)
    assert set(rows[0]) == {"n_events", "replication", "group", "value", "status"}


def test_inactive_kernels_excluded_from_kernel_groups():
    m = toggle_excitation_model()
    fitted = m.replace(alpha=[[[5.0], [1.1]]], beta=[[[9.0], [4.4]]])
    errs = group_errors(fitted, m)
    assert errs["alpha"] == pytest.approx(0.1) and errs["beta"] == pytest.approx(0.1)
    poisson = m.replace(alpha=np.zeros((1, 2, 1)))
    assert np.isnan(group_errors(m, poisson)["alpha"])


def test_failed_replication_is_recorded(monkeypatch):
    from sdhawkes import experiments

    def broken(*args, **kwargs):
        raise experiments.EstimationError("forced", [])

    monkeypatch.setattr(experiments, "fit", broken)
    result = run_replication(contrasting_qi_model(), 200, 0)
    assert result.status.startswith("failed")
    report = WorstErrorReport([result])
    assert report.n_failed() == 1 and np.isnan(report.median_abs("nu", 200))


@pytest.fixture(scope="module")
def small_bootstrap():
    return parametric_bootstrap(toggle_excitation_model(), 200.0, n_boot=6, seed=2,
                                quantiles=(0.005, 0.1, 0.9, 0.995))


def test_identical_streams_give_zero_width_bands():
    res = parametric_bootstrap(toggle_excitation_model(), 100.0, n_boot=2, streams=[0, 0])
    lo, hi = res.band(0.005, 0.995)
    assert np.array_equal(lo, hi)
    assert np.array_equal(res.parameter_bands[0], res.parameter_bands[-1])


def test_bands_nested_by_level(small_bootstrap):
    outer_lo, outer_hi = small_bootstrap.band(0.005, 0.995)
    inner_lo, inner_hi = small_bootstrap.band(0.1, 0.9)
    assert np.all(outer_lo <= inner_lo) and np.all(inner_hi <= outer_hi)


def test_bootstrap_is_reproducible(small_bootstrap):
    again = parametric_bootstrap(toggle_excitation_model(), 200.0, n_boot=6, seed=2,
                                 quantiles=(0.005, 0.1, 0.9, 0.995))
    assert np.array_equal(again.estimates, small_bootstrap.estimates)


def test_coverage_of_degenerate_band():
    m = toggle_excitation_model()
    res = parametric_bootstrap(m, 100.0, n_boot=2, streams=[0, 0])
    # the band collapses onto the single re-fitted model, which is covered everywhere
    refit = _model_from_vector(m, res.estimates[0])
    assert np.array_equal(res.curve_bands[0], curve_array(refit, res.grid))
    assert res.coverage(refit) == 1.0


def _model_from_vector(m, v):
    k = m.alpha.size
    d = m.d_e
    return m.replace(nu=v[:d], alpha=v[d:d + k].reshape(m.alpha.shape),
                     beta=v[d + k:d + 2 * k].reshape(m.beta.shape),
                     phi=v[d + 2 * k:].reshape(m.phi.shape))


def test_bootstrap_needs_two_paths():
    with pytest.raises(InvalidInputError):
        parametric_bootstrap(toggle_excitation_model(), 100.0, n_boot=1)


def test_parameter_layout():
    m = contrasting_qi_model()
    names = parameter_names(m)
    vec = parameter_vector(m)
    assert len(names) == len(vec) == len(set(names))
    assert names[0] == "nu[0]" and vec[0] == m.nu[0]
    j = names.index("alpha[1,3,0]")
    assert vec[j] == m.alpha[1, 3, 0]


def test_bootstrap_csv_writers(tmp_path, small_bootstrap):
    write_bootstrap_csv(small_bootstrap, tmp_path / "b.csv")
    rows = list(csv.DictReader((tmp_path / "b.csv").open()))
    assert len(rows) == small_bootstrap.n_success * len(small_bootstrap.parameter_names)
    write_band_csv(small_bootstrap, tmp_path / "band.csv")
    bands = list(csv.reader((tmp_path / "band.csv").open()))
    assert bands[0][:4] == ["source", "target", "state", "t"] and len(bands[0]) == 8
    assert len(bands) - 1 == 1 * 2 * 1 * len(small_bootstrap.grid)
