"""Random models and paths shared by the test modules."""

from pathlib import Path

import numpy as np

from sdhawkes.model import SdHawkesModel
from sdhawkes.simulate import SimulationConfig, make_rng, simulate

DATA = Path(__file__).parent / "data"


def random_model(rng, d_e, d_x, load=0.6):
    """Stable model whose summed kernel norms onto each type are below ``load``."""
    nu = rng.uniform(0.3, 2.0, d_e)
    beta = np.exp(rng.uniform(np.log(0.5), np.log(30.0), (d_e, d_x, d_e)))
    share = rng.uniform(0.0, 1.0, (d_e, d_x, d_e))
    share *= load / (share.sum(axis=(0, 1), keepdims=True) + 1e-12)
    alpha = share * beta
    phi = rng.dirichlet(np.ones(d_x), size=(d_e, d_x))
    phi = phi / phi.sum(axis=2, keepdims=True)
    return SdHawkesModel(nu, alpha, beta, phi)


def random_path(rng, model, n_events, with_history=False):
    seq = simulate(model, SimulationConfig(n_events=n_events), rng=make_rng(int(rng.integers(2**31))))
    if with_history and seq.n_events > 4:
        k = int(rng.integers(1, seq.n_events // 2))
        seq = seq.replace(t0=float(seq.times[k - 1]), initial_state=int(seq.states[k - 1]))
    return seq


def brute_force_sums(model, times, events, states, t):
    """``S[e', x', e] = sum_{t_i < t} exp(-beta (t - t_i))`` by direct summation."""
    S = np.zeros(model.alpha.shape)
    for ti, e, x in zip(times, events, states):
        if ti < t:
            S[e, x, :] += np.exp(-model.beta[e, x, :] * (t - ti))
    return S
