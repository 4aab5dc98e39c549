"""Reference parameter sets used by tests, experiments and the CLI."""

import numpy as np

from .model import SdHawkesModel

ASK_BID = ("ask", "bid")
SPREAD_STATES = ("1", "2+")
QI_STATES = ("sell++", "sell+", "neutral", "buy+", "buy++")


def toggle_excitation_model(phi=((0.6, 0.4), (0.3, 0.7))):
    """One event type, two states; ``k(t, x) = exp(-4 t)`` in the second state only.

    Base rate 1. The state transition matrix is a free choice; the default
    visits both states often.
    """
    alpha = np.array([[[0.0], [1.0]]])
    beta = np.full((1, 2, 1), 4.0)
    return SdHawkesModel(
        nu=[1.0], alpha=alpha, beta=beta, phi=[np.asarray(phi, float)],
        event_labels=("event",), state_labels=("1", "2"),
    )


def contrasting_qi_model():
    """Two event types, five imbalance states, with sharp changes between states."""
    # alpha[e', x, e]
    alpha = np.array([
        [[2, 10], [1, 3], [1000, 30], [2000, 40], [100, 1000]],
        [[10, 2], [3, 1], [20, 3000], [2000, 50], [60, 2000]],
    ], dtype=float)
    beta = np.array([
        [[10, 15], [8, 4], [3000, 500], [6000, 160], [500, 8000]],
        [[15, 10], [4, 8], [1000, 5000], [10000, 300], [120, 5000]],
    ], dtype=float)
    phi = np.array([
        [
            [0.7, 0.3, 0.0, 0.0, 0.0],
            [0.1, 0.8, 0.1, 0.0, 0.0],
            [0.0, 0.1, 0.6, 0.2, 0.1],
            [0.2, 0.2, 0.3, 0.1, 0.2],
            [0.1, 0.3, 0.3, 0.1, 0.2],
        ],
        [
            [0.0, 0.1, 0.2, 0.3, 0.4],
            [0.2, 0.1, 0.4, 0.2, 0.1],
            [0.1, 0.3, 0.1, 0.3, 0.2],
            [0.0, 0.0, 0.1, 0.8, 0.1],
            [0.1, 0.0, 0.1, 0.1, 0.7],
        ],
    ])
    # rows are typed to two decimals; renormalise away representation error
    phi = phi / phi.sum(axis=2, keepdims=True)
    return SdHawkesModel(nu=[5.0, 1.0], alpha=alpha, beta=beta, phi=phi,
                         event_labels=ASK_BID, state_labels=QI_STATES)


def homogeneous_poisson_model(rate=2.0):
    return SdHawkesModel(nu=[rate], alpha=[[[0.0]]], beta=[[[1.0]]], phi=[[[1.0]]])
