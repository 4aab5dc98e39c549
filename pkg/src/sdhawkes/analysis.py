"""Kernel L1-norms and the per-state spectral radius of the norm matrix."""

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import InvalidInputError, NumericalError

POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
# squarings between rebalancing steps, and the iterate spread that forces one
MAX_SQUARINGS = 50
BALANCE_RANGE = 1e-60


def default_time_grid(n=81):
    """Log-spaced grid from 1 microsecond to 100 seconds."""
    return np.logspace(-6, 2, n)


def truncated_kernel_norm(alpha, beta, t):
    """``int_0^t alpha exp(-beta s) ds``; broadcasts over its arguments."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("truncation time must be non-negative")
    if np.any(beta <= 0) or np.any(alpha < 0):
        raise InvalidInputError("need alpha >= 0 and beta > 0")
    out = alpha / beta * -np.expm1(-beta * t)
    return out if out.ndim else float(out)


def kernel_norm_matrix(model, x):
    """``m[i, j] = ||k_{j -> i}(., x)||_1 = alpha[j, x, i] / beta[j, x, i]``."""
    if not 0 <= x < model.d_x:
        raise InvalidInputError(f"state {x} out of range")
    return (model.alpha[:, x, :] / model.beta[:, x, :]).T.copy()


def _perron_irreducible(block):
    """Perron root of an irreducible non-negative block.

    Power iteration on ``I + B / s`` with repeated squaring, stopped by the
    Collatz-Wielandt bounds. ``B`` is rebalanced to ``D^-1 B D`` with ``D``
    the current iterate whenever the iterate spreads over many orders of
    magnitude; the similarity keeps the spectrum, keeps the iterate near the
    all-ones vector (so nothing underflows) and brings the shift ``s`` down
    to the root itself.
    """
    n = block.shape[0]
    if n == 1:
        return float(block[0, 0])
    eye = np.eye(n)
    B = block.copy()
    P = eye + B / B.sum(axis=1).max()
    v_prev = np.ones(n)
    squarings = 0
    for _ in range(POWER_MAX_ITER):
        v = P.sum(axis=1)
        if not np.all((v > 0) & np.isfinite(v)):
            v = v_prev
            squarings = MAX_SQUARINGS
        else:
            ratios = (B @ v) / v
            lo, hi = ratios.min(), ratios.max()
            if hi - lo <= POWER_TOL * lo:
                return float(0.5 * (lo + hi))
        if squarings >= MAX_SQUARINGS or v.min() < BALANCE_RANGE * v.max():
            # the shift after balancing tracks the root, so P restarts near rank one
            B = B * (v[None, :] / v[:, None])
            P = eye + B / B.sum(axis=1).max()
            v_prev = np.ones(n)
            squarings = 0
            continue
        v_prev = v
        P = P @ P
        P /= P.max()
        squarings += 1
    raise NumericalError("power iteration did not converge")


def _rho_2x2(m):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    half = 0.5 * (a - d)
    return float(0.5 * (a + d) + np.sqrt(half * half + b * c))


def perron_root(matrix):
    """Spectral radius of a non-negative square matrix.

    Reducible matrices are split into strongly connected blocks and the
    largest block root is returned. The matrix is scaled by its largest entry
    first so that tiny or huge entries do not underflow or overflow.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"need a square matrix, got shape {m.shape}")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix must be finite and non-negative")
    n = m.shape[0]
    if n == 0:
        return 0.0
    scale = float(m.max())
    if scale == 0.0:
        return 0.0
    m = m / scale
    n_comp, labels = connected_components(m > 0, directed=True, connection="strong")
    rho = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        rho = max(rho, _perron_irreducible(m[np.ix_(idx, idx)]))
    if n == 2:
        exact = _rho_2x2(m)
        if abs(exact - rho) > 1e-8 * exact:
            raise NumericalError(f"power iteration ({rho}) disagrees with the closed form ({exact})")
        return exact * scale
    return rho * scale


def spectral_radius(model, x):
    return perron_root(kernel_norm_matrix(model, x))


def norm_curves(model, grid=None):
    """Rows ``(source, target, state, t, norm)`` of truncated-norm curves."""
    grid = default_time_grid() if grid is None else np.asarray(grid, float)
    rows = []
    for src in range(model.d_e):
        for x in range(model.d_x):
            for dst in range(model.d_e):
                vals = truncated_kernel_norm(model.alpha[src, x, dst], model.beta[src, x, dst], grid)
                rows.extend((src, dst, x, float(t), float(v)) for t, v in zip(grid, vals))
    return rows


def curve_array(model, grid):
    """Truncated norms as an array of shape ``(d_e, d_x, d_e, len(grid))``."""
    grid = np.asarray(grid, float)
    return model.alpha[..., None] / model.beta[..., None] * -np.expm1(-model.beta[..., None] * grid)


def state_report(model):
    """Per-state ``{x, label, norm_matrix, rho}`` records."""
    return [
        {
            "x": x,
            "label": model.dims.state_labels[x],
            "norm_matrix": kernel_norm_matrix(model, x).tolist(),
            "rho": spectral_radius(model, x),
        }
        for x in range(model.d_x)
    ]
