"""Pure numpy implementations of the per-particle kernels.

Every routine here has a twin in ``_ckernels.pyx``. The two are written to
perform the same floating point operations in the same order so that both
backends produce bit-identical results on IEEE-754 hardware.
"""
import numpy as np

BACKEND = "python"


def tank_healthy_step(x, pipes, mu, pipe_area, tank_area, gravity, ts):
    """Forward-Euler step of the leak-free tank network for a batch of states.

    ``x`` has shape (n_particles, n_tanks); ``pipes`` is an (n_pipes, 2)
    integer array of connected tank indices.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    two_g = 2.0 * gravity
    rate = np.zeros_like(x)
    for i, j in pipes:
        d = x[:, i] - x[:, j]
        mu_up = np.where(d >= 0.0, mu[i], mu[j])
        q = mu_up * pipe_area
        q = q * np.sign(d)
        q = q * np.sqrt(two_g * np.abs(d))
        rate[:, i] -= q
        rate[:, j] += q
    return x + ts * (rate / tank_area)


def gaussian_loglik(x, selector, z, var):
    """Diagonal Gaussian log-density of ``z`` around ``x[:, selector]``."""
    x = np.asarray(x, dtype=np.float64)
    const = 0.0
    for c in range(len(selector)):
        const += np.log(2.0 * np.pi * var[c])
    acc = np.zeros(x.shape[0])
    for c in range(len(selector)):
        r = z[c] - x[:, selector[c]]
        acc += (r * r) / var[c]
    return (-0.5 * const) - 0.5 * acc


def systematic_indices(weights, u):
    """Ancestor indices for systematic resampling with offset ``u`` in [0, 1)."""
    n = len(weights)
    positions = (u + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    idx = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(idx, n - 1).astype(np.int64)


def snap_binary(faulty, noise):
    """Excite binary states with ``noise`` and project onto the nearer of e1/e2.

    ``faulty`` is an (n, m) boolean array holding the second component of each
    binary state; ``noise`` has shape (n, m, 2).
    """
    b2 = faulty.astype(np.float64)
    v0 = (1.0 - b2) + noise[..., 0]
    v1 = b2 + noise[..., 1]
    a0 = v0 - 1.0
    b1 = v1 - 1.0
    d1 = a0 * a0 + v1 * v1
    d2 = v0 * v0 + b1 * b1
    return d1 > d2
