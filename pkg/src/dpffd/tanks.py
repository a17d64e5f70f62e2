"""Nine-tank benchmark: Torricelli flows between grid-connected tanks with leak faults.

Tanks are numbered 1..9 row-major on a 3x3 grid in user-facing APIs and
configs; arrays index them from 0.
"""
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import kernels
from .errors import ContractViolation, NumericDivergenceError
from .faults import AugmentedModel, FaultMode, FaultProfile, truth_fault_injection
from .pf import NoiseSpec, draw_noise

N_TANKS = 9


def grid_pipes(rows=3, cols=3):
    """4-neighbor pipe pairs (0-based) on a row-major grid."""
    pipes = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                pipes.append((i, i + 1))
            if r + 1 < rows:
                pipes.append((i, i + cols))
    return pipes


@dataclass(frozen=True)
class TankParams:
    tank_area: float = 0.0154
    pipe_area: float = 2e-5
    mu: tuple = (1.0,) * N_TANKS
    gravity: float = 9.81
    ts: float = 0.1
    x0: tuple = (2.0,) * N_TANKS
    pipes: tuple = field(default_factory=lambda: tuple(grid_pipes()))

    def __post_init__(self):
        if not (self.tank_area > 0 and self.pipe_area > 0):
            raise ContractViolation("tank and pipe areas must be positive")
        if not self.ts > 0:
            raise ContractViolation("sampling period must be positive")
        if not self.gravity > 0:
            raise ContractViolation("gravity must be positive")
        if len(self.mu) != len(self.x0):
            raise ContractViolation("one flow correction term per tank is required")
        if any(v < 0 for v in self.x0):
            raise ContractViolation("initial levels must be non-negative")
        n = len(self.x0)
        for i, j in self.pipes:
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise ContractViolation(f"invalid pipe ({i}, {j})")

    @property
    def n_tanks(self):
        return len(self.x0)

    @property
    def pipe_array(self):
        return np.asarray(self.pipes, dtype=np.int64).reshape(-1, 2)


def flow_rate(x_i, x_j, params=TankParams(), mu_i=None, mu_j=None):
    """Volumetric flow from tank i to tank j (negative when j is higher).

    The upstream tank's flow correction term is used, which keeps the flow
    antisymmetric under swapping the tanks.
    """
    mu_i = params.mu[0] if mu_i is None else mu_i
    mu_j = mu_i if mu_j is None else mu_j
    d = x_i - x_j
    mu_up = mu_i if d >= 0 else mu_j
    q = mu_up * params.pipe_area
    q = q * np.sign(d)
    return q * np.sqrt(2.0 * params.gravity * np.abs(d))


def leak_rate(x_i, params=TankParams(), mu_i=None):
    """Level drop rate (m/s) of a leaking tank."""
    mu_i = params.mu[0] if mu_i is None else mu_i
    return (mu_i * params.pipe_area / params.tank_area) * np.sign(x_i) * np.sqrt(2.0 * params.gravity * np.abs(x_i))


def tank_derivatives(x, active_leaks=(), params=TankParams()):
    """Level rates for one state. ``active_leaks`` holds 1-based tank numbers."""
    x = np.asarray(x, dtype=float)
    rate = np.zeros_like(x)
    mu = params.mu
    for i, j in params.pipes:
        q = flow_rate(x[i], x[j], params, mu[i], mu[j])
        rate[i] -= q
        rate[j] += q
    rate = rate / params.tank_area
    for tank in active_leaks:
        i = tank - 1
        rate[i] -= leak_rate(x[i], params, mu[i])
    return rate


def healthy_step(params, x, u=None):
    """Noise-free Euler step of the leak-free network on an (N, n_tanks) batch."""
    return kernels.tank_healthy_step(np.atleast_2d(x), params.pipe_array, np.asarray(params.mu, dtype=float),
                                     params.pipe_area, params.tank_area, params.gravity, params.ts)


def _leak_increment(params, index, x, u=None):
    out = np.zeros_like(x)
    out[:, index] = -params.ts * leak_rate(x[:, index], params, params.mu[index])
    return out


def leak_mode(tank, params=TankParams(), profile=FaultProfile(), name=None):
    """Fault mode draining tank ``tank`` (1-based) through a Torricelli leak."""
    if not 1 <= tank <= params.n_tanks:
        raise ContractViolation(f"tank {tank} does not exist")
    return FaultMode(name or f"leak-tank-{tank}", partial(_leak_increment, params, tank - 1), profile)


class TankPlant:
    """Truth simulator. Faults follow their occurrence profiles, not binary states."""

    def __init__(self, params=TankParams(), modes=(), process_variance=0.05):
        self.params = params
        self.modes = list(modes)
        self.process_noise = NoiseSpec.gaussian(process_variance, params.n_tanks)

    def step(self, x, k, stream, u=None):
        x = np.asarray(x, dtype=float)[None, :]
        nxt = healthy_step(self.params, x, u) + truth_fault_injection(x, k, self.modes, u)
        nxt = nxt[0] + draw_noise(self.process_noise, stream)
        np.maximum(nxt, 0.0, out=nxt)
        if not np.all(np.isfinite(nxt)):
            raise NumericDivergenceError(f"non-finite tank levels at step {k}", step=k)
        return nxt

    def simulate(self, steps, stream, u=None):
        """Levels for steps 0..``steps`` as a (steps + 1, n_tanks) array."""
        xs = np.empty((steps + 1, self.params.n_tanks))
        xs[0] = self.params.x0
        for k in range(steps):
            xs[k + 1] = self.step(xs[k], k, stream, u)
        return xs

    def total_volume(self, x):
        return self.params.tank_area * float(np.sum(x))


def plant_step(x, k, plant, stream):
    return plant.step(x, k, stream)


# Default layout: which tanks each detector node observes (1-based).
NODE_TANKS = {1: (1, 2, 3, 4, 5, 6), 2: (4, 5, 6), 3: (4, 5, 6, 7, 8, 9)}


def measure(x, node, stream, variance=0.2, node_tanks=None):
    """Noisy selector measurement of the tanks a detector node observes."""
    node_tanks = NODE_TANKS if node_tanks is None else node_tanks
    if node not in node_tanks:
        raise ContractViolation(f"unknown detector node {node}")
    idx = np.asarray(node_tanks[node]) - 1
    spec = NoiseSpec.gaussian(variance, len(idx))
    return np.asarray(x, dtype=float)[idx] + draw_noise(spec, stream)


def filter_model(params, modes, process_variance=0.05, binary_halfwidth=0.75):
    """Augmented model a detector node runs: same tank physics, leaks gated by binary states."""
    return AugmentedModel(
        partial(healthy_step, params),
        params.n_tanks,
        modes,
        process_noise=NoiseSpec.gaussian(process_variance, params.n_tanks),
        binary_noise=NoiseSpec.symmetric_box(binary_halfwidth, 2),
        lower_bound=0.0,
    )
