"""Bootstrap particle filter primitives.

Particles are stored as a 2-d array (one row per particle) alongside a 1-d
weight vector. Everything in this module is a pure function of its inputs and
the state of the random generator passed in.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .errors import ContractViolation, DegenerateWeightsError

GAUSSIAN = "gaussian"
GAUSSIAN_DIAGONAL = "gaussian-diagonal"
UNIFORM_BOX = "uniform-box"

_NORMALIZED_ATOL = 1e-9
# sums this close to one are treated as already normalized
_IDEMPOTENT_ATOL = 1e-13


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise description.

    For the Gaussian kinds ``variance`` holds per-component (or one shared)
    variances; for ``uniform-box`` samples fall in ``[low, high]``.
    """

    kind: str
    dim: int
    mean: tuple = None
    variance: tuple = None
    low: tuple = None
    high: tuple = None

    def __post_init__(self):
        if self.dim < 1:
            raise ContractViolation(f"noise dimension must be >= 1, got {self.dim}")
        if self.kind in (GAUSSIAN, GAUSSIAN_DIAGONAL):
            mean = (0.0,) * self.dim if self.mean is None else tuple(float(m) for m in self.mean)
            var = self.variance
            if var is None:
                raise ContractViolation("gaussian noise needs a variance")
            var = tuple(float(v) for v in np.broadcast_to(np.asarray(var, dtype=float), (self.dim,)))
            if len(mean) != self.dim:
                raise ContractViolation("mean length does not match dimension")
            if any(not math.isfinite(v) or v < 0 for v in var):
                raise ContractViolation(f"variances must be finite and non-negative, got {var}")
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "variance", var)
        elif self.kind == UNIFORM_BOX:
            if self.low is None or self.high is None:
                raise ContractViolation("uniform-box noise needs low and high bounds")
            low = tuple(float(v) for v in np.broadcast_to(np.asarray(self.low, dtype=float), (self.dim,)))
            high = tuple(float(v) for v in np.broadcast_to(np.asarray(self.high, dtype=float), (self.dim,)))
            if any(lo > hi for lo, hi in zip(low, high)):
                raise ContractViolation(f"box lower bound exceeds upper bound: {low} > {high}")
            object.__setattr__(self, "low", low)
            object.__setattr__(self, "high", high)
        else:
            raise ContractViolation(f"unknown noise kind {self.kind!r}")

    @classmethod
    def gaussian(cls, variance, dim, mean=None):
        return cls(GAUSSIAN, dim, mean=mean, variance=variance)

    @classmethod
    def diagonal(cls, variances, mean=None):
        variances = tuple(variances)
        return cls(GAUSSIAN_DIAGONAL, len(variances), mean=mean, variance=variances)

    @classmethod
    def box(cls, low, high, dim):
        return cls(UNIFORM_BOX, dim, low=low, high=high)

    @classmethod
    def symmetric_box(cls, halfwidth, dim):
        return cls.box(-halfwidth, halfwidth, dim)


def draw_noise(spec, stream, size=None):
    """Draw one sample (shape ``(dim,)``) or ``size`` samples from ``spec``."""
    shape = (spec.dim,) if size is None else tuple(np.atleast_1d(size)) + (spec.dim,)
    if spec.kind == UNIFORM_BOX:
        low = np.asarray(spec.low)
        high = np.asarray(spec.high)
        return low + (high - low) * stream.random(shape)
    std = np.sqrt(np.asarray(spec.variance))
    return np.asarray(spec.mean) + std * stream.standard_normal(shape)


def normalize_weights(weights):
    """Scale non-negative weights to sum to one.

    A vector that already sums to one (to within rounding) is returned as a
    copy, which makes normalization idempotent.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ContractViolation("weights must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(w)):
        raise DegenerateWeightsError("non-finite particle weight")
    if np.any(w < 0):
        raise ContractViolation("weights must be non-negative")
    total = float(np.sum(w))
    if total <= 0.0:
        raise DegenerateWeightsError("all particle weights are zero")
    if abs(total - 1.0) <= _IDEMPOTENT_ATOL:
        return w.copy()
    return w / total


def weights_from_log(log_weights):
    """Exponentiate log-weights with max-subtraction and normalize."""
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.size == 0:
        raise ContractViolation("empty log-weight vector")
    top = np.max(lw)
    if not np.isfinite(top) or np.any(np.isnan(lw)):
        raise DegenerateWeightsError(f"log-weights are degenerate (max={top})")
    return normalize_weights(np.exp(lw - top))


def _check_normalized(weights):
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ContractViolation("empty particle set")
    if np.any(w < 0) or abs(float(np.sum(w)) - 1.0) > _NORMALIZED_ATOL:
        raise ContractViolation("weights are not normalized")
    return w


@dataclass
class ParticleSet:
    """Particles (one row each) with their importance weights."""

    particles: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=np.float64)
        if self.particles.ndim == 1:
            self.particles = self.particles[:, None]
        n = self.particles.shape[0]
        if n < 1:
            raise ContractViolation("a particle set needs at least one particle")
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise ContractViolation(f"{n} particles but {self.weights.shape} weights")
        if np.any(self.weights < 0):
            raise ContractViolation("weights must be non-negative")

    def __len__(self):
        return self.particles.shape[0]


def resample_indices(weights, stream):
    """Systematic resampling ancestor indices, one uniform draw per call."""
    w = _check_normalized(weights)
    return kernels.systematic_indices(w, float(stream.random()))


def systematic_resample(pset, stream):
    idx = resample_indices(pset.weights, stream)
    n = len(pset)
    return ParticleSet(pset.particles[idx], np.full(n, 1.0 / n))


def weighted_mean(values, weights):
    values = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if values.ndim == 1:
        return np.sum(w * values)
    return np.sum(w[:, None] * values, axis=0)


def mmse_estimate(pset):
    """Posterior-mean estimate of a weighted particle set."""
    w = _check_normalized(pset.weights)
    return weighted_mean(pset.particles, w)


class BootstrapFilter:
    """Plain SIR filter: propagate through the prior, weight, normalize, resample.

    ``transition(x, rng)`` maps an (N, n) particle array to the next one and
    ``log_likelihood(x, z)`` returns N log-densities.
    """

    def __init__(self, transition, log_likelihood, initial, proposal_stream, resample_stream):
        self.transition = transition
        self.log_likelihood = log_likelihood
        self.particles = np.array(initial, dtype=np.float64)
        n = self.particles.shape[0]
        self.log_weights = np.full(n, -math.log(n))
        self._proposal = proposal_stream
        self._resample = resample_stream

    def step(self, z):
        """Advance one step; returns (estimate, pre-resampling weights)."""
        self.particles = self.transition(self.particles, self._proposal)
        w = weights_from_log(self.log_weights + self.log_likelihood(self.particles, z))
        idx = resample_indices(w, self._resample)
        n = len(w)
        self.particles = self.particles[idx]
        self.log_weights = np.full(n, -math.log(n))
        return weighted_mean(self.particles, np.full(n, 1.0 / n)), w
