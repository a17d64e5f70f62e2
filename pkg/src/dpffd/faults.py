"""Fault modes, binary health states and the fault-augmented transition model.

A binary health state is one of ``e1 = [1, 0]`` (healthy) or ``e2 = [0, 1]``
(fault active). Batches store only the second component as a boolean array of
shape (n_particles, n_modes); ``True`` means the particle hypothesizes the
fault.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ContractViolation, NumericDivergenceError
from .pf import NoiseSpec, draw_noise

ABRUPT = "abrupt"
INCIPIENT = "incipient"

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


@dataclass(frozen=True)
class FaultProfile:
    kind: str = ABRUPT
    onset: int = 0
    rate: float = 2.0

    def __post_init__(self):
        if self.kind not in (ABRUPT, INCIPIENT):
            raise ContractViolation(f"unknown fault profile {self.kind!r}")
        if self.onset < 0:
            raise ContractViolation("fault onset step must be non-negative")
        if self.kind == INCIPIENT and not self.rate > 1:
            raise ContractViolation("incipient faults need a rate c > 1")


def beta(profile, k):
    """Occurrence level of a fault at step ``k``: 0 before onset, then 1 or 1 - c^-(k-k0)."""
    if k < profile.onset:
        return 0.0
    if profile.kind == ABRUPT:
        return 1.0
    return 1.0 - profile.rate ** (-(k - profile.onset))


@dataclass(frozen=True)
class FaultMode:
    """A fault's additive dynamics ``g(x, u)`` and its truth-side occurrence profile.

    ``dynamics`` receives an (N, n_x) batch and returns the (N, n_x) state
    increment the fault adds over one step.
    """

    name: str
    dynamics: Callable
    profile: FaultProfile = FaultProfile()


def phi(v):
    """Snap a perturbed 2-vector to the nearer of e1/e2; ties go to e1."""
    v = np.asarray(v, dtype=float)
    # squared distances: same ordering as the norms, and matches the batch kernel
    if np.sum((v - E1) ** 2) <= np.sum((v - E2) ** 2):
        return E1.copy()
    return E2.copy()


def is_faulty(b):
    b = np.asarray(b)
    if b.shape != (2,) or not (np.array_equal(b, E1) or np.array_equal(b, E2)):
        raise ContractViolation(f"not a binary state: {b}")
    return bool(b[1] == 1.0)


def step_binary(b, spec, stream):
    """One excitation-and-snap update of a single binary state."""
    return phi(np.asarray(b, dtype=float) + draw_noise(spec, stream))


@dataclass
class AugmentedState:
    """Single augmented particle: continuous state plus one binary state per mode."""

    x: np.ndarray
    b: Sequence[np.ndarray]

    @property
    def faulty(self):
        return np.array([is_faulty(bj) for bj in self.b], dtype=bool)

    def as_vector(self):
        """Flat ``[x, b^1, ..., b^M]`` of length n_x + 2M."""
        return np.concatenate([np.asarray(self.x, dtype=float)] + [np.asarray(bj, dtype=float) for bj in self.b])

    @classmethod
    def from_flags(cls, x, faulty):
        return cls(np.asarray(x, dtype=float), [E2.copy() if f else E1.copy() for f in faulty])


def truth_fault_injection(x, k, modes, u=None):
    """Sum of profile-weighted fault increments applied by the truth simulator."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros_like(x)
    for mode in modes:
        level = beta(mode.profile, k)
        if level:
            total = total + level * mode.dynamics(x, u)
    return total


def failure_probability(weights, faulty, j):
    """Weighted fraction of particles whose mode-``j`` hypothesis is the fault."""
    w = np.asarray(weights, dtype=float)
    flags = np.asarray(faulty)[:, j]
    return float(np.sum(np.where(flags, w, 0.0)))


class AugmentedModel:
    """Healthy dynamics plus binary-gated fault increments and binary excitation.

    ``transition(x, u)`` is the noise-free healthy map on an (N, n_x) batch.
    ``lower_bound``, when set, floors every state component after the noise
    is added.
    """

    def __init__(self, transition, n_x, modes=(), process_noise=None, binary_noise=None,
                 lower_bound: Optional[float] = None):
        self.transition = transition
        self.n_x = int(n_x)
        self.modes = list(modes)
        if process_noise is None:
            process_noise = NoiseSpec.gaussian(0.0, self.n_x)
        if process_noise.dim != self.n_x:
            raise ContractViolation("process noise dimension must equal the state dimension")
        if binary_noise is None:
            binary_noise = NoiseSpec.symmetric_box(0.75, 2)
        if binary_noise.dim != 2:
            raise ContractViolation("binary excitation noise must be 2-dimensional")
        self.process_noise = process_noise
        self.binary_noise = binary_noise
        self.lower_bound = lower_bound

    @property
    def n_modes(self):
        return len(self.modes)

    def propagate_continuous(self, x, faulty, u, proposal):
        """Healthy step, fault increments gated by the current ``faulty`` flags, then noise."""
        x = np.asarray(x, dtype=float)
        out = self.transition(x, u)
        for j, mode in enumerate(self.modes):
            rows = np.flatnonzero(faulty[:, j])
            if rows.size:
                out[rows] += mode.dynamics(x[rows], u)
        out = out + draw_noise(self.process_noise, proposal, x.shape[0])
        if self.lower_bound is not None:
            np.maximum(out, self.lower_bound, out=out)
        if not np.all(np.isfinite(out)):
            raise NumericDivergenceError("non-finite state after transition")
        return out

    def propagate_binary(self, faulty, binary):
        n, m = faulty.shape
        if m == 0:
            return faulty.copy()
        noise = draw_noise(self.binary_noise, binary, (n, m))
        return kernels.snap_binary(faulty, noise)

    def propagate(self, x, faulty, u, proposal, binary):
        """Advance an augmented batch one step; returns ``(x_next, faulty_next)``."""
        faulty = np.asarray(faulty, dtype=bool).reshape(np.shape(x)[0], self.n_modes)
        return (self.propagate_continuous(x, faulty, u, proposal),
                self.propagate_binary(faulty, binary))

    def augmented_transition(self, state, u, proposal, binary):
        """Single-particle form of :meth:`propagate` on an :class:`AugmentedState`."""
        x, f = self.propagate(np.asarray(state.x, dtype=float)[None, :], state.faulty[None, :], u, proposal, binary)
        return AugmentedState.from_flags(x[0], f[0])
