"""Detector-node runtime: distributed (consensus-fused) and centralized fault-diagnosis filters."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from typing import List

import numpy as np

from . import kernels, streams as st
from .consensus import (ConsensusConfig, Topology, max_consensus, metropolis_weights, one_hop_sum,
                        run_consensus)
from .errors import ContractViolation
from .faults import AugmentedState
from .pf import resample_indices, weighted_mean, weights_from_log

GLOBAL = "global"
ONE_HOP = "one-hop"


@dataclass(frozen=True)
class DetectorNode:
    """A node observing ``x[selector]`` through Gaussian noise with per-component ``variance``."""

    node_id: int
    selector: tuple
    variance: tuple

    def __post_init__(self):
        sel = tuple(int(i) for i in self.selector)
        var = tuple(float(v) for v in np.broadcast_to(np.asarray(self.variance, dtype=float), (len(sel),)))
        if not sel:
            raise ContractViolation(f"node {self.node_id} observes nothing")
        if any(not v > 0 for v in var):
            raise ContractViolation(f"node {self.node_id}: measurement variance must be positive")
        object.__setattr__(self, "selector", sel)
        object.__setattr__(self, "variance", var)

    @property
    def n_z(self):
        return len(self.selector)

    def h(self, x):
        return np.asarray(x, dtype=float)[..., list(self.selector)]

    def log_likelihood(self, z, x):
        """Log-density of ``z`` for each row of the (N, n_x) batch ``x``."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_z,):
            raise ContractViolation(f"node {self.node_id} expects {self.n_z} measurements, got {z.shape}")
        return kernels.gaussian_loglik(np.atleast_2d(x), np.asarray(self.selector, dtype=np.int64), z,
                                       np.asarray(self.variance))


def local_log_likelihood(node, z, state):
    """Single-particle log-likelihood; depends only on the continuous part."""
    x = state.x if isinstance(state, AugmentedState) else state
    return float(node.log_likelihood(z, np.asarray(x, dtype=float)[None, :])[0])


def stacked_node(nodes):
    """One node observing the union of all nodes' measurements (duplicates kept)."""
    return DetectorNode(0, sum((n.selector for n in nodes), ()), sum((n.variance for n in nodes), ()))


def check_alarm(prob, alpha):
    return prob >= alpha


@dataclass(frozen=True)
class AlarmEvent:
    mode: int
    step: int
    probability: float
    node_id: int


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 1000
    alpha: float = 0.9
    consensus: ConsensusConfig = ConsensusConfig()
    fusion: str = GLOBAL
    synchronize: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.n_particles < 1:
            raise ContractViolation("n_particles must be >= 1")
        if not 0 < self.alpha < 1:
            raise ContractViolation("alpha must lie in (0, 1)")
        if self.fusion not in (GLOBAL, ONE_HOP):
            raise ContractViolation(f"fusion must be {GLOBAL!r} or {ONE_HOP!r}")
        if self.threads < 1:
            raise ContractViolation("threads must be >= 1")


@dataclass
class FilterStep:
    """Outputs of one filter step. Row ``i`` of each array belongs to node ``i``."""

    k: int
    estimates: np.ndarray
    failure_probabilities: np.ndarray
    weights: np.ndarray
    alarms: List[AlarmEvent] = field(default_factory=list)
    consensus_iterations: int = 0
    consensus_converged: bool = True


class _NodeState:
    """Particle bank of one node plus its replicas of the shared streams."""

    def __init__(self, model, n_particles, x0, streams):
        self.x = np.tile(np.asarray(x0, dtype=float), (n_particles, 1))
        self.faulty = np.zeros((n_particles, model.n_modes), dtype=bool)
        self.log_w = np.full(n_particles, -math.log(n_particles))
        self.proposal = streams.stream(st.PROPOSAL)
        self.binary = streams.stream(st.BINARY)
        self.resample = streams.stream(st.RESAMPLE)

    def propagate(self, model, u):
        self.x, self.faulty = model.propagate(self.x, self.faulty, u, self.proposal, self.binary)

    def finish(self, fused_loglik):
        """Weight, resample, and estimate; returns (weights, estimate, failure probabilities)."""
        w = weights_from_log(self.log_w + fused_loglik)
        idx = resample_indices(w, self.resample)
        n = len(w)
        self.x = self.x[idx]
        self.faulty = self.faulty[idx]
        self.log_w = np.full(n, -math.log(n))
        uniform = np.full(n, 1.0 / n)
        estimate = weighted_mean(self.x, uniform)
        pfail = np.array([float(np.sum(np.where(self.faulty[:, j], uniform, 0.0)))
                          for j in range(self.faulty.shape[1])])
        return w, estimate, pfail


class _FilterBase:
    def __init__(self, model, labels, config, x0):
        self.model = model
        self.config = config
        self.labels = list(labels)
        self.k = 0
        self._above = np.zeros((len(self.labels), model.n_modes), dtype=bool)
        self.x0 = np.asarray(x0, dtype=float)
        if self.x0.shape != (model.n_x,):
            raise ContractViolation(f"initial state has shape {self.x0.shape}, model expects ({model.n_x},)")

    def _alarms(self, pfail):
        events = []
        for i, label in enumerate(self.labels):
            for j in range(pfail.shape[1]):
                on = check_alarm(pfail[i, j], self.config.alpha)
                if on and not self._above[i, j]:
                    events.append(AlarmEvent(j, self.k, float(pfail[i, j]), label))
                self._above[i, j] = on
        return events


class DistributedFilter(_FilterBase):
    """Network of detector nodes, each running a particle filter over the augmented model.

    Local log-likelihoods are fused by average consensus (scaled by the known
    network size to recover the sum). Every node owns its own particles and its
    own replicas of the shared streams.
    """

    def __init__(self, model, nodes, topology, config=FilterConfig(), seed=0, x0=None):
        nodes = list(nodes)
        if topology.n != len(nodes):
            raise ContractViolation(f"topology has {topology.n} nodes but {len(nodes)} detector nodes were given")
        super().__init__(model, [n.node_id for n in nodes], config, model_x0(model, x0))
        self.nodes = nodes
        self.topology = topology
        self.W = metropolis_weights(topology)
        streams = seed if isinstance(seed, st.RandomStreams) else st.RandomStreams(seed)
        self.states = [_NodeState(model, config.n_particles, self.x0, streams) for _ in nodes]
        self._pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    def _local(self, i, u, z):
        state = self.states[i]
        state.propagate(self.model, u)
        return self.nodes[i].log_likelihood(z, state.x)

    def fuse(self, local):
        """Per-node fused log-likelihood vectors from the (N, N_s) local ones."""
        n = len(self.nodes)
        if self.config.fusion == ONE_HOP:
            return one_hop_sum(local, self.topology), 0, True
        result = run_consensus(local, self.W, self.config.consensus)
        avg = result.values
        if self.config.synchronize and n > 1:
            avg = max_consensus(avg, self.topology)
        return avg * float(n), result.iterations, result.converged

    def step(self, u, measurements):
        if len(measurements) != len(self.nodes):
            raise ContractViolation("one measurement vector per node is required")
        self.k += 1
        jobs = range(len(self.nodes))
        if self._pool is not None:
            local = list(self._pool.map(lambda i: self._local(i, u, measurements[i]), jobs))
        else:
            local = [self._local(i, u, measurements[i]) for i in jobs]
        fused, iters, converged = self.fuse(np.vstack(local))
        out = [s.finish(fused[i]) for i, s in enumerate(self.states)]
        weights = np.vstack([o[0] for o in out])
        estimates = np.vstack([o[1] for o in out])
        pfail = np.vstack([o[2] for o in out]).reshape(len(self.nodes), self.model.n_modes)
        return FilterStep(self.k, estimates, pfail, weights, self._alarms(pfail), iters, converged)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


class CentralizedFilter(_FilterBase):
    """Single fusion-center filter observing the stacked measurement of every node."""

    def __init__(self, model, nodes, config=FilterConfig(), seed=0, x0=None):
        nodes = list(nodes)
        super().__init__(model, ["central"], config, model_x0(model, x0))
        self.nodes = nodes
        self.stacked = stacked_node(nodes)
        streams = seed if isinstance(seed, st.RandomStreams) else st.RandomStreams(seed)
        self.state = _NodeState(model, config.n_particles, self.x0, streams)

    def step(self, u, measurements):
        self.k += 1
        z = np.concatenate([np.asarray(m, dtype=float) for m in measurements])
        self.state.propagate(self.model, u)
        loglik = self.stacked.log_likelihood(z, self.state.x)
        w, estimate, pfail = self.state.finish(loglik)
        pfail = pfail.reshape(1, self.model.n_modes)
        return FilterStep(self.k, estimate[None, :], pfail, w[None, :], self._alarms(pfail), 0, True)

    def close(self):
        pass


def model_x0(model, x0):
    if x0 is None:
        return np.zeros(model.n_x)
    return np.asarray(x0, dtype=float)


def distributed_weight_update(local_logliks, log_prior, W, config=ConsensusConfig(), topology=None):
    """Fuse (N, N_s) local log-likelihoods and return per-node normalized weights.

    Convenience form of the weight update used by :class:`DistributedFilter`,
    useful for checking the fusion in isolation.
    """
    local = np.atleast_2d(np.asarray(local_logliks, dtype=float))
    n = local.shape[0]
    avg = run_consensus(local, W, config).values
    if topology is not None and n > 1:
        avg = max_consensus(avg, topology)
    fused = avg * float(n)
    return np.vstack([weights_from_log(np.asarray(log_prior, dtype=float) + fused[i]) for i in range(n)])
