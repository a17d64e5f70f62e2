"""Communication graphs and synchronous average consensus with Metropolis weights."""
from collections import deque
from dataclasses import dataclass
import math

import numpy as np

from .errors import ContractViolation, TopologyError


class Topology:
    """Undirected graph over nodes ``0..n-1`` (no self-loops)."""

    def __init__(self, n, edges=()):
        if n < 1:
            raise TopologyError("a topology needs at least one node")
        self.n = int(n)
        normalized = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop at node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise TopologyError(f"edge ({a}, {b}) references a missing node")
            normalized.add((min(a, b), max(a, b)))
        self.edges = frozenset(normalized)
        self._neighbors = [[] for _ in range(self.n)]
        for a, b in sorted(self.edges):
            self._neighbors[a].append(b)
            self._neighbors[b].append(a)
        for nb in self._neighbors:
            nb.sort()

    @classmethod
    def complete(cls, n):
        return cls(n, [(a, b) for a in range(n) for b in range(a + 1, n)])

    @classmethod
    def path(cls, n):
        return cls(n, [(a, a + 1) for a in range(n - 1)])

    def neighbors(self, node):
        return list(self._neighbors[node])

    def degree(self, node):
        return len(self._neighbors[node])

    def __eq__(self, other):
        return isinstance(other, Topology) and self.n == other.n and self.edges == other.edges

    def __repr__(self):
        return f"Topology(n={self.n}, edges={sorted(self.edges)})"


def is_connected(topology):
    seen = {0}
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in topology.neighbors(node):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == topology.n


def metropolis_weights(topology):
    """Weight matrix with ``1/(1 + max(d_i, d_j))`` on edges and the remainder on the diagonal."""
    if not is_connected(topology):
        raise TopologyError("consensus requires a connected topology")
    n = topology.n
    W = np.zeros((n, n))
    for a, b in topology.edges:
        W[a, b] = W[b, a] = 1.0 / (1.0 + max(topology.degree(a), topology.degree(b)))
    for i in range(n):
        W[i, i] = 1.0 - math.fsum(W[i, j] for j in topology.neighbors(i))
    return W


@dataclass(frozen=True)
class ConsensusConfig:
    max_iterations: int = 50
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ContractViolation("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ContractViolation("tolerance must be positive")


@dataclass
class ConsensusResult:
    values: np.ndarray
    iterations: int
    converged: bool


def _as_node_matrix(values, W):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] != W.shape[0] or W.shape[0] != W.shape[1]:
        raise ContractViolation(f"values of shape {np.shape(values)} do not match a {W.shape} weight matrix")
    return v


def consensus_step(values, W):
    """One synchronous averaging round; row ``i`` of ``values`` is node ``i``'s vector.

    Each node reads only the previous round's values of itself and its
    neighbors, summed in ascending node order.
    """
    squeeze = np.ndim(values) == 1
    v = _as_node_matrix(values, W)
    out = np.empty_like(v)
    for i in range(v.shape[0]):
        acc = W[i, i] * v[i]
        for j in np.flatnonzero(W[i]):
            if j != i:
                acc = acc + W[i, j] * v[j]
        out[i] = acc
    return out[:, 0] if squeeze else out


def _spread(v):
    return float(np.max(np.max(v, axis=0) - np.min(v, axis=0))) if v.size else 0.0


def run_consensus(values, W, config=ConsensusConfig()):
    """Iterate :func:`consensus_step` until no further round can move a value by ``tolerance``.

    The cross-node spread bounds the change any subsequent round can make, so
    iteration stops once the spread drops below the tolerance (or when
    ``max_iterations`` is reached, reported through ``converged=False``).
    """
    squeeze = np.ndim(values) == 1
    v = _as_node_matrix(values, W).copy()
    iterations = 0
    converged = _spread(v) < config.tolerance
    while not converged and iterations < config.max_iterations:
        v = consensus_step(v, W)
        iterations += 1
        converged = _spread(v) < config.tolerance
    return ConsensusResult(v[:, 0] if squeeze else v, iterations, converged)


def max_consensus(values, topology):
    """Flood the componentwise maximum for ``n - 1`` rounds.

    After ``n - 1`` rounds every node of a connected graph holds the exact same
    vector, which removes the last-bit disagreement average consensus leaves.
    """
    v = np.asarray(values, dtype=np.float64).copy()
    for _ in range(topology.n - 1):
        nxt = v.copy()
        for i in range(topology.n):
            for j in topology.neighbors(i):
                np.maximum(nxt[i], v[j], out=nxt[i])
        v = nxt
    return v


def one_hop_sum(values, topology):
    """Each node's own value plus its direct neighbors' values."""
    v = np.asarray(values, dtype=np.float64)
    out = np.empty_like(v)
    for i in range(topology.n):
        acc = v[i].copy()
        for j in topology.neighbors(i):
            acc = acc + v[j]
        out[i] = acc
    return out
