"""Run scenarios end to end and compare the resulting traces."""
from dataclasses import dataclass, field
import logging
from typing import List, Optional

import numpy as np

from . import streams as st
from .errors import ContractViolation, DegenerateWeightsError, NumericDivergenceError
from .network import AlarmEvent, CentralizedFilter, DistributedFilter
from .pf import NoiseSpec, draw_noise
from .tanks import TankPlant, filter_model

log = logging.getLogger(__name__)

CENTRALIZED = "centralized"
DISTRIBUTED = "distributed"


@dataclass
class RunTrace:
    """Per-step record of a run. Arrays are indexed ``[step, node, ...]``."""

    mode: str
    node_labels: List[str]
    mode_names: List[str]
    onsets: List[int]
    observed_tanks: List[int]
    ts: float
    alpha: float
    k: np.ndarray
    truth: np.ndarray
    estimates: np.ndarray
    pfail: np.ndarray
    consensus_iterations: np.ndarray
    alarms: List[AlarmEvent] = field(default_factory=list)
    complete: bool = True

    @property
    def n_steps(self):
        return len(self.k)

    @property
    def time_s(self):
        return self.k * self.ts

    def alarm_flags(self):
        return self.pfail >= self.alpha

    def first_alarm_step(self, mode):
        """Earliest step at which any node reports mode ``mode`` at or above alpha."""
        hits = np.flatnonzero(np.any(self.pfail[:, :, mode] >= self.alpha, axis=1))
        return int(self.k[hits[0]]) if hits.size else None

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        scalars = ("mode", "node_labels", "mode_names", "onsets", "observed_tanks", "ts", "alpha", "alarms",
                   "complete")
        arrays = ("k", "truth", "estimates", "pfail", "consensus_iterations")
        return (all(getattr(self, a) == getattr(other, a) for a in scalars)
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays))


def simulate_truth(scenario, streams=None):
    """Truth levels (steps 0..K) and per-node measurements (steps 1..K)."""
    streams = streams or st.RandomStreams(scenario.seed)
    params = scenario.tank_params()
    plant = TankPlant(params, scenario.fault_modes(params), scenario.plant.process_noise_variance)
    truth = plant.simulate(scenario.duration_steps, streams.stream(st.PLANT))
    K = scenario.duration_steps
    measurements = []
    for node in scenario.nodes:
        idx = np.asarray(node.tanks) - 1
        spec = NoiseSpec.gaussian(node.noise_variance, len(idx))
        noise = draw_noise(spec, streams.stream(st.measurement_stream_name(node.id)), K)
        measurements.append(truth[1:, idx] + noise)
    return truth, measurements


def build_filter(scenario, mode, streams=None):
    streams = streams or st.RandomStreams(scenario.seed)
    params = scenario.tank_params()
    model = filter_model(params, scenario.fault_modes(params), scenario.filter_process_variance(),
                         scenario.filter.binary_noise_halfwidth)
    nodes = scenario.detector_nodes()
    config = scenario.filter_config()
    if mode == DISTRIBUTED:
        return DistributedFilter(model, nodes, scenario.comm_topology(), config, streams, params.x0)
    if mode == CENTRALIZED:
        return CentralizedFilter(model, nodes, config, streams, params.x0)
    raise ContractViolation(f"mode must be {CENTRALIZED!r} or {DISTRIBUTED!r}, got {mode!r}")


def run_experiment(scenario, mode=DISTRIBUTED, on_step=None, progress=None):
    """Run ``scenario`` in the given mode and return its :class:`RunTrace`.

    ``on_step(step_result)`` sees each filter step's full output (including
    pre-resampling weights). On numeric divergence the partial trace is
    attached to the raised error as ``exc.trace``.
    """
    scenario.validate()
    streams = st.RandomStreams(scenario.seed)
    truth, measurements = simulate_truth(scenario, streams)
    filt = build_filter(scenario, mode, streams)
    K = scenario.duration_steps
    n_nodes = len(filt.labels)
    n_x = truth.shape[1]
    M = len(scenario.faults)
    estimates = np.empty((K, n_nodes, n_x))
    pfail = np.empty((K, n_nodes, M))
    iterations = np.zeros(K, dtype=np.int64)
    alarms = []
    done = 0
    try:
        for k in range(1, K + 1):
            res = filt.step(None, [m[k - 1] for m in measurements])
            estimates[k - 1] = res.estimates
            pfail[k - 1] = res.failure_probabilities
            iterations[k - 1] = res.consensus_iterations
            alarms.extend(res.alarms)
            if not res.consensus_converged:
                log.debug("consensus did not converge at step %d", k)
            if on_step is not None:
                on_step(res)
            if progress is not None:
                progress(k, K)
            done = k
    except (NumericDivergenceError, DegenerateWeightsError) as exc:
        trace = _make_trace(scenario, mode, filt, truth, estimates, pfail, iterations, alarms, done, False)
        err = NumericDivergenceError(f"run aborted at step {done + 1}: {exc}", step=done)
        err.trace = trace
        raise err from exc
    finally:
        filt.close()
    return _make_trace(scenario, mode, filt, truth, estimates, pfail, iterations, alarms, K, True)


def _make_trace(scenario, mode, filt, truth, estimates, pfail, iterations, alarms, n, complete):
    observed = sorted({t for node in scenario.nodes for t in node.tanks})
    return RunTrace(
        mode=mode,
        node_labels=[str(label) for label in filt.labels],
        mode_names=[f.name for f in scenario.faults],
        onsets=[f.onset_step for f in scenario.faults],
        observed_tanks=observed,
        ts=scenario.plant.sampling_period,
        alpha=scenario.filter.alpha,
        k=np.arange(1, n + 1),
        truth=truth[1:n + 1].copy(),
        estimates=estimates[:n].copy(),
        pfail=pfail[:n].copy(),
        consensus_iterations=iterations[:n].copy(),
        alarms=[a for a in alarms if a.step <= n],
        complete=complete,
    )


def _align(a, b):
    if a.shape == b.shape:
        return a, b
    if a.shape[1] == 1:
        return np.broadcast_to(a, b.shape), b
    if b.shape[1] == 1:
        return a, np.broadcast_to(b, a.shape)
    raise ContractViolation(f"cannot align traces with {a.shape[1]} and {b.shape[1]} nodes")


def compare_traces(a, b):
    """Deviation metrics between two traces of equal duration.

    A single-node (centralized) trace is broadcast against every node of the
    other trace.
    """
    if a.n_steps != b.n_steps:
        raise ContractViolation(f"trace durations differ: {a.n_steps} vs {b.n_steps}")
    ea, eb = _align(a.estimates, b.estimates)
    pa, pb = _align(a.pfail, b.pfail)
    de = np.abs(ea - eb)
    dp = np.abs(pa - pb)
    deltas = {}
    for j, name in enumerate(a.mode_names):
        sa, sb = a.first_alarm_step(j), b.first_alarm_step(j)
        deltas[name] = None if sa is None or sb is None else sb - sa
    return {
        "steps": a.n_steps,
        "estimate_max_abs": float(de.max()) if de.size else 0.0,
        "estimate_mean_abs": float(de.mean()) if de.size else 0.0,
        "pfail_max_abs": float(dp.max()) if dp.size else 0.0,
        "pfail_mean_abs": float(dp.mean()) if dp.size else 0.0,
        "first_alarm_a": {name: a.first_alarm_step(j) for j, name in enumerate(a.mode_names)},
        "first_alarm_b": {name: b.first_alarm_step(j) for j, name in enumerate(b.mode_names)},
        "alarm_step_delta": deltas,
    }


def detection_summary(trace):
    """Per-mode detection latency (steps after onset) and pre-onset false-alarm fraction, per node."""
    out = {}
    for j, name in enumerate(trace.mode_names):
        onset = trace.onsets[j]
        pre = trace.k <= onset
        post = ~pre
        nodes = {}
        for i, label in enumerate(trace.node_labels):
            p = trace.pfail[:, i, j]
            hits = np.flatnonzero(post & (p >= trace.alpha))
            nodes[label] = {
                "latency_steps": int(trace.k[hits[0]] - onset) if hits.size else None,
                "pre_onset_below_alpha": float(np.mean(p[pre] < trace.alpha)) if pre.any() else 1.0,
            }
        out[name] = nodes
    return out
