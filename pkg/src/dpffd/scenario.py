"""Scenario configuration: dataclasses, YAML (de)serialization and validation.

Defaults reproduce the nine-tank experiment: three leak faults at tanks 4, 5
and 7, three detector nodes on a complete graph.
"""
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Union

import yaml

from .consensus import ConsensusConfig, Topology, is_connected
from .errors import ConfigError
from .faults import ABRUPT, INCIPIENT, FaultProfile
from .network import GLOBAL, ONE_HOP, DetectorNode, FilterConfig
from .tanks import N_TANKS, TankParams, grid_pipes, leak_mode

COMPLETE = "complete"
GRID = "grid"


@dataclass
class PlantConfig:
    tank_area: float = 0.0154
    pipe_area: float = 2e-5
    flow_correction: List[float] = field(default_factory=lambda: [1.0] * N_TANKS)
    gravity: float = 9.81
    sampling_period: float = 0.1
    initial_levels: List[float] = field(default_factory=lambda: [2.0] * N_TANKS)
    pipes: Union[str, List[List[int]]] = GRID
    process_noise_variance: float = 0.05


@dataclass
class FaultConfig:
    name: str
    tank: int
    onset_step: int
    profile: str = ABRUPT
    rate: float = 2.0


@dataclass
class NodeConfig:
    id: int
    tanks: List[int]
    noise_variance: float = 0.2


@dataclass
class FilterSettings:
    n_particles: int = 1000
    alpha: float = 0.9
    binary_noise_halfwidth: float = 0.75
    # None: use the truth values (plant process noise, node measurement noise)
    process_noise_variance: Optional[float] = None
    measurement_noise_variance: Optional[float] = None
    consensus_max_iterations: int = 50
    consensus_tolerance: float = 1e-8
    fusion: str = GLOBAL
    synchronize: bool = True
    threads: int = 1


def _default_faults():
    return [
        FaultConfig("leak-tank-4", 4, 2000),
        FaultConfig("leak-tank-5", 5, 2500),
        FaultConfig("leak-tank-7", 7, 2900),
    ]


def _default_nodes():
    return [
        NodeConfig(1, [1, 2, 3, 4, 5, 6]),
        NodeConfig(2, [4, 5, 6]),
        NodeConfig(3, [4, 5, 6, 7, 8, 9]),
    ]


@dataclass
class Scenario:
    seed: int = 0
    duration_steps: int = 3500
    plant: PlantConfig = field(default_factory=PlantConfig)
    faults: List[FaultConfig] = field(default_factory=_default_faults)
    nodes: List[NodeConfig] = field(default_factory=_default_nodes)
    topology: Union[str, List[List[int]]] = COMPLETE
    filter: FilterSettings = field(default_factory=FilterSettings)

    # -- construction of runtime objects ------------------------------------

    def tank_params(self):
        p = self.plant
        pipes = grid_pipes() if p.pipes == GRID else [(int(a) - 1, int(b) - 1) for a, b in p.pipes]
        return TankParams(p.tank_area, p.pipe_area, tuple(float(v) for v in p.flow_correction), p.gravity,
                          p.sampling_period, tuple(float(v) for v in p.initial_levels), tuple(pipes))

    def fault_modes(self, params=None):
        params = params or self.tank_params()
        return [leak_mode(f.tank, params, FaultProfile(f.profile, f.onset_step, f.rate), f.name)
                for f in self.faults]

    def node_index(self):
        return {n.id: i for i, n in enumerate(self.nodes)}

    def comm_topology(self):
        n = len(self.nodes)
        if self.topology == COMPLETE:
            return Topology.complete(n)
        index = self.node_index()
        return Topology(n, [(index[a], index[b]) for a, b in self.topology])

    def detector_nodes(self):
        override = self.filter.measurement_noise_variance
        return [DetectorNode(n.id, tuple(t - 1 for t in n.tanks),
                             n.noise_variance if override is None else override) for n in self.nodes]

    def filter_config(self):
        f = self.filter
        return FilterConfig(f.n_particles, f.alpha, ConsensusConfig(f.consensus_max_iterations, f.consensus_tolerance),
                            f.fusion, f.synchronize, f.threads)

    def filter_process_variance(self):
        v = self.filter.process_noise_variance
        return self.plant.process_noise_variance if v is None else v

    # -- validation ---------------------------------------------------------

    def validate(self):
        errors = []

        def check(cond, where, msg):
            if not cond:
                errors.append((where, msg))

        p = self.plant
        check(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
        check(isinstance(self.duration_steps, int) and self.duration_steps >= 1, "duration_steps", "must be >= 1")
        check(p.tank_area > 0, "plant.tank_area", "must be positive")
        check(p.pipe_area > 0, "plant.pipe_area", "must be positive")
        check(p.gravity > 0, "plant.gravity", "must be positive")
        check(p.sampling_period > 0, "plant.sampling_period", "must be positive")
        check(p.process_noise_variance >= 0, "plant.process_noise_variance", "must be non-negative")
        n_tanks = len(p.initial_levels)
        check(n_tanks >= 1, "plant.initial_levels", "needs at least one tank")
        check(all(v >= 0 for v in p.initial_levels), "plant.initial_levels", "levels must be non-negative")
        check(len(p.flow_correction) == n_tanks, "plant.flow_correction", f"needs {n_tanks} entries")
        if p.pipes == GRID:
            check(n_tanks == N_TANKS, "plant.pipes", f"'grid' layout needs exactly {N_TANKS} tanks")
        elif isinstance(p.pipes, list):
            for i, pair in enumerate(p.pipes):
                ok = len(pair) == 2 and pair[0] != pair[1] and all(1 <= t <= n_tanks for t in pair)
                check(ok, f"plant.pipes[{i}]", f"invalid pipe {pair}")
        else:
            errors.append(("plant.pipes", "must be 'grid' or a list of tank pairs"))

        names = set()
        for i, f in enumerate(self.faults):
            where = f"faults[{i}]"
            check(1 <= f.tank <= n_tanks, f"{where}.tank", f"tank {f.tank} does not exist")
            check(f.profile in (ABRUPT, INCIPIENT), f"{where}.profile", "must be 'abrupt' or 'incipient'")
            check(0 <= f.onset_step < self.duration_steps, f"{where}.onset_step", "must lie within the run duration")
            if f.profile == INCIPIENT:
                check(f.rate > 1, f"{where}.rate", "incipient faults need rate > 1")
            check(f.name not in names, f"{where}.name", f"duplicate fault name {f.name!r}")
            names.add(f.name)

        ids = [n.id for n in self.nodes]
        check(len(ids) >= 1, "nodes", "needs at least one detector node")
        check(len(set(ids)) == len(ids), "nodes", "node ids must be unique")
        for i, n in enumerate(self.nodes):
            check(len(n.tanks) >= 1, f"nodes[{i}].tanks", "must observe at least one tank")
            check(all(1 <= t <= n_tanks for t in n.tanks), f"nodes[{i}].tanks", "references a missing tank")
            check(n.noise_variance > 0, f"nodes[{i}].noise_variance", "must be positive")

        if self.topology != COMPLETE:
            if not isinstance(self.topology, list):
                errors.append(("topology", "must be 'complete' or a list of node-id pairs"))
            else:
                for i, pair in enumerate(self.topology):
                    ok = len(pair) == 2 and pair[0] != pair[1] and all(t in ids for t in pair)
                    check(ok, f"topology[{i}]", f"invalid edge {pair}")
        if not errors and len(ids) >= 1:
            check(is_connected(self.comm_topology()), "topology", "communication graph must be connected")

        f = self.filter
        check(f.n_particles >= 1, "filter.n_particles", "must be >= 1")
        check(0 < f.alpha < 1, "filter.alpha", "must lie in (0, 1)")
        check(f.binary_noise_halfwidth >= 0, "filter.binary_noise_halfwidth", "must be non-negative")
        check(f.process_noise_variance is None or f.process_noise_variance >= 0,
              "filter.process_noise_variance", "must be non-negative")
        check(f.measurement_noise_variance is None or f.measurement_noise_variance > 0,
              "filter.measurement_noise_variance", "must be positive")
        check(f.consensus_max_iterations >= 1, "filter.consensus_max_iterations", "must be >= 1")
        check(f.consensus_tolerance > 0, "filter.consensus_tolerance", "must be positive")
        check(f.fusion in (GLOBAL, ONE_HOP), "filter.fusion", f"must be {GLOBAL!r} or {ONE_HOP!r}")
        check(f.threads >= 1, "filter.threads", "must be >= 1")
        if errors:
            raise ConfigError(errors)
        return self

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([(k, "unknown field") for k in unknown])
        try:
            kwargs = {k: v for k, v in data.items() if k in ("seed", "duration_steps", "topology")}
            if "plant" in data:
                kwargs["plant"] = _build(PlantConfig, data["plant"], "plant")
            if "faults" in data:
                kwargs["faults"] = [_build(FaultConfig, f, f"faults[{i}]") for i, f in enumerate(data["faults"] or [])]
            if "nodes" in data:
                kwargs["nodes"] = [_build(NodeConfig, n, f"nodes[{i}]") for i, n in enumerate(data["nodes"] or [])]
            if "filter" in data:
                kwargs["filter"] = _build(FilterSettings, data["filter"], "filter")
        except TypeError as exc:
            raise ConfigError([("scenario", str(exc))]) from exc
        return cls(**kwargs)

    def dumps(self):
        return yaml.dump(self.to_dict(), Dumper=_Dumper, sort_keys=False)

    @classmethod
    def loads(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([("scenario", f"not valid YAML: {exc}")]) from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError([("scenario", "top level must be a mapping")])
        return cls.from_dict(data)

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())

    def with_(self, **changes):
        return replace(self, **changes)


class _Dumper(yaml.SafeDumper):
    pass


def _represent_list(dumper, data):
    # short scalar lists (tank sets, levels, pipe pairs) read best inline
    flow = all(not isinstance(v, (list, dict)) for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _represent_list)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError([(where, "must be a mapping")])
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError([(f"{where}.{k}", "unknown field") for k in unknown])
    types = {f.name: f.type for f in fields(cls)}
    data = {k: _coerce(v, types[k], f"{where}.{k}") for k, v in data.items()}
    return cls(**data)


def _coerce(value, annotation, where):
    # YAML 1.1 reads "1e-8" as a string; numeric fields accept such spellings
    if isinstance(value, str) and annotation in (float, Optional[float], int):
        try:
            return int(value) if annotation is int else float(value)
        except ValueError:
            raise ConfigError([(where, f"expected a number, got {value!r}")]) from None
    if annotation is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def nine_tank_scenario(**overrides):
    """The nine-tank, three-node scenario with every parameter at its default."""
    return Scenario(**overrides)
