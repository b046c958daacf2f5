"""
Experiment configuration: YAML files with the sections protocol, power,
topology, traffic and sim.

Every key has a default here; a file only needs what it changes. Unknown
sections and keys are rejected so that a typo never silently falls back
to a default.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from .energy import PowerProfile
from .errors import ConfigError
from .frames import FrameSizes
from .mac import build_params, protocol_class
from .mac.base import MacParams
from .workload import TrafficPattern, validate_workload

logger = logging.getLogger(__name__)

TOPOLOGY_KINDS = ('grid', 'line')


@dataclass(frozen=True)
class ProtocolConfig:
    """
    Which protocol to run and with what parameters.

    `profiles` holds tuned parameter sets per protocol name; the one matching
    `name` is applied first and `params` override it. Sweeps that switch
    protocol keep the profiles, so each protocol runs with its own tuning.
    """
    name: str = 'smac'
    params: Dict[str, Any] = field(default_factory=dict)
    profiles: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @property
    def effective_params(self) -> Dict[str, Any]:
        merged = dict(self.profiles.get(self.name) or {})
        merged.update(self.params)
        return merged

    def build(self) -> MacParams:
        return build_params(self.name, self.effective_params)


@dataclass(frozen=True)
class TopologyConfig:
    kind: str = 'grid'
    rows: int = 5
    cols: int = 5
    count: int = 3
    spacing_m: float = 10.0
    range_m: float = 10.0
    root: int = 0


@dataclass(frozen=True)
class TrafficConfig:
    pattern: str = 'convergecast'
    interarrival_s: float = 10.0
    start_s: float = 10.0

    @property
    def traffic_pattern(self) -> TrafficPattern:
        return TrafficPattern(self.pattern)


@dataclass(frozen=True)
class SimConfig:
    duration_s: float = 600.0
    drain_s: float = 30.0
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    output: str = 'results.csv'
    theta_ppm: int = 30
    turnaround_us: int = 0
    bitrate_bps: int = 250_000
    control_bytes: int = 12
    data_bytes: int = 64
    header_bytes: int = 8
    workers: int = 1

    @property
    def frame_sizes(self) -> FrameSizes:
        return FrameSizes(self.bitrate_bps, self.control_bytes, self.data_bytes, self.header_bytes)


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    power: PowerProfile = field(default_factory=PowerProfile)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def with_protocol(self, name: str, **params: Any) -> 'ExperimentConfig':
        """
        Copy with another protocol. Explicit parameters are only kept when the
        protocol is unchanged; profiles always are.
        """
        kept = dict(self.protocol.params) if name == self.protocol.name else {}
        kept.update(params)
        return dataclasses.replace(self, protocol=ProtocolConfig(name, kept, self.protocol.profiles))

    def with_traffic(self, **changes: Any) -> 'ExperimentConfig':
        return dataclasses.replace(self, traffic=dataclasses.replace(self.traffic, **changes))

    def with_sim(self, **changes: Any) -> 'ExperimentConfig':
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, **changes))


SECTIONS = {
    'power': PowerProfile,
    'topology': TopologyConfig,
    'traffic': TrafficConfig,
    'sim': SimConfig,
}


def _section(name: str, cls, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(unknown)}")
    values = dict(raw)
    if 'seeds' in values:
        values['seeds'] = _seeds(values['seeds'])
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value in '{name}': {e}") from e


def _profiles(raw: Any) -> Dict[str, Dict[str, Any]]:
    """
    Per-protocol parameter sets. Each one is checked against its protocol's
    parameter class even when that protocol is not the one selected.
    """
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("protocol.profiles must map protocol names to parameter mappings")
    profiles = {}
    for name, params in raw.items():
        params = params or {}
        if not isinstance(params, dict):
            raise ConfigError(f"protocol.profiles.{name} must be a mapping")
        build_params(str(name), params)
        profiles[str(name)] = dict(params)
    return profiles


def _seeds(raw: Any) -> Tuple[int, ...]:
    """A seed list, or an integer n meaning seeds 1..n."""
    if isinstance(raw, int):
        if raw < 1:
            raise ConfigError("sim.seeds must be >= 1")
        return tuple(range(1, raw + 1))
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError("sim.seeds must be a non-empty list or a count")
    return tuple(int(s) for s in raw)


def parse_config(data: Optional[Dict[str, Any]]) -> ExperimentConfig:
    """
    Build a validated config from an already-parsed mapping.

    Raises:
        ConfigError: unknown sections or keys, bad values, or invalid
            protocol/workload combinations
    """
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS) - {'protocol'})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")

    raw_protocol = data.get('protocol') or {}
    if isinstance(raw_protocol, str):
        raw_protocol = {'name': raw_protocol}
    if not isinstance(raw_protocol, dict):
        raise ConfigError("section 'protocol' must be a mapping or a protocol name")
    extra = sorted(set(raw_protocol) - {'name', 'params', 'profiles'})
    if extra:
        raise ConfigError(f"unknown key(s) in 'protocol': {', '.join(extra)}")
    protocol = ProtocolConfig(str(raw_protocol.get('name', 'smac')), dict(raw_protocol.get('params') or {}),
                              _profiles(raw_protocol.get('profiles')))

    sections = {name: _section(name, cls, data.get(name)) for name, cls in SECTIONS.items()}
    config = ExperimentConfig(protocol=protocol, **sections)
    validate(config)
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a YAML experiment file.

    Raises:
        ConfigError: unreadable file, malformed YAML or invalid content
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    logger.debug("loaded config %s", path)
    return parse_config(data)


def validate(config: ExperimentConfig) -> List[str]:
    """
    Check a config before any simulation starts.

    Returns:
        Warnings about questionable (but legal) parameter choices.

    Raises:
        ConfigError: on anything that would make the run meaningless
    """
    cls = protocol_class(config.protocol.name)
    params = config.protocol.build()
    try:
        pattern = config.traffic.traffic_pattern
    except ValueError:
        choices = ', '.join(p.value for p in TrafficPattern)
        raise ConfigError(f"unknown traffic pattern {config.traffic.pattern!r}; choose from {choices}") from None
    validate_workload(config.protocol.name, pattern)
    topo = config.topology
    if topo.kind not in TOPOLOGY_KINDS:
        raise ConfigError(f"unknown topology kind {topo.kind!r}; choose from {', '.join(TOPOLOGY_KINDS)}")
    if config.traffic.interarrival_s <= 0:
        raise ConfigError("traffic.interarrival_s must be positive")
    sim = config.sim
    if sim.duration_s <= 0 or sim.drain_s < 0:
        raise ConfigError("sim.duration_s must be positive and sim.drain_s >= 0")
    if config.traffic.start_s < 0 or config.traffic.start_s > sim.duration_s:
        raise ConfigError("traffic.start_s must lie within the simulated duration")
    if sim.theta_ppm < 0 or sim.turnaround_us < 0:
        raise ConfigError("sim.theta_ppm and sim.turnaround_us must be >= 0")
    if sim.workers < 1:
        raise ConfigError("sim.workers must be >= 1")
    warnings = cls.check_params(params, sim.frame_sizes, sim.turnaround_us)
    for warning in warnings:
        logger.warning("%s: %s", config.protocol.name, warning)
    return warnings
