"""
Builders for wiring small networks in tests.

Drift is off (theta_ppm = 0) unless a test asks for it, so timings can be
asserted exactly.
"""
from typing import Any, Dict, Optional

from macsim.config import ExperimentConfig, ProtocolConfig, SimConfig, TopologyConfig, TrafficConfig
from macsim.experiment import Simulation


def make_config(protocol: str = 'bmac', params: Optional[Dict[str, Any]] = None,
                kind: str = 'line', count: int = 2, rows: int = 3, cols: int = 3, range_m: float = 10.0,
                pattern: str = 'none', interarrival_s: float = 10.0,
                duration_s: float = 20.0, drain_s: float = 0.0, theta_ppm: int = 0,
                **sim: Any) -> ExperimentConfig:
    return ExperimentConfig(
        protocol=ProtocolConfig(protocol, dict(params or {})),
        topology=TopologyConfig(kind=kind, count=count, rows=rows, cols=cols, range_m=range_m),
        traffic=TrafficConfig(pattern=pattern, interarrival_s=interarrival_s, start_s=0.0),
        sim=SimConfig(duration_s=duration_s, drain_s=drain_s, theta_ppm=theta_ppm, **sim),
    )


def make_sim(protocol: str = 'bmac', seed: int = 1, record: bool = True, **kwargs: Any) -> Simulation:
    """A wired network with no generated traffic; tests inject payloads by hand."""
    return Simulation(make_config(protocol, **kwargs), seed, record=record)


def send_at(sim: Simulation, at: int, origin: int, dst: int) -> None:
    sim.kernel.schedule(at, sim.app.originate, origin, dst)


def payload(sim: Simulation, pid: int = 0):
    return sim.app.payloads[pid]
