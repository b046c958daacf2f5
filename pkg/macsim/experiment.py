"""
Run assembly and parameter sweeps.

A Simulation wires one kernel, topology, channel, energy ledger,
application and one MAC instance per node, runs it to the horizon and
reduces it to a MetricsRow. Sweeps fan independent runs out over worker
processes and keep rows in job order.
"""
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .config import ExperimentConfig, TopologyConfig, validate
from .energy import EnergyLedger
from .errors import ConfigError
from .kernel import Kernel, seconds
from .mac import protocol_class
from .mac.base import MacContext, MacProtocol
from .radio import Channel, ClockModel
from .topology import Topology, build_gathering_tree, build_grid, build_line
from .workload import (Application, TrafficPattern, TrafficSpec, generate_convergecast,
                       generate_local_gossip)

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    'protocol', 'interarrival_s', 'seed', 'delivery_ratio', 'avg_node_energy_mj',
    'total_energy_mj', 'avg_latency_ms', 'originated', 'delivered', 'dropped',
]
TA_COLUMNS = ['protocol', 'ta_ms', 'seed', 'delivery_ratio', 'avg_node_energy_mj', 'total_energy_mj',
              'avg_latency_ms', 'originated', 'delivered', 'dropped']


@dataclass(frozen=True)
class MetricsRow:
    protocol: str
    interarrival_s: float
    seed: int
    delivery_ratio: float
    avg_node_energy_mj: float
    total_energy_mj: float
    avg_latency_ms: float
    originated: int
    delivered: int
    dropped: int

    def __post_init__(self):
        if self.delivered > self.originated:
            raise ValueError("delivered exceeds originated")

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def build_topology(spec: TopologyConfig) -> Topology:
    if spec.kind == 'grid':
        return build_grid(spec.rows, spec.cols, spec.spacing_m, spec.range_m)
    if spec.kind == 'line':
        return build_line(spec.count, spec.spacing_m, spec.range_m)
    raise ConfigError(f"unknown topology kind {spec.kind!r}")


class Simulation:
    """
    One fully wired simulation instance.

    Args:
        config: validated experiment config
        seed: master seed for every random stream of this run
        record: keep channel and ledger traces for property checks
    """

    def __init__(self, config: ExperimentConfig, seed: int, record: bool = False):
        self.config = config
        self.seed = int(seed)
        sim = config.sim
        pattern = config.traffic.traffic_pattern

        self.kernel = Kernel(self.seed)
        self.topology = build_topology(config.topology)
        self.tree = build_gathering_tree(self.topology, config.topology.root)
        self.ledger = EnergyLedger(config.power, record=record)
        self.clock = ClockModel.draw(self.kernel, self.topology.nodes, sim.theta_ppm)
        self.channel = Channel(self.kernel, self.topology.neighbor_map(), self.ledger, self.clock,
                               turnaround=sim.turnaround_us, record=record)
        self.app = Application(self.kernel, pattern, self.tree)
        self.sizes = sim.frame_sizes
        ctx = MacContext(self.kernel, self.channel, self.sizes, self.app, self.tree,
                         convergecast=pattern is TrafficPattern.CONVERGECAST)
        cls = protocol_class(config.protocol.name)
        params = config.protocol.build()
        self.macs: Dict[int, MacProtocol] = {}
        for node in self.topology.nodes:
            mac = cls(node, ctx, params)
            self.channel.attach(node, mac)
            self.macs[node] = mac
        self.app.attach(self.macs)

        self.horizon = seconds(sim.duration_s + sim.drain_s)
        self.originations = self._originations(pattern)
        for node, mac in self.macs.items():
            self.kernel.schedule(0, mac.on_boot)
        for item in self.originations:
            self.kernel.schedule(item.at, self.app.originate, item.origin, item.dst)

    def _originations(self, pattern: TrafficPattern):
        if pattern is TrafficPattern.NONE:
            return []
        traffic, sim = self.config.traffic, self.config.sim
        spec = TrafficSpec(pattern, seconds(traffic.interarrival_s),
                           seconds(sim.duration_s - traffic.start_s), self.seed, start=seconds(traffic.start_s))
        if pattern is TrafficPattern.CONVERGECAST:
            return generate_convergecast(spec, self.tree)
        return generate_local_gossip(spec, self.topology)

    def run(self) -> MetricsRow:
        processed = self.kernel.run_until(self.horizon)
        logger.debug("%s seed %d: %d events", self.config.protocol.name, self.seed, processed)
        return self.metrics()

    def metrics(self) -> MetricsRow:
        counts = self.app.counts()
        originated, delivered = counts['originated'], counts['delivered']
        nodes = self.topology.nodes
        latencies = self.app.latencies()
        return MetricsRow(
            protocol=self.config.protocol.name,
            interarrival_s=float(self.config.traffic.interarrival_s),
            seed=self.seed,
            delivery_ratio=delivered / originated if originated else 1.0,
            avg_node_energy_mj=self.ledger.fleet_average(nodes, self.kernel.now),
            total_energy_mj=self.ledger.fleet_total(nodes, self.kernel.now),
            avg_latency_ms=float(np.mean(latencies)) / 1000.0 if latencies else 0.0,
            originated=originated,
            delivered=delivered,
            dropped=counts['dropped'],
        )

    def energy_breakdown(self) -> Dict[str, float]:
        return self.ledger.breakdown(self.topology.nodes, self.kernel.now)

    def mac_stats(self) -> Counter:
        total: Counter = Counter()
        for mac in self.macs.values():
            total.update(mac.stats)
        return total


def run_experiment(config: ExperimentConfig, seed: int) -> MetricsRow:
    """One full simulation. Same config and seed give the same row."""
    validate(config)
    return Simulation(config, seed).run()


def _run_job(job: Tuple[ExperimentConfig, int]) -> MetricsRow:
    config, seed = job
    return Simulation(config, seed).run()


def run_jobs(jobs: Sequence[Tuple[ExperimentConfig, int]], workers: int = 1,
             progress: bool = True, desc: str = "Runs") -> List[MetricsRow]:
    """Run independent simulations; rows come back in job order whatever finishes first."""
    for config in {id(c): c for c, _ in jobs}.values():
        validate(config)
    bar = tqdm(total=len(jobs), desc=desc, disable=not progress)
    rows = []
    if workers <= 1:
        for job in jobs:
            rows.append(_run_job(job))
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(_run_job, jobs):
                rows.append(row)
                bar.update(1)
    bar.close()
    return rows


def sweep_interarrival(config: ExperimentConfig, values: Sequence[float], seeds: Sequence[int],
                       protocols: Optional[Sequence[str]] = None, workers: int = 1,
                       progress: bool = True) -> pd.DataFrame:
    """
    One MetricsRow per (protocol, interarrival, seed), in that nesting order.

    Raises:
        ConfigError: empty value or seed list, or an invalid config
    """
    if not values or not seeds:
        raise ConfigError("a sweep needs at least one value and one seed")
    protocols = list(protocols) if protocols else [config.protocol.name]
    jobs = [
        (config.with_protocol(name).with_traffic(interarrival_s=float(value)), int(seed))
        for name in protocols for value in values for seed in seeds
    ]
    rows = run_jobs(jobs, workers, progress, desc="Sweep")
    return pd.DataFrame([row.as_dict() for row in rows], columns=CSV_COLUMNS)


def sweep_ta(config: ExperimentConfig, ta_values_ms: Sequence[float], seeds: Sequence[int],
             workers: int = 1, progress: bool = True) -> pd.DataFrame:
    """
    T-MAC activity timeout sweep: one row per (ta, seed).

    Raises:
        ConfigError: if the config is not a T-MAC config
    """
    if config.protocol.name != 'tmac':
        raise ConfigError(f"the TA sweep needs protocol tmac, got {config.protocol.name}")
    if not ta_values_ms or not seeds:
        raise ConfigError("a sweep needs at least one value and one seed")
    jobs = [
        (config.with_protocol('tmac', ta_us=int(round(ta * 1000))), int(seed))
        for ta in ta_values_ms for seed in seeds
    ]
    rows = run_jobs(jobs, workers, progress, desc="TA sweep")
    records = []
    for (job_config, _), row in zip(jobs, rows):
        record = row.as_dict()
        record['ta_ms'] = job_config.protocol.params['ta_us'] / 1000.0
        records.append(record)
    return pd.DataFrame(records, columns=TA_COLUMNS)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Deterministic CSV: '.' decimals, '\\n' line ends, fixed float format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.6f')
    return path
