"""
Traffic generation and application-layer forwarding.

Routing lives at the application layer: a converge-cast payload delivered
by the MAC at an intermediate node is re-enqueued towards that node's
parent in the gathering tree.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set

from .errors import ConfigError
from .frames import BROADCAST, Frame
from .kernel import Kernel, RngStream, SimTime, seconds
from .mac.base import EnqueueResult
from .topology import GatheringTree, Topology

logger = logging.getLogger(__name__)


class TrafficPattern(Enum):
    CONVERGECAST = 'convergecast'
    LOCAL_GOSSIP = 'local_gossip'
    NONE = 'none'


@dataclass(frozen=True)
class TrafficSpec:
    """
    Poisson sources active in [start, start + duration).

    interarrival is the mean gap per source, in ticks.
    """
    pattern: TrafficPattern
    interarrival: SimTime
    duration: SimTime
    seed: int
    start: SimTime = seconds(10)

    def __post_init__(self):
        if self.interarrival <= 0:
            raise ConfigError(f"interarrival must be positive, got {self.interarrival}")
        if self.duration < 0:
            raise ConfigError("traffic duration must be >= 0")


@dataclass(frozen=True, order=True)
class Origination:
    at: SimTime
    origin: int
    dst: int


def _source_times(spec: TrafficSpec, node: int) -> List[SimTime]:
    stream = RngStream(spec.seed, node, 'traffic-gaps')
    end = spec.start + spec.duration
    times = []
    t = spec.start + stream.exponential(spec.interarrival)
    while t < end:
        times.append(int(t))
        t += stream.exponential(spec.interarrival)
    return times


def generate_convergecast(spec: TrafficSpec, tree: GatheringTree) -> List[Origination]:
    """Every non-root node sends to the root with exponential gaps."""
    if spec.pattern is not TrafficPattern.CONVERGECAST:
        raise ConfigError(f"converge-cast generator given a {spec.pattern.value} spec")
    schedule = [
        Origination(at, node, tree.root)
        for node in tree.nodes if node != tree.root
        for at in _source_times(spec, node)
    ]
    return sorted(schedule)


def generate_local_gossip(spec: TrafficSpec, topology: Topology) -> List[Origination]:
    """Every node sends to a uniformly drawn direct neighbour."""
    if spec.pattern is not TrafficPattern.LOCAL_GOSSIP:
        raise ConfigError(f"gossip generator given a {spec.pattern.value} spec")
    schedule = []
    for node in topology.nodes:
        neighbors = topology.neighbors(node)
        if not neighbors:
            continue
        picker = RngStream(spec.seed, node, 'traffic-dst')
        for at in _source_times(spec, node):
            schedule.append(Origination(at, node, neighbors[picker.draw(len(neighbors))]))
    return sorted(schedule)


def validate_workload(protocol: str, pattern: TrafficPattern) -> None:
    """
    Raises:
        ConfigError: D-MAC forwards along a gathering tree only
    """
    if protocol == 'dmac' and pattern is TrafficPattern.LOCAL_GOSSIP:
        raise ConfigError("dmac cannot carry local-gossip traffic (hierarchical forwarding only)")


class PayloadStatus(Enum):
    IN_FLIGHT = 'in_flight'
    DELIVERED = 'delivered'
    DROPPED = 'dropped'


@dataclass
class Payload:
    id: int
    origin: int
    dst: int
    created_at: SimTime
    holder: int
    status: PayloadStatus = PayloadStatus.IN_FLIGHT
    delivered_at: Optional[SimTime] = None
    hops: int = 0
    seen_at: Set[int] = field(default_factory=set)

    @property
    def latency(self) -> Optional[SimTime]:
        if self.delivered_at is None:
            return None
        return self.delivered_at - self.created_at


class Application:
    """
    Originates payloads and forwards them hop by hop.

    Each payload is in exactly one of in-flight, delivered or dropped. A MAC
    drop only counts if the dropping node still holds the payload; a late
    drop of a frame the next hop already accepted is stale.
    """

    def __init__(self, kernel: Kernel, pattern: TrafficPattern, tree: Optional[GatheringTree] = None):
        if pattern is TrafficPattern.CONVERGECAST and tree is None:
            raise ConfigError("converge-cast needs a gathering tree")
        self.kernel = kernel
        self.pattern = pattern
        self.tree = tree
        self.macs: Dict[int, object] = {}
        self.payloads: Dict[int, Payload] = {}
        self.broadcast_receipts: Dict[int, Set[int]] = {}
        self._next_id = 0

    def attach(self, macs: Dict[int, object]) -> None:
        self.macs = macs

    def next_hop(self, node: int, payload: Payload) -> int:
        if payload.dst == BROADCAST or self.pattern is TrafficPattern.LOCAL_GOSSIP:
            return payload.dst
        return self.tree.parent[node]

    def originate(self, origin: int, dst: int) -> Payload:
        """Create a payload at `origin` now and hand it to the MAC."""
        payload = Payload(self._next_id, origin, dst, self.kernel.now, holder=origin)
        payload.seen_at.add(origin)
        self._next_id += 1
        self.payloads[payload.id] = payload
        if dst == BROADCAST:
            self.broadcast_receipts[payload.id] = set()
        self._enqueue(origin, payload)
        return payload

    def _enqueue(self, node: int, payload: Payload) -> None:
        result = self.macs[node].on_send_request(self.next_hop(node, payload), payload.id)
        if result is EnqueueResult.DROPPED_FULL:
            payload.status = PayloadStatus.DROPPED
            logger.debug("payload %d dropped at node %d: queue full", payload.id, node)

    def on_mac_received(self, node: int, frame: Frame) -> None:
        """Upcall for an intact DATA frame addressed to (or broadcast at) `node`."""
        payload = self.payloads.get(frame.payload_id)
        if payload is None:
            return
        if payload.dst == BROADCAST:
            self.broadcast_receipts[payload.id].add(node)
            return
        if node in payload.seen_at or payload.status is not PayloadStatus.IN_FLIGHT:
            return
        payload.seen_at.add(node)
        payload.hops += 1
        payload.holder = node
        if node == payload.dst:
            payload.status = PayloadStatus.DELIVERED
            payload.delivered_at = self.kernel.now
            return
        self._enqueue(node, payload)

    def on_mac_outcome(self, node: int, payload_id: int, delivered: bool) -> None:
        """Upcall when a MAC finishes with its queue head."""
        payload = self.payloads.get(payload_id)
        if payload is None:
            return
        if payload.dst == BROADCAST:
            if payload.status is PayloadStatus.IN_FLIGHT:
                payload.status = PayloadStatus.DELIVERED if delivered else PayloadStatus.DROPPED
                payload.delivered_at = self.kernel.now if delivered else None
            return
        if not delivered and payload.status is PayloadStatus.IN_FLIGHT and payload.holder == node:
            payload.status = PayloadStatus.DROPPED
            logger.debug("payload %d dropped at node %d: retries exhausted", payload_id, node)

    def counts(self) -> Dict[str, int]:
        tally = {status.value: 0 for status in PayloadStatus}
        for payload in self.payloads.values():
            tally[payload.status.value] += 1
        tally['originated'] = len(self.payloads)
        return tally

    def latencies(self) -> List[SimTime]:
        return [p.latency for p in self.payloads.values() if p.status is PayloadStatus.DELIVERED
                and p.latency is not None]
