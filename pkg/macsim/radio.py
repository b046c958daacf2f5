"""
Radio state machines on a shared unit-disk channel.

Protocols only ask for SLEEP, LISTEN or a transmission. The channel moves a
listening node into RX when a neighbour's frame starts and back to LISTEN
when nothing it observes is left on the air. There is no capture effect:
any overlap at a receiver corrupts every frame involved at that receiver.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .errors import RadioStateError
from .frames import Frame
from .kernel import EventHandle, Kernel, SimTime

logger = logging.getLogger(__name__)


class RadioState(Enum):
    SLEEP = 'sleep'
    LISTEN = 'listen'
    RX = 'rx'
    TX = 'tx'


AWAKE = (RadioState.LISTEN, RadioState.RX)


class CcaResult(Enum):
    CLEAR = 'clear'
    BUSY = 'busy'


@dataclass(eq=False)
class Transmission:
    id: int
    tx_node: int
    frame: Frame
    start: SimTime
    end: SimTime
    observers: Set[int] = field(default_factory=set)
    corrupted_at: Set[int] = field(default_factory=set)
    end_handle: Optional[EventHandle] = None
    aborted: bool = False


class ClockModel:
    """
    Per-node crystal drift in parts per million.

    local_time(t) = t + t*drift, rounded to the nearest tick, so the
    error against the exact drifted reading is at most half a tick either way.
    """

    def __init__(self, drift_ppm: Dict[int, float], theta_ppm: float):
        for node, drift in drift_ppm.items():
            if abs(drift) > theta_ppm:
                raise ValueError(f"node {node} drift {drift} ppm exceeds theta {theta_ppm} ppm")
        self.theta_ppm = theta_ppm
        self._drift = dict(drift_ppm)

    @classmethod
    def draw(cls, kernel: Kernel, nodes, theta_ppm: float) -> 'ClockModel':
        """Draw each node's drift uniformly from [-theta, +theta]."""
        drift = {}
        for node in nodes:
            drift[node] = kernel.rng(node, 'clock-drift').uniform(-theta_ppm, theta_ppm) if theta_ppm > 0 else 0.0
        return cls(drift, theta_ppm)

    def drift(self, node: int) -> float:
        return self._drift.get(node, 0.0)

    def local_time(self, node: int, t: SimTime) -> SimTime:
        return t + round(t * self.drift(node) / 1_000_000)

    def to_global(self, node: int, local: SimTime) -> SimTime:
        """Global instant at which the node's clock reads `local`."""
        return int(round(local / (1 + self.drift(node) / 1_000_000)))

    def global_delay(self, node: int, local_delay: SimTime) -> SimTime:
        return int(round(local_delay / (1 + self.drift(node) / 1_000_000)))


class RadioListener:
    """Callbacks the channel delivers to a node. Defaults do nothing."""

    def on_frame_start(self, frame: Frame) -> None:
        pass

    def on_frame_received(self, frame: Frame, intact: bool) -> None:
        pass

    def on_frame_sent(self, frame: Frame) -> None:
        pass


class Channel:
    """
    Shared medium for one simulation run.

    Args:
        kernel: event scheduler
        neighbors: mapping node -> iterable of in-range nodes (symmetric)
        ledger: energy ledger notified of every state change
        clock: per-node drift model
        turnaround: radio switch latency in ticks, applied by the protocols
        record: keep transmission and delivery traces for property checks
    """

    def __init__(self, kernel: Kernel, neighbors: Dict[int, List[int]], ledger, clock: ClockModel,
                 turnaround: SimTime = 0, record: bool = False):
        self.kernel = kernel
        self.ledger = ledger
        self.clock = clock
        self.turnaround = int(turnaround)
        self.record = record
        self._neighbors = {node: tuple(sorted(nbrs)) for node, nbrs in neighbors.items()}
        self._state: Dict[int, RadioState] = {}
        self._listeners: Dict[int, RadioListener] = {}
        self._audible: Dict[int, Set[Transmission]] = {}
        self._observing: Dict[int, Set[Transmission]] = {}
        self._sending: Dict[int, Transmission] = {}
        self._ids = itertools.count()
        self.transmissions: List[Transmission] = []
        self.deliveries: List[Tuple[int, Transmission]] = []
        for node in sorted(self._neighbors):
            self._state[node] = RadioState.SLEEP
            self._audible[node] = set()
            self._observing[node] = set()
            self._listeners[node] = RadioListener()
            ledger.open(node, RadioState.SLEEP, kernel.now)

    @property
    def nodes(self) -> List[int]:
        return sorted(self._neighbors)

    def attach(self, node: int, listener: RadioListener) -> None:
        self._listeners[node] = listener

    def neighbors(self, node: int) -> Tuple[int, ...]:
        return self._neighbors[node]

    def state(self, node: int) -> RadioState:
        return self._state[node]

    def is_transmitting(self, node: int) -> bool:
        return node in self._sending

    # -- state control ---------------------------------------------------

    def set_radio_state(self, node: int, state: RadioState) -> RadioState:
        """
        Request SLEEP or LISTEN. Returns the previous state.

        LISTEN while receiving keeps RX. Leaving TX aborts the ongoing frame,
        which then arrives corrupted at every observer.
        """
        if state not in (RadioState.SLEEP, RadioState.LISTEN):
            raise RadioStateError(f"node {node}: protocols may only request SLEEP or LISTEN, not {state.name}")
        previous = self._state[node]
        if previous is RadioState.TX:
            self._abort(node)
        if state is RadioState.LISTEN:
            if self._state[node] not in AWAKE:
                self._set_state(node, RadioState.LISTEN)
        else:
            self._abandon(node)
            self._set_state(node, RadioState.SLEEP)
        return previous

    def start_transmission(self, node: int, frame: Frame) -> int:
        """
        Put `frame` on the air from `node`. Returns the transmission id.

        Raises:
            RadioStateError: if the node is already transmitting
        """
        if self._state[node] is RadioState.TX:
            raise RadioStateError(f"node {node} is already transmitting")
        if frame.src != node:
            raise ValueError(f"frame source {frame.src} does not match transmitting node {node}")
        now = self.kernel.now
        self._abandon(node)
        self._set_state(node, RadioState.TX)
        tx = Transmission(next(self._ids), node, frame, now, now + frame.airtime)
        self._sending[node] = tx
        started = []
        for nbr in self._neighbors[node]:
            on_air = self._audible[nbr]
            if on_air:
                tx.corrupted_at.add(nbr)
                for other in on_air:
                    other.corrupted_at.add(nbr)
            on_air.add(tx)
            if self._state[nbr] in AWAKE:
                tx.observers.add(nbr)
                self._observing[nbr].add(tx)
                self._set_state(nbr, RadioState.RX)
                started.append(nbr)
        tx.end_handle = self.kernel.schedule(tx.end, self._finish, tx)
        if self.record:
            self.transmissions.append(tx)
        logger.debug("t=%d node %d starts %s -> %s (%d us)", now, node, frame.kind.name, frame.dst, frame.airtime)
        for nbr in started:
            if tx in self._observing[nbr]:
                self._listeners[nbr].on_frame_start(frame)
        return tx.id

    def cca(self, node: int) -> CcaResult:
        """
        Instantaneous carrier sense.

        Raises:
            RadioStateError: if the node is asleep or transmitting
        """
        state = self._state[node]
        if state is RadioState.SLEEP:
            raise RadioStateError(f"node {node} cannot sense the channel while asleep")
        if state is RadioState.TX:
            raise RadioStateError(f"node {node} cannot sense the channel while transmitting")
        return CcaResult.BUSY if self._audible[node] else CcaResult.CLEAR

    def local_time(self, node: int, t: Optional[SimTime] = None) -> SimTime:
        return self.clock.local_time(node, self.kernel.now if t is None else t)

    # -- internals --------------------------------------------------------

    def _set_state(self, node: int, state: RadioState) -> None:
        if self._state[node] is not state:
            self.ledger.note_transition(node, state, self.kernel.now)
            self._state[node] = state

    def _abandon(self, node: int) -> None:
        for tx in self._observing[node]:
            tx.observers.discard(node)
        self._observing[node].clear()

    def _release(self, tx: Transmission) -> List[int]:
        for nbr in self._neighbors[tx.tx_node]:
            self._audible[nbr].discard(tx)
        del self._sending[tx.tx_node]
        self._set_state(tx.tx_node, RadioState.LISTEN)
        receivers = sorted(tx.observers)
        for nbr in receivers:
            self._observing[nbr].discard(tx)
            if not self._observing[nbr] and self._state[nbr] is RadioState.RX:
                self._set_state(nbr, RadioState.LISTEN)
        return receivers

    def _finish(self, tx: Transmission) -> None:
        receivers = self._release(tx)
        frame = tx.frame
        for nbr in receivers:
            intact = nbr not in tx.corrupted_at
            if intact and self.record:
                self.deliveries.append((nbr, tx))
            self._listeners[nbr].on_frame_received(frame, intact)
        self._listeners[tx.tx_node].on_frame_sent(frame)

    def _abort(self, node: int) -> None:
        tx = self._sending[node]
        self.kernel.cancel(tx.end_handle)
        tx.aborted = True
        tx.end = self.kernel.now
        tx.corrupted_at.update(tx.observers)
        logger.debug("t=%d node %d aborts %s", self.kernel.now, node, tx.frame.kind.name)
        for nbr in self._release(tx):
            self._listeners[nbr].on_frame_received(tx.frame, False)
