"""
Shared MAC scaffolding: send queue, NAV timer, tagged timers, CSMA
contention and the callback contract every protocol implements.
"""
import logging
from collections import Counter, deque
from dataclasses import dataclass, fields
from enum import Enum
from typing import Any, Deque, Dict, Hashable, Iterator, List, Optional, Tuple

from ..errors import ConfigError, RadioStateError
from ..frames import Frame, FrameKind, FrameSizes
from ..kernel import EventHandle, Kernel, SimTime
from ..radio import AWAKE, Channel, CcaResult, RadioListener, RadioState

logger = logging.getLogger(__name__)


class EnqueueResult(Enum):
    QUEUED = 'queued'
    DROPPED_FULL = 'dropped_full'


@dataclass(frozen=True)
class QueueItem:
    dst: int
    payload_id: int
    enqueued_at: SimTime


class SendQueue:
    """Bounded FIFO of pending payloads."""

    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ConfigError(f"queue capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: Deque[QueueItem] = deque()

    def enqueue(self, item: QueueItem) -> EnqueueResult:
        if len(self._items) >= self.capacity:
            return EnqueueResult.DROPPED_FULL
        self._items.append(item)
        return EnqueueResult.QUEUED

    def head(self) -> Optional[QueueItem]:
        return self._items[0] if self._items else None

    def pop(self) -> QueueItem:
        return self._items.popleft()

    def count_for(self, dst: int) -> int:
        return sum(1 for item in self._items if item.dst == dst)

    @property
    def full(self) -> bool:
        return len(self._items) >= self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __iter__(self) -> Iterator[QueueItem]:
        return iter(self._items)


class NavTimer:
    """Network allocation vector: no transmission may start before nav_until."""

    def __init__(self):
        self.nav_until: SimTime = 0

    def set(self, now: SimTime, duration: SimTime) -> bool:
        """Apply the max rule. Returns True if nav_until moved."""
        if duration <= 0:
            return False
        until = now + duration
        if until > self.nav_until:
            self.nav_until = until
            return True
        return False

    def active(self, now: SimTime) -> bool:
        return now < self.nav_until


@dataclass(frozen=True)
class MacParams:
    """Parameters every protocol shares. Durations are in microseconds."""
    queue_capacity: int = 8
    retries: int = 3
    cw: int = 16
    slot_us: int = 320
    guard_us: int = 100

    def __post_init__(self):
        if self.cw < 1:
            raise ConfigError("cw must be >= 1")
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]


@dataclass
class MacContext:
    """What a protocol instance may reach: the run's shared services."""
    kernel: Kernel
    channel: Channel
    sizes: FrameSizes
    upper: Any
    tree: Any = None
    convergecast: bool = True

    @property
    def turnaround(self) -> SimTime:
        return self.channel.turnaround


class MacProtocol(RadioListener):
    """
    Base class for the seven protocols.

    The channel calls on_frame_start / on_frame_received / on_frame_sent;
    the application calls on_send_request. Subclasses implement the
    handle_* hooks and on_timer. A protocol only ever touches its own
    node's radio.
    """

    name = 'base'
    params_cls = MacParams

    def __init__(self, node: int, ctx: MacContext, params: Optional[MacParams] = None):
        self.node = node
        self.ctx = ctx
        self.kernel = ctx.kernel
        self.channel = ctx.channel
        self.sizes = ctx.sizes
        self.params = params if params is not None else self.params_cls()
        self.queue = SendQueue(self.params.queue_capacity)
        self.nav = NavTimer()
        self.rng = self.kernel.rng(node, f'{self.name}-mac')
        self.stats: Counter = Counter()
        self.attempts = 0
        self.tx_log: List[Tuple[SimTime, FrameKind, SimTime]] = []
        self._timers: Dict[Hashable, EventHandle] = {}

    @classmethod
    def check_params(cls, params: MacParams, sizes: FrameSizes, turnaround: SimTime) -> List[str]:
        """Warnings about questionable parameter choices. Empty when fine."""
        return []

    # -- shorthands -------------------------------------------------------

    @property
    def now(self) -> SimTime:
        return self.kernel.now

    @property
    def turnaround(self) -> SimTime:
        return self.ctx.turnaround

    @property
    def radio_state(self) -> RadioState:
        return self.channel.state(self.node)

    def local_now(self) -> SimTime:
        return self.channel.local_time(self.node)

    # -- timers -------------------------------------------------------------

    def set_timer(self, tag: Hashable, delay: SimTime, *args: Any) -> EventHandle:
        """(Re)arm timer `tag` to fire after `delay` ticks of global time."""
        return self.set_timer_at(tag, self.now + max(0, int(delay)), *args)

    def set_timer_at(self, tag: Hashable, at: SimTime, *args: Any) -> EventHandle:
        self.cancel_timer(tag)
        handle = self.kernel.schedule(max(self.now, int(at)), self._fire_timer, tag, args)
        self._timers[tag] = handle
        return handle

    def set_local_timer_at(self, tag: Hashable, local_at: SimTime, *args: Any) -> EventHandle:
        """Arm a timer for the instant this node's drifting clock reads `local_at`."""
        return self.set_timer_at(tag, self.channel.clock.to_global(self.node, local_at), *args)

    def cancel_timer(self, tag: Hashable) -> bool:
        handle = self._timers.pop(tag, None)
        return self.kernel.cancel(handle) if handle is not None else False

    def timer_pending(self, tag: Hashable) -> bool:
        return tag in self._timers

    def timer_due(self, tag: Hashable) -> Optional[SimTime]:
        handle = self._timers.get(tag)
        return handle.fire_at if handle is not None else None

    def _fire_timer(self, tag: Hashable, args: Tuple[Any, ...]) -> None:
        self._timers.pop(tag, None)
        self.on_timer(tag, *args)

    def on_timer(self, tag: Hashable, *args: Any) -> None:
        pass

    # -- radio --------------------------------------------------------------

    def wake(self) -> None:
        if not self.channel.is_transmitting(self.node):
            self.channel.set_radio_state(self.node, RadioState.LISTEN)

    def sleep(self) -> None:
        if not self.channel.is_transmitting(self.node):
            self.channel.set_radio_state(self.node, RadioState.SLEEP)

    @property
    def awake(self) -> bool:
        return self.radio_state in AWAKE

    def transmit(self, frame: Frame) -> None:
        if self.channel.record:
            self.tx_log.append((self.now, frame.kind, self.nav.nav_until))
        self.stats[f'tx_{frame.kind.value}'] += 1
        self.channel.start_transmission(self.node, frame)

    def cca_busy(self) -> bool:
        """
        Carrier sense; a node already receiving counts as busy.

        Raises:
            RadioStateError: if called while asleep
        """
        state = self.radio_state
        if state is RadioState.SLEEP:
            raise RadioStateError(f"{self.name} node {self.node} sensed the channel while asleep")
        busy = state is RadioState.RX or self.channel.cca(self.node) is CcaResult.BUSY
        if busy:
            self.stats['cca_busy'] += 1
        return busy

    def csma_contend(self, cw: Optional[int] = None, slot: Optional[SimTime] = None) -> SimTime:
        """
        Backoff delay: uniform slot count in [0, cw) times the slot length.
        The caller must sense the channel again once the delay expires.
        """
        cw = self.params.cw if cw is None else cw
        slot = self.params.slot_us if slot is None else slot
        if cw < 1:
            raise ValueError(f"contention window must be >= 1, got {cw}")
        return self.rng.draw(cw) * slot

    def set_nav(self, duration: SimTime) -> bool:
        moved = self.nav.set(self.now, duration)
        if moved:
            self.stats['nav_set'] += 1
        return moved

    @property
    def nav_active(self) -> bool:
        return self.nav.active(self.now)

    def make_frame(self, kind: FrameKind, dst: int, airtime: Optional[SimTime] = None, **extra: Any) -> Frame:
        if airtime is None:
            airtime = self.sizes.data if kind is FrameKind.DATA else self.sizes.control
        return Frame(kind=kind, src=self.node, dst=dst, airtime=airtime, **extra)

    def data_frame(self, item: QueueItem, **extra: Any) -> Frame:
        return self.make_frame(FrameKind.DATA, item.dst, payload_id=item.payload_id, **extra)

    # -- application boundary ----------------------------------------------

    def on_boot(self) -> None:
        pass

    def on_send_request(self, dst: int, payload_id: int) -> EnqueueResult:
        result = self.queue.enqueue(QueueItem(dst, payload_id, self.now))
        if result is EnqueueResult.QUEUED:
            self.stats['enqueued'] += 1
            self.on_queue_ready()
        else:
            self.stats['queue_drops'] += 1
        return result

    def on_queue_ready(self) -> None:
        pass

    def deliver_up(self, frame: Frame) -> None:
        self.stats['rx_data'] += 1
        self.ctx.upper.on_mac_received(self.node, frame)

    def finish_head(self, delivered: bool) -> QueueItem:
        """Pop the head and report its outcome upwards."""
        item = self.queue.pop()
        self.attempts = 0
        self.stats['delivered' if delivered else 'dropped'] += 1
        self.ctx.upper.on_mac_outcome(self.node, item.payload_id, delivered)
        return item

    def attempt_failed(self) -> bool:
        """Count a failed attempt on the head. Returns True if it was dropped."""
        self.attempts += 1
        self.stats['retries'] += 1
        if self.attempts > self.params.retries:
            logger.debug("t=%d %s node %d drops its head after %d attempts",
                         self.now, self.name, self.node, self.attempts)
            self.finish_head(False)
            return True
        return False

    # -- channel callbacks -------------------------------------------------

    def on_frame_start(self, frame: Frame) -> None:
        self.handle_frame_start(frame)

    def on_frame_received(self, frame: Frame, intact: bool) -> None:
        if not intact:
            self.stats['corrupted'] += 1
            self.handle_corrupt(frame)
            return
        if not frame.addressed_to(self.node):
            self.stats['overheard'] += 1
        self.handle_frame(frame)

    def on_frame_sent(self, frame: Frame) -> None:
        self.handle_sent(frame)

    def handle_frame_start(self, frame: Frame) -> None:
        pass

    def handle_frame(self, frame: Frame) -> None:
        pass

    def handle_corrupt(self, frame: Frame) -> None:
        pass

    def handle_sent(self, frame: Frame) -> None:
        pass

    def __repr__(self) -> str:
        return f"<{type(self).__name__} node={self.node} queue={len(self.queue)}>"
