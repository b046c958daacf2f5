"""
S-MAC: fixed listen/sleep frames, SYNC-built virtual clusters and the
RTS-CTS-DATA-ACK handshake with NAV-based overhearing avoidance.

Schedules are kept in the node's local (drifting) clock. Each SYNC carries
the time from its end to the sender's next active period, which is enough
to adopt or re-align a schedule.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Optional, Set

from ..errors import ConfigError
from ..frames import BROADCAST, NAV_KINDS, Frame, FrameKind
from .base import MacParams, MacProtocol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmacParams(MacParams):
    frame_us: int = 1_000_000
    active_us: int = 100_000
    sync_us: int = 30_000
    sync_every: int = 10
    sync_timeout_us: int = 500_000
    sync_jitter_us: int = 2_000_000
    discovery_us: int = 6_000_000
    tolerance_us: int = 2_000

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.active_us < self.frame_us:
            raise ConfigError("need 0 < active_us < frame_us")
        if not 0 < self.sync_us < self.active_us:
            raise ConfigError("need 0 < sync_us < active_us")
        if self.sync_every < 1:
            raise ConfigError("sync_every must be >= 1")


@dataclass
class SleepSchedule:
    """
    One listen/sleep pattern. `next_start` is the local time at which the
    next active period begins; it always matches the pending start timer.
    """
    frame_len: int
    active_len: int
    next_start: int

    def __post_init__(self):
        if not 0 < self.active_len < self.frame_len:
            raise ValueError("need 0 < active_len < frame_len")

    @property
    def phase_offset(self) -> int:
        return self.next_start % self.frame_len

    def offset_to(self, local_start: int) -> int:
        """Signed distance from this schedule to `local_start`, wrapped to half a frame."""
        delta = (local_start - self.next_start) % self.frame_len
        if delta > self.frame_len // 2:
            delta -= self.frame_len
        return delta


class ScheduleSet:
    """
    Schedules a node follows; more than one makes it a border node.

    Ids are stable for the life of a schedule so timers keyed on them stay
    valid when another schedule is dropped. Id 0 is the primary schedule,
    the one this node announces in its SYNCs.
    """

    def __init__(self):
        self.schedules: Dict[int, SleepSchedule] = {}
        self._next_id = 0

    def find(self, local_start: int, tolerance: int) -> Optional[int]:
        for idx, schedule in self.schedules.items():
            if abs(schedule.offset_to(local_start)) <= tolerance:
                return idx
        return None

    def add(self, schedule: SleepSchedule) -> int:
        idx = self._next_id
        self._next_id += 1
        self.schedules[idx] = schedule
        return idx

    def replace(self, idx: int, schedule: SleepSchedule) -> None:
        self.schedules[idx] = schedule

    def remove(self, idx: int) -> None:
        del self.schedules[idx]

    @property
    def border(self) -> bool:
        return len(self.schedules) > 1

    def __getitem__(self, idx: int) -> SleepSchedule:
        return self.schedules[idx]

    def __contains__(self, idx: int) -> bool:
        return idx in self.schedules

    def __len__(self) -> int:
        return len(self.schedules)

    def __bool__(self) -> bool:
        return bool(self.schedules)


@dataclass
class Exchange:
    role: str               # 'sender', 'receiver' or 'broadcast'
    peer: int
    stage: str
    duration: int = 0       # NAV duration carried by the RTS that opened it


class Smac(MacProtocol):
    name = 'smac'
    params_cls = SmacParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.schedules = ScheduleSet()
        self.active: Set[int] = set()
        self.data_open: Set[int] = set()
        self.frame_count: Dict[int, int] = defaultdict(int)
        self.neighbor_schedules: Dict[int, int] = {}
        self.booting = True
        self.created_own = False
        self.own_shared = False
        self.sync_pending = False
        self.exchange: Optional[Exchange] = None

    # -- timing constants ----------------------------------------------------

    def data_gap(self) -> int:
        """Idle time a DATA sender leaves after the CTS."""
        return 0

    def rts_duration(self) -> int:
        t, c = self.turnaround, self.sizes.control
        return t + c + t + self.data_gap() + self.sizes.data + t + c

    # -- boot and SYNC --------------------------------------------------------

    def on_boot(self):
        p = self.params
        self.wake()
        self.set_timer('sync-timeout', p.sync_timeout_us + self.rng.draw(p.sync_jitter_us))
        self.set_timer('discovery-end', p.discovery_us)

    def _install(self, idx: int) -> None:
        self.set_local_timer_at(('start', idx), self.schedules[idx].next_start, idx)

    def _create_schedule(self) -> None:
        p = self.params
        start = self.local_now() + 1 + self.rng.draw(p.frame_us)
        idx = self.schedules.add(SleepSchedule(p.frame_us, p.active_us, start))
        self.created_own = True
        self.sync_pending = True
        self._install(idx)
        logger.debug("node %d created schedule, phase %d", self.node, start % p.frame_us)

    def handle_sync(self, frame: Frame) -> None:
        """Adopt, re-align, switch to, or add the announced schedule."""
        p = self.params
        start = self.local_now() + frame.sampling_offset
        idx = self.schedules.find(start, p.tolerance_us)
        if idx is not None:
            self._realign(idx, start)
            self._follow(frame.src, idx)
            if idx == 0 and self.created_own:
                self.own_shared = True
            return
        new = SleepSchedule(p.frame_us, p.active_us, start)
        if not self.schedules:
            self.cancel_timer('sync-timeout')
            idx = self.schedules.add(new)
            self.sync_pending = True
            self.stats['schedule_adopted'] += 1
        elif self.created_own and not self.own_shared and len(self.schedules) == 1:
            self._drop_schedule_timers(0)
            self.schedules.replace(0, new)
            self.neighbor_schedules.clear()
            self.created_own = False
            self.sync_pending = True
            idx = 0
            self.stats['schedule_switched'] += 1
        else:
            idx = self.schedules.add(new)
            self.stats['schedule_border'] += 1
            logger.debug("node %d became a border node (%d schedules)", self.node, len(self.schedules))
        self._install(idx)
        self._follow(frame.src, idx)

    def _realign(self, idx: int, start: int) -> None:
        schedule = self.schedules[idx]
        delta = schedule.offset_to(start)
        if delta:
            schedule.next_start += delta
            self._install(idx)

    def _drop_schedule_timers(self, idx: int) -> None:
        for kind in ('start', 'data', 'end', 'sync'):
            self.cancel_timer((kind, idx))
        self.active.discard(idx)
        self.data_open.discard(idx)

    def _follow(self, neighbor: int, idx: int) -> None:
        """Record the one schedule `neighbor` now follows, dropping any schedule left without followers."""
        previous = self.neighbor_schedules.get(neighbor)
        self.neighbor_schedules[neighbor] = idx
        if previous is None or previous == idx or previous == 0 or previous not in self.schedules:
            return
        if previous in self.neighbor_schedules.values():
            return
        self._drop_schedule_timers(previous)
        self.schedules.remove(previous)
        self.frame_count.pop(previous, None)
        self.stats['schedule_dropped'] += 1
        logger.debug("node %d dropped schedule %d (%d left)", self.node, previous, len(self.schedules))
        self.update_radio()

    def _send_sync(self) -> None:
        if (self.exchange is not None or self.nav_active or not self.awake
                or self.channel.is_transmitting(self.node) or self.cca_busy()):
            return
        schedule = self.schedules[0]
        offset = schedule.next_start - (self.local_now() + self.sizes.control)
        self.transmit(self.make_frame(FrameKind.SYNC, BROADCAST, sampling_offset=offset))
        self.sync_pending = False

    # -- frame structure --------------------------------------------------------

    def on_active_start(self, idx: int) -> None:
        p = self.params
        schedule = self.schedules[idx]
        start = schedule.next_start
        schedule.next_start += p.frame_us
        self._install(idx)
        self.active.add(idx)
        self.frame_count[idx] += 1
        self.set_local_timer_at(('data', idx), start + p.sync_us, idx)
        self.schedule_active_end(idx, start)
        if idx == 0 and (self.booting or self.sync_pending or self.frame_count[idx] % p.sync_every == 0):
            window = max(1, p.sync_us - self.sizes.control - p.guard_us)
            self.set_timer(('sync', idx), self.rng.draw(window))
        self.update_radio()

    def schedule_active_end(self, idx: int, start: int) -> None:
        self.set_local_timer_at(('end', idx), start + self.params.active_us, idx)

    def on_data_start(self, idx: int) -> None:
        if idx in self.active:
            self.data_open.add(idx)
            self.try_send()

    def on_active_end(self, idx: int) -> None:
        self.active.discard(idx)
        self.data_open.discard(idx)
        self.update_radio()

    def must_stay_awake(self) -> bool:
        return self.booting or self.exchange is not None or self.timer_pending('reply')

    def update_radio(self) -> None:
        """LISTEN during any active period unless NAV says sleep; exchanges override both."""
        if self.channel.is_transmitting(self.node):
            return
        if self.must_stay_awake():
            self.wake()
        elif self.nav_active:
            self.sleep()
        elif self.active:
            self.wake()
        else:
            self.sleep()

    # -- sending ---------------------------------------------------------------

    def can_send_now(self, dst: int) -> bool:
        if not self.data_open:
            return False
        if dst == BROADCAST:
            return True
        idx = self.neighbor_schedules.get(dst)
        return idx is None or idx in self.data_open

    def on_queue_ready(self):
        self.try_send()

    def try_send(self) -> None:
        head = self.queue.head()
        if (head is None or self.exchange is not None or self.timer_pending('contend')
                or self.timer_pending('reply') or self.nav_active):
            return
        if not self.can_send_now(head.dst):
            return
        self.set_timer('contend', self.csma_contend())

    def _contend_expired(self) -> None:
        head = self.queue.head()
        if head is None or self.exchange is not None or self.nav_active or not self.awake:
            return
        if not self.can_send_now(head.dst) or self.channel.is_transmitting(self.node):
            return
        if self.cca_busy():
            self.on_channel_activity()
            self.set_timer('contend', self.params.slot_us + self.csma_contend())
            return
        if head.dst == BROADCAST:
            self.exchange = Exchange('broadcast', BROADCAST, 'data')
            self.transmit(self.data_frame(head))
            return
        self.send_rts(head.dst)

    def send_rts(self, dst: int) -> None:
        duration = self.rts_duration()
        self.exchange = Exchange('sender', dst, 'rts', duration)
        self.transmit(self.make_frame(FrameKind.RTS, dst, duration_field=duration))

    def _reply(self, what: str) -> None:
        ex = self.exchange
        if ex is None or self.channel.is_transmitting(self.node):
            return
        if what == 'cts':
            ex.stage = 'cts'
            duration = ex.duration - self.turnaround - self.sizes.control
            self.transmit(self.make_frame(FrameKind.CTS, ex.peer, duration_field=duration))
        elif what == 'data':
            head = self.queue.head()
            if head is None:
                self.end_exchange()
                return
            ex.stage = 'data'
            self.transmit(self.data_frame(head))
        elif what == 'ack':
            ex.stage = 'ack'
            self.transmit(self.make_frame(FrameKind.ACK, ex.peer))
        elif what == 'rts':
            self.transmit(self.make_frame(FrameKind.RTS, ex.peer, duration_field=ex.duration))
        else:
            self.reply_extra(what)

    def reply_extra(self, what: str) -> None:
        raise ValueError(f"unknown reply {what!r}")

    def end_exchange(self) -> None:
        self.exchange = None
        self.cancel_timer('response')
        self.on_exchange_done()

    def on_exchange_done(self) -> None:
        self.update_radio()
        self.try_send()

    def _response_timeout(self) -> None:
        ex = self.exchange
        if ex is None:
            return
        self.stats['timeouts'] += 1
        if ex.role == 'sender' and self.queue:
            self.attempt_failed()
        self.end_exchange()

    # -- callbacks -----------------------------------------------------------

    def on_timer(self, tag, *args):
        if isinstance(tag, tuple):
            kind = tag[0]
            if kind == 'start':
                self.on_active_start(*args)
            elif kind == 'data':
                self.on_data_start(*args)
            elif kind == 'end':
                self.on_active_end(*args)
            elif kind == 'sync':
                self._send_sync()
            return
        if tag == 'sync-timeout':
            if not self.schedules:
                self._create_schedule()
        elif tag == 'discovery-end':
            self.booting = False
            self.update_radio()
        elif tag == 'contend':
            self._contend_expired()
        elif tag == 'reply':
            self._reply(*args)
        elif tag == 'response':
            self._response_timeout()
        elif tag == 'nav-end':
            self.on_nav_end()
        else:
            self.on_extra_timer(tag, *args)

    def on_extra_timer(self, tag, *args) -> None:
        pass

    def on_nav_end(self) -> None:
        self.update_radio()
        self.try_send()

    def on_channel_activity(self) -> None:
        """Hook for anything heard or sensed on the channel."""

    def handle_frame_start(self, frame):
        self.on_channel_activity()

    def handle_corrupt(self, frame):
        self.on_channel_activity()

    def handle_frame(self, frame: Frame):
        self.on_channel_activity()
        kind = frame.kind
        if kind is FrameKind.SYNC:
            self.handle_sync(frame)
        elif frame.dst == self.node:
            self.handle_addressed(frame)
        elif frame.dst == BROADCAST:
            if kind is FrameKind.DATA:
                self.deliver_up(frame)
        else:
            self.handle_overheard(frame)

    def handle_addressed(self, frame: Frame) -> None:
        ex = self.exchange
        kind = frame.kind
        t = self.turnaround
        if kind is FrameKind.RTS:
            self.handle_rts(frame)
        elif kind is FrameKind.CTS:
            if ex and ex.role == 'sender' and ex.peer == frame.src and ex.stage in ('wait_cts', 'wait_deferred'):
                self.cancel_timer('response')
                ex.stage = 'cts_ok'
                self.set_timer('reply', t + self.data_gap(), 'data')
        elif kind is FrameKind.DATA:
            if ex and ex.role == 'receiver' and ex.peer == frame.src and ex.stage == 'wait_data':
                self.cancel_timer('response')
                self.deliver_up(frame)
                ex.stage = 'got_data'
                self.set_timer('reply', t, 'ack')
        elif kind is FrameKind.ACK:
            if ex and ex.role == 'sender' and ex.peer == frame.src and ex.stage == 'wait_ack':
                self.finish_head(True)
                self.end_exchange()
        else:
            self.handle_addressed_extra(frame)

    def handle_addressed_extra(self, frame: Frame) -> None:
        pass

    def handle_rts(self, frame: Frame) -> None:
        if self.exchange is not None or self.nav_active or self.timer_pending('reply'):
            return
        self.cancel_timer('contend')
        self.exchange = Exchange('receiver', frame.src, 'cts', frame.duration_field)
        self.set_timer('reply', self.turnaround, 'cts')

    def handle_overheard(self, frame: Frame) -> None:
        """Foreign RTS/CTS/FRTS: back off for the announced duration and sleep."""
        if frame.kind in NAV_KINDS and frame.duration_field > 0 and self.exchange is None:
            self.apply_nav(frame.duration_field)

    def apply_nav(self, duration: int) -> None:
        if self.set_nav(duration):
            self.cancel_timer('contend')
            self.set_timer_at('nav-end', self.nav.nav_until)
        self.update_radio()

    def handle_sent(self, frame: Frame):
        self.on_channel_activity()
        ex = self.exchange
        t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
        kind = frame.kind
        if kind is FrameKind.SYNC:
            self.update_radio()
        elif ex is None:
            self.update_radio()
        elif kind is FrameKind.RTS:
            ex.stage = 'wait_cts'
            self.set_timer('response', t + c + g)
        elif kind is FrameKind.CTS:
            ex.stage = 'wait_data'
            self.set_timer('response', t + self.data_gap() + self.sizes.data + g)
        elif kind is FrameKind.DATA:
            if ex.role == 'broadcast':
                self.finish_head(True)
                self.end_exchange()
            else:
                ex.stage = 'wait_ack'
                self.set_timer('response', t + c + g)
        elif kind is FrameKind.ACK:
            self.end_exchange()
        else:
            self.handle_sent_extra(frame)

    def handle_sent_extra(self, frame: Frame) -> None:
        self.update_radio()

    # -- reporting -----------------------------------------------------------

    @property
    def is_border(self) -> bool:
        return self.schedules.border
