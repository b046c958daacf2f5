"""
WiseMAC: preamble sampling with learned neighbour schedules.

Every ACK tells its listeners how long until the sender's next sample. A
node that knows a neighbour's schedule sends a short preamble centred on
the predicted sample, long enough to cover both clocks' drift since the
schedule was learned.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..frames import BROADCAST, Frame, FrameKind
from ..kernel import SimTime
from .bmac import Bmac
from .lpl import LplMode, LplParams

logger = logging.getLogger(__name__)


def wakeup_preamble(theta_ppm: int, interval: SimTime, tw: SimTime) -> SimTime:
    """
    Preamble length min(4 * theta * L, tw), rounded up to a whole tick.

    Args:
        theta_ppm: crystal tolerance in parts per million
        interval: time L since the neighbour's schedule was learned
        tw: sampling period
    """
    if interval < 0:
        raise ValueError(f"interval must be >= 0, got {interval}")
    return min((4 * int(theta_ppm) * interval + 999_999) // 1_000_000, tw)


@dataclass
class ScheduleEntry:
    next_sample: SimTime    # in the owner's local clock
    learned_at: SimTime


class NeighborScheduleTable:
    """Sampling schedules of neighbours, learned from ACKs, in local time."""

    def __init__(self):
        self._entries: Dict[int, ScheduleEntry] = {}

    def update(self, neighbor: int, next_sample: SimTime, at: SimTime) -> None:
        self._entries[neighbor] = ScheduleEntry(next_sample, at)

    def get(self, neighbor: int) -> Optional[ScheduleEntry]:
        return self._entries.get(neighbor)

    def drop(self, neighbor: int) -> None:
        self._entries.pop(neighbor, None)

    def predict(self, neighbor: int, not_before: SimTime, tw: SimTime) -> SimTime:
        """First predicted sample of `neighbor` at or after `not_before`."""
        entry = self._entries[neighbor]
        if entry.next_sample >= not_before:
            return entry.next_sample
        periods = -(-(not_before - entry.next_sample) // tw)
        return entry.next_sample + periods * tw

    def __contains__(self, neighbor: int) -> bool:
        return neighbor in self._entries

    def __len__(self) -> int:
        return len(self._entries)


class Wisemac(Bmac):
    name = 'wisemac'
    params_cls = LplParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.table = NeighborScheduleTable()
        self.theta_ppm = int(self.channel.clock.theta_ppm)
        self.plan: Optional[Tuple[SimTime, SimTime]] = None
        self.plan_backoff: Optional[SimTime] = None
        self.sent_more = False
        self.more_expected = False
        self.preamble_lengths: List[SimTime] = []

    # -- planning -------------------------------------------------------------

    def plan_preamble(self, dst: int, backoff: SimTime) -> Optional[Tuple[SimTime, SimTime]]:
        """
        (local wake time, airtime) of a short preamble towards `dst`, or None
        when the full-length preamble is needed. The sender wakes `backoff`
        ticks ahead of the preamble and carrier-senses through them; the
        preamble itself covers the drift window plus one sample.
        """
        entry = self.table.get(dst)
        if entry is None:
            return None
        tw, sample = self.params.tw_us, self.params.sample_us
        local_now = self.local_now()
        tp = wakeup_preamble(self.theta_ppm, local_now - entry.learned_at, tw)
        predicted = self.table.predict(dst, local_now + tp // 2 + backoff + 1, tw)
        while True:
            tp = wakeup_preamble(self.theta_ppm, predicted - entry.learned_at, tw)
            if tp >= tw:
                self.table.drop(dst)
                self.stats['table_expired'] += 1
                return None
            start = predicted - tp // 2 - backoff
            if start > local_now:
                return start, tp + sample
            predicted += tw

    def schedule_send(self) -> None:
        head = self.queue.head()
        plan = None
        backoff = 0
        if head is not None and head.dst != BROADCAST:
            backoff = self.csma_contend()
            plan = self.plan_preamble(head.dst, backoff)
        if plan is None:
            self.plan = None
            self.plan_backoff = None
            super().schedule_send()
            return
        start, airtime = plan
        self.cancel_timer('resume')
        self.plan = (start, airtime)
        self.plan_backoff = backoff
        self.mode = LplMode.SENDING
        self.waiting_plan = True
        self.sleep()
        self.set_local_timer_at('backoff', start)

    def _backoff_expired(self) -> None:
        if self.plan is None or self.plan_backoff is None:
            super()._backoff_expired()
            return
        if self.mode is LplMode.SAMPLING and self.waiting_plan:
            self.cancel_timer('sample-end')
            self.mode = LplMode.SENDING
        if self.mode is not LplMode.SENDING or not self.queue:
            return
        # planned wake: listen through the backoff, then sense and send
        backoff, self.plan_backoff = self.plan_backoff, None
        self.waiting_plan = False
        self.wake()
        self.set_timer('backoff', backoff)

    def start_send(self) -> None:
        head = self.queue.head()
        if self.plan is not None:
            airtime = self.plan[1]
            self.plan = None
            self.stats['short_preambles'] += 1
        else:
            airtime = self.preamble_span
            self.stats['long_preambles'] += 1
        self.preamble_lengths.append(airtime)
        self.transmit(self.make_frame(FrameKind.PREAMBLE, head.dst, airtime=airtime))

    def send_data(self, **extra) -> None:
        head = self.queue.head()
        self.sent_more = head is not None and head.dst != BROADCAST and self.queue.count_for(head.dst) > 1
        super().send_data(more_bit=self.sent_more)

    # -- ACKs carry the schedule ------------------------------------------------

    def make_ack(self, peer: int) -> Frame:
        local_end = self.local_now() + self.sizes.control
        offset = self.next_sample_after(local_end) - local_end
        return self.make_frame(FrameKind.ACK, peer, sampling_offset=offset)

    def _learn(self, frame: Frame) -> None:
        local_now = self.local_now()
        self.table.update(frame.src, local_now + frame.sampling_offset, local_now)

    def ack_received(self, frame: Frame) -> None:
        self._learn(frame)
        self.cancel_timer('ack-timeout')
        self.awaiting_ack = False
        dst = frame.src
        self.finish_head(True)
        head = self.queue.head()
        if self.sent_more and head is not None and head.dst == dst:
            self.set_timer('send-data', self.turnaround)
            return
        self.go_idle()

    def ack_overheard(self, frame: Frame) -> None:
        self._learn(frame)
        if self.mode is LplMode.RECEIVING and frame.dst != self.node:
            self.go_idle()

    def _ack_timeout(self) -> None:
        head = self.queue.head()
        if head is not None:
            self.table.drop(head.dst)
        super()._ack_timeout()

    # -- receiver side ----------------------------------------------------------

    def on_rx_start(self, frame: Frame) -> None:
        """Overhearers stay through foreign DATA to learn the schedule from its ACK."""

    def data_received(self, frame: Frame) -> None:
        self.more_expected = frame.more_bit

    def ack_sent(self, frame: Frame) -> None:
        if self.more_expected:
            self.more_expected = False
            t, g = self.turnaround, self.params.guard_us
            self.set_timer('linger', t + self.sizes.data + g)
            return
        self.go_idle()

    def on_protocol_timer(self, tag, *args) -> None:
        if tag == 'send-data':
            if self.mode is LplMode.SENDING:
                self.send_data()
        elif tag == 'linger' and self.mode is LplMode.RECEIVING:
            self.extend_receive()
