"""
X-MAC: a train of short addressed strobes with listening gaps. The
destination answers in a gap, which cuts the train short; everybody else
goes back to sleep after a single strobe.
"""
import logging
import math
from dataclasses import dataclass
from typing import List

from ..errors import ConfigError
from ..frames import BROADCAST, Frame, FrameKind, FrameSizes
from ..kernel import SimTime
from .bmac import Bmac
from .lpl import LplMode, LplParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class XmacParams(LplParams):
    gap_us: int = 0       # 0: strobe-ack airtime + 2 x turnaround + guard
    linger_us: int = 0    # 0: 2 x (gap + strobe airtime)

    def __post_init__(self):
        super().__post_init__()
        if self.gap_us < 0 or self.linger_us < 0:
            raise ConfigError("gap_us and linger_us must be >= 0")


def strobe_gap(params: XmacParams, sizes: FrameSizes, turnaround: SimTime) -> SimTime:
    if params.gap_us:
        return params.gap_us
    return sizes.control + 2 * turnaround + params.guard_us


def expected_strobes(tw: SimTime, sample: SimTime, strobe: SimTime, gap: SimTime) -> float:
    """
    Mean strobes sent before the early ACK for a receiver whose sample
    phase is uniform over tw, sampling for `sample` each period.

    A sample catches the train when it starts inside a strobe or its gap
    (CCA busy) or a strobe starts inside it; the ACK then follows the
    next complete strobe.
    """
    period = strobe + gap
    span = tw - sample
    n = span // period
    rest = span - n * period
    return 1 + (period * n * (n + 1) / 2 + rest * (n + 1)) / tw


class Xmac(Bmac):
    name = 'xmac'
    params_cls = XmacParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.gap = strobe_gap(self.params, self.sizes, self.turnaround)
        self.linger = self.params.linger_us or 2 * (self.gap + self.sizes.control)
        self.strobes_sent = 0
        self.train_started: SimTime = 0
        self.strobe_counts: List[int] = []
        self.shortcut_dst = None

    @property
    def max_strobes(self) -> int:
        return math.ceil(self.preamble_span / (self.sizes.control + self.gap))

    # -- sender side ----------------------------------------------------------

    def _send_strobe(self) -> None:
        head = self.queue.head()
        if head is None:
            self.go_idle()
            return
        countdown = max(0, self.max_strobes - 1 - self.strobes_sent)
        self.strobes_sent += 1
        self.transmit(self.make_frame(FrameKind.STROBE, head.dst, countdown=countdown))

    def start_send(self) -> None:
        self.strobes_sent = 0
        self.train_started = self.now
        self._send_strobe()

    def handle_sent_extra(self, frame: Frame) -> None:
        if frame.kind is FrameKind.STROBE:
            self.set_timer('gap-end', self.gap)
        elif frame.kind is FrameKind.STROBE_ACK:
            self.extend_receive()

    def _gap_end(self) -> None:
        if self.mode is not LplMode.SENDING:
            return
        if self.now - self.train_started >= self.preamble_span:
            self.stats['strobe_fallbacks'] += 1
            self.send_data()
        else:
            self._send_strobe()

    def on_idle(self) -> None:
        super().on_idle()
        self.cancel_timer('gap-end')
        self.cancel_timer('direct')
        self.shortcut_dst = None

    def _direct_send(self) -> None:
        """Second sender: the destination is still lingering, send without strobes."""
        if self.mode is not LplMode.SENDING or not self.queue:
            return
        self.wake()
        if self.cca_busy():
            self.go_idle()
            return
        self.stats['direct_sends'] += 1
        self.send_data()

    # -- receiver side ----------------------------------------------------------

    def on_rx_other(self, frame: Frame) -> None:
        kind = frame.kind
        if kind is FrameKind.STROBE_ACK:
            self._strobe_ack(frame)
            return
        if kind is not FrameKind.STROBE or self.mode is not LplMode.RECEIVING:
            return
        if frame.dst == self.node:
            self.set_timer('reply-strobe', self.turnaround, frame.src)
        elif frame.dst == BROADCAST:
            return
        else:
            head = self.queue.head()
            if head is not None and head.dst == frame.dst:
                self.shortcut_dst = frame.dst
                return
            self.stats['strobe_sleeps'] += 1
            self.go_idle(send_after=frame.countdown * (self.sizes.control + self.gap))

    def _strobe_ack(self, frame: Frame) -> None:
        head = self.queue.head()
        if (self.mode is LplMode.SENDING and frame.dst == self.node and head is not None
                and frame.src == head.dst and self.timer_pending('gap-end')):
            self.cancel_timer('gap-end')
            self.strobe_counts.append(self.strobes_sent)
            self.set_timer('send-data', self.turnaround)
        elif (self.mode is LplMode.RECEIVING and self.shortcut_dst is not None
              and frame.src == self.shortcut_dst):
            t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
            self.cancel_timer('rx-timeout')
            self.mode = LplMode.SENDING
            self.sleep()
            self.set_timer('direct', t + self.sizes.data + t + c + g + self.csma_contend())

    def ack_sent(self, frame: Frame) -> None:
        self.set_timer('linger', self.linger)

    def _linger_end(self) -> None:
        if self.mode is not LplMode.RECEIVING:
            return
        self.extend_receive()

    def on_protocol_timer(self, tag, *args) -> None:
        if tag == 'gap-end':
            self._gap_end()
        elif tag == 'send-data':
            if self.mode is LplMode.SENDING:
                self.send_data()
        elif tag == 'reply-strobe':
            if not self.channel.is_transmitting(self.node):
                self.transmit(self.make_frame(FrameKind.STROBE_ACK, args[0]))
        elif tag == 'direct':
            self._direct_send()
        elif tag == 'linger':
            self._linger_end()
