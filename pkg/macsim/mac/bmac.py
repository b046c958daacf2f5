"""
B-MAC: one long preamble covering a full sampling period, then the DATA
frame, then an ACK for unicast.
"""
import logging

from ..frames import BROADCAST, Frame, FrameKind
from .lpl import LplMac, LplMode, LplParams

logger = logging.getLogger(__name__)


class Bmac(LplMac):
    name = 'bmac'
    params_cls = LplParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.awaiting_ack = False

    @property
    def preamble_span(self) -> int:
        return self.params.tw_us + self.params.sample_us

    def start_send(self) -> None:
        self.transmit(self.make_frame(FrameKind.PREAMBLE, BROADCAST, airtime=self.preamble_span))

    def send_data(self, **extra) -> None:
        head = self.queue.head()
        if head is None:
            self.go_idle()
            return
        self.transmit(self.data_frame(head, **extra))

    def make_ack(self, peer: int) -> Frame:
        return self.make_frame(FrameKind.ACK, peer)

    def on_idle(self) -> None:
        self.awaiting_ack = False
        self.cancel_timer('ack-timeout')
        self.cancel_timer('header-end')

    # -- sender side ----------------------------------------------------------

    def handle_sent(self, frame: Frame):
        kind = frame.kind
        if kind is FrameKind.PREAMBLE:
            self.send_data()
        elif kind is FrameKind.DATA:
            self.data_sent(frame)
        elif kind is FrameKind.ACK:
            self.ack_sent(frame)
        else:
            self.handle_sent_extra(frame)

    def handle_sent_extra(self, frame: Frame) -> None:
        pass

    def data_sent(self, frame: Frame) -> None:
        if frame.dst == BROADCAST:
            self.send_done()
            return
        self.awaiting_ack = True
        t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
        self.set_timer('ack-timeout', t + c + g)

    def ack_sent(self, frame: Frame) -> None:
        self.go_idle()

    def ack_received(self, frame: Frame) -> None:
        self.cancel_timer('ack-timeout')
        self.awaiting_ack = False
        self.send_done()

    def _ack_timeout(self) -> None:
        self.awaiting_ack = False
        self.stats['timeouts'] += 1
        self.send_failed()

    # -- receiver side ----------------------------------------------------------

    def on_rx_start(self, frame: Frame) -> None:
        if (self.mode is LplMode.RECEIVING and frame.kind is FrameKind.DATA
                and not frame.addressed_to(self.node)):
            self.set_timer('header-end', self.sizes.header, frame.airtime - self.sizes.header)

    def on_rx_frame(self, frame: Frame) -> None:
        kind = frame.kind
        if kind is FrameKind.ACK:
            if self.awaiting_ack and frame.dst == self.node and self.queue and frame.src == self.queue.head().dst:
                self.ack_received(frame)
            else:
                self.ack_overheard(frame)
        elif kind is FrameKind.DATA and self.mode is LplMode.RECEIVING:
            if frame.dst == self.node:
                self.deliver_up(frame)
                self.data_received(frame)
                self.set_timer('reply', self.turnaround, frame.src)
            elif frame.dst == BROADCAST:
                self.deliver_up(frame)
                self.go_idle()
        else:
            self.on_rx_other(frame)

    def data_received(self, frame: Frame) -> None:
        pass

    def ack_overheard(self, frame: Frame) -> None:
        pass

    def on_rx_other(self, frame: Frame) -> None:
        pass

    def on_rx_corrupt(self, frame: Frame) -> None:
        if self.awaiting_ack:
            return
        self.go_idle()

    def _header_end(self, remaining: int) -> None:
        """Foreign DATA: the header is enough to know it is not ours."""
        if self.mode is LplMode.RECEIVING:
            self.stats['header_sleeps'] += 1
            self.go_idle(send_after=remaining)

    def on_extra_timer(self, tag, *args):
        if tag == 'ack-timeout':
            self._ack_timeout()
        elif tag == 'header-end':
            self._header_end(*args)
        elif tag == 'reply':
            if not self.channel.is_transmitting(self.node):
                self.transmit(self.make_ack(args[0]))
        else:
            self.on_protocol_timer(tag, *args)

    def on_protocol_timer(self, tag, *args) -> None:
        pass
