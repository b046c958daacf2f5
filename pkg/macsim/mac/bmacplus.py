"""
B-MAC+: the long preamble is cut into addressed blocks carrying a
countdown, so a receiver can leave after one block, either for good (not
the destination) or until the DATA frame is due.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

from ..errors import ConfigError
from ..frames import Frame, FrameKind
from ..kernel import SimTime
from .bmac import Bmac
from .lpl import LplMode, LplParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BmacPlusParams(LplParams):
    block_us: int = 5_000

    def __post_init__(self):
        super().__post_init__()
        if self.block_us <= 0:
            raise ConfigError("block_us must be positive")


class BmacPlus(Bmac):
    name = 'bmac+'
    params_cls = BmacPlusParams
    # Corrupted blocks tolerated before a receiver gives up on the train.
    max_bad_blocks = 1

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.bad_blocks = 0
        self.expected_data: Optional[SimTime] = None
        self.prediction_errors: List[SimTime] = []

    @property
    def block_count(self) -> int:
        return math.ceil(self.preamble_span / self.params.block_us)

    def _send_block(self, countdown: int) -> None:
        head = self.queue.head()
        if head is None:
            self.go_idle()
            return
        self.transmit(self.make_frame(FrameKind.PREAMBLE_BLOCK, head.dst,
                                      airtime=self.params.block_us, countdown=countdown))

    def start_send(self) -> None:
        self._send_block(self.block_count - 1)

    def handle_sent_extra(self, frame: Frame) -> None:
        if frame.kind is FrameKind.PREAMBLE_BLOCK:
            if frame.countdown > 0:
                self._send_block(frame.countdown - 1)
            else:
                self.send_data()

    def on_detect(self) -> None:
        self.bad_blocks = 0
        self.expected_data = None

    def on_idle(self) -> None:
        super().on_idle()
        self.bad_blocks = 0
        self.expected_data = None

    def on_rx_start(self, frame: Frame) -> None:
        if frame.kind is FrameKind.DATA and self.expected_data is not None:
            self.prediction_errors.append(self.now - self.expected_data)
            self.expected_data = None
        super().on_rx_start(frame)

    def on_rx_other(self, frame: Frame) -> None:
        if frame.kind is not FrameKind.PREAMBLE_BLOCK or self.mode is not LplMode.RECEIVING:
            return
        if not frame.addressed_to(self.node):
            self.stats['block_sleeps'] += 1
            self.go_idle(send_after=frame.countdown * self.params.block_us + self.sizes.data)
            return
        self.bad_blocks = 0
        data_start = self.now + frame.countdown * self.params.block_us
        self.expected_data = data_start
        if frame.countdown == 0:
            return
        self.cancel_timer('rx-timeout')
        self.sleep()
        self.set_timer_at('data-wake', data_start)

    def on_rx_corrupt(self, frame: Frame) -> None:
        if frame.kind is FrameKind.PREAMBLE_BLOCK and self.bad_blocks < self.max_bad_blocks:
            self.bad_blocks += 1
            return
        super().on_rx_corrupt(frame)

    def on_protocol_timer(self, tag, *args) -> None:
        if tag == 'data-wake' and self.mode is LplMode.RECEIVING:
            self.wake()
            self.extend_receive()
