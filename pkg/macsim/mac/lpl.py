"""
Low-power listening: periodic channel sampling shared by the preamble
protocols.

Every node wakes once per `tw` (on its own drifting clock, with a random
phase) for `sample_us`. A busy channel or a frame starting inside that
window is a detection; the node then keeps listening until the channel
has been quiet for `quiet_us`.
"""
import logging
from dataclasses import dataclass
from enum import Enum

from ..errors import ConfigError
from ..frames import Frame
from ..radio import RadioState
from .base import MacParams, MacProtocol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LplParams(MacParams):
    tw_us: int = 250_000
    sample_us: int = 2_500
    quiet_us: int = 2_500

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.sample_us < self.tw_us:
            raise ConfigError("need 0 < sample_us < tw_us")
        if self.quiet_us <= 0:
            raise ConfigError("quiet_us must be positive")


class LplMode(Enum):
    IDLE = 'idle'
    SAMPLING = 'sampling'
    RECEIVING = 'receiving'
    SENDING = 'sending'


class LplMac(MacProtocol):
    """
    Sampling loop plus the idle/receive/send mode switch.

    Subclasses implement start_send() for the channel-clear case and the
    handle_* hooks for their frame sequences.
    """

    name = 'lpl'
    params_cls = LplParams
    # Timers that keep a receiving node from returning to idle.
    hold_timers = ('linger', 'data-wake')

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.mode = LplMode.IDLE
        self.next_sample = 0
        self.waiting_plan = False
        self.samples = 0

    @classmethod
    def check_params(cls, params, sizes, turnaround):
        warnings = []
        if params.sample_us * 10 > params.tw_us:
            warnings.append(f"sample_us={params.sample_us} is more than a tenth of tw_us={params.tw_us}; "
                            f"idle duty cycle exceeds 10%")
        return warnings

    def on_boot(self):
        self.sleep()
        self.next_sample = self.local_now() + self.rng.draw(self.params.tw_us)
        self.set_local_timer_at('sample', self.next_sample)

    # -- sampling -------------------------------------------------------------

    def next_sample_after(self, local: int) -> int:
        """First local sample instant strictly after `local`."""
        tw = self.params.tw_us
        if self.next_sample > local:
            return self.next_sample
        return self.next_sample + ((local - self.next_sample) // tw + 1) * tw

    def _sample(self) -> None:
        self.next_sample += self.params.tw_us
        self.set_local_timer_at('sample', self.next_sample)
        if self.mode is not LplMode.IDLE and not self.waiting_plan:
            return
        self.samples += 1
        self.mode = LplMode.SAMPLING
        self.wake()
        if self.cca_busy():
            self.detect()
            return
        self.set_timer('sample-end', self.params.sample_us)

    def _sample_end(self) -> None:
        if self.mode is not LplMode.SAMPLING:
            return
        if self.waiting_plan:
            self.mode = LplMode.SENDING
            self.sleep()
        else:
            self.go_idle()

    def detect(self) -> None:
        """Something is on the air: stay up and follow it."""
        self.cancel_timer('sample-end')
        self.cancel_timer('backoff')
        self.waiting_plan = False
        self.mode = LplMode.RECEIVING
        self.stats['detections'] += 1
        self.wake()
        self.extend_receive()
        self.on_detect()

    def on_detect(self) -> None:
        pass

    def extend_receive(self) -> None:
        if self.mode is LplMode.RECEIVING:
            self.set_timer('rx-timeout', self.params.quiet_us)

    def _receive_timeout(self) -> None:
        if self.mode is not LplMode.RECEIVING:
            return
        if any(self.timer_pending(tag) for tag in self.hold_timers):
            return
        if self.awake and (self.radio_state is RadioState.RX or self.timer_pending('reply') or self.cca_busy()):
            self.extend_receive()
            return
        self.go_idle()

    def go_idle(self, send_after: int = 0) -> None:
        """Back to sampling; starts the next send (after `send_after`) if anything is queued."""
        for tag in ('rx-timeout', 'sample-end', 'reply') + self.hold_timers:
            self.cancel_timer(tag)
        self.mode = LplMode.IDLE
        self.waiting_plan = False
        self.on_idle()
        self.sleep()
        if not self.queue:
            return
        if send_after > 0:
            self.set_timer('resume', send_after)
        else:
            self.schedule_send()

    def on_idle(self) -> None:
        pass

    # -- sending --------------------------------------------------------------

    def on_queue_ready(self):
        if self.mode is LplMode.IDLE and not self.timer_pending('resume'):
            self.schedule_send()

    def schedule_send(self) -> None:
        self.cancel_timer('resume')
        self.mode = LplMode.SENDING
        self.wake()
        self.set_timer('backoff', self.csma_contend())

    def _backoff_expired(self) -> None:
        if self.mode is LplMode.SAMPLING and self.waiting_plan:
            self.cancel_timer('sample-end')
            self.mode = LplMode.SENDING
        if self.mode is not LplMode.SENDING or not self.queue:
            return
        self.waiting_plan = False
        self.wake()
        if self.cca_busy():
            self.detect()
            return
        self.start_send()

    def start_send(self) -> None:
        raise NotImplementedError

    def send_failed(self) -> None:
        self.attempt_failed()
        self.go_idle()

    def send_done(self) -> None:
        self.finish_head(True)
        self.go_idle()

    # -- dispatch -------------------------------------------------------------

    def on_timer(self, tag, *args):
        if tag == 'sample':
            self._sample()
        elif tag == 'sample-end':
            self._sample_end()
        elif tag == 'rx-timeout':
            self._receive_timeout()
        elif tag == 'backoff':
            self._backoff_expired()
        elif tag == 'resume':
            if self.mode is LplMode.IDLE and self.queue:
                self.schedule_send()
        else:
            self.on_extra_timer(tag, *args)

    def on_extra_timer(self, tag, *args) -> None:
        pass

    def handle_frame_start(self, frame: Frame):
        if self.mode is LplMode.SAMPLING or (self.mode is LplMode.SENDING and self.timer_pending('backoff')):
            self.detect()
        self.extend_receive()
        self.on_rx_start(frame)

    def on_rx_start(self, frame: Frame) -> None:
        pass

    def handle_corrupt(self, frame: Frame):
        self.extend_receive()
        if self.mode is LplMode.RECEIVING:
            self.on_rx_corrupt(frame)

    def on_rx_corrupt(self, frame: Frame) -> None:
        self.go_idle()

    def handle_frame(self, frame: Frame):
        self.extend_receive()
        self.on_rx_frame(frame)

    def on_rx_frame(self, frame: Frame) -> None:
        pass
