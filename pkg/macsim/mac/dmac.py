"""
D-MAC: staggered receive/transmit slots along the data-gathering tree.

A level flood from the sink tells every node its depth. Each cycle a node
at depth d listens for mu at offset (d_max - d) * mu and may send during
the next mu, which is its parent's receive slot, so one packet climbs one
level per slot. Slots are laid out on global time from a common origin
fixed once the flood has finished.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

from ..errors import ConfigError
from ..frames import BROADCAST, Frame, FrameKind
from ..kernel import SimTime
from .base import MacParams, MacProtocol

logger = logging.getLogger(__name__)

EXTRA_SLOT_SPACING = 3


@dataclass(frozen=True)
class DmacParams(MacParams):
    cw: int = 8
    mu_us: int = 10_000
    cycle_slack_us: int = 400_000
    attempts_per_cycle: int = 2
    max_cycles: int = 3
    preassigned_levels: bool = False
    flood_start_us: int = 500_000
    flood_round_us: int = 20_000
    flood_repeats: int = 1

    def __post_init__(self):
        super().__post_init__()
        if self.mu_us <= 0:
            raise ConfigError("mu_us must be positive")
        if self.cycle_slack_us < 0:
            raise ConfigError("cycle_slack_us must be >= 0")
        if self.attempts_per_cycle < 1 or self.max_cycles < 1:
            raise ConfigError("attempts_per_cycle and max_cycles must be >= 1")
        if self.flood_round_us <= 0:
            raise ConfigError("flood_round_us must be positive")
        if self.flood_repeats < 1:
            raise ConfigError("flood_repeats must be >= 1")


@dataclass
class SlotWindow:
    start: SimTime
    end: SimTime
    extra: bool
    got_data: bool = False
    got_mts: bool = False


class Dmac(MacProtocol):
    name = 'dmac'
    params_cls = DmacParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        if ctx.tree is None:
            raise ConfigError("dmac needs a gathering tree")
        p = self.params
        self.d_max = ctx.tree.max_depth
        self.root = ctx.tree.root
        self.cycle_len = (self.d_max + 2) * p.mu_us + p.cycle_slack_us
        flood_span = 0 if p.preassigned_levels else (self.d_max + 2) * p.flood_round_us
        self.origin = p.flood_start_us + flood_span
        self.depth: Optional[int] = None
        self.neighbor_levels: Dict[int, int] = {}
        self.flood_listening = False
        self.flood_round_end: Optional[SimTime] = None
        self.flood_sent = 0
        self.cycle_start: Optional[SimTime] = None
        self.rx_window: Optional[SlotWindow] = None
        self.tx_window: Optional[SlotWindow] = None
        self.awaiting_ack = False
        self.sent_mts = False
        self.cycle_failed = False
        self.attempts_in_cycle = 0
        self.failed_cycles = 0

    @classmethod
    def check_params(cls, params, sizes, turnaround):
        warnings = []
        exchange = params.cw * params.slot_us + sizes.data + 2 * turnaround + sizes.control + params.guard_us
        if exchange > params.mu_us:
            warnings.append(f"mu_us={params.mu_us} cannot hold contention + DATA + ACK ({exchange})")
        return warnings

    # -- slot arithmetic ----------------------------------------------------------

    def rx_offset(self, depth: int) -> SimTime:
        return (self.d_max - depth) * self.params.mu_us

    def dst_level(self, dst: int) -> Optional[int]:
        level = self.neighbor_levels.get(dst)
        if level is None and self.depth is not None:
            level = self.depth - 1
        return level

    @property
    def next_cycle_start(self) -> SimTime:
        return self.cycle_start + self.cycle_len

    # -- level flood ----------------------------------------------------------

    def on_boot(self):
        p = self.params
        tree = self.ctx.tree
        if p.preassigned_levels:
            self.depth = tree.depth.get(self.node)
            for nbr in self.channel.neighbors(self.node):
                if nbr in tree.depth:
                    self.neighbor_levels[nbr] = tree.depth[nbr]
        elif self.node == self.root:
            self.depth = 0
            self.flood_round_end = p.flood_start_us + p.flood_round_us
            self.set_timer_at('flood-send', p.flood_start_us)
        else:
            self.flood_listening = True
        self.update_radio()
        self.set_timer_at('cycle', self.origin)

    def _flood_send(self) -> None:
        c = self.sizes.control
        if self.channel.is_transmitting(self.node):
            return
        if self.node != self.root and self.awake and self.cca_busy():
            if self.now + self.params.slot_us + c < self.flood_round_end:
                self.set_timer('flood-send', self.params.slot_us)
            else:
                self.flood_listening = False
                self.update_radio()
            return
        offset = max(0, self.flood_round_end - (self.now + c))
        self.transmit(self.make_frame(FrameKind.SYNC, BROADCAST, depth_level=self.depth, sampling_offset=offset))

    def _flood_sent(self) -> None:
        """Repeat the level SYNC at a random point of the rest of the round, or stop listening."""
        self.flood_sent += 1
        c, g = self.sizes.control, self.params.guard_us
        room = self.flood_round_end - self.now - c - g
        if self.flood_sent < self.params.flood_repeats and room > 0:
            self.set_timer('flood-send', self.rng.draw(room))
            return
        self.flood_listening = False

    def _heard_level(self, frame: Frame) -> None:
        p = self.params
        self.neighbor_levels[frame.src] = frame.depth_level
        if self.depth is not None or p.preassigned_levels:
            return
        self.depth = frame.depth_level + 1
        round_end = self.now + frame.sampling_offset
        self.flood_round_end = round_end + p.flood_round_us
        jitter = max(1, p.flood_round_us - self.sizes.control - p.guard_us)
        self.set_timer_at('flood-send', round_end + self.rng.draw(jitter))
        logger.debug("node %d joins level %d", self.node, self.depth)

    # -- cycles and windows ---------------------------------------------------

    def _cycle(self) -> None:
        if self.cycle_start is None:
            self.flood_listening = False
            self.cancel_timer('flood-send')
            if self.depth is None or self.depth > self.d_max:
                self.stats['unreached'] += 1
                logger.debug("node %d has no usable level; sleeping for good", self.node)
                self.update_radio()
                return
        self.cycle_start = self.now
        self._close_cycle_accounting()
        self.set_timer_at('rx-base', self.now + self.rx_offset(self.depth))
        if self.depth > 0:
            level = self.dst_level(self.queue.head().dst) if self.queue else self.depth - 1
            if level is not None and 0 <= level <= self.d_max:
                self.set_timer_at('tx-base', self.now + self.rx_offset(level))
        self.set_timer_at('cycle', self.next_cycle_start)
        self.update_radio()

    def _close_cycle_accounting(self) -> None:
        if self.cycle_failed and self.queue:
            self.failed_cycles += 1
            if self.failed_cycles >= self.params.max_cycles:
                self.failed_cycles = 0
                self.finish_head(False)
        self.cycle_failed = False
        self.attempts_in_cycle = 0

    def _fits_in_cycle(self, start: SimTime) -> bool:
        return start + self.params.mu_us <= self.next_cycle_start

    def _open_rx(self, extra: bool) -> None:
        self.rx_window = SlotWindow(self.now, self.now + self.params.mu_us, extra)
        self.stats['rx_windows_extra' if extra else 'rx_windows'] += 1
        self.set_timer_at('rx-end', self.rx_window.end)
        self.update_radio()

    def _close_rx(self) -> None:
        window = self.rx_window
        if window is None:
            return
        if self.timer_pending('reply') or self.channel.is_transmitting(self.node):
            self.set_timer('rx-end', self.turnaround + self.sizes.control)
            return
        self.rx_window = None
        wake_again = window.got_mts if window.extra else window.got_data
        extra_start = window.start + EXTRA_SLOT_SPACING * self.params.mu_us
        if wake_again and self._fits_in_cycle(extra_start):
            self.set_timer_at('rx-extra', extra_start)
        self.update_radio()

    def _open_tx(self, extra: bool) -> None:
        if not self.queue:
            return
        self.tx_window = SlotWindow(self.now, self.now + self.params.mu_us, extra)
        self.set_timer_at('tx-end', self.tx_window.end)
        self.update_radio()
        self._contend()

    def _close_tx(self) -> None:
        if self.awaiting_ack or self.channel.is_transmitting(self.node):
            return
        self.tx_window = None
        self.cancel_timer('contend')
        self.cancel_timer('tx-end')
        self.update_radio()

    def _schedule_extra_tx(self) -> None:
        window = self.tx_window
        extra_start = window.start + EXTRA_SLOT_SPACING * self.params.mu_us
        if self.queue and self._fits_in_cycle(extra_start):
            self.set_timer_at('tx-extra', extra_start)

    def _exchange_fits(self) -> bool:
        t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
        return self.now + self.sizes.data + t + c + g <= self.tx_window.end

    def _contend(self) -> None:
        self.set_timer('contend', self.csma_contend())

    def _contend_expired(self) -> None:
        window = self.tx_window
        head = self.queue.head()
        if window is None or head is None or self.awaiting_ack:
            return
        if self.timer_pending('reply') or self.channel.is_transmitting(self.node):
            self.set_timer('contend', self.turnaround + self.sizes.control)
            return
        if self.cca_busy():
            self.stats['contention_lost'] += 1
            if not window.extra:
                self._schedule_extra_tx()
            self._close_tx()
            return
        if not self._exchange_fits():
            self._close_tx()
            return
        self.sent_mts = self.queue.count_for(head.dst) > 1
        self.awaiting_ack = True
        self.transmit(self.data_frame(head, mts_flag=self.sent_mts))

    def _ack_timeout(self) -> None:
        self.awaiting_ack = False
        self.cycle_failed = True
        self.attempts_in_cycle += 1
        self.stats['timeouts'] += 1
        if self.tx_window is not None and self.attempts_in_cycle < self.params.attempts_per_cycle:
            self._contend()
        else:
            self._close_tx()

    def _acked(self) -> None:
        self.cancel_timer('ack-timeout')
        self.awaiting_ack = False
        self.failed_cycles = 0
        self.finish_head(True)
        if self.tx_window is not None and (not self.tx_window.extra or self.sent_mts):
            self._schedule_extra_tx()
        self._close_tx()

    def update_radio(self) -> None:
        if self.channel.is_transmitting(self.node):
            return
        if (self.flood_listening or self.rx_window is not None or self.tx_window is not None
                or self.awaiting_ack or self.timer_pending('reply')):
            self.wake()
        else:
            self.sleep()

    # -- callbacks ----------------------------------------------------------

    def on_queue_ready(self):
        window = self.tx_window
        if window is not None and not self.awaiting_ack and not self.timer_pending('contend'):
            self._contend()

    def on_timer(self, tag, *args):
        if tag == 'cycle':
            self._cycle()
        elif tag == 'flood-send':
            self._flood_send()
        elif tag in ('rx-base', 'rx-extra'):
            self._open_rx(tag == 'rx-extra')
        elif tag == 'rx-end':
            self._close_rx()
        elif tag in ('tx-base', 'tx-extra'):
            self._open_tx(tag == 'tx-extra')
        elif tag == 'tx-end':
            self._close_tx()
        elif tag == 'contend':
            self._contend_expired()
        elif tag == 'ack-timeout':
            self._ack_timeout()
        elif tag == 'reply':
            peer = args[0]
            if not self.channel.is_transmitting(self.node):
                self.transmit(self.make_frame(FrameKind.ACK, peer))

    def handle_frame(self, frame: Frame):
        if frame.kind is FrameKind.SYNC:
            self._heard_level(frame)
        elif frame.dst != self.node:
            return
        elif frame.kind is FrameKind.DATA:
            if self.rx_window is not None:
                self.rx_window.got_data = True
                self.rx_window.got_mts = self.rx_window.got_mts or frame.mts_flag
            self.deliver_up(frame)
            self.set_timer('reply', self.turnaround, frame.src)
        elif frame.kind is FrameKind.ACK and self.awaiting_ack and self.queue and frame.src == self.queue.head().dst:
            self._acked()

    def handle_sent(self, frame: Frame):
        if frame.kind is FrameKind.SYNC:
            self._flood_sent()
        elif frame.kind is FrameKind.DATA:
            t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
            self.set_timer('ack-timeout', t + c + g)
        self.update_radio()
