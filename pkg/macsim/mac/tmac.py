"""
T-MAC: S-MAC's frame and SYNC machinery with an adaptive active period.

The node listens until nothing has happened for `ta` ticks. Two additions
fight early sleeping: future-request-to-send (FRTS) and full-buffer
priority for converge-cast traffic.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from ..errors import ConfigError
from ..frames import BROADCAST, Frame, FrameKind, FrameSizes
from ..kernel import SimTime
from .smac import Exchange, Smac, SmacParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TmacParams(SmacParams):
    ta_us: int = 15_000
    frts: bool = True
    full_buffer_priority: bool = True

    def __post_init__(self):
        super().__post_init__()
        if self.ta_us <= 0:
            raise ConfigError("ta_us must be positive")


def suggested_ta(params: TmacParams, sizes: FrameSizes, turnaround: SimTime) -> SimTime:
    """1.5 x (contention window + RTS airtime + turnaround)."""
    return int(1.5 * (params.cw * params.slot_us + sizes.control + turnaround))


class Tmac(Smac):
    name = 'tmac'
    params_cls = TmacParams

    def __init__(self, node, ctx, params=None):
        super().__init__(node, ctx, params)
        self.reserved_until: SimTime = 0
        self._deferred_cts: Optional[Tuple[int, SimTime]] = None
        self._frts_target: Optional[Tuple[int, SimTime]] = None

    @classmethod
    def check_params(cls, params, sizes, turnaround) -> List[str]:
        warnings = super().check_params(params, sizes, turnaround)
        floor = params.cw * params.slot_us + 2 * sizes.control
        if params.ta_us < floor:
            warnings.append(f"ta_us={params.ta_us} is below contention window + RTS + CTS ({floor}); "
                            f"nodes may sleep before a neighbour's RTS arrives")
        return warnings

    def data_gap(self) -> int:
        if not self.params.frts:
            return 0
        return self.sizes.control + self.turnaround + self.params.guard_us

    # -- activity deadline --------------------------------------------------

    def schedule_active_end(self, idx: int, start: int) -> None:
        self.touch(self.params.sync_us)

    def touch(self, extra: SimTime = 0) -> None:
        """Push the activity deadline to now + ta (never pulls it earlier)."""
        if not self.active or (self.nav_active and self.exchange is None):
            return
        due = self.now + extra + self.params.ta_us
        current = self.timer_due('ta')
        if current is None or due > current:
            self.set_timer_at('ta', due)

    def on_channel_activity(self) -> None:
        self.touch()

    def on_queue_ready(self):
        self.touch()
        self.try_send()

    def _deadline_expired(self) -> None:
        if self.exchange is not None or self.timer_pending('reply') or self.channel.is_transmitting(self.node):
            self.set_timer('ta', self.params.ta_us)
            return
        if self.now < self.reserved_until:
            self.set_timer_at('ta', self.reserved_until + self.params.ta_us)
            return
        self.active.clear()
        self.data_open.clear()
        self.cancel_timer('contend')
        self.stats['ta_sleep'] += 1
        self.update_radio()

    def on_extra_timer(self, tag, *args):
        if tag == 'ta':
            self._deadline_expired()

    def apply_nav(self, duration: SimTime) -> None:
        self.cancel_timer('ta')
        super().apply_nav(duration)

    def on_nav_end(self) -> None:
        self.update_radio()
        self.touch()
        self.try_send()

    def on_exchange_done(self) -> None:
        if self._deferred_cts is not None:
            peer, duration = self._deferred_cts
            self._deferred_cts = None
            self.exchange = Exchange('receiver', peer, 'cts', duration)
            self.set_timer('reply', self.turnaround + self.params.guard_us, 'cts')
            return
        self.touch()
        super().on_exchange_done()

    # -- full-buffer priority and FRTS ----------------------------------------

    def handle_rts(self, frame: Frame) -> None:
        p = self.params
        head = self.queue.head()
        if (p.full_buffer_priority and self.ctx.convergecast and self.queue.full and head is not None
                and head.dst != BROADCAST and head.dst != frame.src
                and self.exchange is None and not self.nav_active and not self.timer_pending('reply')):
            self.cancel_timer('contend')
            self._deferred_cts = (frame.src, frame.duration_field)
            self.exchange = Exchange('sender', head.dst, 'rts', self.rts_duration())
            self.stats['priority_rts'] += 1
            self.set_timer('reply', self.turnaround, 'rts')
            return
        super().handle_rts(frame)

    def handle_overheard(self, frame: Frame) -> None:
        ex = self.exchange
        t, c, g = self.turnaround, self.sizes.control, self.params.guard_us
        if (frame.kind is FrameKind.RTS and ex is not None and ex.role == 'sender'
                and ex.stage == 'wait_cts' and frame.src == ex.peer):
            # Our receiver answered with its own RTS: it will send our CTS afterwards.
            ex.stage = 'wait_deferred'
            self.set_timer('response', frame.duration_field + t + g + c + g)
            return
        if frame.kind is FrameKind.CTS and self.params.frts and ex is None:
            head = self.queue.head()
            if (head is not None and head.dst == frame.src and not self.timer_pending('reply')
                    and not self.channel.is_transmitting(self.node)):
                self.cancel_timer('contend')
                self._frts_target = (head.dst, frame.duration_field - t - c)
                self.set_timer('reply', t, 'frts')
        super().handle_overheard(frame)

    def reply_extra(self, what: str) -> None:
        if what != 'frts':
            super().reply_extra(what)
        if self._frts_target is None:
            return
        dst, duration = self._frts_target
        self._frts_target = None
        if duration > 0:
            self.transmit(self.make_frame(FrameKind.FRTS, dst, duration_field=duration))

    def _reply(self, what: str) -> None:
        if what == 'frts':
            if not self.channel.is_transmitting(self.node):
                self.reply_extra(what)
            return
        super()._reply(what)

    def handle_addressed_extra(self, frame: Frame) -> None:
        if frame.kind is not FrameKind.FRTS:
            return
        self.stats['frts_received'] += 1
        if self.exchange is not None:
            self.reserved_until = max(self.reserved_until, self.now + frame.duration_field)
        else:
            self.apply_nav(frame.duration_field)

    def handle_sent_extra(self, frame: Frame) -> None:
        self.update_radio()
