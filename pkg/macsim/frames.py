"""
On-air frame record shared by every protocol, plus byte-size to airtime
conversion.
"""
import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError

BROADCAST = -1


class FrameKind(Enum):
    SYNC = 'sync'
    RTS = 'rts'
    CTS = 'cts'
    DATA = 'data'
    ACK = 'ack'
    FRTS = 'frts'
    PREAMBLE = 'preamble'
    PREAMBLE_BLOCK = 'preamble_block'
    STROBE = 'strobe'
    STROBE_ACK = 'strobe_ack'


# Kinds allowed to carry a reservation (NAV) duration.
NAV_KINDS = frozenset({FrameKind.RTS, FrameKind.CTS, FrameKind.FRTS})


@dataclass(frozen=True)
class Frame:
    """
    One on-air unit.

    Only the fields a protocol needs are meaningful for a given kind; the
    rest keep their defaults. Time-valued fields are in ticks.
    """
    kind: FrameKind
    src: int
    dst: int
    airtime: int
    duration_field: int = 0
    countdown: int = 0
    more_bit: bool = False
    mts_flag: bool = False
    sampling_offset: int = 0
    depth_level: int = 0
    payload_id: int = -1

    def __post_init__(self):
        if self.airtime <= 0:
            raise ValueError(f"{self.kind.name} airtime must be positive, got {self.airtime}")
        if self.duration_field and self.kind not in NAV_KINDS:
            raise ValueError(f"{self.kind.name} frames cannot carry a NAV duration")
        if self.duration_field < 0:
            raise ValueError("duration_field must be >= 0")

    @property
    def is_broadcast(self) -> bool:
        return self.dst == BROADCAST

    def addressed_to(self, node: int) -> bool:
        return self.dst == node or self.dst == BROADCAST


@dataclass(frozen=True)
class FrameSizes:
    """Frame byte lengths and the bit rate that turns them into airtime."""
    bitrate_bps: int = 250_000
    control_bytes: int = 12
    data_bytes: int = 64
    header_bytes: int = 8

    def __post_init__(self):
        if self.bitrate_bps <= 0:
            raise ConfigError("bitrate_bps must be positive")
        for name in ('control_bytes', 'data_bytes', 'header_bytes'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def airtime(self, nbytes: int) -> int:
        return math.ceil(nbytes * 8 * 1_000_000 / self.bitrate_bps)

    @property
    def control(self) -> int:
        """Airtime of SYNC/RTS/CTS/ACK/FRTS/STROBE/STROBE_ACK."""
        return self.airtime(self.control_bytes)

    @property
    def data(self) -> int:
        return self.airtime(self.data_bytes)

    @property
    def header(self) -> int:
        return self.airtime(self.header_bytes)
