"""
Virtual-time event scheduler and seeded randomness.

One tick is one microsecond. Events at equal timestamps fire in insertion
order. Every random draw comes from a stream keyed by (node, purpose), so
changing how often one node draws never perturbs another node.
"""
import heapq
import itertools
import logging
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from .errors import SchedulingError

logger = logging.getLogger(__name__)

SimTime = int

TICKS_PER_SECOND = 1_000_000
TICKS_PER_MS = 1_000

# Node id used for streams that belong to the whole run, not to a node.
GLOBAL_STREAM = 0xFFFFFFFF


def seconds(value: float) -> SimTime:
    """Convert seconds to ticks."""
    return int(round(value * TICKS_PER_SECOND))


def millis(value: float) -> SimTime:
    """Convert milliseconds to ticks."""
    return int(round(value * TICKS_PER_MS))


def to_seconds(ticks: SimTime) -> float:
    return ticks / TICKS_PER_SECOND


@dataclass(eq=False)
class EventHandle:
    """A scheduled callback. Compared by identity."""
    id: int
    fire_at: SimTime
    callback: Callable[..., Any]
    args: Tuple[Any, ...] = field(default_factory=tuple)
    canceled: bool = False
    fired: bool = False


class RngStream:
    """
    Deterministic random stream for one (node, purpose) pair.

    The generator is seeded from the master seed and the stream key alone,
    so the draw sequence does not depend on any other stream's usage.
    """

    def __init__(self, master_seed: int, node: int, purpose: str):
        self.stream_key = (node, purpose)
        seq = np.random.SeedSequence(
            entropy=int(master_seed),
            spawn_key=(int(node) & 0xFFFFFFFF, zlib.crc32(purpose.encode('utf-8'))),
        )
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def draw(self, n: int) -> int:
        """
        Uniform integer in [0, n).

        Raises:
            ValueError: if n < 1
        """
        if n < 1:
            raise ValueError(f"rng draw range must be >= 1, got {n}")
        return int(self._gen.integers(0, n))

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def exponential(self, mean: float) -> float:
        return float(self._gen.exponential(mean))


class Kernel:
    """
    Single-threaded discrete-event loop.

    A kernel instance is self-contained: it owns the clock, the event heap
    and the random streams of one simulation run.
    """

    def __init__(self, master_seed: int = 0):
        self.master_seed = int(master_seed)
        self._now: SimTime = 0
        self._heap: List[Tuple[SimTime, int, EventHandle]] = []
        self._ids = itertools.count()
        self._streams: Dict[Tuple[int, str], RngStream] = {}
        self.scheduled = 0
        self.canceled = 0
        self.fired = 0

    @property
    def now(self) -> SimTime:
        return self._now

    def schedule(self, at: SimTime, callback: Callable[..., Any], *args: Any) -> EventHandle:
        """
        Schedule `callback(*args)` at absolute time `at`.

        Raises:
            SchedulingError: if `at` lies in the past
        """
        at = int(at)
        if at < self._now:
            raise SchedulingError(f"cannot schedule at {at}, clock is already at {self._now}")
        handle = EventHandle(next(self._ids), at, callback, args)
        heapq.heappush(self._heap, (at, handle.id, handle))
        self.scheduled += 1
        return handle

    def schedule_in(self, delay: SimTime, callback: Callable[..., Any], *args: Any) -> EventHandle:
        return self.schedule(self._now + int(delay), callback, *args)

    def cancel(self, handle: EventHandle) -> bool:
        """Cancel a pending event. Returns False if it already fired or was canceled."""
        if handle is None or handle.fired or handle.canceled:
            return False
        handle.canceled = True
        self.canceled += 1
        return True

    def run_until(self, t_end: SimTime) -> int:
        """
        Process every event with fire_at <= t_end, then set the clock to t_end.

        Returns:
            Number of events processed (canceled ones are skipped, not counted).
        """
        t_end = int(t_end)
        if t_end < self._now:
            raise SchedulingError(f"run horizon {t_end} is before the clock ({self._now})")
        processed = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            at, _, handle = heapq.heappop(heap)
            if handle.canceled:
                continue
            self._now = at
            handle.fired = True
            self.fired += 1
            handle.callback(*handle.args)
            processed += 1
        self._now = t_end
        return processed

    def pending(self) -> int:
        """Number of events still waiting to fire."""
        return sum(1 for _, _, handle in self._heap if not handle.canceled)

    def rng(self, node: int, purpose: str) -> RngStream:
        """Return the (cached) stream for (node, purpose)."""
        key = (node, purpose)
        stream = self._streams.get(key)
        if stream is None:
            stream = RngStream(self.master_seed, node, purpose)
            self._streams[key] = stream
        return stream
