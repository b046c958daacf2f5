"""
Radio energy accounting.

The ledger keeps integer ticks per (node, state) and converts to
millijoules only when asked: mJ = mW * ticks / 1e6.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from .errors import ConfigError, LedgerError
from .kernel import SimTime, TICKS_PER_SECOND
from .radio import RadioState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerProfile:
    """Power draw per radio state, in milliwatts."""
    tx_mw: float = 60.0
    rx_mw: float = 45.0
    listen_mw: float = 45.0
    sleep_mw: float = 0.09

    def __post_init__(self):
        for name in ('tx_mw', 'rx_mw', 'listen_mw', 'sleep_mw'):
            if getattr(self, name) < 0:
                raise ConfigError(f"power.{name} must be >= 0")
        if not self.sleep_mw < self.listen_mw:
            raise ConfigError("power.sleep_mw must be below power.listen_mw")

    def power(self, state: RadioState) -> float:
        return {
            RadioState.TX: self.tx_mw,
            RadioState.RX: self.rx_mw,
            RadioState.LISTEN: self.listen_mw,
            RadioState.SLEEP: self.sleep_mw,
        }[state]


class EnergyLedger:
    """
    Per-node radio state timeline folded into per-state time totals.

    Args:
        profile: power draw per state
        record: keep every transition as (node, state, at) in `trace`
    """

    def __init__(self, profile: PowerProfile = PowerProfile(), record: bool = False):
        self.profile = profile
        self.record = record
        self.trace: List[Tuple[int, RadioState, SimTime]] = []
        self._ticks: Dict[int, Dict[RadioState, int]] = {}
        self._state: Dict[int, RadioState] = {}
        self._since: Dict[int, SimTime] = {}

    @property
    def nodes(self) -> List[int]:
        return sorted(self._state)

    def open(self, node: int, state: RadioState, at: SimTime) -> None:
        """Start tracking a node in `state` from time `at`."""
        self._ticks[node] = defaultdict(int)
        self._state[node] = state
        self._since[node] = at
        if self.record:
            self.trace.append((node, state, at))

    def note_transition(self, node: int, new_state: RadioState, at: SimTime) -> None:
        """
        Close the open interval and open one in `new_state`.

        Raises:
            LedgerError: unknown node or time going backwards
        """
        if node not in self._state:
            raise LedgerError(f"node {node} was never opened in the ledger")
        since = self._since[node]
        if at < since:
            raise LedgerError(f"node {node}: transition at {at} precedes previous one at {since}")
        self._ticks[node][self._state[node]] += at - since
        self._state[node] = new_state
        self._since[node] = at
        if self.record:
            self.trace.append((node, new_state, at))

    def current_state(self, node: int) -> RadioState:
        return self._state[node]

    def time_in_state(self, node: int, state: RadioState, t_end: SimTime) -> int:
        """Ticks spent in `state`, including the open interval up to t_end."""
        ticks = self._ticks[node][state]
        if self._state[node] is state:
            if t_end < self._since[node]:
                raise LedgerError(f"node {node}: t_end {t_end} precedes last transition")
            ticks += t_end - self._since[node]
        return ticks

    def state_energy(self, node: int, state: RadioState, t_end: SimTime) -> float:
        return self.profile.power(state) * self.time_in_state(node, state, t_end) / TICKS_PER_SECOND

    def total_energy(self, node: int, t_end: SimTime) -> float:
        """Energy of one node in millijoules up to t_end."""
        return sum(self.state_energy(node, state, t_end) for state in RadioState)

    def fleet_average(self, nodes: Iterable[int], t_end: SimTime) -> float:
        nodes = list(nodes)
        if not nodes:
            raise LedgerError("fleet average over an empty node set")
        return self.fleet_total(nodes, t_end) / len(nodes)

    def fleet_total(self, nodes: Iterable[int], t_end: SimTime) -> float:
        return sum(self.total_energy(node, t_end) for node in nodes)

    def breakdown(self, nodes: Iterable[int], t_end: SimTime) -> Dict[str, float]:
        """Fleet energy per state, keyed '<state>_mj'."""
        nodes = list(nodes)
        return {
            f'{state.value}_mj': sum(self.state_energy(node, state, t_end) for node in nodes)
            for state in RadioState
        }
