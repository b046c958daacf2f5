"""
Exception hierarchy for macsim.

Hard errors signal a protocol-logic or configuration bug. Expected outcomes
(a full queue, an exhausted retry budget, a lost frame) are return values
or counters, never exceptions.
"""


class MacSimError(Exception):
    """Base class for every error raised by macsim."""


class SchedulingError(MacSimError):
    """An event was scheduled in the past or the run horizon went backwards."""


class RadioStateError(MacSimError):
    """A protocol asked the radio for something its current state forbids."""


class LedgerError(MacSimError):
    """The energy ledger was fed inconsistent data."""


class TopologyError(MacSimError):
    """The topology is empty, malformed or disconnected."""


class ConfigError(MacSimError):
    """Invalid experiment configuration or analysis request."""
