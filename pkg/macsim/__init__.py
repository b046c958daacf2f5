"""
macsim - deterministic discrete-event simulator for duty-cycled wireless
sensor network MAC protocols.

Seven CSMA-based protocols (S-MAC, T-MAC, D-MAC, B-MAC, B-MAC+, X-MAC,
WiseMAC) run over one radio, channel and energy model, driven by an
experiment harness that sweeps traffic load and checks energy orderings.
"""

from .errors import ConfigError, LedgerError, MacSimError, RadioStateError, SchedulingError, TopologyError
from .kernel import Kernel, RngStream, seconds, millis

__all__ = [
    'Kernel',
    'RngStream',
    'seconds',
    'millis',
    'MacSimError',
    'SchedulingError',
    'RadioStateError',
    'LedgerError',
    'TopologyError',
    'ConfigError',
]

__version__ = '1.0.0'
