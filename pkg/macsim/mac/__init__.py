"""MAC protocols and their registry."""
from typing import Dict, Type

from ..errors import ConfigError
from .base import MacContext, MacParams, MacProtocol
from .bmac import Bmac
from .bmacplus import BmacPlus
from .dmac import Dmac
from .smac import Smac
from .tmac import Tmac
from .wisemac import Wisemac
from .xmac import Xmac

PROTOCOLS: Dict[str, Type[MacProtocol]] = {
    cls.name: cls for cls in (Smac, Tmac, Dmac, Bmac, BmacPlus, Xmac, Wisemac)
}

SCHEDULED = ('smac', 'tmac', 'dmac')
PREAMBLE_SAMPLING = ('bmac', 'bmac+', 'xmac', 'wisemac')


def protocol_class(name: str) -> Type[MacProtocol]:
    """
    Raises:
        ConfigError: for an unknown protocol name
    """
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ConfigError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}") from None


def build_params(name: str, overrides: Dict) -> MacParams:
    """Protocol defaults with `overrides` applied; unknown keys are rejected."""
    cls = protocol_class(name).params_cls
    unknown = sorted(set(overrides) - set(cls.field_names()))
    if unknown:
        raise ConfigError(f"unknown {name} parameter(s): {', '.join(unknown)}")
    try:
        return cls(**overrides)
    except TypeError as e:
        raise ConfigError(f"bad {name} parameters: {e}") from e


__all__ = [
    'PROTOCOLS',
    'SCHEDULED',
    'PREAMBLE_SAMPLING',
    'MacContext',
    'MacParams',
    'MacProtocol',
    'protocol_class',
    'build_params',
]
