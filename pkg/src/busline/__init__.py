"""Circular bus line simulation with adaptive holding control."""

from .model import (
    ActionSet,
    BusLineConfig,
    BusSpec,
    ConfigError,
    DestinationSeries,
    HyperParams,
    IntersectionSpec,
    PassengerTypes,
    SegmentSpec,
    StopSpec,
    builtin_line,
    load_config,
    parse_config,
    save_config,
    serialize_config,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "BusLineConfig",
    "BusSpec",
    "ConfigError",
    "DestinationSeries",
    "HyperParams",
    "IntersectionSpec",
    "PassengerTypes",
    "SegmentSpec",
    "StopSpec",
    "builtin_line",
    "load_config",
    "parse_config",
    "save_config",
    "serialize_config",
    "__version__",
]
