"""Rate and error analysis of multiplexed quantum-repeater chains.

Closed-form chain recursions live in :mod:`repchain.analytic`, the envelope
exponents in :mod:`repchain.envelope`, and the exact Fock-space simulator in
:mod:`repchain.fock` and :mod:`repchain.chain`.
"""
from .params import FIG4, FIG8, PRESETS, SEC2C, ChainConfig, ConfigError, SystemParams, load_config

__version__ = "0.1.0"

__all__ = ["FIG4", "FIG8", "PRESETS", "SEC2C", "ChainConfig", "ConfigError", "SystemParams",
           "load_config", "__version__"]
