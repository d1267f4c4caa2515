"""Joint radar-code, precoder and receive-filter design for radar / full-duplex MU-MIMO coexistence."""

from .channels import ChannelSet, SymbolSet, generate_channels, generate_symbols, perturb_csi
from .config import SystemConfig, db_to_linear, linear_to_db, load_config, reduced_config, scenario_defaults
from .state import DesignState

__all__ = [
    "ChannelSet",
    "DesignState",
    "SymbolSet",
    "SystemConfig",
    "db_to_linear",
    "generate_channels",
    "generate_symbols",
    "linear_to_db",
    "load_config",
    "perturb_csi",
    "reduced_config",
    "scenario_defaults",
]

__version__ = "0.1.0"
