"""Coverage and decoupled association analysis for sub-6GHz/mmWave/THz networks."""

from .network import (Band, Blockage, Direction, NetworkConfig, NlosParams, Tier,
                      table2_config, validate)

__all__ = ["Band", "Blockage", "Direction", "NetworkConfig", "NlosParams", "Tier",
           "table2_config", "validate"]
__version__ = "0.1.0"
