"""
Commands package - Exports all command groups
"""

from . import bench, impossibility, protocol, sim, utils

__all__ = ["protocol", "sim", "impossibility", "bench", "utils"]
