"""Robust evader synthesis for reach-avoid pursuit-evasion games.

Pipeline: environment -> SOS program -> SDP -> certificate -> closed-loop
simulation and independent verification.
"""

__version__ = "0.1.0"
