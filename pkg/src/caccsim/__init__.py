"""Longitudinal ACC/CACC platoon simulator with V2V feedforward and radar/camera target selection."""

__version__ = "0.1.0"
