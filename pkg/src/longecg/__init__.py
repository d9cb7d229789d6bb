"""Long-form ECG synthesis by feature-guided beat assembly."""

from .core import BeatLabel, BeatRecord, BeatWindow, RandomSource, Signal
from .errors import ECGSynthError

__all__ = ["BeatLabel", "BeatRecord", "BeatWindow", "RandomSource", "Signal", "ECGSynthError"]
__version__ = "0.1.0"
