"""Waveform and beat types, windowing and seeded randomness.

Amplitudes are in mV throughout. Intervals are kept in samples internally
and reported in milliseconds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, OutOfBounds

DEFAULT_FS = 128


class BeatLabel(enum.IntEnum):
    NORMAL = 0
    ABNORMAL = 1

    @property
    def text(self) -> str:
        return "Normal" if self is BeatLabel.NORMAL else "Abnormal"

    @classmethod
    def parse(cls, value) -> "BeatLabel":
        if isinstance(value, BeatLabel):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower()
        if key in ("normal", "n", "0"):
            return cls.NORMAL
        if key in ("abnormal", "a", "1"):
            return cls.ABNORMAL
        raise ValueError(f"unknown beat label {value!r}")


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    fs: int = DEFAULT_FS
    channel_name: str = "ECG"

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if int(self.fs) != self.fs or self.fs <= 0:
            raise ValueError(f"fs must be a positive integer, got {self.fs}")
        object.__setattr__(self, "fs", int(self.fs))
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.fs


@dataclass(frozen=True)
class BeatWindow:
    """Samples kept on either side of the R-peak."""

    pre_r: int = 60
    post_r: int = 120

    def __post_init__(self):
        if self.pre_r < 1 or self.post_r < 1:
            raise ValueError("pre_r and post_r must be >= 1")

    @property
    def length(self) -> int:
        return self.pre_r + self.post_r + 1


@dataclass(frozen=True)
class BeatRecord:
    id: int
    label: BeatLabel
    waveform: np.ndarray
    descriptors: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.waveform, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "waveform", w)
        object.__setattr__(self, "label", BeatLabel.parse(self.label))
        object.__setattr__(self, "id", int(self.id))


def r_anchor_ok(waveform, pre_r: int, tol: int = 5) -> bool:
    """True when the largest absolute sample lies within ``tol`` of ``pre_r``."""
    return abs(int(np.argmax(np.abs(waveform))) - pre_r) <= tol


class RandomSource:
    """Seeded stream of random draws.

    Wraps a numpy ``Generator`` on the PCG64 bit generator, which is
    specified to give the same stream on every platform. A source must not
    be shared between concurrent consumers; derive children with
    :meth:`fork` instead.
    """

    ALGORITHM = "PCG64"

    def __init__(self, seed: int = 0, algorithm_id: str = ALGORITHM):
        if algorithm_id != self.ALGORITHM:
            raise ValueError(f"unsupported algorithm {algorithm_id!r}")
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.algorithm_id = algorithm_id
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, algorithm_id={self.algorithm_id!r})"

    def fork(self, key: int) -> "RandomSource":
        """Independent child source derived from ``(seed, key)`` only."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(key),))
        return RandomSource(int(ss.generate_state(1, np.uint64)[0]), self.algorithm_id)


def as_random_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(0)
    return RandomSource(int(rng))


def slice_beat(signal: Signal, r_index: int, window: BeatWindow) -> np.ndarray:
    """Copy of the samples ``r_index - pre_r .. r_index + post_r`` inclusive.

    Raises
    ------
    OutOfBounds
        If the window does not fit inside the signal.
    """
    samples = signal.samples if isinstance(signal, Signal) else np.asarray(signal, float)
    lo = r_index - window.pre_r
    hi = r_index + window.post_r
    if lo < 0 or hi >= samples.shape[0]:
        raise OutOfBounds(
            f"window [{lo}, {hi}] exceeds signal of length {samples.shape[0]}"
        )
    return samples[lo : hi + 1].copy()


def baseline_of(waveform) -> float:
    """Mean of the first five and last five samples (all samples if shorter)."""
    w = np.asarray(waveform, dtype=float)
    if w.size == 0:
        raise EmptyInput("waveform is empty")
    if w.size <= 10:
        return float(w.mean())
    return float(np.concatenate([w[:5], w[-5:]]).mean())


def seam_offset(rr_samples: int, window: BeatWindow) -> int:
    """Seam position, in samples after the earlier R-peak, between two beats.

    The R-R interval is split in the ratio ``post_r : pre_r`` so each beat
    keeps the share its window allots to that side; the seam always falls
    strictly between the two R-peaks when ``rr_samples >= 2``.
    """
    rr = int(rr_samples)
    off = int(round(rr * window.post_r / (window.pre_r + window.post_r)))
    return min(max(off, 1), max(rr - 1, 1))


def isolate_beat(waveform, window: BeatWindow, rr_before=None, rr_after=None) -> np.ndarray:
    """Hold the waveform flat outside the seams to its neighbours.

    ``rr_before``/``rr_after`` are R-R intervals in samples; ``None`` leaves
    that side untouched.
    """
    w = np.array(waveform, dtype=float)
    r = window.pre_r
    if rr_after is not None:
        hi = r + seam_offset(rr_after, window)
        if hi < w.size - 1:
            w[hi + 1 :] = w[hi]
    if rr_before is not None:
        lo = r - (int(rr_before) - seam_offset(rr_before, window))
        if lo > 0:
            w[:lo] = w[lo]
    return w
