"""Feature-guided beat matching and long-form signal assembly.

Each target row is matched to the stored beat of the same label that
minimises the weighted squared deviation between the row's features and
the beat's descriptors. Matched beats are placed so their R-peaks follow
the target R-R intervals; overlapping windows are joined with a short
raised-cosine cross-fade and gaps are bridged by a straight line between
the neighbouring edge levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Signal, baseline_of, seam_offset
from .delineation import FeatureTrajectory, FeatureVector
from .errors import RrTooShort, SchemaMismatch, UnknownFeature
from .store import BeatStore, Exhaustive, MatchMode, candidate_positions

# Table-4 style bins: 0.01 mV up to 0.07, then an overflow bin.
R_AMP_EDGES = tuple(round(0.01 * i, 2) for i in range(8))


@dataclass(frozen=True)
class MatchWeights:
    weights: dict
    standardize: bool = True

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ValueError("at least one weight must be positive")

    @classmethod
    def uniform(cls, features, standardize: bool = True) -> "MatchWeights":
        return cls({k: 1.0 for k in features}, standardize)

    @property
    def features(self) -> tuple:
        return tuple(self.weights)

    def scaled(self, factor: float) -> "MatchWeights":
        return MatchWeights({k: w * factor for k, w in self.weights.items()}, self.standardize)


@dataclass(frozen=True)
class SmoothingConfig:
    crossfade_max: int = 8


@dataclass(frozen=True)
class MatchRecord:
    position: int
    target: FeatureVector
    beat_id: int
    cost: float
    abs_diff: dict
    candidates_evaluated: int
    pool_size: int


@dataclass(frozen=True)
class AssembledSignal:
    signal: Signal
    r_indices: np.ndarray
    labels: np.ndarray
    matches: tuple = field(repr=False)


def _columns(store: BeatStore, weights: MatchWeights, f: Optional[FeatureVector] = None):
    missing = [k for k in weights.features if k not in store.schema]
    if f is not None:
        missing += [k for k in weights.features if k not in f.values]
    if missing:
        raise SchemaMismatch(f"features not available for matching: {sorted(set(missing))}")
    return np.array([store.schema.index(k) for k in weights.features])


def _scale(store: BeatStore, cols):
    sd = store.descriptor_std[cols]
    return store.descriptor_mean[cols], np.where(sd > 0, sd, 1.0)


def match_cost(f: FeatureVector, descriptors: dict, store: BeatStore, weights: MatchWeights) -> float:
    """Weighted squared deviation between one target row and one beat."""
    cols = _columns(store, weights, f)
    w = np.array([weights.weights[k] for k in weights.features])
    a = np.array([f.values[k] for k in weights.features])
    b = np.array([descriptors[k] for k in weights.features])
    if weights.standardize:
        mu, sd = _scale(store, cols)
        a, b = (a - mu) / sd, (b - mu) / sd
    return float(np.sum(w * (a - b) ** 2))


def match_beat(f: FeatureVector, store: BeatStore, weights: MatchWeights,
               mode: MatchMode = Exhaustive(), position: int = 0) -> MatchRecord:
    """Pick the candidate of ``f``'s label with the lowest matching cost.

    Exact ties go to the lowest beat id.
    """
    cols = _columns(store, weights, f)
    pos = np.concatenate(candidate_positions(store, f.label, mode))
    w = np.array([weights.weights[k] for k in weights.features])
    target = np.array([f.values[k] for k in weights.features])
    g = store.descriptors[np.ix_(pos, cols)]
    if weights.standardize:
        mu, sd = _scale(store, cols)
        target_s, g_s = (target - mu) / sd, (g - mu) / sd
    else:
        target_s, g_s = target, g
    cost = ((g_s - target_s) ** 2) @ w
    best = cost.min()
    tied = pos[cost == best]
    choice = tied[np.argmin(store.ids[tied])]
    beat = store.beats[choice]
    diff = {k: abs(f.values[k] - beat.descriptors[k]) for k in store.schema if k in f.values}
    return MatchRecord(
        position=position,
        target=f,
        beat_id=int(beat.id),
        cost=float(best),
        abs_diff=diff,
        candidates_evaluated=int(pos.size),
        pool_size=store.count(f.label),
    )


def r_positions(rr_ms, fs: int, pre_r: int) -> np.ndarray:
    """R-peak sample positions from successive R-R intervals in ms.

    Cumulative offsets are rounded half-up to the nearest sample, so
    rounding error never accumulates along the sequence.
    """
    cum = np.concatenate([[0.0], np.cumsum(np.asarray(rr_ms, dtype=float))])
    return pre_r + np.floor(cum * fs / 1000.0 + 0.5).astype(np.int64)


def default_weights(trajectory: FeatureTrajectory, store: BeatStore) -> MatchWeights:
    shared = [k for k in store.schema if k in trajectory.schema]
    if not shared:
        raise SchemaMismatch("trajectory and store share no features")
    return MatchWeights.uniform(shared)


def assemble(trajectory: FeatureTrajectory, store: BeatStore,
             weights: Optional[MatchWeights] = None, mode: MatchMode = Exhaustive(),
             smoothing: SmoothingConfig = SmoothingConfig()) -> AssembledSignal:
    """Match every trajectory row to a beat and stitch the beats together.

    Raises
    ------
    SchemaMismatch
        If the trajectory has no ``R_Int`` column or shares no features
        with the store.
    RrTooShort
        If two consecutive R-peaks would land fewer than 2 samples apart.
    LabelEmpty
        If a row's label has no beats in the store.
    """
    if "R_Int" not in trajectory.schema:
        raise SchemaMismatch("trajectory needs an R_Int column")
    if weights is None:
        weights = default_weights(trajectory, store)
    window, fs = store.window, store.fs
    pre, post, L = window.pre_r, window.post_r, window.length

    r = r_positions(trajectory.column("R_Int")[:-1], fs, pre)
    rr = np.diff(r)
    if rr.size and rr.min() < 2:
        raise RrTooShort(f"R-R of {int(rr.min())} samples is too short")

    matches = tuple(match_beat(trajectory.row(n), store, weights, mode, position=n)
                    for n in range(len(trajectory)))
    where = {int(i): p for p, i in enumerate(store.ids)}

    def waveform(m):
        return store.beats[where[m.beat_id]].waveform

    out = np.zeros(int(r[-1]) + post + 1)
    prev = waveform(matches[0])
    out[:L] = prev
    for n in range(1, len(matches)):
        cur = waveform(matches[n])
        pr, cr = int(r[n - 1]), int(r[n])
        start, prev_end = cr - pre, pr + post
        if start > prev_end:
            gap = start - prev_end - 1
            if gap > 0:
                left, right = baseline_of(prev[-5:]), baseline_of(cur[:5])
                out[prev_end + 1 : start] = np.linspace(left, right, gap + 2)[1:-1]
            out[start : start + L] = cur
        else:
            lo_b, hi_b = max(start, pr + 1), min(prev_end, cr - 1)
            fade = min(smoothing.crossfade_max, hi_b - lo_b + 1)
            seam = pr + seam_offset(cr - pr, window)
            f0 = int(np.clip(seam - fade // 2, lo_b, hi_b - fade + 1))
            f1 = f0 + fade
            if fade > 0:
                w = 0.5 - 0.5 * np.cos(np.pi * np.arange(1, fade + 1) / (fade + 1))
                out[f0:f1] = (1.0 - w) * out[f0:f1] + w * cur[f0 - start : f1 - start]
            out[f1 : cr + post + 1] = cur[f1 - start :]
        prev = cur

    return AssembledSignal(
        signal=Signal(out, fs, "assembled"),
        r_indices=r,
        labels=trajectory.labels.copy(),
        matches=matches,
    )


@dataclass(frozen=True)
class MatchHistogram:
    feature: str
    edges: tuple
    counts: tuple
    overflow: int

    @property
    def total(self) -> int:
        return int(sum(self.counts) + self.overflow)

    def rows(self):
        """``(range label, count)`` pairs in table order, overflow last."""
        out = [(f"{a:.2f} -- {b:.2f}", c) for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)]
        out.append((f"> {self.edges[-1]:.2f}", self.overflow))
        return out


def match_histogram(matches, feature: str = "R_Amp", bin_edges=R_AMP_EDGES,
                    schema=None) -> MatchHistogram:
    """Count absolute feature differences per bin; bins are closed on the left."""
    if schema is not None and feature not in schema:
        raise UnknownFeature(f"{feature} not in schema")
    edges = np.asarray(bin_edges, dtype=float)
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    overflow = 0
    for m in matches:
        if feature not in m.abs_diff:
            raise UnknownFeature(f"{feature} not recorded in matches")
        v = m.abs_diff[feature]
        if v >= edges[-1]:
            overflow += 1
            continue
        counts[max(0, int(np.searchsorted(edges, v, side="right")) - 1)] += 1
    return MatchHistogram(feature, tuple(float(e) for e in edges), tuple(int(c) for c in counts), overflow)
