"""R-peak detection, fiducial localisation and per-beat feature rows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, uniform_filter1d
from scipy.signal import find_peaks

from .core import BeatLabel, BeatWindow, Signal, isolate_beat
from .errors import EmptyInput, NoBeatsFound, TooShort

INTERVAL_FEATURES = ("R_Int", "P_Int", "Q_Int", "T_Int")
AMPLITUDE_FEATURES = ("R_Amp", "P_Amp", "Q_Amp", "T_Amp")
DEFAULT_SCHEMA = INTERVAL_FEATURES + AMPLITUDE_FEATURES
# S-wave features can be requested explicitly but are not in the default schema.
FULL_SCHEMA = DEFAULT_SCHEMA + ("S_Int", "S_Amp")
# Features measurable on an isolated beat (R_Int needs the next beat).
BEAT_SCHEMA = tuple(f for f in DEFAULT_SCHEMA if f != "R_Int")

# Fallbacks when a feature is missing for every beat of a trajectory.
DEFAULT_IMPUTE = {
    "R_Int": 800.0,
    "P_Int": 180.0,
    "Q_Int": 40.0,
    "T_Int": 280.0,
    "S_Int": 40.0,
    "R_Amp": 0.0,
    "P_Amp": 0.0,
    "Q_Amp": 0.0,
    "T_Amp": 0.0,
    "S_Amp": 0.0,
}

QRS_HALF_MS = 80
P_START_MS = 240
T_END_MS = 360
INTEGRATION_MS = 150
REFRACTORY_MS = 200
THRESHOLD_FRACTION = 0.4
ENVELOPE_SPAN_S = 2.0
REFINE_MS = 75
# Pan-Tompkins style search-back over unusually long gaps.
SEARCHBACK_GAP = 1.66
SEARCHBACK_FRACTION = 0.5
# Envelope peaks below this are treated as numerical noise (mV^2).
ENVELOPE_FLOOR = 1e-10


def ms_to_samples(ms: float, fs: int) -> int:
    return int(round(ms * fs / 1000.0))


def detection_envelope(x: np.ndarray, fs: int) -> np.ndarray:
    """Squared central derivative smoothed by a centred 150 ms moving window."""
    d = np.gradient(np.asarray(x, dtype=float))
    width = max(1, ms_to_samples(INTEGRATION_MS, fs))
    return uniform_filter1d(d * d, size=width, mode="nearest")


def detect_r_peaks(signal: Signal) -> list[int]:
    """Locate R-peaks.

    The envelope (derivative, squaring, 150 ms integration) is thresholded
    at 0.4 times its rolling 2 s maximum; envelope peaks closer than 200 ms
    compete and the taller one wins. Gaps longer than 1.66 times the median
    peak spacing are searched again at half the threshold. Each surviving
    peak is then refined to the largest absolute deviation from the local
    median within 75 ms.
    """
    x = signal.samples
    fs = signal.fs
    if len(x) < 2 * fs:
        raise TooShort(f"need at least {2 * fs} samples, got {len(x)}")
    env = detection_envelope(x, fs)
    span = max(1, int(round(ENVELOPE_SPAN_S * fs)))
    thr = np.maximum(THRESHOLD_FRACTION * maximum_filter1d(env, size=span, mode="nearest"),
                     ENVELOPE_FLOOR)
    refractory = max(1, ms_to_samples(REFRACTORY_MS, fs))
    peaks, _ = find_peaks(env, height=thr, distance=refractory)
    if peaks.size == 0:
        raise NoBeatsFound("no R-peaks detected")
    if peaks.size >= 3:
        peaks = _search_back(env, peaks, thr, refractory)

    half = max(1, ms_to_samples(REFINE_MS, fs))
    ctx = fs // 2
    refined = []
    for p in peaks:
        lo, hi = max(0, p - half), min(len(x), p + half + 1)
        base = np.median(x[max(0, p - ctx) : p + ctx + 1])
        refined.append(lo + int(np.argmax(np.abs(x[lo:hi] - base))))

    out: list[int] = []
    for r in sorted(refined):
        if out and r - out[-1] < refractory:
            if abs(x[r]) > abs(x[out[-1]]):
                out[-1] = r
            continue
        out.append(r)
    return out


def _search_back(env, peaks, thr, refractory):
    limit = SEARCHBACK_GAP * np.median(np.diff(peaks))
    extra = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        if b - a <= limit:
            continue
        lo, hi = a + refractory, b - refractory
        if hi <= lo:
            continue
        seg = env[lo:hi]
        cand, _ = find_peaks(seg, height=SEARCHBACK_FRACTION * thr[lo:hi], distance=refractory)
        if cand.size:
            extra.append(lo + cand[np.argmax(seg[cand])])
    return np.sort(np.concatenate([peaks, extra])).astype(np.int64) if extra else peaks


@dataclass(frozen=True)
class FiducialPoints:
    r_index: int
    r_amp: float
    p_index: Optional[int] = None
    q_index: Optional[int] = None
    s_index: Optional[int] = None
    t_index: Optional[int] = None
    p_amp: Optional[float] = None
    q_amp: Optional[float] = None
    s_amp: Optional[float] = None
    t_amp: Optional[float] = None


def _search(x, lo, hi, fn):
    # inclusive [lo, hi]; None if it leaves the signal
    if lo < 0 or hi >= len(x) or hi < lo:
        return None
    return lo + int(fn(x[lo : hi + 1]))


def delineate(signal: Signal, r_index: int) -> FiducialPoints:
    """Place P, Q, S, T around a known R-peak.

    Search windows, relative to R:
    Q = argmin over [-80 ms, R); S = argmin over (R, +80 ms];
    P = argmax over [-240 ms, -80 ms); T = argmax over (+80 ms, +360 ms].
    A wave whose window runs off the signal is reported absent.
    """
    x = signal.samples
    fs = signal.fs
    w80 = ms_to_samples(QRS_HALF_MS, fs)
    w240 = ms_to_samples(P_START_MS, fs)
    w360 = ms_to_samples(T_END_MS, fs)
    r = int(r_index)
    q = _search(x, r - w80, r - 1, np.argmin)
    s = _search(x, r + 1, r + w80, np.argmin)
    p = _search(x, r - w240, r - w80 - 1, np.argmax)
    t = _search(x, r + w80 + 1, r + w360, np.argmax)

    def amp(i):
        return None if i is None else float(x[i])

    return FiducialPoints(
        r_index=r, r_amp=float(x[r]),
        p_index=p, q_index=q, s_index=s, t_index=t,
        p_amp=amp(p), q_amp=amp(q), s_amp=amp(s), t_amp=amp(t),
    )


@dataclass(frozen=True)
class FeatureVector:
    values: dict
    label: BeatLabel = BeatLabel.NORMAL

    def __getitem__(self, name):
        return self.values[name]

    def as_array(self, schema: Sequence[str]) -> np.ndarray:
        return np.array([self.values[k] for k in schema], dtype=float)


@dataclass(frozen=True)
class FeatureTrajectory:
    """Ordered per-beat feature rows (the scaffold for assembly).

    ``values`` is an ``(N, d)`` array whose columns follow ``schema``;
    ``labels`` holds one :class:`BeatLabel` value per row.
    """

    values: np.ndarray
    labels: np.ndarray
    schema: tuple

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise EmptyInput("a trajectory needs at least one row")
        if v.shape[1] != len(self.schema):
            raise ValueError("values do not match schema width")
        labels = np.array([int(BeatLabel.parse(l)) for l in self.labels], dtype=np.int64)
        if labels.shape[0] != v.shape[0]:
            raise ValueError("labels not aligned with rows")
        v.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "schema", tuple(self.schema))

    def __len__(self):
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    def row(self, n: int) -> FeatureVector:
        return FeatureVector(dict(zip(self.schema, map(float, self.values[n]))),
                             BeatLabel(int(self.labels[n])))

    @property
    def rows(self):
        return [self.row(n) for n in range(len(self))]

    def subset(self, idx) -> "FeatureTrajectory":
        return FeatureTrajectory(self.values[idx], self.labels[idx], self.schema)


def _raw_feature(name, fid: FiducialPoints, next_r, fs):
    k = 1000.0 / fs
    r = fid.r_index
    if name == "R_Int":
        return None if next_r is None else (next_r - r) * k
    if name == "P_Int":
        return None if fid.p_index is None else (r - fid.p_index) * k
    if name == "Q_Int":
        return None if fid.q_index is None else (r - fid.q_index) * k
    if name == "T_Int":
        return None if fid.t_index is None else (fid.t_index - r) * k
    if name == "S_Int":
        return None if fid.s_index is None else (fid.s_index - r) * k
    if name == "R_Amp":
        return fid.r_amp
    if name == "P_Amp":
        return fid.p_amp
    if name == "Q_Amp":
        return fid.q_amp
    if name == "T_Amp":
        return fid.t_amp
    if name == "S_Amp":
        return fid.s_amp
    raise KeyError(name)


def extract_features(
    signal: Signal,
    beats: Sequence[FiducialPoints],
    labels: Sequence,
    schema: Sequence[str] = DEFAULT_SCHEMA,
) -> FeatureTrajectory:
    """Build one feature row per beat, imputing gaps with per-feature medians.

    The last beat has no successor, so its R_Int is always imputed.
    """
    if len(beats) == 0:
        raise EmptyInput("no beats to extract features from")
    if len(labels) != len(beats):
        raise ValueError("labels not aligned with beats")
    fs = signal.fs
    n = len(beats)
    rows = np.full((n, len(schema)), np.nan)
    for i, fid in enumerate(beats):
        next_r = beats[i + 1].r_index if i + 1 < n else None
        for j, name in enumerate(schema):
            v = _raw_feature(name, fid, next_r, fs)
            if v is not None:
                rows[i, j] = v
    for j, name in enumerate(schema):
        col = rows[:, j]
        missing = np.isnan(col)
        if missing.any():
            present = col[~missing]
            col[missing] = np.median(present) if present.size else DEFAULT_IMPUTE[name]
    return FeatureTrajectory(rows, list(labels), tuple(schema))


@dataclass(frozen=True)
class Segmentation:
    r_indices: np.ndarray
    beats: np.ndarray
    labels: np.ndarray
    fiducials: tuple
    trajectory: FeatureTrajectory


def label_beats(r_indices, annotations, fs, tolerance_ms=150.0):
    """Give each R-peak the label of the nearest annotation within tolerance.

    ``annotations`` is a sequence of ``(sample, label)`` pairs; beats with no
    annotation nearby are Normal.
    """
    r = np.asarray(r_indices, dtype=np.int64)
    out = np.zeros(r.shape[0], dtype=np.int64)
    if not annotations:
        return out
    ann = sorted((int(s), int(BeatLabel.parse(l))) for s, l in annotations)
    pos = np.array([a[0] for a in ann])
    lab = np.array([a[1] for a in ann])
    tol = tolerance_ms * fs / 1000.0
    idx = np.clip(np.searchsorted(pos, r), 1, len(pos)) if len(pos) > 1 else np.zeros_like(r)
    for i, ri in enumerate(r):
        cands = [idx[i] - 1, idx[i]] if len(pos) > 1 else [0]
        cands = [c for c in cands if 0 <= c < len(pos)]
        best = min(cands, key=lambda c: abs(pos[c] - ri))
        if abs(pos[best] - ri) <= tol:
            out[i] = lab[best]
    return out


def segment_signal(
    signal: Signal,
    window: BeatWindow = BeatWindow(),
    annotations=None,
    schema: Sequence[str] = DEFAULT_SCHEMA,
    isolate: bool = True,
) -> Segmentation:
    """Detect, delineate and slice every beat whose window fits the signal.

    Features are computed over all detected beats (so R_Int uses true
    successors) and then restricted to the beats that could be sliced.
    With ``isolate`` each slice is held flat beyond the seams to its
    neighbours (see :func:`longecg.core.isolate_beat`), so a slice covers a
    single cardiac cycle even when the window is longer than the R-R
    interval.
    """
    r_all = detect_r_peaks(signal)
    labels_all = label_beats(r_all, annotations or [], signal.fs)
    fids = [delineate(signal, r) for r in r_all]
    traj = extract_features(signal, fids, labels_all, schema)
    n = len(signal)
    keep = np.array([r - window.pre_r >= 0 and r + window.post_r < n for r in r_all])
    if not keep.any():
        raise NoBeatsFound("no beat window fits inside the signal")
    idx = np.flatnonzero(keep)
    x = signal.samples
    slices = []
    for i in idx:
        b = x[r_all[i] - window.pre_r : r_all[i] + window.post_r + 1]
        if isolate:
            before = r_all[i] - r_all[i - 1] if i > 0 else None
            after = r_all[i + 1] - r_all[i] if i + 1 < len(r_all) else None
            b = isolate_beat(b, window, before, after)
        slices.append(b)
    beats = np.stack(slices)
    return Segmentation(
        r_indices=np.asarray(r_all, dtype=np.int64)[idx],
        beats=beats,
        labels=labels_all[idx],
        fiducials=tuple(fids[i] for i in idx),
        trajectory=traj.subset(idx),
    )


def beat_descriptors(waveform, window: BeatWindow, fs: int,
                     schema: Sequence[str] = BEAT_SCHEMA) -> dict:
    """Descriptors of an isolated beat, delineated with R fixed at the anchor.

    The beat is edge-padded by half a second each side so every search
    window fits.
    """
    pad = fs // 2
    x = np.pad(np.asarray(waveform, dtype=float), pad, mode="edge")
    fid = delineate(Signal(x, fs), window.pre_r + pad)
    return {name: float(_raw_feature(name, fid, None, fs)) for name in schema}


def beat_descriptor_matrix(beats: np.ndarray, window: BeatWindow, fs: int,
                           schema: Sequence[str] = BEAT_SCHEMA) -> np.ndarray:
    """Vectorised :func:`beat_descriptors` over an ``(n, L)`` array of beats."""
    beats = np.atleast_2d(np.asarray(beats, dtype=float))
    r = window.pre_r
    L = beats.shape[1]
    w80 = ms_to_samples(QRS_HALF_MS, fs)
    w240 = ms_to_samples(P_START_MS, fs)
    w360 = ms_to_samples(T_END_MS, fs)
    rows = np.arange(beats.shape[0])

    def pick(lo, hi, fn):
        # edge padding means out-of-window samples repeat the edge value
        idx = np.clip(np.arange(lo, hi + 1), 0, L - 1)
        seg = beats[:, idx]
        k = fn(seg, axis=1)
        return np.arange(lo, hi + 1)[k], seg[rows, k]

    q_i, q_a = pick(r - w80, r - 1, np.argmin)
    s_i, s_a = pick(r + 1, r + w80, np.argmin)
    p_i, p_a = pick(r - w240, r - w80 - 1, np.argmax)
    t_i, t_a = pick(r + w80 + 1, r + w360, np.argmax)
    k = 1000.0 / fs
    cols = {
        "P_Int": (r - p_i) * k, "Q_Int": (r - q_i) * k,
        "T_Int": (t_i - r) * k, "S_Int": (s_i - r) * k,
        "R_Amp": beats[:, r], "P_Amp": p_a, "Q_Amp": q_a,
        "T_Amp": t_a, "S_Amp": s_a,
    }
    return np.column_stack([np.asarray(cols[name], dtype=float) for name in schema])
