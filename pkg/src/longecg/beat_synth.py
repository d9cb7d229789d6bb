"""Single-beat population generator.

Beats are drawn around a mean template along its leading principal
directions, scaled by a random amplitude factor, warped in time on either
side of the R-peak and re-anchored so the largest absolute sample sits at
``pre_r``. Beats whose R-peak cannot be detected are discarded and redrawn.
Externally generated beats can be loaded into a store instead (see
:mod:`longecg.formats`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BeatLabel, BeatRecord, BeatWindow, Signal, as_random_source
from .delineation import BEAT_SCHEMA, beat_descriptor_matrix, detect_r_peaks
from .errors import InsufficientBeats, LengthMismatch, NoBeatsFound
from .simulate import template_beat

MAX_COMPONENTS = 10
CHUNK = 1024
R_TOLERANCE = 5


@dataclass(frozen=True)
class BeatTemplateModel:
    label: BeatLabel
    mean_beat: np.ndarray
    components: np.ndarray  # (K, L), orthonormal rows
    component_scales: np.ndarray  # (K,), descending
    pre_r: int
    fs: int = 128
    amplitude_jitter: tuple = (0.85, 1.15)
    time_warp: float = 4.0

    @property
    def window(self) -> BeatWindow:
        return BeatWindow(self.pre_r, self.mean_beat.shape[0] - self.pre_r - 1)

    def implied_moments(self):
        """Pointwise mean and std of generated beats, ignoring time warp."""
        lo, hi = self.amplitude_jitter
        m = 0.5 * (lo + hi)
        v = (hi - lo) ** 2 / 12.0
        var_y = (self.component_scales[:, None] ** 2 * self.components ** 2).sum(axis=0)
        mu = self.mean_beat
        var = (v + m * m) * (mu * mu + var_y) - (m * mu) ** 2
        return m * mu, np.sqrt(np.maximum(var, 0.0))

    def to_dict(self):
        return {
            "label": self.label.text,
            "pre_r": self.pre_r,
            "fs": self.fs,
            "amplitude_jitter": list(self.amplitude_jitter),
            "time_warp": self.time_warp,
            "mean_beat": self.mean_beat.tolist(),
            "components": self.components.tolist(),
            "component_scales": self.component_scales.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            label=BeatLabel.parse(d["label"]),
            mean_beat=np.array(d["mean_beat"], float),
            components=np.array(d["components"], float).reshape(-1, len(d["mean_beat"])),
            component_scales=np.array(d["component_scales"], float),
            pre_r=int(d["pre_r"]),
            fs=int(d["fs"]),
            amplitude_jitter=tuple(d["amplitude_jitter"]),
            time_warp=float(d["time_warp"]),
        )


def fit_template(beats, label, k: int = 5, pre_r: int = 60, fs: int = 128,
                 amplitude_jitter=(0.85, 1.15), time_warp: float = 4.0) -> BeatTemplateModel:
    """Mean beat plus the top-``k`` principal directions of the centred beats."""
    if k > MAX_COMPONENTS:
        raise ValueError(f"k must be <= {MAX_COMPONENTS}")
    lengths = {len(b) for b in beats}
    if len(lengths) > 1:
        raise LengthMismatch(f"beats have different lengths: {sorted(lengths)}")
    if len(beats) < max(20, k + 1):
        raise InsufficientBeats(f"need at least {max(20, k + 1)} beats, got {len(beats)}")
    x = np.asarray(beats, dtype=float)
    # mean as an offset from the first beat, so identical beats reproduce it exactly
    mean = x[0] + (x - x[0]).mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:k]
    # deterministic sign: largest-magnitude entry positive
    flip = np.sign(comps[np.arange(comps.shape[0]), np.argmax(np.abs(comps), axis=1)])
    comps = comps * np.where(flip == 0, 1.0, flip)[:, None]
    scales = s[:k] / np.sqrt(x.shape[0] - 1)
    return BeatTemplateModel(BeatLabel.parse(label), mean, comps, scales, int(pre_r), int(fs),
                             tuple(amplitude_jitter), float(time_warp))


def default_template(label, window: BeatWindow = BeatWindow(), fs: int = 128,
                     n_beats: int = 400, k: int = 5, rng=0) -> BeatTemplateModel:
    """Template fitted on beats sliced from a simulated recording.

    Used when no real beats are supplied.
    """
    from .simulate import simulate_recording
    from .delineation import segment_signal

    label = BeatLabel.parse(label)
    rate = 0.0 if label is BeatLabel.NORMAL else 0.5
    src = as_random_source(rng).fork(int(label))
    rec = simulate_recording(n_beats * (1 if label is BeatLabel.NORMAL else 3), fs=fs,
                             rng=src, abnormal_rate=rate)
    seg = segment_signal(rec.signal, window, annotations=rec.annotations)
    beats = seg.beats[seg.labels == int(label)]
    return fit_template(beats, label, k=k, pre_r=window.pre_r, fs=fs)


def _warp(beats, pre_r, d_pre, d_post):
    n, L = beats.shape
    i = np.arange(L, dtype=float)
    post_r = L - 1 - pre_r
    prof_pre = np.where(i <= pre_r, np.sin(np.pi * np.clip(i / pre_r, 0, 1)), 0.0)
    prof_post = np.where(i > pre_r, np.sin(np.pi * np.clip((i - pre_r) / post_r, 0, 1)), 0.0)
    src = i[None, :] + d_pre[:, None] * prof_pre[None, :] + d_post[:, None] * prof_post[None, :]
    src = np.clip(src, 0.0, L - 1.0)
    lo = np.minimum(np.floor(src).astype(np.int64), L - 2)
    frac = src - lo
    rows = np.arange(n)[:, None]
    return beats[rows, lo] * (1.0 - frac) + beats[rows, lo + 1] * frac


def reanchor(beats, pre_r):
    """Shift each row (edge-filled) so its largest absolute sample is at ``pre_r``."""
    beats = np.atleast_2d(beats)
    n, L = beats.shape
    shift = pre_r - np.argmax(np.abs(beats), axis=1)
    src = np.clip(np.arange(L)[None, :] - shift[:, None], 0, L - 1)
    return beats[np.arange(n)[:, None], src]


def r_detectable(waveform, pre_r, fs, tol=R_TOLERANCE) -> bool:
    pad = fs // 2
    x = np.pad(waveform, pad, mode="edge")
    try:
        peaks = detect_r_peaks(Signal(x, fs))
    except NoBeatsFound:
        return False
    return any(abs(p - pad - pre_r) <= tol for p in peaks)


def _draw(model, n, gen):
    k = model.components.shape[0]
    coeff = gen.standard_normal((n, k)) * model.component_scales[None, :]
    beats = model.mean_beat[None, :] + coeff @ model.components
    lo, hi = model.amplitude_jitter
    beats = beats * gen.uniform(lo, hi, size=n)[:, None]
    warps = gen.uniform(-model.time_warp, model.time_warp, size=(n, 2))
    if model.time_warp > 0:
        beats = _warp(beats, model.pre_r, warps[:, 0], warps[:, 1])
    return reanchor(beats, model.pre_r)


def generate_waveforms(model: BeatTemplateModel, count: int, rng, filter_beats: bool = True):
    """``(count, L)`` array of beats; chunk ``c`` draws from ``rng.fork(c)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    src = as_random_source(rng)
    out = []
    for c, start in enumerate(range(0, count, CHUNK)):
        need = min(CHUNK, count - start)
        gen = src.fork(c).generator
        got = []
        n_got = 0
        for _ in range(100):
            batch = _draw(model, need - n_got, gen)
            if filter_beats:
                ok = np.array([r_detectable(b, model.pre_r, model.fs) for b in batch])
                batch = batch[ok]
            got.append(batch)
            n_got += batch.shape[0]
            if n_got >= need:
                break
        else:
            raise RuntimeError("beat filter rejected too many draws")
        out.append(np.concatenate(got)[:need])
    return np.concatenate(out)


def generate_beats(model: BeatTemplateModel, count: int, rng, start_id: int = 0,
                   schema=BEAT_SCHEMA, filter_beats: bool = True) -> list[BeatRecord]:
    """Generate ``count`` labelled beats with descriptors; ids start at ``start_id``."""
    waves = generate_waveforms(model, count, rng, filter_beats)
    desc = beat_descriptor_matrix(waves, model.window, model.fs, schema)
    return [
        BeatRecord(start_id + i, model.label, waves[i], dict(zip(schema, map(float, desc[i]))))
        for i in range(count)
    ]


def default_templates(window: BeatWindow = BeatWindow(), fs: int = 128, rng=0):
    return {lab: default_template(lab, window, fs, rng=rng) for lab in BeatLabel}


def template_from_mean(label, window: BeatWindow = BeatWindow(), fs: int = 128):
    """Zero-variance template around the simulator's mean beat."""
    mean = template_beat(label, window, fs)
    return BeatTemplateModel(BeatLabel.parse(label), mean, np.zeros((0, mean.size)),
                             np.zeros(0), window.pre_r, fs, (1.0, 1.0), 0.0)
