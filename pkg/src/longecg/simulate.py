"""Gaussian-wave ECG simulator used for demos, tests and default templates.

This is not a physiological model. Each wave is a Gaussian bump with a
fixed offset from the R-peak; beats vary in amplitude and timing, R-R
intervals follow an AR(1) process with respiratory modulation, and
abnormal beats are premature with a wide QRS, no P wave, an inverted T
and a compensatory pause.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BeatLabel, BeatWindow, Signal, as_random_source

# (offset ms, width ms, amplitude mV) for P, Q, R, S, T
WAVES = {
    BeatLabel.NORMAL: (
        (-170.0, 25.0, 0.15),
        (-35.0, 10.0, -0.12),
        (0.0, 10.0, 1.20),
        (35.0, 10.0, -0.25),
        (260.0, 50.0, 0.35),
    ),
    BeatLabel.ABNORMAL: (
        (-170.0, 25.0, 0.02),
        (-55.0, 16.0, -0.20),
        (0.0, 22.0, 1.60),
        (60.0, 18.0, -0.40),
        (280.0, 60.0, -0.45),
    ),
}


def render_beat(t_ms, waves) -> np.ndarray:
    t = np.asarray(t_ms, dtype=float)
    out = np.zeros_like(t)
    for off, width, amp in waves:
        out += amp * np.exp(-0.5 * ((t - off) / width) ** 2)
    return out


def template_beat(label=BeatLabel.NORMAL, window: BeatWindow = BeatWindow(), fs: int = 128):
    """Noise-free mean beat for ``label`` centred on its R-peak."""
    t = (np.arange(window.length) - window.pre_r) * 1000.0 / fs
    return render_beat(t, WAVES[BeatLabel.parse(label)])


def _jitter_waves(waves, gen):
    out = []
    for i, (off, width, amp) in enumerate(waves):
        if i in (1, 2, 3):
            # QRS: tight, R itself never moves
            off_j = off if i == 2 else off + gen.normal(0.0, 2.5)
            out.append((off_j, width * gen.normal(1.0, 0.03), amp * gen.normal(1.0, 0.06)))
        else:
            off_j = off + gen.normal(0.0, 12.0)
            out.append((off_j, width * gen.normal(1.0, 0.06), amp * gen.normal(1.0, 0.12)))
    return out


@dataclass(frozen=True)
class SimulatedRecording:
    signal: Signal
    r_indices: np.ndarray
    labels: np.ndarray

    @property
    def annotations(self):
        return list(zip(self.r_indices.tolist(), self.labels.tolist()))


def simulate_recording(
    n_beats: int = 300,
    fs: int = 128,
    rng=None,
    abnormal_rate: float = 0.1,
    mean_rr_ms: float = 800.0,
    rr_sd_ms: float = 45.0,
    noise_mv: float = 0.005,
    lead_in_ms: float = 700.0,
) -> SimulatedRecording:
    """Simulate a single-lead recording with annotated beats."""
    gen = as_random_source(rng).generator
    labels = np.zeros(n_beats, dtype=np.int64)
    for i in range(1, n_beats - 1):
        # no two abnormal beats in a row, never the first or last beat
        if labels[i - 1] == 0 and gen.random() < abnormal_rate:
            labels[i] = 1

    rr = np.empty(n_beats)
    z = 0.0
    phase = gen.uniform(0, 2 * np.pi)
    t = 0.0
    for i in range(n_beats):
        z = 0.7 * z + gen.normal(0.0, np.sqrt(1 - 0.49))
        resp = 25.0 * np.sin(2 * np.pi * 0.25 * t / 1000.0 + phase)
        rr[i] = mean_rr_ms + rr_sd_ms * z + resp
        t += rr[i]
    # rr[i] is the interval from beat i to beat i+1
    for i in np.flatnonzero(labels):
        rr[i - 1] *= 0.65
        rr[i] *= 1.30

    r_ms = lead_in_ms + np.concatenate([[0.0], np.cumsum(rr[:-1])])
    r_idx = np.round(r_ms * fs / 1000.0).astype(np.int64)
    n = int(r_idx[-1] + round(lead_in_ms * fs / 1000.0)) + 1
    t_ms = np.arange(n) * 1000.0 / fs
    x = np.zeros(n)
    span = int(round(0.6 * fs))
    for i, r in enumerate(r_idx):
        lab = BeatLabel(int(labels[i]))
        waves = _jitter_waves(WAVES[lab], gen)
        scale = 1.0 + 0.08 * np.sin(2 * np.pi * 0.25 * r / fs + phase)
        lo, hi = max(0, r - span), min(n, r + span + 1)
        x[lo:hi] += scale * render_beat(t_ms[lo:hi] - t_ms[r], waves)
    x += gen.normal(0.0, noise_mv, size=n)
    x = np.round(x, 6)
    return SimulatedRecording(Signal(x, fs, "sim"), r_idx, labels)
