import json
from dataclasses import replace

import numpy as np
import pytest

from longecg.beat_synth import (
    BeatTemplateModel, default_template, fit_template, generate_beats, generate_waveforms,
    reanchor, template_from_mean,
)
from longecg.core import BeatLabel, BeatWindow, RandomSource, r_anchor_ok
from longecg.delineation import BEAT_SCHEMA
from longecg.errors import InsufficientBeats, LengthMismatch
from longecg.simulate import template_beat


@pytest.fixture(scope="module")
def normal_model():
    return default_template(BeatLabel.NORMAL)


def test_copies_have_zero_scales():
    beat = template_beat(BeatLabel.NORMAL)
    m = fit_template([beat] * 100, BeatLabel.NORMAL, k=5)
    assert np.array_equal(m.mean_beat, beat)
    assert np.all(m.component_scales == 0)


def test_first_component_follows_bump():
    beat = template_beat(BeatLabel.NORMAL)
    i = np.arange(beat.size)
    bump = np.exp(-0.5 * ((i - 140) / 6.0) ** 2)
    signs = np.where(np.arange(60) % 2, 1.0, -1.0) * np.linspace(0.1, 0.3, 60)
    m = fit_template(beat[None, :] + signs[:, None] * bump[None, :], BeatLabel.NORMAL, k=3)
    cos = m.components[0] @ bump / np.linalg.norm(bump)
    assert abs(cos) > 0.99


def test_components_orthonormal_and_sorted(normal_model):
    c = normal_model.components
    assert np.allclose(c @ c.T, np.eye(c.shape[0]), atol=1e-6)
    s = normal_model.component_scales
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    assert c.shape[0] <= 10


def test_too_few_beats():
    beat = template_beat(BeatLabel.NORMAL)
    with pytest.raises(InsufficientBeats):
        fit_template([beat] * 5, BeatLabel.NORMAL, k=5)
    with pytest.raises(InsufficientBeats):
        fit_template([beat] * 19, BeatLabel.NORMAL, k=2)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        fit_template([np.zeros(10)] * 20 + [np.zeros(11)], BeatLabel.NORMAL)


def test_zero_variance_generates_mean():
    m = template_from_mean(BeatLabel.NORMAL)
    out = generate_waveforms(m, 3, RandomSource(1))
    assert out.shape == (3, 181)
    assert np.all(out == m.mean_beat)


def test_generate_deterministic(normal_model):
    a = generate_beats(normal_model, 50, RandomSource(2))
    b = generate_beats(normal_model, 50, RandomSource(2))
    assert all(np.array_equal(x.waveform, y.waveform) and x.descriptors == y.descriptors
               for x, y in zip(a, b))
    c = generate_beats(normal_model, 50, RandomSource(3))
    assert not np.array_equal(a[0].waveform, c[0].waveform)


def test_generate_ids_and_descriptors(normal_model):
    beats = generate_beats(normal_model, 20, RandomSource(4), start_id=500)
    assert [b.id for b in beats] == list(range(500, 520))
    assert all(set(b.descriptors) == set(BEAT_SCHEMA) for b in beats)
    assert all(b.label is BeatLabel.NORMAL for b in beats)


@pytest.mark.slow
def test_population_sweep(normal_model):
    beats = generate_beats(normal_model, 10000, RandomSource(5))
    waves = np.stack([b.waveform for b in beats])
    assert len(beats) == 10000
    assert np.isfinite(waves).all()
    assert all(r_anchor_ok(w, normal_model.pre_r) for w in waves)


@pytest.mark.slow
@pytest.mark.parametrize("label", list(BeatLabel))
def test_morphology_envelope(label):
    # Model-implied moments ignore the time warp, so compare with warp off.
    model = replace(default_template(label), time_warp=0.0)
    waves = generate_waveforms(model, 10000, RandomSource(6))
    mu, sd = model.implied_moments()
    stderr = waves.std(axis=0) / np.sqrt(waves.shape[0])
    assert np.all(np.abs(waves.mean(axis=0) - mu) <= 3 * stderr)
    live = sd > 1e-6
    ratio = waves.std(axis=0)[live] / sd[live]
    assert np.all(np.abs(ratio - 1) <= 0.2)


def test_reanchor_moves_extremum():
    w = np.zeros((2, 21))
    w[0, 4] = 1.0
    w[1, 15] = -2.0
    out = reanchor(w, 10)
    assert np.argmax(np.abs(out), axis=1).tolist() == [10, 10]


def test_model_dict_round_trip(normal_model):
    back = BeatTemplateModel.from_dict(json.loads(json.dumps(normal_model.to_dict())))
    a = generate_waveforms(normal_model, 5, RandomSource(7))
    b = generate_waveforms(back, 5, RandomSource(7))
    assert np.max(np.abs(a - b)) <= 1e-12
    assert back.window == BeatWindow()
