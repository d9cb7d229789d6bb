"""End-to-end driver: segment, fit, build a store, synthesize, assemble, evaluate.

Every stochastic stage draws from its own fork of the config seed, so
changing one stage never shifts the draws of another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import formats, plotting
from .assembler import AssembledSignal, assemble, match_histogram
from .beat_synth import default_template, fit_template, generate_beats
from .config import Manifest, PipelineConfig
from .core import BeatLabel, RandomSource, Signal
from .delineation import BEAT_SCHEMA, Segmentation, segment_signal
from .feature_model import feature_correlations, fit, fit_block_bootstrap
from .metrics import density_heatmap, feature_metric_table, metric_report
from .simulate import simulate_recording
from .store import BeatStore, build_store
from .tstr import Provenance, suite, tstr_protocol, windows_to_dataset

log = logging.getLogger(__name__)

# fork keys, one per stochastic stage
SIMULATE, STORE, FEATURES, MATCH, TSTR = range(5)
MIN_TEMPLATE_BEATS = 20


def fit_feature_model(trajectory, config: PipelineConfig):
    if config.feature_model == "block_bootstrap":
        return fit_block_bootstrap(trajectory)
    return fit(trajectory)


def build_beat_store(config: PipelineConfig, real=None,
                     rng: Optional[RandomSource] = None) -> BeatStore:
    """Generate ``config.store_size`` beats per label.

    ``real`` is an optional ``(beats, labels)`` pair. Templates are fitted
    on the real beats of each label when there are enough of them,
    otherwise on a simulated recording.
    """
    rng = rng or RandomSource(config.seed).fork(STORE)
    schema = [k for k in config.schema if k in BEAT_SCHEMA]
    beats = []
    for lab in BeatLabel:
        real_beats = None if real is None else np.asarray(real[0])[np.asarray(real[1]) == int(lab)]
        if real_beats is not None and real_beats.shape[0] >= max(MIN_TEMPLATE_BEATS, config.template_components + 1):
            model = fit_template(real_beats, lab, k=config.template_components,
                                 pre_r=config.pre_r, fs=config.fs)
        else:
            model = default_template(lab, config.window, config.fs, k=config.template_components,
                                     rng=rng.fork(100 + int(lab)))
        beats += generate_beats(model, config.store_size, rng.fork(int(lab)),
                                start_id=int(lab) * config.store_size, schema=schema)
        log.info("generated %d %s beats", config.store_size, lab.text)
    return build_store(beats, schema, config.window, config.fs)


def assemble_trajectory(trajectory, store: BeatStore, config: PipelineConfig) -> AssembledSignal:
    root = RandomSource(config.seed)
    features = [k for k in store.schema if k in trajectory.schema]
    weights = config.matcher.match_weights(features)
    mode = config.matcher.match_mode(root.fork(MATCH))
    return assemble(trajectory, store, weights, mode, config.smoothing)


@dataclass
class PipelineResult:
    real: Segmentation
    store: BeatStore
    synthetic_features: object
    assembled: AssembledSignal
    resegmented: Segmentation
    outputs: dict


def _by_label(beats, labels, lab):
    return beats[labels == int(lab)]


def run_pipeline(config: PipelineConfig, out_dir, signal: Optional[Signal] = None,
                 manifest: Optional[Manifest] = None, annotations=None,
                 n_beats: int = 1000, n_synth: Optional[int] = None) -> PipelineResult:
    """Run every stage and write all artifacts into ``out_dir``.

    Without an input ``signal`` a recording of ``n_beats`` beats is
    simulated. ``n_synth`` rows are synthesized (default: as many as the
    real trajectory has).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = RandomSource(config.seed)
    files = {}

    def path(name):
        files[name] = out / name
        return out / name

    if signal is None:
        rec = simulate_recording(n_beats, fs=config.fs, rng=root.fork(SIMULATE))
        signal, annotations = rec.signal, rec.annotations
    manifest = manifest or Manifest(config.fs, signal.channel_name, "mV", "simulated",
                                    config.pre_r, config.post_r)
    formats.write_signal(signal, path("real_signal.csv"))
    formats.dump_json(manifest.to_dict(), path("manifest.json"))

    real = segment_signal(signal, config.window, annotations, config.schema)
    real_records = [formats.BeatRecord(i, int(l), b) for i, (b, l) in enumerate(zip(real.beats, real.labels))]
    formats.write_beats(real_records, path("real_beats.csv"))
    formats.write_trajectory(real.trajectory, path("real_features.csv"))
    log.info("segmented %d beats", len(real.r_indices))

    model = fit_feature_model(real.trajectory, config)
    formats.write_model(model, path("feature_model.json"))

    store = build_beat_store(config, (real.beats, real.labels), root.fork(STORE))
    formats.write_store(store, path("store"))

    synth = model.sample(n_synth or len(real.trajectory), root.fork(FEATURES))
    formats.write_trajectory(synth, path("synth_features.csv"))

    assembled = assemble_trajectory(synth, store, config)
    formats.write_signal(assembled.signal, path("long.csv"))
    hist = match_histogram(assembled.matches)
    formats.dump_json(formats.match_report(assembled, hist), path("matches.json"))
    plotting.plot_signal(assembled.signal, path("long.svg"), assembled.r_indices)

    annotations_synth = list(zip(assembled.r_indices.tolist(), assembled.labels.tolist()))
    reseg = segment_signal(assembled.signal, config.window, annotations_synth, config.schema)
    formats.write_trajectory(reseg.trajectory, path("assembled_features.csv"))

    # beat-level fidelity on normal beats: store beats against real beats
    real_n = _by_label(real.beats, real.labels, BeatLabel.NORMAL)
    synth_n = store.waveforms(store.positions(BeatLabel.NORMAL))
    mc = config.metrics
    report = metric_report(real_n, synth_n, mc.bins, mc.smoothing, mc.max_mmd_samples)
    feats = feature_metric_table(real.trajectory, synth, config.fs)
    formats.dump_json(formats.metric_report_dict(report, feats), path("report.json"))
    hm = density_heatmap(real_n, synth_n, mc.bins)
    formats.write_file(formats.heatmap_csv(hm), path("heatmap.csv"))
    plotting.plot_heatmap(hm, path("heatmap.svg"), config.fs)
    plotting.plot_overlay(real_n, synth_n, path("overlay.svg"), config.fs, config.pre_r)
    plotting.plot_correlations(feature_correlations(real.trajectory).matrix,
                               feature_correlations(synth).matrix, list(real.trajectory.schema),
                               path("correlations.svg"))

    real_ds = windows_to_dataset(real.trajectory, config.window_beats, Provenance.REAL)
    synth_ds = windows_to_dataset(reseg.trajectory, config.window_beats, Provenance.SYNTHETIC)
    if real_ds.usable and synth_ds.usable:
        rows = tstr_protocol(synth_ds, real_ds, suite(), seed=int(root.fork(TSTR).seed) % 2**32,
                             split=config.split)
        formats.write_file(formats.tstr_csv(rows), path("tstr.csv"))
        formats.write_file(formats.tstr_text(rows), path("tstr.txt"))
    else:
        log.warning("skipping TSTR: a window dataset has a single class or too few rows")

    return PipelineResult(real, store, synth, assembled, reseg, files)
