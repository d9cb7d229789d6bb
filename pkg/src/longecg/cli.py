"""Command-line interface.

Exit codes: 0 success, 2 unreadable or invalid input, 3 no beats found,
4 beat store problem (e.g. a label with no beats), 5 unusable dataset
(e.g. a single class).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats, plotting
from .assembler import match_histogram
from .config import Manifest, PipelineConfig, load_config, load_manifest
from .core import BeatLabel, BeatRecord, RandomSource
from .delineation import DEFAULT_SCHEMA, segment_signal
from .errors import (DuplicateId, EmptyInput, FormatError, InsufficientBeats,
                     InsufficientData, LabelEmpty, LengthMismatch, MissingDescriptor, NoBeatsFound,
                     SingleClass, TooFewBeats, TooFewRows, TooShort)
from .metrics import density_heatmap, metric_report
from .pipeline import assemble_trajectory, build_beat_store, fit_feature_model, run_pipeline
from .simulate import simulate_recording
from .tstr import Provenance, suite, tstr_protocol, windows_to_dataset

EXIT_OK, EXIT_PARSE, EXIT_NO_BEATS, EXIT_STORE, EXIT_DATASET = 0, 2, 3, 4, 5

log = logging.getLogger("longecg")


def _exit_code(err: Exception) -> int:
    if isinstance(err, (NoBeatsFound, TooShort)):
        return EXIT_NO_BEATS
    if isinstance(err, (LabelEmpty, DuplicateId, MissingDescriptor)):
        return EXIT_STORE
    if isinstance(err, (SingleClass, TooFewRows, TooFewBeats, InsufficientData, InsufficientBeats)):
        return EXIT_DATASET
    return EXIT_PARSE


def _read_annotations(path):
    """``r_index,label`` CSV into ``(sample, label)`` pairs."""
    rows = formats._read_rows(path)
    if [c.strip() for c in rows[0]] != ["r_index", "label"]:
        raise FormatError("header must be r_index,label", 1)
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", n)
        try:
            out.append((int(row[0]), formats._label(row[1], n)))
        except ValueError:
            raise FormatError(f"bad sample index {row[0]!r}", n) from None
    return out


def _annotations_csv(annotations) -> str:
    lines = ["r_index,label"] + [f"{int(s)},{BeatLabel.parse(l).text}" for s, l in annotations]
    return "\n".join(lines) + "\n"


def _config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        cfg = PipelineConfig.from_dict(d)
    return cfg


def cmd_simulate(args):
    rec = simulate_recording(args.beats, fs=args.fs, rng=RandomSource(args.seed),
                             abnormal_rate=args.abnormal_rate)
    formats.write_signal(rec.signal, args.out)
    if args.manifest_out:
        formats.dump_json(Manifest(args.fs, "ECG", "mV", f"simulated, seed {args.seed}").to_dict(),
                          args.manifest_out)
    if args.annotations_out:
        formats.write_file(_annotations_csv(rec.annotations), args.annotations_out)
    print(f"wrote {len(rec.signal)} samples, {args.beats} beats")


def cmd_segment(args):
    manifest = load_manifest(args.manifest) if args.manifest else Manifest()
    signal = formats.read_signal(args.signal, manifest.fs, manifest.channel_name)
    ann = _read_annotations(args.annotations) if args.annotations else None
    seg = segment_signal(signal, manifest.window, ann, DEFAULT_SCHEMA)
    records = [BeatRecord(i, int(l), b) for i, (b, l) in enumerate(zip(seg.beats, seg.labels))]
    formats.write_beats(records, args.out)
    if args.features:
        formats.write_trajectory(seg.trajectory, args.features)
    print(f"segmented {len(records)} beats")


def cmd_fit(args):
    cfg = _config(args)
    traj = formats.read_trajectory(args.features)
    if args.kind:
        d = cfg.to_dict()
        d["feature_model"] = args.kind
        cfg = PipelineConfig.from_dict(d)
    model = fit_feature_model(traj, cfg)
    formats.write_model(model, args.out)
    print(f"fitted {model.kind} on {len(traj)} rows")


def cmd_build_store(args):
    cfg = _config(args)
    if args.size is not None:
        d = cfg.to_dict()
        d["store_size"] = args.size
        cfg = PipelineConfig.from_dict(d)
    real = None
    if args.beats:
        _, labels, waves = formats.read_beat_table(args.beats)
        if waves.shape[1] != cfg.window.length:
            raise LengthMismatch(f"beats have {waves.shape[1]} samples, window needs {cfg.window.length}")
        real = (waves, [int(l) for l in labels])
    store = build_beat_store(cfg, real)
    formats.write_store(store, args.out)
    print(f"store with {len(store)} beats written to {args.out}")


def cmd_synth_features(args):
    model = formats.read_model(args.model)
    traj = model.sample(args.beats, RandomSource(args.seed))
    formats.write_trajectory(traj, args.out)
    print(f"wrote {len(traj)} rows")


def cmd_assemble(args):
    cfg = _config(args)
    traj = formats.read_trajectory(args.traj)
    store = formats.read_store(args.store)
    assembled = assemble_trajectory(traj, store, cfg)
    formats.write_signal(assembled.signal, args.out)
    hist = match_histogram(assembled.matches)
    if args.report:
        formats.dump_json(formats.match_report(assembled, hist), args.report)
    if args.plot:
        plotting.plot_signal(assembled.signal, args.plot, assembled.r_indices)
    within = sum(hist.counts[:3])
    print(f"assembled {len(traj)} beats; {within}/{hist.total} R_Amp matches within 0.03 mV")


def cmd_evaluate(args):
    _, _, real = formats.read_beat_table(args.real)
    _, _, synth = formats.read_beat_table(args.synth)
    if real.shape[0] == 0 or synth.shape[0] == 0:
        raise EmptyInput("beat files must hold at least one beat")
    cfg = _config(args)
    mc = cfg.metrics
    report = metric_report(real, synth, mc.bins, mc.smoothing, mc.max_mmd_samples)
    formats.dump_json(formats.metric_report_dict(report), args.out)
    if args.heatmap or args.heatmap_csv:
        hm = density_heatmap(real, synth, mc.bins)
        if args.heatmap:
            plotting.plot_heatmap(hm, args.heatmap, cfg.fs)
        if args.heatmap_csv:
            formats.write_file(formats.heatmap_csv(hm), args.heatmap_csv)
    if args.overlay:
        plotting.plot_overlay(real, synth, args.overlay, cfg.fs)
    for _, name, value in report.rows():
        print(f"{name}: {value:.6g}")


def _dataset(path, window_beats, provenance):
    head = formats._read_rows(path)[0]
    if [c.strip() for c in head[:2]] == ["id", "label"]:
        _, labels, waves = formats.read_beat_table(path)
        return windows_to_dataset((waves, [int(l) for l in labels]), window_beats, provenance)
    return windows_to_dataset(formats.read_trajectory(path), window_beats, provenance)


def cmd_tstr(args):
    names = None if args.classifiers == "all" else args.classifiers.split(",")
    kinds = suite(names)
    synth = _dataset(args.synth_train, args.window_beats, Provenance.SYNTHETIC)
    real = _dataset(args.real_test, args.window_beats, Provenance.REAL)
    rows = tstr_protocol(synth, real, kinds, seed=args.seed, split=args.split)
    formats.write_file(formats.tstr_csv(rows), args.out)
    text = formats.tstr_text(rows)
    if args.text:
        formats.write_file(text, args.text)
    print(text, end="")


def cmd_pipeline(args):
    cfg = _config(args)
    signal = manifest = ann = None
    if args.signal:
        manifest = load_manifest(args.manifest) if args.manifest else Manifest()
        signal = formats.read_signal(args.signal, manifest.fs, manifest.channel_name)
        ann = _read_annotations(args.annotations) if args.annotations else None
    res = run_pipeline(cfg, args.out_dir, signal, manifest, ann, n_beats=args.beats,
                       n_synth=args.synth_beats)
    for name in res.outputs:
        print(Path(args.out_dir) / name)


def cmd_config(args):
    text = formats.dump_json(load_config(args.config).to_dict())
    if args.out:
        formats.write_file(text, args.out)
    else:
        print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longecg", description="Long-form ECG synthesis by beat assembly.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a simulated annotated recording")
    s.add_argument("--beats", type=int, default=300)
    s.add_argument("--fs", type=int, default=128)
    s.add_argument("--abnormal-rate", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--manifest-out")
    s.add_argument("--annotations-out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("segment", help="detect, delineate and slice beats")
    s.add_argument("signal")
    s.add_argument("--manifest")
    s.add_argument("--annotations", help="r_index,label CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--features", help="also write the feature CSV here")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("fit", help="fit a feature model to a feature CSV")
    s.add_argument("--features", required=True)
    s.add_argument("--kind", choices=["copula_var", "block_bootstrap"])
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("build-store", help="generate a beat store")
    s.add_argument("--beats", help="beat CSV to fit templates on")
    s.add_argument("--size", type=int, help="beats per label")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_store)

    s = sub.add_parser("synth-features", help="sample a feature trajectory")
    s.add_argument("--model", required=True)
    s.add_argument("--beats", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth_features)

    s = sub.add_parser("assemble", help="assemble a long-form signal from a trajectory")
    s.add_argument("--traj", required=True)
    s.add_argument("--store", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--plot", help="SVG of the first seconds of the signal")
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("evaluate", help="beat-level fidelity metrics")
    s.add_argument("--real", required=True)
    s.add_argument("--synth", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--heatmap", help="SVG density-difference heatmap")
    s.add_argument("--heatmap-csv")
    s.add_argument("--overlay", help="SVG mean and sd overlay")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("tstr", help="train on synthetic, test on real")
    s.add_argument("--synth-train", required=True)
    s.add_argument("--real-test", required=True)
    s.add_argument("--classifiers", default="all", help='"all" or comma-separated names')
    s.add_argument("--window-beats", type=int, default=5)
    s.add_argument("--split", type=float, default=0.7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--text", help="also write the formatted table here")
    s.set_defaults(func=cmd_tstr)

    s = sub.add_parser("pipeline", help="run every stage end to end")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--signal", help="signal CSV; simulated when omitted")
    s.add_argument("--manifest")
    s.add_argument("--annotations")
    s.add_argument("--beats", type=int, default=1000, help="beats to simulate")
    s.add_argument("--synth-beats", type=int)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("config", help="print the effective configuration")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValueError as e:
        # domain errors subclass ValueError; anything else is bad input
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
