"""Text formats for signals, beats, trajectories, models and reports.

CSV files are UTF-8 with LF line endings. Signal amplitudes are written
with 6 decimals; beat and feature tables use the shortest repr of each
float so they reload bit-for-bit. JSON keeps keys in insertion order with
a two-space indent and a trailing newline.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from .assembler import AssembledSignal, MatchHistogram
from .core import BeatLabel, BeatRecord, BeatWindow, Signal
from .delineation import BEAT_SCHEMA, FeatureTrajectory, beat_descriptor_matrix
from .errors import FormatError
from .feature_model import model_from_dict
from .metrics import DensityHeatmap, MetricReport
from .store import BeatStore, build_store
from .tstr import TABLE_COLUMNS

STORE_FILES = {BeatLabel.NORMAL: "normal.csv", BeatLabel.ABNORMAL: "abnormal.csv"}


def _num(x) -> str:
    return repr(float(x))


def _write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_rows(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise FormatError(f"no such file: {path}") from None
    except UnicodeDecodeError as e:
        raise FormatError(f"not UTF-8: {e}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0]:
        raise FormatError("missing header", 1)
    return rows


def _float(cell, line):
    try:
        v = float(cell)
    except ValueError:
        raise FormatError(f"not a number: {cell!r}", line) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {cell!r}", line)
    return v


def _label(cell, line):
    try:
        return BeatLabel.parse(cell)
    except ValueError:
        raise FormatError(f"unknown label {cell!r}", line) from None


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    if path is not None:
        _write_text(path, text)
    return text


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, e.lineno) from None


# signals

def signal_csv(signal: Signal) -> str:
    out = ["t,amplitude_mv"]
    fs = signal.fs
    out += [f"{i / fs:.6f},{v:.6f}" for i, v in enumerate(signal.samples)]
    return "\n".join(out) + "\n"


def write_signal(signal: Signal, path):
    _write_text(path, signal_csv(signal))


def read_signal(path, fs: int = 128, channel_name: str = "ECG") -> Signal:
    rows = _read_rows(path)
    if [c.strip() for c in rows[0]] != ["t", "amplitude_mv"]:
        raise FormatError("header must be t,amplitude_mv", 1)
    vals = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", n)
        _float(row[0], n)
        vals.append(_float(row[1], n))
    if not vals:
        raise FormatError("no samples", 2)
    return Signal(np.array(vals), fs, channel_name)


# beats

def beats_csv(beats) -> str:
    beats = list(beats)
    width = len(beats[0].waveform) if beats else 0
    lines = [",".join(["id", "label"] + [f"s{i}" for i in range(width)])]
    for b in beats:
        lines.append(",".join([str(b.id), b.label.text] + [_num(v) for v in b.waveform]))
    return "\n".join(lines) + "\n"


def write_beats(beats, path):
    _write_text(path, beats_csv(beats))


def read_beat_table(path):
    """``(ids, labels, waveforms)`` from a beat CSV."""
    rows = _read_rows(path)
    head = [c.strip() for c in rows[0]]
    width = len(head) - 2
    if head[:2] != ["id", "label"] or head[2:] != [f"s{i}" for i in range(width)] or width < 1:
        raise FormatError("header must be id,label,s0..s{W-1}", 1)
    ids, labels, waves = [], [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width + 2:
            raise FormatError(f"expected {width + 2} fields, got {len(row)}", n)
        try:
            ids.append(int(row[0]))
        except ValueError:
            raise FormatError(f"bad id {row[0]!r}", n) from None
        labels.append(_label(row[1], n))
        waves.append([_float(c, n) for c in row[2:]])
    waves = np.array(waves, dtype=float).reshape(len(ids), width)
    return np.array(ids, dtype=np.int64), labels, waves


def read_beats(path, window: BeatWindow = None, fs: int = 128, schema=BEAT_SCHEMA) -> list:
    """Beat records with descriptors measured on each waveform."""
    ids, labels, waves = read_beat_table(path)
    if not len(ids):
        return []
    if window is None:
        L = waves.shape[1]
        window = BeatWindow(L // 3, L - L // 3 - 1)
    elif window.length != waves.shape[1]:
        raise FormatError(f"beats have {waves.shape[1]} samples, window needs {window.length}", 1)
    desc = beat_descriptor_matrix(waves, window, fs, schema)
    return [BeatRecord(i, l, w, dict(zip(schema, map(float, d))))
            for i, l, w, d in zip(ids, labels, waves, desc)]


# feature trajectories

def trajectory_csv(traj: FeatureTrajectory) -> str:
    lines = [",".join(list(traj.schema) + ["label"])]
    for v, l in zip(traj.values, traj.labels):
        lines.append(",".join([_num(x) for x in v] + [BeatLabel(int(l)).text]))
    return "\n".join(lines) + "\n"


def write_trajectory(traj: FeatureTrajectory, path):
    _write_text(path, trajectory_csv(traj))


def read_trajectory(path) -> FeatureTrajectory:
    rows = _read_rows(path)
    head = [c.strip() for c in rows[0]]
    if len(head) < 2 or head[-1] != "label" or len(set(head)) != len(head):
        raise FormatError("header must be feature names followed by label", 1)
    schema = tuple(head[:-1])
    vals, labels = [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(head):
            raise FormatError(f"expected {len(head)} fields, got {len(row)}", n)
        vals.append([_float(c, n) for c in row[:-1]])
        labels.append(_label(row[-1], n))
    if not vals:
        raise FormatError("no data rows", 2)
    return FeatureTrajectory(np.array(vals), labels, schema)


# models

def write_model(model, path):
    dump_json(model.to_dict(), path)


def read_model(path):
    d = read_json(path)
    try:
        return model_from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed model: {e}") from None


# beat store

def write_store(store: BeatStore, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {
        "fs": store.fs,
        "window": {"pre_r": store.window.pre_r, "post_r": store.window.post_r},
        "schema": list(store.schema),
        "counts": {lab.text: store.count(lab) for lab in BeatLabel},
        "files": {lab.text: STORE_FILES[lab] for lab in BeatLabel},
        "descriptor_stats": {k: {"mean": m, "std": s} for k, (m, s) in store.descriptor_stats.items()},
    }
    dump_json(index, directory / "index.json")
    for lab in BeatLabel:
        write_beats([store.beats[i] for i in store.positions(lab)], directory / STORE_FILES[lab])


def read_store(directory) -> BeatStore:
    directory = Path(directory)
    index = read_json(directory / "index.json")
    try:
        window = BeatWindow(int(index["window"]["pre_r"]), int(index["window"]["post_r"]))
        fs, schema = int(index["fs"]), tuple(index["schema"])
        files = index["files"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed store index: {e}") from None
    beats = []
    for lab in BeatLabel:
        path = directory / files.get(lab.text, STORE_FILES[lab])
        if not path.exists():
            continue
        part = read_beats(path, window, fs, schema)
        if any(b.label is not lab for b in part):
            raise FormatError(f"{path.name} holds beats of another label")
        beats += part
    return build_store(beats, schema, window, fs)


# reports

def match_report(assembled: AssembledSignal, histogram: MatchHistogram) -> dict:
    return {
        "r_indices": [int(r) for r in assembled.r_indices],
        "matches": [
            {
                "position": m.position,
                "label": m.target.label.text,
                "beat_id": m.beat_id,
                "cost": m.cost,
                "candidates_evaluated": m.candidates_evaluated,
                "pool_size": m.pool_size,
                "target": dict(m.target.values),
                "abs_diff": dict(m.abs_diff),
            }
            for m in assembled.matches
        ],
        "histogram": {
            "feature": histogram.feature,
            "bins": [{"range": r, "count": c} for r, c in histogram.rows()],
            "total": histogram.total,
        },
    }


def metric_report_dict(report: MetricReport, features: dict = None) -> dict:
    d = {"metrics": [{"key": k, "name": n, "value": v} for k, n, v in report.rows()]}
    if features is not None:
        d["features"] = features
    return d


def read_metric_report(path) -> MetricReport:
    d = read_json(path)
    try:
        return MetricReport({m["key"]: float(m["value"]) for m in d["metrics"]})
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed metric report: {e}") from None


def heatmap_csv(hm: DensityHeatmap) -> str:
    lines = ["t,bin_lo,bin_hi,real_density,synth_density,difference"]
    e = hm.bin_edges
    for t in range(hm.difference.shape[0]):
        for k in range(e.size - 1):
            lines.append(",".join([str(t), _num(e[k]), _num(e[k + 1]), _num(hm.real_density[t, k]),
                                   _num(hm.synth_density[t, k]), _num(hm.difference[t, k])]))
    return "\n".join(lines) + "\n"


def tstr_csv(rows) -> str:
    lines = [",".join(("classifier", "protocol") + TABLE_COLUMNS)]
    for r in rows:
        d = r.report.as_dict()
        lines.append(",".join([r.classifier, r.protocol] + [f"{d[c]:.4f}" for c in TABLE_COLUMNS]))
    return "\n".join(lines) + "\n"


TEXT_HEADERS = ("Acc (N)", "Acc (A)", "Prec (N)", "Prec (A)", "Rec (N)", "Rec (A)",
                "F1 (N)", "F1 (A)", "Accuracy", "MCC")


def tstr_text(rows) -> str:
    """Fixed-width table with one line per classifier and protocol."""
    name_w = max([len("Classifier")] + [len(r.classifier) for r in rows])
    head = f"{'Classifier':<{name_w}}  {'Proto':<5}  " + "  ".join(f"{h:>8}" for h in TEXT_HEADERS)
    lines = [head, "-" * len(head)]
    for r in rows:
        d = r.report.as_dict()
        lines.append(f"{r.classifier:<{name_w}}  {r.protocol:<5}  "
                     + "  ".join(f"{d[c]:>8.4f}" for c in TABLE_COLUMNS))
    return "\n".join(lines) + "\n"


def write_file(text: str, path):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    _write_text(path, text)
