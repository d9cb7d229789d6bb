import json

import numpy as np
import pytest

from longecg import formats
from longecg.cli import main
from longecg.core import BeatLabel, BeatRecord, BeatWindow, Signal
from longecg.delineation import FeatureTrajectory
from longecg.simulate import template_beat


def _train(n_beats, fs=128, start=100, rr=128):
    beat = template_beat(BeatLabel.NORMAL, BeatWindow(), fs)
    x = np.zeros(start + rr * (n_beats - 1) + 200)
    for k in range(n_beats):
        r = start + rr * k
        x[r - 60 : r + 121] += beat
    return Signal(x, fs)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Simulated recording taken through segment, fit and a small store."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--beats", "400", "--seed", "2", "--out", str(d / "sig.csv"),
                 "--manifest-out", str(d / "man.json"), "--annotations-out", str(d / "ann.csv")]) == 0
    assert main(["segment", str(d / "sig.csv"), "--manifest", str(d / "man.json"),
                 "--annotations", str(d / "ann.csv"), "--out", str(d / "beats.csv"),
                 "--features", str(d / "feat.csv")]) == 0
    assert main(["fit", "--features", str(d / "feat.csv"), "--out", str(d / "model.json")]) == 0
    assert main(["build-store", "--beats", str(d / "beats.csv"), "--size", "150", "--seed", "1",
                 "--out", str(d / "store")]) == 0
    return d


def test_segment_constructed_train(tmp_path):
    formats.write_signal(_train(10), tmp_path / "s.csv")
    assert main(["segment", str(tmp_path / "s.csv"), "--out", str(tmp_path / "b.csv")]) == 0
    ids, labels, waves = formats.read_beat_table(tmp_path / "b.csv")
    assert len(ids) == 10 and waves.shape == (10, 181)


def test_segment_bad_inputs(tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert main(["segment", str(tmp_path / "empty.csv"), "--out", str(tmp_path / "b.csv")]) == 2
    assert "line 1" in capsys.readouterr().err
    formats.write_signal(Signal(np.zeros(2000), 128), tmp_path / "flat.csv")
    assert main(["segment", str(tmp_path / "flat.csv"), "--out", str(tmp_path / "b.csv")]) == 3
    assert main(["segment", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "b.csv")]) == 2
    assert not (tmp_path / "b.csv").exists()


def test_synth_features(work, tmp_path):
    m = str(work / "model.json")
    assert main(["synth-features", "--model", m, "--beats", "1", "--out", str(tmp_path / "one.csv")]) == 0
    assert len(formats.read_trajectory(tmp_path / "one.csv")) == 1
    for name in ("a.csv", "b.csv"):
        assert main(["synth-features", "--model", m, "--beats", "10000", "--seed", "4",
                     "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    real = formats.read_trajectory(work / "feat.csv").values
    synth = formats.read_trajectory(tmp_path / "a.csv").values
    assert synth.shape == (10000, real.shape[1])
    assert np.all(synth >= real.min(axis=0)) and np.all(synth <= real.max(axis=0))


def test_assemble(work, tmp_path):
    assert main(["synth-features", "--model", str(work / "model.json"), "--beats", "100",
                 "--seed", "1", "--out", str(tmp_path / "t.csv")]) == 0
    args = ["assemble", "--traj", str(tmp_path / "t.csv"), "--store", str(work / "store"),
            "--seed", "3", "--report"]
    assert main(args + [str(tmp_path / "r1.json"), "--out", str(tmp_path / "x1.csv"),
                        "--plot", str(tmp_path / "x.svg")]) == 0
    assert main(args + [str(tmp_path / "r2.json"), "--out", str(tmp_path / "x2.csv")]) == 0
    rep = json.loads((tmp_path / "r1.json").read_text())
    assert len(rep["matches"]) == 100
    assert sum(b["count"] for b in rep["histogram"]["bins"]) == 100
    assert (tmp_path / "x1.csv").read_bytes() == (tmp_path / "x2.csv").read_bytes()
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert (tmp_path / "x.svg").read_text().lstrip().startswith("<?xml")


def test_assemble_absent_label(work, tmp_path):
    t = formats.read_trajectory(work / "feat.csv")
    lines = formats.trajectory_csv(t).splitlines()[:20]
    lines[5] = lines[5].rsplit(",", 1)[0] + ",Abnormal"
    (tmp_path / "t.csv").write_text("\n".join(lines) + "\n")
    # a store directory holding Normal beats only
    store = tmp_path / "store"
    store.mkdir()
    for name in ("index.json", "normal.csv"):
        (store / name).write_bytes((work / "store" / name).read_bytes())
    assert main(["assemble", "--traj", str(tmp_path / "t.csv"), "--store", str(store),
                 "--out", str(tmp_path / "x.csv")]) == 4


def test_evaluate(work, tmp_path):
    beats = str(work / "beats.csv")
    assert main(["evaluate", "--real", beats, "--synth", beats, "--out", str(tmp_path / "e.json"),
                 "--heatmap", str(tmp_path / "h.svg"), "--overlay", str(tmp_path / "o.svg")]) == 0
    vals = formats.read_metric_report(tmp_path / "e.json").values
    assert len(vals) == 15 and all(abs(v) <= 1e-9 for v in vals.values())
    assert (tmp_path / "h.svg").exists() and (tmp_path / "o.svg").exists()


def test_evaluate_shift_heatmap(work, tmp_path):
    ids, labels, waves = formats.read_beat_table(work / "beats.csv")
    shifted = [BeatRecord(int(i), int(l), w + 0.5) for i, l, w in zip(ids, labels, waves)]
    formats.write_beats(shifted, tmp_path / "s.csv")
    assert main(["evaluate", "--real", str(work / "beats.csv"), "--synth", str(tmp_path / "s.csv"),
                 "--out", str(tmp_path / "e.json"), "--heatmap-csv", str(tmp_path / "h.csv")]) == 0
    vals = formats.read_metric_report(tmp_path / "e.json").values
    assert vals["avg_mean_diff"] == pytest.approx(0.5, abs=1e-6)
    assert (tmp_path / "h.csv").read_text().count("\n") > 10


def test_evaluate_errors(work, tmp_path):
    p = tmp_path / "short.csv"
    p.write_text("id,label,s0,s1\n0,Normal,0.0,1.0\n")
    assert main(["evaluate", "--real", str(work / "beats.csv"), "--synth", str(p),
                 "--out", str(tmp_path / "e.json")]) == 2
    assert main(["evaluate", "--real", str(tmp_path / "nope.csv"), "--synth", str(p),
                 "--out", str(tmp_path / "e.json")]) == 2


def _separable(path, seed, n=600):
    gen = np.random.default_rng(seed)
    labels = (np.arange(n) // 5) % 2
    vals = gen.normal(size=(n, 2))
    vals[:, 1] += 6.0 * labels
    formats.write_trajectory(FeatureTrajectory(vals, labels, ("R_Int", "R_Amp")), path)


def test_tstr(tmp_path, capsys):
    _separable(tmp_path / "a.csv", 1)
    _separable(tmp_path / "b.csv", 2)
    assert main(["tstr", "--synth-train", str(tmp_path / "a.csv"), "--real-test",
                 str(tmp_path / "b.csv"), "--out", str(tmp_path / "o.csv"),
                 "--text", str(tmp_path / "o.txt")]) == 0
    lines = (tmp_path / "o.csv").read_text().splitlines()
    header, rows = lines[0].split(","), [l.split(",") for l in lines[1:]]
    for key in ("rec_n", "rec_a"):
        col = header.index(key)
        assert all(float(r[col]) >= 0.9 for r in rows)
    assert "TSTR" in capsys.readouterr().out
    assert main(["tstr", "--synth-train", str(tmp_path / "a.csv"), "--real-test",
                 str(tmp_path / "a.csv"), "--out", str(tmp_path / "same.csv")]) == 0
    lines = (tmp_path / "same.csv").read_text().splitlines()[1:]
    proto = lines[0].split(",").index("TSTR")
    for a, b in zip(lines[::2], lines[1::2]):
        a, b = a.split(","), b.split(",")
        assert a[:proto] + a[proto + 1 :] == b[:proto] + b[proto + 1 :]


def test_tstr_single_class(tmp_path):
    t = FeatureTrajectory(np.random.default_rng(0).normal(size=(100, 2)), [0] * 100, ("a", "b"))
    formats.write_trajectory(t, tmp_path / "t.csv")
    assert main(["tstr", "--synth-train", str(tmp_path / "t.csv"), "--real-test",
                 str(tmp_path / "t.csv"), "--out", str(tmp_path / "o.csv")]) == 5


def test_config_command(tmp_path, capsys):
    assert main(["config"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["store_size"] == 10000
    (tmp_path / "c.json").write_text('{"sede": 1}')
    assert main(["config", "--config", str(tmp_path / "c.json")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


@pytest.mark.slow
def test_pipeline_outputs(tmp_path):
    (tmp_path / "c.json").write_text('{"store_size": 200}')
    assert main(["pipeline", "--config", str(tmp_path / "c.json"), "--seed", "3", "--beats", "400",
                 "--synth-beats", "300", "--out-dir", str(tmp_path / "out")]) == 0
    svgs = sorted(p.name for p in (tmp_path / "out").rglob("*.svg"))
    assert svgs
    for name in svgs:
        text = next((tmp_path / "out").rglob(name)).read_text()
        assert "<svg" in text
