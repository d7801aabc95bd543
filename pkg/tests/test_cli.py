import subprocess
import sys

import pytest

from gaitscreen.cli import build_parser, main
from gaitscreen.config import RunConfig
from gaitscreen.svm import PolynomialSVC


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["synth", "--out", str(data), "--cows", "1=4,3=4", "--files", "1", "--easy"]) == 0
    return root, data


def test_help_lists_every_config_key(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for key, default, _ in RunConfig.describe():
        assert key in out and default in out
    for cmd in ("synth", "ingest", "stats", "features", "train", "evaluate", "dsp-trace"):
        assert cmd in out


def test_subcommands_accept_every_key():
    parser = build_parser()
    for key, _, _ in RunConfig.describe():
        args = parser.parse_args(["train", "--data", "x", f"--{key.replace('_', '-')}", "1"])
        assert getattr(args, f"cfg_{key}") == "1"


def test_entry_point_version():
    r = subprocess.run([sys.executable, "-m", "gaitscreen.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "gaitscreen" in r.stdout


def test_ingest_and_stats(small, capsys):
    root, data = small
    assert main(["ingest", str(data), "--out", str(root / "ing")]) == 0
    assert (root / "ing" / "manifest.csv").read_text().count("\n") == 9
    assert main(["stats", str(data), "--out", str(root / "st")]) == 0
    out = capsys.readouterr().out
    assert "8 (3x8)" in out
    assert (root / "st" / "stats.csv").exists()


def test_features_train_evaluate(small):
    root, data = small
    assert main(["features", "--data", str(data), "--out", str(root / "f"), "--jobs", "1"]) == 0
    feats = root / "f" / "features.csv"
    assert feats.read_text().splitlines()[0].count(",") == 3 + 4440 - 1
    assert main(["train", "--data", str(data), "--out", str(root / "m"), "--jobs", "1"]) == 0
    assert main(["train", "--features", str(feats), "--out", str(root / "m2")]) == 0
    model = PolynomialSVC.load(root / "m" / "model.npz")
    assert model.n_features_in_ == 4440
    assert (root / "m" / "model.npz").read_bytes() == (root / "m2" / "model.npz").read_bytes()
    for run in ("r1", "r2"):
        assert main(["evaluate", "protocol1", "--features", str(feats), "--folds", "3", "--jobs", "1",
                     "--out", str(root / run)]) == 0
    a = (root / "r1" / "report.csv").read_bytes()
    assert a == (root / "r2" / "report.csv").read_bytes()
    assert (root / "r1" / "report.txt").read_bytes() == (root / "r2" / "report.txt").read_bytes()
    assert (root / "r1" / "roc_all_0.csv").read_text().startswith("fpr,tpr,threshold")
    assert main(["evaluate", "protocol2", "--features", str(feats), "--folds", "3", "--jobs", "1",
                 "--out", str(root / "p2")]) == 0
    assert (root / "p2" / "roc_gyro_0.csv").exists()
    assert main(["evaluate", "multiclass", "--features", str(feats), "--folds", "3", "--jobs", "1"]) == 0


def test_dsp_trace(small):
    root, data = small
    f = sorted(data.glob("cow*.csv"))[0]
    assert main(["dsp-trace", str(f), "--channel", "gyro_x", "--out", str(root / "t")]) == 0
    lines = (root / "t" / "trace_gyro_x.csv").read_text().splitlines()
    assert lines[0] == "time,raw,despiked,envelope,log_envelope,baseline,baseline_norm,motion"
    assert len(lines) == 9001


def test_config_file(small, tmp_path):
    root, data = small
    cfg = tmp_path / "run.cfg"
    cfg.write_text("folds = 2\nseed = 5  # comment\n")
    assert main(["evaluate", "protocol1", "--data", str(data), "--config", str(cfg), "--jobs", "1",
                 "--out", str(tmp_path / "o")]) == 0
    csv_text = (tmp_path / "o" / "report.csv").read_text()
    assert "# seed = 5" in csv_text and "# folds = 2" in csv_text


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing")]) == 1
    (tmp_path / "empty").mkdir()
    assert main(["train", "--data", str(tmp_path / "empty")]) == 1
    assert "EmptyDataset" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert main(["train", "--data", str(tmp_path), "--config", str(bad)]) == 2
    assert main(["train", "--data", str(tmp_path), "--folds", "abc"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2
