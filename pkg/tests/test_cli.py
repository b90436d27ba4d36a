import json
import shutil
import subprocess
import sys

import pytest

from bigrucnn.cli import build_parser, main, parse_args
from bigrucnn.dataio import load_csv

SMALL_FLAGS = ["--max-len", "12", "--embed-dim", "16", "--conv-filters", "16", "--gru1-hidden", "16",
               "--gru2-hidden", "8", "--dense-hidden", "16"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    from .conftest import FIXTURE_CSV

    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--data", FIXTURE_CSV, "--epochs", "3", "--seed", "42", "--out", str(out),
                 "--min-freq", "1", *SMALL_FLAGS])
    assert code == 0
    return out


def test_defaults():
    args = build_parser().parse_args(["train", "--data", "x.csv"])
    assert args.epochs == 100 and args.seed == 1337 and args.test_fraction == 0.2
    assert args.embed_dim == 100 and args.learning_rate == 1e-3 and args.batch_size == 32


def test_train_outputs(run_dir):
    assert {p.name for p in run_dir.iterdir()} == {"model.bgcn", "vocab.tsv", "history.csv"}
    assert len((run_dir / "history.csv").read_text().splitlines()) == 4


def test_train_is_deterministic(tmp_path, fixture_csv, capsys):
    outs = []
    for name in ("a", "b"):
        main(["train", "--data", fixture_csv, "--epochs", "2", "--seed", "42", "--out",
              str(tmp_path / name), *SMALL_FLAGS])
        outs.append(capsys.readouterr().out.replace(str(tmp_path / name), "RUN"))
    assert outs[0] == outs[1]
    for f in ("history.csv", "model.bgcn", "vocab.tsv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_data_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["train", "--data", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_input_file_not_mutated(tmp_path, fixture_csv):
    data = tmp_path / "d.csv"
    shutil.copy(fixture_csv, data)
    before = data.read_bytes()
    main(["baseline", "--algo", "nb", "--data", str(data)])
    main(["prep", "--data", str(data), "--out", str(tmp_path / "prep")])
    assert data.read_bytes() == before


@pytest.mark.parametrize("algo", ["nb", "logreg", "svm", "knn"])
def test_baseline_report(algo, fixture_csv, capsys):
    assert main(["baseline", "--algo", algo, "--data", fixture_csv, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    for key in ("accuracy", "precision", "recall", "f1", "weighted_precision", "weighted_recall", "weighted_f1"):
        assert 0.0 <= report[key] <= 1.0
    assert report["weighted_recall"] == report["accuracy"]


def test_baseline_table(fixture_csv, capsys):
    assert main(["baseline", "--algo", "nb", "--data", fixture_csv]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[:3] == ["Algorithm", "Average", "Accuracy"]
    assert [line.split()[2] for line in lines[2:]] == ["binary", "weighted"]


def test_unknown_algo_is_usage_error(fixture_csv, capsys):
    assert main(["baseline", "--algo", "rf", "--data", fixture_csv]) == 64
    err = capsys.readouterr().err
    assert all(a in err for a in ("nb", "logreg", "svm", "knn"))


def test_predict_lines(run_dir, tmp_path, capsys):
    texts = ["you are awful", "lovely day at the beach", "", "you are awful"]
    batch = tmp_path / "in.txt"
    batch.write_text("\n".join(texts) + "\n")
    assert main(["predict", "--model", str(run_dir), "--input", str(batch)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and lines[0] == lines[3]
    for line in lines:
        prob, label = line.split("\t")
        assert len(prob.split(".")[1]) == 6 and label == str(int(float(prob) >= 0.5))
    assert main(["predict", "--model", str(run_dir / "model.bgcn"), "--input", str(batch), "--threshold", "0"]) == 0
    assert [l.split("\t")[1] for l in capsys.readouterr().out.splitlines()] == ["1"] * 4
    assert main(["predict", "--model", str(run_dir), "--text", "you are awful"]) == 0
    assert capsys.readouterr().out.splitlines() == lines[:1]


def test_eval_json_matches_table(run_dir, fixture_csv, capsys):
    assert main(["eval", "--model", str(run_dir), "--data", fixture_csv, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert main(["eval", "--model", str(run_dir), "--data", fixture_csv]) == 0
    binary, weighted = [l.split() for l in capsys.readouterr().out.splitlines()[2:]]
    assert binary[2:] == [f"{100 * report[k]:.2f}" for k in ("accuracy", "precision", "recall", "f1", "auc")]
    assert weighted[3:6] == [f"{100 * report[k]:.2f}" for k in ("weighted_precision", "weighted_recall", "weighted_f1")]


def test_eval_single_class(run_dir, tmp_path, fixture_csv, capsys):
    ones = [r for r in load_csv(fixture_csv) if r.label == 1]
    data = tmp_path / "ones.csv"
    data.write_text("id,label,tweet\n" + "".join(f'{r.id},1,"{r.text}"\n' for r in ones))
    assert main(["eval", "--model", str(run_dir), "--data", str(data), "--json"]) == 0
    captured = capsys.readouterr()
    assert "AUC" in captured.err
    assert json.loads(captured.out)["auc"] is None


def test_corrupt_model_exit_65(run_dir, tmp_path, capsys):
    bad = tmp_path / "bad"
    shutil.copytree(run_dir, bad)
    blob = bytearray((bad / "model.bgcn").read_bytes())
    blob[len(blob) // 2] ^= 0x01
    (bad / "model.bgcn").write_bytes(bytes(blob))
    assert main(["predict", "--model", str(bad), "--text", "hi"]) == 65
    assert "ChecksumError" in capsys.readouterr().err


def test_bad_label_exit_65(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("id,label,tweet\n1,0,a\n2,7,b\n")
    assert main(["baseline", "--algo", "nb", "--data", str(data)]) == 65
    assert "row 2" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path, fixture_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nepochs = 1\nembed-dim = 8\nseed = 7\n")
    args = parse_args(["train", "--data", fixture_csv, "--config", str(cfg), "--seed", "3"])
    assert (args.epochs, args.embed_dim, args.seed) == (1, 8, 3)
    cfg.write_text("bogus = 1\n")
    assert main(["train", "--data", fixture_csv, "--config", str(cfg)]) == 64


def test_export_curves(run_dir, tmp_path, capsys):
    assert main(["export-curves", "--run", str(run_dir)]) == 0
    assert capsys.readouterr().out == (run_dir / "history.csv").read_text()
    assert main(["export-curves", "--run", str(run_dir), "--out", str(tmp_path / "c.csv")]) == 0
    assert (tmp_path / "c.csv").read_bytes() == (run_dir / "history.csv").read_bytes()


def test_prep(tmp_path, fixture_csv, capsys):
    assert main(["prep", "--data", fixture_csv, "--out", str(tmp_path)]) == 0
    assert len(load_csv(tmp_path / "test.csv")) == 40 and len(load_csv(tmp_path / "train.csv")) == 160
    assert "majority fraction: 0.7000" in capsys.readouterr().out


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bigrucnn.cli", "baseline"], capture_output=True, text=True)
    assert proc.returncode == 64
