import csv
import json

import numpy as np
import pytest

from holex.cli import main, parse_grid, parse_int_list, UsageError
from holex.models import load_checkpoint


def strip_timestamps(obj):
    if isinstance(obj, dict):
        return {k: strip_timestamps(v) for k, v in obj.items() if k != "timestamps"}
    if isinstance(obj, list):
        return [strip_timestamps(v) for v in obj]
    return obj


@pytest.fixture
def toy_files(tmp_path):
    train = ["e0\tr0\te1", "e1\tr0\te2", "e2\tr1\te3", "e3\tr1\te4", "e4\tr0\te5",
             "e5\tr1\te0", "e1\tr1\te3", "e2\tr0\te4", "e0\tr1\te2", "e3\tr0\te5"]
    paths = {}
    for name, lines in (("train", train), ("valid", ["e0\tr0\te2", "e4\tr1\te1"]),
                        ("test", ["e1\tr0\te4", "e5\tr0\te2"])):
        p = tmp_path / f"{name}.txt"
        p.write_text("\n".join(lines) + "\n")
        paths[name] = str(p)
    return paths


def data_flags(paths):
    return ["--train", paths["train"], "--valid", paths["valid"], "--test", paths["test"]]


def read_json(path):
    return json.loads(open(path).read())


class TestParsers:
    def test_int_list(self):
        assert parse_int_list("1..4") == [1, 2, 3, 4]
        assert parse_int_list("1,3,8") == [1, 3, 8]
        assert parse_int_list("1..2,9") == [1, 2, 9]
        with pytest.raises(UsageError):
            parse_int_list("a..b")

    def test_grid(self):
        assert parse_grid('[{"rank": 10, "lam": 0.1}]') == [{"rank": 10, "lam": 0.1}]
        assert parse_grid("k=10,20;lambda=0.1,0") == [
            {"rank": 10, "lam": 0.1}, {"rank": 10, "lam": 0.0}, {"rank": 20, "lam": 0.1}, {"rank": 20, "lam": 0.0}]
        with pytest.raises(UsageError):
            parse_grid('[{"epochs": 3}]')


class TestTrain:
    ARGS = ["--model", "complex", "--loss", "logistic", "--k", "10", "--seed", "7",
            "--max-epochs", "20", "--eval-every", "5", "--batch", "4"]

    def test_smoke(self, toy_files, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["train", *self.ARGS, *data_flags(toy_files), "--out", str(out)]) == 0
        rep = read_json(out / "report.json")
        assert 0 < rep["test"]["mrr_filtered"] <= 1
        assert np.isfinite(rep["training"]["final_loss"])
        assert rep["manifest"]["config"]["training"]["rank"] == 10
        assert rep["manifest"]["seed"] == 7
        lines = (out / "train_log.jsonl").read_text().splitlines()
        assert len(lines) == 20 and all("loss" in json.loads(line) for line in lines)
        m = load_checkpoint(out / "checkpoint.hxc")
        assert m.kind == "complex" and m.rank == 10

    def test_deterministic(self, toy_files, tmp_path):
        reports = []
        for name in ("a", "b"):
            out = tmp_path / name
            main(["train", *self.ARGS, *data_flags(toy_files), "--out", str(out)])
            rep = read_json(out / "report.json")
            rep["manifest"]["outputs"] = None
            rep["manifest"]["argv"] = None
            reports.append(strip_timestamps(rep))
            reports[-1]["ckpt"] = (out / "checkpoint.hxc").read_bytes().hex()
        assert reports[0] == reports[1]

    def test_missing_file(self, toy_files, tmp_path, capsys):
        flags = data_flags(toy_files)
        flags[1] = str(tmp_path / "does_not_exist.txt")
        assert main(["train", *self.ARGS, *flags, "--out", str(tmp_path / "x")]) == 1
        assert "does_not_exist.txt" in capsys.readouterr().err

    def test_usage_errors(self, toy_files, tmp_path):
        assert main(["train", "--model", "transe"]) == 2
        assert main(["train", "--k", "ten"]) == 2
        assert main(["train", *self.ARGS, "--out", str(tmp_path / "x")]) == 2  # no data paths
        assert main(["train", *self.ARGS, "--lr", "-1", *data_flags(toy_files)]) == 2
        assert main([]) == 2


class TestCheckEquivalence:
    def test_pass(self, tmp_path, capsys):
        assert main(["check-equivalence", "--k", "1..16", "--trials", "10", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("PASS")
        res = read_json(tmp_path / "equivalence.json")["result"]
        assert res["max_conversion_discrepancy"] <= 1e-9 and res["passed"]

    def test_k1(self, capsys):
        assert main(["check-equivalence", "--k", "1", "--trials", "20"]) == 0

    def test_negative_control(self, capsys):
        assert main(["check-equivalence", "--k", "1..4", "--trials", "2", "--corrupt-conversion"]) == 3
        assert capsys.readouterr().out.startswith("FAIL")


class TestSynth:
    def test_small_sweep(self, tmp_path, capsys):
        out = tmp_path / "syn"
        args = ["synth", "--ranks", "1,2", "--n", "8", "--lambdas", "0.0", "--max-epochs", "20",
                "--eval-every", "10", "--seed", "1", "--out", str(out)]
        assert main(args) == 0
        for panel in ("symmetric", "antisymmetric", "overall"):
            rows = list(csv.DictReader(open(out / f"ap_{panel}.csv")))
            assert len(rows) == 2 * 2
            assert {r["model"] for r in rows} == {"complex", "hole"}
            assert all(0 <= float(r["ap"]) <= 1 for r in rows)
        rep = read_json(out / "synth_report.json")
        assert "rank_ratio" in rep["verdicts"]
        first = strip_timestamps(rep)
        out2 = tmp_path / "syn2"
        args[-1] = str(out2)
        main(args)
        second = strip_timestamps(read_json(out2 / "synth_report.json"))
        for r in (first, second):
            r["manifest"]["outputs"] = r["manifest"]["argv"] = None
        assert first == second


class TestGrid:
    def test_override_single_point(self, toy_files, tmp_path):
        out = tmp_path / "g"
        rc = main(["grid", "--loss", "logistic", "--max-epochs", "10", "--eval-every", "5",
                   "--grid-override", '[{"rank": 4, "lam": 0.01}]', *data_flags(toy_files), "--out", str(out)])
        assert rc == 0
        rep = read_json(out / "grid_report.json")
        assert len(rep["rows"]) == 1
        assert rep["winner"]["config"]["rank"] == 4

    def test_winner_is_max(self, toy_files, tmp_path):
        out = tmp_path / "g"
        main(["grid", "--loss", "margin", "--max-epochs", "10", "--eval-every", "5",
              "--grid-override", "rank=2,4;gamma=0.1,0.5", *data_flags(toy_files), "--out", str(out)])
        rep = read_json(out / "grid_report.json")
        assert len(rep["rows"]) == 4
        best = max(r["valid_mrr_filtered"] for r in rep["rows"])
        assert rep["winner"]["valid_metric"] == best
        assert len(list(csv.DictReader(open(out / "grid.csv")))) == 4

    def test_full_logistic_grid_size(self):
        from holex.training import default_grid
        assert len(default_grid("logistic")) == 42


class TestBench:
    def test_shape(self, tmp_path):
        out = tmp_path / "b"
        assert main(["bench", "--min-exp", "8", "--max-exp", "10", "--repeats", "2", "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out / "bench_scoring.csv")))
        assert len(rows) == 3 * 2
        assert {(int(r["k"]), r["method"]) for r in rows} == {
            (k, m) for k in (256, 512, 1024) for m in ("hole_fourier", "complex")}

    def test_kernels(self, tmp_path):
        out = tmp_path / "b"
        assert main(["bench", "--min-exp", "8", "--max-exp", "8", "--repeats", "1", "--kernels",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out / "bench_kernels.csv")))
        assert {r["backend"] for r in rows} >= {"python"}


class TestMakeData:
    def test_synthetic(self, tmp_path, capsys):
        assert main(["make-data", "synthetic", "--out", str(tmp_path), "--n", "6"]) == 0
        lines = (tmp_path / "train.txt").read_text().splitlines()
        assert all(len(line.split("\t")) == 4 for line in lines)

    def test_latent_then_train(self, tmp_path, capsys):
        d = tmp_path / "lat"
        assert main(["make-data", "latent", "--out", str(d), "--n-entities", "30", "--n-relations", "2",
                     "--n-triples", "200"]) == 0
        rc = main(["train", "--k", "3", "--max-epochs", "5", "--train", str(d / "train.txt"),
                   "--valid", str(d / "valid.txt"), "--test", str(d / "test.txt"), "--out", str(tmp_path / "o")])
        assert rc == 0
