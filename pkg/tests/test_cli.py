import json

import numpy as np
import pytest

from moment_bench.cli import run
from moment_bench.annotations import read_canonical

from helpers import bimodal_sampler, random_table
from moment_bench.annotations import write_canonical


@pytest.fixture()
def charades_inputs(tmp_path):
    rng = np.random.default_rng(0)
    sta_lines = []
    dur_lines = []
    for v in range(40):
        video = f"vid{v:03d}"
        duration = float(rng.uniform(15.0, 45.0))
        dur_lines.append(f"{video}\t{duration}")
        for _ in range(int(rng.integers(1, 4))):
            s, e = sorted(rng.uniform(0.0, duration, size=2))
            if s == e:
                continue
            sta_lines.append(f"{video} {s:.2f} {e:.2f}##a person does something")
    sta = tmp_path / "anno.txt"
    durs = tmp_path / "durations.tsv"
    sta.write_text("\n".join(sta_lines) + "\n")
    durs.write_text("\n".join(dur_lines) + "\n")
    return sta, durs


@pytest.fixture()
def canonical_file(tmp_path):
    table = random_table(
        60, pairs_per_video=(2, 4), seed=1, sampler=bimodal_sampler()
    )
    path = tmp_path / "pairs.canon"
    path.write_text(write_canonical(table))
    return path


class TestConvert:
    def test_charades_round_trip(self, tmp_path, charades_inputs):
        sta, durs = charades_inputs
        out = tmp_path / "pairs.canon"
        code = run([
            "convert", "--mode", "charades", "--in", str(sta),
            "--durations", str(durs), "--out", str(out),
        ])
        assert code == 0
        table = read_canonical(out.read_text())
        assert len(table) > 0

    def test_charades_requires_durations(self, tmp_path, charades_inputs):
        sta, _ = charades_inputs
        code = run([
            "convert", "--mode", "charades", "--in", str(sta),
            "--out", str(tmp_path / "x.canon"),
        ])
        assert code == 1

    def test_activitynet(self, tmp_path):
        doc = {
            "v1": {"duration": 30.0, "timestamps": [[0, 10], [12, 4]],
                    "sentences": ["first thing", "second thing"]},
            "v2": {"duration": 20.0, "timestamps": [[5, 5]],
                    "sentences": ["degenerate"]},
        }
        src = tmp_path / "anet.json"
        src.write_text(json.dumps(doc))
        out = tmp_path / "pairs.canon"
        assert run(["convert", "--mode", "activitynet", "--in", str(src),
                    "--out", str(out)]) == 0
        table = read_canonical(out.read_text())
        assert len(table) == 2  # degenerate pair dropped

    def test_malformed_line_exits_2(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("vid1 1.0 2.0 no separator\n")
        durs = tmp_path / "durs.tsv"
        durs.write_text("vid1\t10\n")
        code = run(["convert", "--mode", "charades", "--in", str(bad),
                    "--durations", str(durs), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_missing_file_exits_2(self, tmp_path):
        code = run(["convert", "--mode", "generic",
                    "--in", str(tmp_path / "nope.canon"),
                    "--out", str(tmp_path / "o")])
        assert code == 2

    def test_missing_flag_exits_1(self, capsys):
        assert run(["convert", "--mode", "charades"]) == 1
        assert "usage error" in capsys.readouterr().err


class TestResplitCommand:
    def test_resplit_writes_split_file(self, tmp_path, canonical_file):
        out = tmp_path / "splits.json"
        code = run(["resplit", "--in", str(canonical_file), "--mode", "generic",
                    "--seed", "42", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "split-assignment"
        assert set(doc["splits"]) == {"train", "val", "test-iid", "test-ood"}
        assert doc["config"]["seed"] == 42

    def test_activitynet_mode_sets_threshold(self, tmp_path, canonical_file):
        out = tmp_path / "splits.json"
        run(["resplit", "--in", str(canonical_file), "--mode", "activitynet",
             "--seed", "1", "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["config"]["long_moment_threshold"] == 0.5

    def test_rerun_byte_identical(self, tmp_path, canonical_file):
        out1 = tmp_path / "s1.json"
        out2 = tmp_path / "s2.json"
        args = ["resplit", "--in", str(canonical_file), "--mode", "generic",
                "--seed", "7"]
        assert run(args + ["--out", str(out1)]) == 0
        assert run(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_inputs_unchanged(self, tmp_path, canonical_file):
        before = canonical_file.read_bytes()
        run(["resplit", "--in", str(canonical_file), "--mode", "generic",
             "--seed", "7", "--out", str(tmp_path / "s.json")])
        assert canonical_file.read_bytes() == before


class TestStatsCommand:
    def test_outputs_and_figures(self, tmp_path, canonical_file):
        out_dir = tmp_path / "stats"
        code = run(["stats", "--in", str(canonical_file),
                    "--out-dir", str(out_dir), "--resolution", "30",
                    "--bins", "10"])
        assert code == 0
        for name in ("duration_histogram.json", "duration_shares.json",
                     "density_grid.json", "verb_table.json"):
            assert (out_dir / name).exists()
        for name in ("duration_histogram.png", "density_grid.png",
                     "verb_table.png"):
            assert (out_dir / name).exists()
        grid = json.loads((out_dir / "density_grid.json").read_text())
        assert grid["resolution"] == 30

    def test_no_figures_flag(self, tmp_path, canonical_file):
        out_dir = tmp_path / "stats"
        run(["stats", "--in", str(canonical_file), "--out-dir", str(out_dir),
             "--resolution", "20", "--no-figures"])
        assert not (out_dir / "density_grid.png").exists()
        assert (out_dir / "density_grid.json").exists()

    def test_json_outputs_deterministic(self, tmp_path, canonical_file):
        d1 = tmp_path / "s1"
        d2 = tmp_path / "s2"
        for d in (d1, d2):
            run(["stats", "--in", str(canonical_file), "--out-dir", str(d),
                 "--resolution", "20", "--no-figures"])
        for name in ("duration_histogram.json", "density_grid.json",
                     "verb_table.json", "duration_shares.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_split_subset(self, tmp_path, canonical_file):
        splits = tmp_path / "splits.json"
        run(["resplit", "--in", str(canonical_file), "--mode", "generic",
             "--seed", "3", "--out", str(splits)])
        out_dir = tmp_path / "stats-ood"
        code = run(["stats", "--in", str(canonical_file),
                    "--out-dir", str(out_dir), "--split", str(splits),
                    "--subset", "test-ood", "--resolution", "20",
                    "--no-figures"])
        assert code == 0
        doc = json.loads((out_dir / "duration_histogram.json").read_text())
        assert doc["split"] == "test-ood"


class TestBaselineAndScore:
    def _resplit(self, tmp_path, canonical_file):
        splits = tmp_path / "splits.json"
        run(["resplit", "--in", str(canonical_file), "--mode", "generic",
             "--seed", "5", "--out", str(splits)])
        return splits

    def test_predict_all_then_score(self, tmp_path, canonical_file, capsys):
        splits = self._resplit(tmp_path, canonical_file)
        preds = tmp_path / "preds.jsonl"
        assert run(["baseline", "predict-all", "--pairs", str(canonical_file),
                    "--split", str(splits), "--subset", "test-ood",
                    "--out", str(preds)]) == 0
        report_path = tmp_path / "report.json"
        assert run(["score", "--gt", str(canonical_file), "--pred", str(preds),
                    "--split", str(splits), "--n", "1,5",
                    "--m", "0.1,0.3,0.5,0.7", "--out", str(report_path)]) == 0
        doc = json.loads(report_path.read_text())
        assert "test-ood" in doc["splits"]
        metrics_doc = doc["splits"]["test-ood"]["metrics"]
        assert "R@1,IoU=0.5" in metrics_doc
        assert "dR@5,IoU=0.7" in metrics_doc
        table_out = capsys.readouterr().out
        assert "test-ood" in table_out

    def test_bias_baseline_deterministic(self, tmp_path, canonical_file):
        splits = self._resplit(tmp_path, canonical_file)
        p1 = tmp_path / "p1.jsonl"
        p2 = tmp_path / "p2.jsonl"
        args = ["baseline", "bias", "--pairs", str(canonical_file),
                "--split", str(splits), "--subset", "test-ood",
                "--n", "3", "--seed", "11"]
        assert run(args + ["--out", str(p1)]) == 0
        assert run(args + ["--out", str(p2)]) == 0
        assert p1.read_bytes() == p2.read_bytes()

    def test_score_with_figures(self, tmp_path, canonical_file):
        preds = tmp_path / "preds.jsonl"
        run(["baseline", "predict-all", "--pairs", str(canonical_file),
             "--out", str(preds)])
        fig_dir = tmp_path / "figs"
        assert run(["score", "--gt", str(canonical_file), "--pred", str(preds),
                    "--n", "1", "--m", "0.3,0.5",
                    "--out", str(tmp_path / "r.json"),
                    "--figures-dir", str(fig_dir)]) == 0
        assert (fig_dir / "scores.png").exists()

    def test_unknown_subset_exits_2(self, tmp_path, canonical_file):
        splits = self._resplit(tmp_path, canonical_file)
        assert run(["baseline", "predict-all", "--pairs", str(canonical_file),
                    "--split", str(splits), "--subset", "nope",
                    "--out", str(tmp_path / "p.jsonl")]) == 2

    def test_bad_n_exits_1(self, tmp_path, canonical_file):
        preds = tmp_path / "preds.jsonl"
        run(["baseline", "predict-all", "--pairs", str(canonical_file),
             "--out", str(preds)])
        assert run(["score", "--gt", str(canonical_file), "--pred", str(preds),
                    "--n", "0", "--m", "0.5",
                    "--out", str(tmp_path / "r.json")]) == 1

    def test_score_report_deterministic(self, tmp_path, canonical_file):
        preds = tmp_path / "preds.jsonl"
        run(["baseline", "predict-all", "--pairs", str(canonical_file),
             "--out", str(preds)])
        r1 = tmp_path / "r1.json"
        r2 = tmp_path / "r2.json"
        args = ["score", "--gt", str(canonical_file), "--pred", str(preds),
                "--n", "1", "--m", "0.5"]
        assert run(args + ["--out", str(r1)]) == 0
        assert run(args + ["--out", str(r2)]) == 0
        assert r1.read_bytes() == r2.read_bytes()


class TestGlobalFlags:
    def test_threads_flag_accepted(self, tmp_path, canonical_file):
        out_dir = tmp_path / "stats"
        assert run(["--threads", "4", "stats", "--in", str(canonical_file),
                    "--out-dir", str(out_dir), "--resolution", "20",
                    "--no-figures"]) == 0

    def test_threads_env(self, tmp_path, canonical_file, monkeypatch):
        monkeypatch.setenv("MB_THREADS", "2")
        assert run(["resplit", "--in", str(canonical_file), "--mode",
                    "generic", "--seed", "1",
                    "--out", str(tmp_path / "s.json")]) == 0

    def test_threads_do_not_change_output(self, tmp_path, canonical_file):
        out1 = tmp_path / "s1.json"
        out2 = tmp_path / "s2.json"
        assert run(["--threads", "1", "resplit", "--in", str(canonical_file),
                    "--mode", "generic", "--seed", "9",
                    "--out", str(out1)]) == 0
        assert run(["--threads", "8", "resplit", "--in", str(canonical_file),
                    "--mode", "generic", "--seed", "9",
                    "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_no_stray_temp_files(self, tmp_path, canonical_file):
        out = tmp_path / "splits.json"
        run(["resplit", "--in", str(canonical_file), "--mode", "generic",
             "--seed", "2", "--out", str(out)])
        leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []
