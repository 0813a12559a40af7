import csv
import json
from pathlib import Path

import numpy as np
import pytest

from burstlab.cli import main, read_matrix_csv, write_matrix_csv

SPEC = {
    "n_assignments": 4,
    "n_students": 8,
    "n_clusters": 2,
    "cluster_gammas": [[4.0, 0.025], [4.0, 0.1]],
    "base_rate_range": [0.5, 1.5],
    "decay": 1.0,
    "horizon": 30.0,
    "unseen_ratio": 0.25,
    "train_fraction": 0.7,
    "seed": 11,
}

FIT_CONFIG = {
    "rho1": 0.5,
    "rho2": 1.0,
    "rho3": 0.5,
    "n_clusters": 2,
    "decay": 1.0,
    "max_iter": 60,
    "tol": 1e-7,
}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    spec_path = out / "spec.json"
    spec_path.write_text(json.dumps(SPEC))
    assert main(["simulate", str(spec_path), str(out / "run")]) == 0
    return out / "run"


@pytest.fixture(scope="module")
def fit_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(FIT_CONFIG))
    code = main(
        ["fit", str(sim_dir / "train_events.csv"), str(cfg_path), str(out / "run")]
    )
    assert code == 0
    return out / "run"


class TestMatrixCsv:
    def test_round_trip_exact(self, tmp_path, rng):
        m = rng.normal(size=(3, 4)) * np.pi
        path = tmp_path / "m.csv"
        write_matrix_csv(path, m, ["r0", "r1", "r2"], ["c0", "c1", "c2", "c3"])
        got, rows, cols = read_matrix_csv(path)
        np.testing.assert_array_equal(got, m)
        assert rows == ["r0", "r1", "r2"]
        assert cols == ["c0", "c1", "c2", "c3"]


class TestSimulate:
    def test_outputs_exist(self, sim_dir):
        for name in (
            "events.csv",
            "train_events.csv",
            "ground_truth.json",
            "split_manifest.json",
            "run_manifest.json",
        ):
            assert (sim_dir / name).exists()

    def test_all_pairs_in_events(self, sim_dir):
        with (sim_dir / "events.csv").open() as handle:
            rows = list(csv.DictReader(handle))
        pairs = {(r["assignment_id"], r["student_id"]) for r in rows}
        assert len(pairs) == SPEC["n_assignments"] * SPEC["n_students"]

    def test_unseen_count(self, sim_dir):
        manifest = json.loads((sim_dir / "split_manifest.json").read_text())
        expected = 2 * int(np.ceil(SPEC["unseen_ratio"] * SPEC["n_students"]))
        assert len(manifest["unseen_pairs"]) == expected

    def test_deterministic(self, sim_dir, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(SPEC))
        assert main(["simulate", str(spec_path), str(tmp_path / "again")]) == 0
        assert (tmp_path / "again" / "events.csv").read_bytes() == (
            sim_dir / "events.csv"
        ).read_bytes()

    def test_invalid_spec_exit_2(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({**SPEC, "unseen_ratio": 2.0}))
        assert main(["simulate", str(spec_path), str(tmp_path / "x")]) == 2

    def test_unknown_key_exit_2(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({**SPEC, "bogus": 1}))
        assert main(["simulate", str(spec_path), str(tmp_path / "x")]) == 2


class TestFit:
    def test_outputs_exist(self, fit_dir):
        for name in ("A.csv", "U.csv", "Z.csv", "ids.json", "fit_report.json"):
            assert (fit_dir / name).exists()

    def test_report_contents(self, fit_dir):
        report = json.loads((fit_dir / "fit_report.json").read_text())
        assert report["iterations"] >= 1
        trace = report["objective_trace"]
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        assert report["config"]["decay"] == 1.0

    def test_rerun_identical(self, sim_dir, fit_dir, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(FIT_CONFIG))
        out = tmp_path / "rerun"
        assert (
            main(["fit", str(sim_dir / "train_events.csv"), str(cfg_path), str(out)])
            == 0
        )
        assert (out / "A.csv").read_bytes() == (fit_dir / "A.csv").read_bytes()

    def test_poisson_fixture_converges(self, tmp_path):
        from burstlab import seeded_stream, thinning_sample, write_events_csv
        from burstlab import EventDataset, EventSequence

        seq = thinning_sample(2.0, 0.0, 1.0, 200.0, seeded_stream(6, 0))
        ds = EventDataset(
            1, 1, {(0, 0): EventSequence(pair=(0, 0), times=seq.times, horizon=200.0)}
        )
        events = tmp_path / "events.csv"
        write_events_csv(events, ds, ["a0"], ["s0"])
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "decay": 1.0,
                    "horizon": 200.0,
                    "enable_clustering": False,
                    "enable_lowrank": False,
                    "max_iter": 2000,
                    "tol": 1e-9,
                }
            )
        )
        out = tmp_path / "fit"
        assert main(["fit", str(events), str(cfg_path), str(out)]) == 0
        report = json.loads((out / "fit_report.json").read_text())
        assert report["converged"] is True

    def test_missing_events_exit_2(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(FIT_CONFIG))
        assert (
            main(["fit", str(tmp_path / "nope.csv"), str(cfg_path), str(tmp_path / "o")])
            == 2
        )

    def test_unknown_config_key_exit_2(self, sim_dir, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({**FIT_CONFIG, "mystery": True}))
        assert (
            main(
                [
                    "fit",
                    str(sim_dir / "train_events.csv"),
                    str(cfg_path),
                    str(tmp_path / "o"),
                ]
            )
            == 2
        )


class TestPredict:
    def test_poisson_rows(self, tmp_path):
        # hand-made params: excitement 0 so prediction is base_rate * width
        params_dir = tmp_path / "params"
        params_dir.mkdir()
        write_matrix_csv(params_dir / "A.csv", np.zeros((1, 2)), ["a0"], ["s0", "s1"])
        write_matrix_csv(
            params_dir / "U.csv", np.array([[1.5, 2.0]]), ["a0"], ["s0", "s1"]
        )
        (params_dir / "fit_report.json").write_text(
            json.dumps({"config": {"decay": 1.0, "n_clusters": 1}})
        )
        events = tmp_path / "events.csv"
        events.write_text(
            "assignment_id,student_id,timestamp_hours\na0,s0,1.0\na0,s0,2.0\n"
        )
        windows = tmp_path / "windows.csv"
        windows.write_text(
            "assignment_id,student_id,t0_hours,t1_hours\n"
            "a0,s0,2.0,4.0\n"  # history pair
            "a0,s1,0.0,10.0\n"  # transfer pair, no events
            "a0,s0,1.0,4.0\n"  # starts before train horizon -> row error
            "zz,s0,0.0,1.0\n"  # unknown pair
        )
        out = tmp_path / "pred.csv"
        assert (
            main(
                ["predict", str(params_dir), str(events), str(windows), str(out)]
            )
            == 0
        )
        with out.open() as handle:
            rows = list(csv.DictReader(handle))
        assert float(rows[0]["predicted_count"]) == pytest.approx(3.0)  # 1.5 * 2
        assert rows[0]["status"] == "ok"
        assert float(rows[1]["predicted_count"]) == pytest.approx(20.0)  # 2 * 10
        assert rows[2]["status"] != "ok" and rows[2]["predicted_count"] == ""
        assert rows[3]["status"] == "unknown_pair"

    def test_empty_windows_exit_2(self, tmp_path, sim_dir, fit_dir):
        windows = tmp_path / "windows.csv"
        windows.write_text("assignment_id,student_id,t0_hours,t1_hours\n")
        assert (
            main(
                [
                    "predict",
                    str(fit_dir),
                    str(sim_dir / "train_events.csv"),
                    str(windows),
                    str(tmp_path / "p.csv"),
                ]
            )
            == 2
        )


class TestEvaluate:
    def test_full_report(self, sim_dir, fit_dir, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "evaluate",
                str(fit_dir),
                str(sim_dir / "ground_truth.json"),
                str(sim_dir / "split_manifest.json"),
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["ari"] is not None and -1.0 <= report["ari"] <= 1.0
        assert report["count_mae_seen"] >= 0.0
        assert report["count_mae_unseen"] >= 0.0
        assert report["param_error_excitement"] >= 0.0

    def test_perfect_params_score_perfectly(self, sim_dir, tmp_path):
        # params dir built from the ground truth itself
        truth = json.loads((sim_dir / "ground_truth.json").read_text())
        params_dir = tmp_path / "oracle"
        params_dir.mkdir()
        aids, sids = truth["assignment_ids"], truth["student_ids"]
        write_matrix_csv(params_dir / "A.csv", np.asarray(truth["excitement"]), aids, sids)
        write_matrix_csv(params_dir / "U.csv", np.asarray(truth["base_rate"]), aids, sids)
        labels = np.asarray(truth["cluster_labels"])
        w = np.zeros((len(sids), 2))
        for c in (0, 1):
            members = labels == c
            w[members, c] = 1.0 / np.sqrt(members.sum())
        write_matrix_csv(params_dir / "Z.csv", w @ w.T, sids, sids)
        (params_dir / "fit_report.json").write_text(
            json.dumps({"config": {"decay": truth["decay"], "n_clusters": 2}})
        )
        out = tmp_path / "report.json"
        code = main(
            [
                "evaluate",
                str(params_dir),
                str(sim_dir / "ground_truth.json"),
                str(sim_dir / "split_manifest.json"),
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["ari"] == pytest.approx(1.0)
        assert report["param_error_excitement"] == pytest.approx(0.0, abs=1e-12)
        assert report["param_error_base_rate"] == pytest.approx(0.0, abs=1e-12)

    def test_missing_truth_gives_nulls(self, sim_dir, fit_dir, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "evaluate",
                str(fit_dir),
                str(tmp_path / "no_truth.json"),
                str(sim_dir / "split_manifest.json"),
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["ari"] is None
        assert report["param_error_excitement"] is None
        assert report["count_mae_seen"] is not None

    def test_disjoint_ids_exit_2(self, sim_dir, fit_dir, tmp_path):
        truth = json.loads((sim_dir / "ground_truth.json").read_text())
        truth["assignment_ids"] = [f"x{i}" for i in range(len(truth["assignment_ids"]))]
        bad = tmp_path / "truth.json"
        bad.write_text(json.dumps(truth))
        code = main(
            [
                "evaluate",
                str(fit_dir),
                str(bad),
                str(sim_dir / "split_manifest.json"),
                str(tmp_path / "r.json"),
            ]
        )
        assert code == 2


class TestDiagnose:
    def test_writes_diagnostics(self, sim_dir, tmp_path):
        out = tmp_path / "diag.csv"
        assert main(["diagnose", str(sim_dir / "events.csv"), str(out)]) == 0
        with out.open() as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == SPEC["n_assignments"] * SPEC["n_students"]
        ok = [r for r in rows if r["flag"] == "ok"]
        assert ok, "expected at least one scored pair"
        assert all(r["poisson_cv"] != "" for r in ok)

    def test_skips_sparse_pairs_with_flag(self, tmp_path):
        events = tmp_path / "events.csv"
        events.write_text(
            "assignment_id,student_id,timestamp_hours\na,s,1.0\na,s,2.0\n"
        )
        out = tmp_path / "diag.csv"
        assert main(["diagnose", str(events), str(out)]) == 0
        with out.open() as handle:
            rows = list(csv.DictReader(handle))
        assert rows[0]["flag"] == "too_few_events"

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["diagnose", str(tmp_path / "none.csv"), str(tmp_path / "d.csv")]) == 2

    def test_empty_file_exit_2(self, tmp_path):
        events = tmp_path / "events.csv"
        events.write_text("assignment_id,student_id,timestamp_hours\n")
        assert main(["diagnose", str(events), str(tmp_path / "d.csv")]) == 2
