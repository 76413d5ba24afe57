import json

import numpy as np
import pytest

from mksvdd.cli import main
from mksvdd.data import load_csv
from mksvdd.kernels import load_manifest


def write_outlier_csv(path, seed=0, n_in=40, n_out=6):
    rng = np.random.default_rng(seed)
    inliers = rng.standard_normal((n_in, 2)) * 0.25
    outliers = rng.uniform(-3.0, 3.0, size=(n_out, 2))
    lines = ["x1,x2,label"]
    for row in inliers:
        lines.append(f"{float(row[0])!r},{float(row[1])!r},1")
    for row in outliers:
        lines.append(f"{float(row[0])!r},{float(row[1])!r},-1")
    path.write_text("\n".join(lines) + "\n")
    return path


def fit_config(tmp_path, **overrides):
    config = {
        "dataset": {"kind": "gen2d", "seed": 1, "n_areas": 2, "n_points": 40},
        "kernels": {"rbf": [0.5, 5.0]},
        "method": "mk-svdd",
        "C": 0.15,
        "lambda": 0.0,
        "mkl": {"gap_tol": 1e-4},
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def read_rows(path):
    rows = []
    header = None
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            continue
        rows.append(dict(zip(header, cells)))
    return rows


class TestGen2d:
    def test_round_trip(self, tmp_path):
        out = tmp_path / "points.csv"
        assert main(["gen2d", "--seed", "3", "--n-areas", "2",
                     "--n-points", "25", "--out", str(out)]) == 0
        m = load_csv(out, label_column="label")
        assert m.n_examples == 25
        assert (m.labels == 1).all()

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            main(["gen2d", "--seed", "7", "--n-points", "30", "--out", str(out)])
        assert a.read_bytes() == b.read_bytes()


class TestFit:
    def test_produces_loadable_model(self, tmp_path):
        cfg = fit_config(tmp_path)
        out = tmp_path / "run"
        assert main(["fit", "--config", str(cfg), "--out-dir", str(out)]) == 0
        payload = json.loads((out / "model.json").read_text())
        assert payload["method"] == "mk-svdd"
        assert len(payload["model"]["weights"]) == 2
        assert (out / "trace.csv").exists()

    def test_refit_byte_identical(self, tmp_path):
        cfg = fit_config(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["fit", "--config", str(cfg), "--out-dir", str(out1)])
        main(["fit", "--config", str(cfg), "--out-dir", str(out2)])
        assert (out1 / "model.json").read_bytes() == (out2 / "model.json").read_bytes()
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()

    def test_slim_lambda_zero_differs_only_in_method_tag(self, tmp_path):
        out_mk = tmp_path / "mk"
        out_slim = tmp_path / "slim"
        main(["fit", "--config", str(fit_config(tmp_path, method="mk-svdd")),
              "--out-dir", str(out_mk)])
        main(["fit", "--config", str(fit_config(tmp_path, method="slim-mk-svdd")),
              "--out-dir", str(out_slim)])
        a = json.loads((out_mk / "model.json").read_text())
        b = json.loads((out_slim / "model.json").read_text())
        assert a.pop("method") == "mk-svdd"
        assert b.pop("method") == "slim-mk-svdd"
        assert a == b

    def test_single_kernel_method_no_trace(self, tmp_path):
        cfg = fit_config(tmp_path, method="svdd", kernels={"rbf": [1.0]})
        out = tmp_path / "sk"
        assert main(["fit", "--config", str(cfg), "--out-dir", str(out)]) == 0
        assert not (out / "trace.csv").exists()

    def test_bad_config_exit_code(self, tmp_path):
        assert main(["fit", "--config", str(tmp_path / "missing.json"),
                     "--out-dir", str(tmp_path)]) == 2
        cfg = fit_config(tmp_path, method="banana")
        assert main(["fit", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


class TestEval:
    def fit_and_eval(self, tmp_path, method="svdd", C=0.1):
        data = write_outlier_csv(tmp_path / "data.csv")
        cfg = fit_config(
            tmp_path,
            method=method,
            C=C,
            kernels={"rbf": [0.5]},
            dataset={"kind": "csv", "path": str(data), "label_column": "label"},
        )
        fit_dir = tmp_path / "fit"
        assert main(["fit", "--config", str(cfg), "--out-dir", str(fit_dir)]) == 0
        eval_dir = tmp_path / "eval"
        assert main([
            "eval", "--model", str(fit_dir / "model.json"),
            "--data", str(data), "--label-column", "label",
            "--out-dir", str(eval_dir),
        ]) == 0
        return fit_dir, eval_dir, data

    def test_train_on_self_flags_bounded_svs(self, tmp_path):
        fit_dir, eval_dir, data = self.fit_and_eval(tmp_path)
        payload = json.loads((fit_dir / "model.json").read_text())
        C = payload["model"]["C"]
        alpha = dict(
            zip(payload["model"]["alpha"]["indices"], payload["model"]["alpha"]["values"])
        )
        bounded = {i for i, a in alpha.items() if a >= C - 1e-7 * max(1.0, C)}
        rows = read_rows(eval_dir / "scores.csv")
        flagged = {int(r["id"]) for r in rows if float(r["outlier_score"]) > 1e-5}
        assert flagged == bounded

    def test_pr_rows_equal_distinct_scores_plus_one(self, tmp_path):
        _, eval_dir, _ = self.fit_and_eval(tmp_path)
        scores = [float(r["outlier_score"]) for r in read_rows(eval_dir / "scores.csv")]
        report_rows = read_rows(eval_dir / "report.csv")
        assert len(report_rows) == len(set(scores)) + 1

    def test_single_class_labels_skip_report(self, tmp_path):
        # scoring the training class itself: AUC is undefined, scores
        # must still be written and the command must succeed
        out = tmp_path / "target.csv"
        main(["gen2d", "--seed", "9", "--n-points", "30", "--out", str(out)])
        cfg = fit_config(
            tmp_path,
            method="svdd",
            kernels={"rbf": [0.5]},
            dataset={"kind": "csv", "path": str(out), "label_column": "label"},
        )
        fit_dir = tmp_path / "fit"
        assert main(["fit", "--config", str(cfg), "--out-dir", str(fit_dir)]) == 0
        eval_dir = tmp_path / "ev"
        assert main(["eval", "--model", str(fit_dir / "model.json"),
                     "--data", str(out), "--label-column", "label",
                     "--out-dir", str(eval_dir)]) == 0
        assert (eval_dir / "scores.csv").exists()
        assert not (eval_dir / "report.csv").exists()

    def test_matches_library_evaluation(self, tmp_path):
        _, eval_dir, data = self.fit_and_eval(tmp_path)
        from mksvdd.evaluation import auc as auc_metric

        rows = read_rows(eval_dir / "scores.csv")
        scores = np.array([float(r["outlier_score"]) for r in rows])
        labels = np.array([int(r["label"]) for r in rows])
        reported = None
        for line in (eval_dir / "report.csv").read_text().splitlines():
            if line.startswith("# auc "):
                reported = float(line.split()[-1])
        assert reported == pytest.approx(auc_metric(scores, labels), abs=1e-12)


class TestExperiment:
    def experiment_config(self, tmp_path, data, **overrides):
        config = {
            "dataset": {"kind": "csv", "path": str(data), "label_column": "label"},
            "kernels": {"rbf": [0.5, 5.0]},
            "methods": ["mk-svdd"],
            "grids": {"C": [0.15]},
            "policy": "auc",
            "repetitions": 1,
            "mkl": {"gap_tol": 1e-4},
        }
        config.update(overrides)
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(config))
        return path

    def test_single_repetition_matches_fit_eval(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv")
        cfg = self.experiment_config(tmp_path, data)
        out = tmp_path / "exp"
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 0
        rows = read_rows(out / "results.csv")
        rep_rows = [r for r in rows if r["row"] == "rep"]
        assert len(rep_rows) == 1

        fit_cfg = fit_config(
            tmp_path,
            method="mk-svdd",
            C=0.15,
            kernels={"rbf": [0.5, 5.0]},
            dataset={"kind": "csv", "path": str(data), "label_column": "label"},
        )
        fit_dir, eval_dir = tmp_path / "f", tmp_path / "e"
        main(["fit", "--config", str(fit_cfg), "--out-dir", str(fit_dir)])
        main(["eval", "--model", str(fit_dir / "model.json"), "--data", str(data),
              "--label-column", "label", "--out-dir", str(eval_dir)])
        reported = None
        for line in (eval_dir / "report.csv").read_text().splitlines():
            if line.startswith("# auc "):
                reported = float(line.split()[-1])
        assert float(rep_rows[0]["auc"]) == pytest.approx(reported, abs=1e-12)

    def test_supervised_sweep_one_row_per_size(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv", n_in=50, n_out=8)
        cfg = self.experiment_config(
            tmp_path,
            data,
            methods=["svdd"],
            kernels={"rbf": [0.5]},
            split={"mode": "supervised", "train_count": 10},
            # small training sets need C >= 1/ell, so sweep a grid
            grids={"C": [0.15, 0.25, 0.5]},
            train_sizes=[5, 10, 20],
            repetitions=2,
        )
        out = tmp_path / "sweep"
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 0
        rows = read_rows(out / "results.csv")
        for size in ("5", "10", "20"):
            size_rows = [r for r in rows if r["row"] == "rep" and r["train_size"] == size]
            assert len(size_rows) == 2
            means = [r for r in rows if r["row"] == "mean" and r["train_size"] == size]
            assert len(means) == 1

    def test_mean_std_match_recompute(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv", n_in=50, n_out=8)
        cfg = self.experiment_config(
            tmp_path,
            data,
            methods=["svdd"],
            kernels={"rbf": [0.5]},
            split={"mode": "supervised", "train_count": 12},
            repetitions=3,
        )
        out = tmp_path / "agg"
        main(["experiment", "--config", str(cfg), "--out-dir", str(out)])
        rows = read_rows(out / "results.csv")
        values = [float(r["auc"]) for r in rows if r["row"] == "rep"]
        mean = [float(r["auc"]) for r in rows if r["row"] == "mean"][0]
        std = [float(r["auc"]) for r in rows if r["row"] == "std"][0]
        assert mean == pytest.approx(np.mean(values), abs=1e-12)
        assert std == pytest.approx(np.std(values), abs=1e-12)

    def test_seeds_logged_and_deterministic(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv")
        cfg = self.experiment_config(tmp_path, data, repetitions=2, seeds=[11, 29])
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        main(["experiment", "--config", str(cfg), "--out-dir", str(out1)])
        main(["experiment", "--config", str(cfg), "--out-dir", str(out2)])
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        rows = read_rows(out1 / "results.csv")
        assert [r["seed"] for r in rows if r["row"] == "rep"] == ["11", "29"]

    def test_positive_fraction_policy_reports_test_auc(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv", n_in=50, n_out=8)
        cfg = self.experiment_config(
            tmp_path,
            data,
            methods=["svdd"],
            kernels={"rbf": [0.5]},
            policy="positive-fraction",
            split={"mode": "supervised", "train_count": 15, "validation_count": 8},
            grids={"C": [0.2, 0.4]},
        )
        out = tmp_path / "pf"
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 0
        rows = read_rows(out / "results.csv")
        reps = [r for r in rows if r["row"] == "rep"]
        assert len(reps) == 1
        assert 0.0 <= float(reps[0]["auc"]) <= 1.0

    def test_undefined_test_metric_recorded_not_fatal(self, tmp_path):
        # all-positive dataset: selection works on validation positives,
        # but test AUC is undefined; the row records the error, exit is 1
        target = tmp_path / "target.csv"
        main(["gen2d", "--seed", "9", "--n-points", "40", "--out", str(target)])
        cfg = self.experiment_config(
            tmp_path,
            target,
            methods=["svdd"],
            kernels={"rbf": [0.5]},
            policy="positive-fraction",
            split={"mode": "supervised", "train_count": 15, "validation_count": 8},
            grids={"C": [0.2]},
        )
        out = tmp_path / "undef"
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 1
        rows = read_rows(out / "results.csv")
        assert any("both classes" in (r["error"] or "") for r in rows)

    def test_failing_cells_nonzero_exit(self, tmp_path):
        data = write_outlier_csv(tmp_path / "data.csv", n_in=30, n_out=4)
        cfg = self.experiment_config(tmp_path, data, grids={"C": [0.001]})
        out = tmp_path / "fail"
        assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 1
        rows = read_rows(out / "results.csv")
        assert any(r["error"] for r in rows)


class TestGram:
    def test_manifest_written(self, tmp_path):
        data = write_outlier_csv(tmp_path / "d.csv", n_in=10, n_out=2)
        out = tmp_path / "grams"
        assert main(["gram", "--data", str(data), "--label-column", "label",
                     "--rbf", "0.5", "--rbf", "1.0", "--poly", "2",
                     "--out-dir", str(out)]) == 0
        matrices = load_manifest(out / "manifest.json")
        assert sorted(matrices) == ["poly_2", "rbf_0.5", "rbf_1"]
        for m in matrices.values():
            assert m.shape == (12, 12)


class TestGraphGram:
    def graphs_file(self, tmp_path, n_functions=2, n_graphs=3):
        rng = np.random.default_rng(0)
        functions = {}
        for f in range(n_functions):
            graphs = []
            for _ in range(n_graphs):
                n = int(rng.integers(3, 6))
                edges = [[i, i + 1] for i in range(n - 1)]
                graphs.append({
                    "vertex_labels": rng.standard_normal((n, 2)).tolist(),
                    "edges": edges,
                    "edge_labels": rng.standard_normal((len(edges), 1)).tolist(),
                })
            functions[f"f{f}"] = graphs
        path = tmp_path / "graphs.json"
        path.write_text(json.dumps({"functions": functions}))
        return path

    def test_manifest_count_is_functions_times_grid(self, tmp_path):
        graphs = self.graphs_file(tmp_path)
        cfg = tmp_path / "gg.json"
        cfg.write_text(json.dumps({
            "bag_size": 6,
            "seed": 0,
            "grid": {"max_lengths": [2, 3], "sigmas": [0.5, 1.0]},
        }))
        out = tmp_path / "gg"
        assert main(["graph-gram", "--graphs", str(graphs),
                     "--config", str(cfg), "--out-dir", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["matrices"]) == 2 * 4  # functions x (L x sigma)
        matrices = load_manifest(out / "manifest.json")
        for m in matrices.values():
            assert m.shape == (3, 3)
