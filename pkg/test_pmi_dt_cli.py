# test_pmi_dt_cli.py
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from pmi_dt import cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def geometry(data_dir):
    return {
        "mesh": str(data_dir / "bolt_synthetic.stl"),
        "scanner": str(data_dir / "scanner_default.json"),
        "features": str(data_dir / "bolt_features.csv"),
    }


class TestValidateGeometry:
    @pytest.mark.parametrize("policy", ["any", "pair"])
    def test_bundled_part_passes(self, runner, geometry, policy):
        result = runner.invoke(cli, ["validate-geometry", geometry["mesh"], "--scanner", geometry["scanner"],
                                     "--features", geometry["features"], "--policy", policy])
        assert result.exit_code == 0, result.output
        report = json.loads(result.stdout)
        assert report["passed"] is True
        assert report["containment"]["fully_inside"] is True
        assert all(report["coverage"]["inspectable"].values())

    def test_part_taller_than_the_volume_fails(self, runner, geometry, tmp_path):
        scanner = json.loads(open(geometry["scanner"]).read())
        scanner["cylinder"]["height_mm"] = 50.0
        path = tmp_path / "short.json"
        path.write_text(json.dumps(scanner))
        report_path = tmp_path / "report.json"
        result = runner.invoke(cli, ["validate-geometry", geometry["mesh"], "--scanner", str(path),
                                     "--report", str(report_path)])
        assert result.exit_code == 1
        report = json.loads(report_path.read_text())
        assert report["passed"] is False
        assert {"above_top"} == {c for v in report["containment"]["violating_vertices"] for c in v["constraints"]}

    def test_scan_deviation(self, runner, geometry, tmp_path):
        scan = tmp_path / "scan.csv"
        pd.DataFrame({"x": [12.7, 0.0], "y": [0.0, 0.0], "z": [50.0, 92.5]}).to_csv(scan, index=False)
        result = runner.invoke(cli, ["validate-geometry", geometry["mesh"], "--scanner", geometry["scanner"],
                                     "--scan", str(scan)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout)["scan_deviation"]
        assert summary["n_points"] == 2
        assert summary["max_signed"] == pytest.approx(0.5)

    def test_unreadable_mesh_is_exit_2(self, runner, geometry, tmp_path):
        path = tmp_path / "part.ply"
        path.write_text("ply\n")
        result = runner.invoke(cli, ["validate-geometry", str(path), "--scanner", geometry["scanner"]])
        assert result.exit_code == 2
        assert "MeshFormatError" in result.output

    def test_missing_file_is_exit_2(self, runner, tmp_path):
        result = runner.invoke(cli, ["validate-geometry", str(tmp_path / "nope.stl")])
        assert result.exit_code == 2


def test_ingest_feeds_the_store(runner, data_dir, tmp_path):
    store = tmp_path / "store"
    result = runner.invoke(cli, ["ingest", str(data_dir / "bolt_tests.csv"), "--store", str(store),
                                 "--model", str(data_dir / "bolt.twin.json")])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.stdout)
    assert (summary["rows"], summary["bolts"], summary["fractures"], summary["missing_cells"]) == (93, 10, 3, 8)
    assert summary["twins"]["Bolt_1"] == 3
    assert summary["twins"]["Bolt_3"] == 12
    assert (store / "events.ndjson").exists()


def test_ingest_reads_a_byte_order_mark(runner, data_dir, tmp_path):
    path = tmp_path / "bom.csv"
    path.write_text((data_dir / "bolt_tests.csv").read_text(encoding="utf-8"), encoding="utf-8-sig")
    assert path.read_bytes().startswith(b"\xef\xbb\xbf")
    result = runner.invoke(cli, ["ingest", str(path), "--store", str(tmp_path / "store"),
                                 "--model", str(data_dir / "bolt.twin.json")])
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["rows"] == 93


def test_prepare_writes_artifacts(runner, data_dir, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["--out-dir", str(out), "prepare", str(data_dir / "bolt_tests.csv"),
                                 "--bootstrap-bolts", "20"])
    assert result.exit_code == 0, result.output
    for name in ("cleaned.csv", "imputation_report.json", "outlier_report.json", "describe.json",
                 "feature_matrix.csv", "manifest.json"):
        assert (out / name).exists()
    assert pd.read_csv(out / "feature_matrix.csv")["bolt_id"].nunique() == 20
    assert len(json.loads((out / "outlier_report.json").read_text())) == 2


def _run_all(runner, data_dir, out, *extra):
    args = ["--seed", "42", "--out-dir", str(out), "run-all", str(data_dir / "bolt_tests.csv"),
            "--n-trees", "15", *extra]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    return json.loads((out / "manifest.json").read_text())


class TestRunAll:
    def test_full_chain(self, runner, data_dir, tmp_path):
        manifest = _run_all(runner, data_dir, tmp_path / "a")
        assert manifest["seed"] == 42
        assert manifest["results"]["rows"]["ingested"] == 93
        assert manifest["results"]["outliers"] == 2
        split = manifest["results"]["split"]
        assert split["train"] + split["test"] == manifest["results"]["rows"]["matrix"]
        for kind in ("tree", "forest"):
            assert manifest["results"][kind]["accuracy"] >= 0.95
            assert f"model_{kind}.json" in manifest["outputs"]
        assert manifest["results"]["tree"]["top_features"][0] == "max_load"
        importances = json.loads((tmp_path / "a" / "importances_tree.json").read_text())
        assert list(importances.values()) == sorted(importances.values(), reverse=True)

    def test_default_forest_separates_the_fixture(self, runner, data_dir, tmp_path):
        out = tmp_path / "a"
        result = runner.invoke(cli, ["--out-dir", str(out), "run-all", str(data_dir / "bolt_tests.csv")])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 42
        for kind in ("tree", "forest"):
            results = manifest["results"][kind]
            assert results["accuracy"] == 1.0
            assert results["confusion"]["fp"] == 0
            assert results["confusion"]["fn"] == 0
            importances = json.loads((out / f"importances_{kind}.json").read_text())
            assert sum(importances.values()) == pytest.approx(1.0, abs=1e-9)
        assert manifest["results"]["tree"]["top_features"][0] == "max_load"
        assert set(manifest["results"]["forest"]["top_features"][:2]) == {"max_load", "max_position"}

    def test_same_seed_same_models(self, runner, data_dir, tmp_path):
        _run_all(runner, data_dir, tmp_path / "a")
        _run_all(runner, data_dir, tmp_path / "b")
        for name in ("model_tree.json", "model_forest.json", "test_matrix.csv", "feature_matrix.csv",
                     "report_tree.json", "report_tree.txt", "report_forest.json", "report_forest.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_drop_fracture_rows(self, runner, data_dir, tmp_path):
        manifest = _run_all(runner, data_dir, tmp_path / "a", "--drop-fracture-rows")
        assert manifest["flags"]["drop_fracture_rows"] is True
        assert manifest["results"]["rows"]["cleaned"] == 90

    def test_split_before_bootstrap(self, runner, data_dir, tmp_path):
        manifest = _run_all(runner, data_dir, tmp_path / "a", "--split-before-bootstrap")
        assert manifest["flags"]["split_before_bootstrap"] is True
        assert manifest["results"]["split"]["test"] == 28

    def test_saved_models_evaluate_and_predict(self, runner, data_dir, tmp_path):
        out = tmp_path / "a"
        _run_all(runner, data_dir, out)
        result = runner.invoke(cli, ["evaluate", str(out / "model_tree.json"), str(out / "test_matrix.csv")])
        assert result.exit_code == 0, result.output
        assert (out / "model_tree.eval.json").exists()

        predictions = tmp_path / "pred.csv"
        result = runner.invoke(cli, ["predict", str(out / "model_forest.json"), str(out / "test_matrix.csv"),
                                     "--output", str(predictions)])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(predictions)
        assert list(frame.columns) == ["bolt_id", "test_num", "predicted_label", "fracture_probability"]
        assert len(frame) == len(pd.read_csv(out / "test_matrix.csv"))

    def test_train_command(self, runner, data_dir, tmp_path):
        out = tmp_path / "a"
        _run_all(runner, data_dir, out)
        result = runner.invoke(cli, ["--out-dir", str(tmp_path / "t"), "train", str(out / "feature_matrix.csv"),
                                     "--kind", "tree"])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "t" / "model_tree.json").exists()
        assert not (tmp_path / "t" / "model_forest.json").exists()


@pytest.mark.parametrize("args", [["--test-fraction", "1.5"], ["--z-threshold", "0"]])
def test_bad_options_are_exit_2(runner, data_dir, tmp_path, args):
    result = runner.invoke(cli, ["--out-dir", str(tmp_path), "run-all", str(data_dir / "bolt_tests.csv"), *args])
    assert result.exit_code == 2
    assert "InvalidConfig" in result.output


def test_negative_seed_is_exit_2(runner, data_dir, tmp_path):
    result = runner.invoke(cli, ["--seed", "-1", "--out-dir", str(tmp_path), "run-all",
                                 str(data_dir / "bolt_tests.csv")])
    assert result.exit_code == 2
    assert "InvalidConfig" in result.output
    assert "Traceback" not in result.output


def test_bad_config_file_is_exit_2(runner, data_dir, tmp_path):
    config = tmp_path / "settings.json"
    config.write_text("{")
    result = runner.invoke(cli, ["--config", str(config), "ingest", str(data_dir / "bolt_tests.csv")])
    assert result.exit_code == 2
