import json

import numpy as np
import pandas as pd
import pytest

from conftest import (make_random_inputs, make_random_world, make_toy_strip,
                      synthesize_flows_df, write_world_csvs)
from slrmig import io
from slrmig.cli import main
from slrmig.joint import JointRunConfig, run_joint
from slrmig.migration import ModelSpec
from slrmig.slr import FloodScenario


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def strip_paths(tmp_path):
    counties, bgs = make_toy_strip()
    return write_world_csvs(tmp_path, counties, bgs)


class TestValidate:
    def test_clean_dataset_exits_zero(self, strip_paths, capsys):
        code = run_cli("validate", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"])
        assert code == 0
        assert "0 error(s)" in capsys.readouterr().out

    def test_orphan_block_group_exits_one(self, tmp_path, capsys):
        counties, bgs = make_toy_strip()
        paths = write_world_csvs(tmp_path, counties, bgs)
        content = paths["blockgroups"].read_text().replace("b2,c2", "b2,missing")
        paths["blockgroups"].write_text(content)
        code = run_cli("validate", "--zones", paths["zones"],
                       "--blockgroups", paths["blockgroups"])
        assert code == 1
        assert "missing" in capsys.readouterr().out

    def test_decreasing_fraction_reported_with_row(self, tmp_path, capsys):
        counties, bgs = make_toy_strip()
        paths = write_world_csvs(tmp_path, counties, bgs)
        lines = paths["blockgroups"].read_text().splitlines()
        parts = lines[1].split(",")
        parts[-1] = "0.1"  # af_6ft drops below af_5ft (0.25)
        lines[1] = ",".join(parts)
        paths["blockgroups"].write_text("\n".join(lines) + "\n")
        code = run_cli("validate", "--zones", paths["zones"],
                       "--blockgroups", paths["blockgroups"])
        assert code == 1
        assert ":2:" in capsys.readouterr().out  # offending data row

    def test_missing_file_exits_one(self, tmp_path):
        assert run_cli("validate", "--zones", tmp_path / "nope.csv") == 1


class TestSimulate:
    def test_matches_library_run(self, strip_paths, tmp_path):
        out = tmp_path / "run_high"
        code = run_cli("simulate", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--scenario", "high", "--year", 2100, "--out", out)
        assert code == 0
        loaded, manifest = io.read_run_dir(out)
        counties, bgs = make_toy_strip()
        expected = run_joint(counties, bgs, JointRunConfig(scenario=FloodScenario.high(),
                                                           year=2100))
        assert loaded.total.total() == pytest.approx(expected.total.total(), rel=1e-9)
        assert loaded.climate.total() == pytest.approx(250.0, rel=1e-9)
        assert manifest["config"]["depth_ft"] == 6
        assert manifest["engine"]["name"] == "slrmig"
        assert manifest["inputs"]["zones"]["sha256"]

    def test_none_scenario_writes_empty_climate_matrix(self, strip_paths, tmp_path):
        out = tmp_path / "run_none"
        assert run_cli("simulate", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--scenario", "none", "--year", 2100, "--out", out) == 0
        assert len((out / "T_prime.csv").read_text().splitlines()) == 1  # header only

    def test_rerun_is_hash_identical(self, strip_paths, tmp_path):
        args = ["simulate", "--zones", strip_paths["zones"],
                "--blockgroups", strip_paths["blockgroups"],
                "--scenario", "high", "--year", 2100]
        assert run_cli(*args, "--out", tmp_path / "a") == 0
        assert run_cli(*args, "--out", tmp_path / "b") == 0
        for name in (io.RUN_TOTAL, io.RUN_CLIMATE, io.RUN_STANDARD, io.RUN_SPLIT):
            assert io.sha256_of_file(tmp_path / "a" / name) == \
                   io.sha256_of_file(tmp_path / "b" / name)

    def test_threads_do_not_change_outputs(self, tmp_path):
        graph, bgs = make_random_inputs(25, seed=8)
        paths = write_world_csvs(tmp_path, graph, bgs)
        base = ["simulate", "--zones", paths["zones"], "--blockgroups", paths["blockgroups"],
                "--scenario", "high", "--year", 2100]
        assert run_cli(*base, "--threads", 1, "--out", tmp_path / "t1") == 0
        assert run_cli(*base, "--threads", 8, "--out", tmp_path / "t8") == 0
        for name in (io.RUN_TOTAL, io.RUN_CLIMATE, io.RUN_STANDARD, io.RUN_SPLIT):
            assert io.sha256_of_file(tmp_path / "t1" / name) == \
                   io.sha256_of_file(tmp_path / "t8" / name)

    def test_custom_model_shorthand(self, strip_paths, tmp_path):
        out = tmp_path / "run_grav"
        assert run_cli("simulate", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--scenario", "high", "--year", 2100,
                       "--climate-model", "gravity_pow:2.0",
                       "--standard-model", "radiation", "--out", out) == 0
        _, manifest = io.read_run_dir(out)
        assert manifest["config"]["climate_model"]["kind"] == "gravity_pow"
        assert manifest["config"]["standard_model"]["beta"] is None

    def test_bad_model_shorthand(self, strip_paths, tmp_path):
        assert run_cli("simulate", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--scenario", "high", "--year", 2100,
                       "--climate-model", "warp_drive", "--out", tmp_path / "x") == 1


class TestBaseline:
    def test_baseline_run(self, strip_paths, tmp_path):
        out = tmp_path / "base"
        assert run_cli("baseline", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--year", 2100, "--out", out) == 0
        loaded, manifest = io.read_run_dir(out)
        assert manifest["config"]["scenario_name"] == "none"
        assert loaded.climate.total() == 0.0


class TestCalibrate:
    def test_recovers_beta_and_alpha(self, tmp_path, capsys):
        graph = make_random_world(25, seed=40)
        flows = synthesize_flows_df(graph, ModelSpec(kind="ext_radiation", beta=0.4),
                                    alpha=0.03)
        bgs = []  # calibrate does not need block groups
        paths = write_world_csvs(tmp_path, graph, bgs, flows_df=flows)
        out = tmp_path / "cal"
        assert run_cli("calibrate", "--zones", paths["zones"], "--flows", paths["flows"],
                       "--kind", "ext_radiation", "--out", out) == 0
        params = json.loads((out / "params.json").read_text())
        assert params["beta"]["mean"] == pytest.approx(0.4, abs=0.02)
        assert params["alpha"]["mean"] == pytest.approx(0.03, abs=1e-9)
        spec = io.read_model_spec(out / "model.json")
        assert spec.kind == "ext_radiation"
        assert spec.beta == pytest.approx(0.4, abs=0.02)
        assert "beta = " in capsys.readouterr().out

    def test_radiation_reports_na(self, tmp_path, capsys):
        graph = make_random_world(10, seed=41)
        flows = synthesize_flows_df(graph, ModelSpec(kind="radiation"), alpha=0.03)
        paths = write_world_csvs(tmp_path, graph, [], flows_df=flows)
        assert run_cli("calibrate", "--zones", paths["zones"], "--flows", paths["flows"],
                       "--kind", "radiation", "--out", tmp_path / "cal") == 0
        out = capsys.readouterr().out
        assert "beta = n/a" in out
        params = json.loads((tmp_path / "cal" / "params.json").read_text())
        assert params["beta"] is None


class TestCrossval:
    def test_loo_with_seven_origins(self, tmp_path, capsys):
        graph = make_random_world(30, seed=42)
        flows = synthesize_flows_df(graph, ModelSpec(kind="ext_radiation", beta=0.33))
        keep = [f"z{i:04d}" for i in range(7)]
        flows = flows[flows["origin_id"].isin(keep)]
        paths = write_world_csvs(tmp_path, graph, [], flows_df=flows)
        out = tmp_path / "cv"
        assert run_cli("crossval", "--zones", paths["zones"], "--flows", paths["flows"],
                       "--kind", "ext_radiation", "--mode", "loo", "--out", out) == 0
        report = json.loads((out / "cv_report.json").read_text())
        assert report["schema_version"] == 1
        assert len(report["folds"]) == 7
        assert "folds = 7" in capsys.readouterr().out

    def test_radiation_kind_prints_na(self, tmp_path, capsys):
        graph = make_random_world(12, seed=43)
        flows = synthesize_flows_df(graph, ModelSpec(kind="radiation"))
        paths = write_world_csvs(tmp_path, graph, [], flows_df=flows)
        assert run_cli("crossval", "--zones", paths["zones"], "--flows", paths["flows"],
                       "--kind", "radiation", "--mode", "kfold", "--folds", 3,
                       "--out", tmp_path / "cv") == 0
        assert "beta = n/a" in capsys.readouterr().out


class TestEffects:
    def make_runs(self, tmp_path, strip_paths):
        common = ["--zones", strip_paths["zones"], "--blockgroups", strip_paths["blockgroups"],
                  "--year", 2100]
        assert run_cli("simulate", *common, "--scenario", "high",
                       "--out", tmp_path / "scen") == 0
        assert run_cli("baseline", *common, "--out", tmp_path / "base") == 0

    def test_scenario_vs_itself_all_zero(self, strip_paths, tmp_path):
        self.make_runs(tmp_path, strip_paths)
        out = tmp_path / "fx_self"
        assert run_cli("effects", "--run", tmp_path / "base", "--baseline", tmp_path / "base",
                       "--out", out) == 0
        df = pd.read_csv(out / "effects.csv", dtype={"county_id": str})
        assert np.allclose(df["extra"], 0.0)
        assert not df[[c for c in df.columns if c.startswith("flag_")]].any().any()

    def test_report_artifacts(self, strip_paths, tmp_path):
        self.make_runs(tmp_path, strip_paths)
        out = tmp_path / "fx"
        assert run_cli("effects", "--run", tmp_path / "scen", "--baseline", tmp_path / "base",
                       "--out", out) == 0
        df = pd.read_csv(out / "effects.csv", dtype={"county_id": str})
        assert list(df.columns)[:8] == ["county_id", "pop", "affected_pop", "in_scenario",
                                        "in_baseline", "extra", "extra_flooded",
                                        "extra_unflooded"]
        assert [c for c in df.columns if c.startswith("flag_")] == \
               ["flag_d0.5", "flag_d1", "flag_d3", "flag_d6", "flag_d9"]
        np.testing.assert_allclose(df["extra"], df["extra_flooded"] + df["extra_unflooded"],
                                   rtol=1e-9, atol=1e-9)
        assert (out / "effects_top_receivers.png").stat().st_size > 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert "effects_top_receivers.png" in manifest["outputs"]

    def test_geojson_join(self, strip_paths, tmp_path):
        self.make_runs(tmp_path, strip_paths)
        geo = {"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"id": "c1"}, "geometry": None}]}
        gpath = tmp_path / "counties.geojson"
        gpath.write_text(json.dumps(geo))
        out = tmp_path / "fx_geo"
        assert run_cli("effects", "--run", tmp_path / "scen", "--baseline", tmp_path / "base",
                       "--geojson", gpath, "--no-figures", "--out", out) == 0
        joined = json.loads((out / "effects.geojson").read_text())
        assert joined["features"][0]["properties"]["extra"] > 0

    def test_registry_mismatch_exits_one(self, strip_paths, tmp_path):
        self.make_runs(tmp_path, strip_paths)
        other_graph, other_bgs = make_random_inputs(4, seed=9)
        other = write_world_csvs(tmp_path / "other", other_graph, other_bgs)
        assert run_cli("baseline", "--zones", other["zones"],
                       "--blockgroups", other["blockgroups"], "--year", 2100,
                       "--out", tmp_path / "other_base") == 0
        assert run_cli("effects", "--run", tmp_path / "scen",
                       "--baseline", tmp_path / "other_base",
                       "--out", tmp_path / "fx_bad") == 1


class TestSweep:
    def test_six_rows_and_figure(self, strip_paths, tmp_path):
        out = tmp_path / "sweep"
        assert run_cli("sweep", "--zones", strip_paths["zones"],
                       "--blockgroups", strip_paths["blockgroups"],
                       "--year", 2100, "--out", out) == 0
        df = pd.read_csv(out / "sweep.csv")
        assert df["depth_ft"].tolist() == [1, 2, 3, 4, 5, 6]
        assert (df["direct_people"].diff().dropna() >= -1e-9).all()
        assert (out / "sweep_totals.png").stat().st_size > 0


def test_usage_error_exits_one():
    assert run_cli("simulate") == 1  # missing required arguments
