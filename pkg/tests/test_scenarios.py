# tests/test_scenarios.py

import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml

from backend import scenarios
from backend.errors import ConfigurationError, NumericalError, ValidationError
from backend.schemas import CONFIG_MODELS, validate_config
from backend.scenarios import (
    SCENARIOS,
    Scenario,
    build_config,
    check_outputs,
    check_process_reports,
    get_output_schemas,
    run_scenario,
)
from data.io import PROJECT_ROOT, resolve_path
from dynamics.evolution import evolve
from teleport import protocol

CONFIG_DIR = os.path.join(PROJECT_ROOT, "data", "configs")


def write_config(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh)
    return str(path)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class TestRegistry:
    def test_every_scenario_has_a_model_and_a_schema(self):
        assert set(SCENARIOS) == set(CONFIG_MODELS)
        assert set(SCENARIOS) == set(get_output_schemas())
        assert len(SCENARIOS) == 11

    def test_unknown_scenario(self, tmp_path):
        with pytest.raises(ConfigurationError):
            run_scenario("fig-9", seed=0, out_dir=str(tmp_path))

    @pytest.mark.parametrize("name", sorted(CONFIG_MODELS))
    def test_defaults_validate(self, name):
        validate_config(name, {})

    def test_shipped_configs_validate(self):
        checked = 0
        for filename in sorted(os.listdir(CONFIG_DIR)):
            path = os.path.join(CONFIG_DIR, filename)
            with open(path, encoding="utf-8") as fh:
                name = (yaml.safe_load(fh) or {}).get("scenario")
            if name:
                build_config(name, path)
                checked += 1
        assert checked == 11

    def test_included_noise_is_merged(self):
        cfg = build_config("teleport-qpt", os.path.join(CONFIG_DIR, "teleport_qpt.yaml"))
        assert cfg.noise.bell_prep_depolarizing == pytest.approx(0.13067)
        assert cfg.runs == 4

    def test_default_keep_fraction(self):
        assert validate_config("rb", {}).keep_fraction == pytest.approx(0.3147, abs=1e-4)


class TestConfigValidation:
    def test_unknown_key_is_named(self):
        with pytest.raises(ValidationError, match="bogus"):
            validate_config("rb", {"bogus": 1})

    def test_nested_field_path(self):
        with pytest.raises(ValidationError, match=r"noise\.parity_error"):
            validate_config("teleport-qpt", {"noise": {"parity_error": 1.5}})

    def test_scenario_key_must_match(self):
        with pytest.raises(ConfigurationError):
            validate_config("rb", {"scenario": "irb"})
        assert validate_config("rb", {"scenario": "rb"}).runs == 1

    def test_small_bootstrap_rejected(self):
        with pytest.raises(ValidationError, match="bootstrap_resamples"):
            validate_config("irb", {"bootstrap_resamples": 50})

    def test_confusion_must_be_stochastic(self):
        with pytest.raises(ValidationError, match="confusion"):
            validate_config("teleport-rabi", {"noise": {"confusion": [[0.9, 0.2], [0.2, 0.8]]}})

    def test_calibration_needs_three_offsets(self):
        with pytest.raises(ValidationError, match="b3_offsets_mV"):
            validate_config("cz-calibration", {"b3_offsets_mV": [9.0, 10.0]})


class TestOutputSchemas:
    def test_missing_and_unknown_outputs(self):
        problems = check_outputs("rb", {"extra.csv": pd.DataFrame({"x": [1]})}, strict=False)
        assert any("decay.csv: missing output" in p for p in problems)
        assert any("extra.csv: no schema" in p for p in problems)

    def test_strict_mode_raises(self):
        with pytest.raises(ValidationError):
            check_outputs("rb", {"decay.csv": pd.DataFrame({"L": [1]})}, strict=True)


class TestScenarioRuns:
    def test_ideal_rb_is_flat(self, tmp_path):
        config = {"depolarizing_p": 1.0, "lengths": [1, 2, 4], "sequences_per_length": 5, "shots": 60,
                  "keep_fraction": 1.0}
        result = run_scenario("rb", seed=3, out_dir=str(tmp_path), config=config)
        decay = pd.read_csv(os.path.join(result["out_dir"], "decay.csv"))
        assert np.allclose(decay["mean"], 1.0)
        fit = result["reports"]["fit.json"]
        assert fit["degenerate"]
        assert fit["p"] == pytest.approx(1.0)
        assert "manifest.json" in result["files"]

    def test_same_seed_gives_identical_files(self, tmp_path):
        config = {"angles_rad": [0.0, 1.0, 3.0], "shots": 500}
        a = run_scenario("teleport-rabi", seed=5, out_dir=str(tmp_path / "a"), config=config)
        b = run_scenario("teleport-rabi", seed=5, out_dir=str(tmp_path / "b"), config=config)
        assert a["files"] == b["files"]
        for name in a["files"]:
            with open(os.path.join(a["out_dir"], name), "rb") as fa, open(os.path.join(b["out_dir"], name), "rb") as fb:
                assert fa.read() == fb.read()

    def test_manifest(self, tmp_path):
        result = run_scenario("teleport-rabi", seed=2, out_dir=str(tmp_path),
                              config={"angles_rad": [0.5], "shots": 200})
        manifest = read_json(os.path.join(result["out_dir"], "manifest.json"))
        assert manifest["scenario"] == "teleport-rabi"
        assert manifest["seed"] == 2
        assert set(manifest["versions"]) == {"numpy", "scipy", "pandas"}
        assert set(manifest["outputs"]) == {"rabi.csv", "summary.json"}
        assert len(manifest["config_sha256"]) == 64

    def test_fidelity_budget(self, tmp_path):
        result = run_scenario("cz-fidelity-budget", seed=0, out_dir=str(tmp_path))
        budget = result["reports"]["budget.json"]
        assert 3e-5 <= budget["coherent"]["infidelity"] <= 3e-4
        assert 1.1e-3 <= budget["dephasing"]["infidelity"] <= 4.4e-3
        pulse = pd.read_csv(os.path.join(result["out_dir"], "pulse.csv"))
        assert pulse["t_ns"].max() == pytest.approx(58.0)

    def test_calibration(self, tmp_path):
        path = write_config(tmp_path / "cal.yaml", {"scenario": "cz-calibration",
                                                    "b3_offsets_mV": [8.5, 9.0, 9.5, 10.0, 10.5]})
        result = run_scenario("cz-calibration", path, seed=0, out_dir=str(tmp_path / "out"))
        report = result["reports"]["calibration.json"]
        assert report["action"] == "set_offset"
        assert report["optimal_offset_mV"] == pytest.approx(9.5, abs=0.02)
        assert len(pd.read_csv(os.path.join(result["out_dir"], "grid.csv"))) == 5

    def test_included_voltage_table(self, tmp_path):
        path = write_config(tmp_path / "sweep.yaml", {
            "include": [resolve_path("data/fixtures/table3.csv")],
            "cycle_origin": 1.4,
            "ac_only": True,
            "cycles": [0.0, 0.5],
            "x_step_nm": 5.0,
        })
        result = run_scenario("potential-sweep", path, seed=0, out_dir=str(tmp_path / "out"))
        summary = result["reports"]["summary.json"]
        assert summary["table"] == "included"
        assert summary["n_cycles"] == 2
        profiles = pd.read_csv(os.path.join(result["out_dir"], "profiles.csv"))
        assert set(profiles["c"]) == {0.0, 0.5}

    def test_exchange_versus_cycle(self, tmp_path):
        result = run_scenario("j-vs-cycle", seed=0, out_dir=str(tmp_path))
        fits = result["reports"]["fits.json"]
        assert fits["peak_J_Hz"] == pytest.approx(3.3e7)
        assert fits["peak_c"] == pytest.approx(0.9)
        assert fits["saturating"]["J_max"] > 0
        assert fits["exponential"]["J_0"] > 0

    def test_dcphase_extraction(self, tmp_path):
        config = {"cycles": [0.8], "wait_max_ns": 1000.0, "wait_step_ns": 5.0}
        result = run_scenario("dcphase-map", seed=0, out_dir=str(tmp_path), config=config)
        exchange = pd.read_csv(os.path.join(result["out_dir"], "exchange.csv"))
        row = exchange.iloc[0]
        assert row["J_extracted_Hz"] == pytest.approx(row["J_model_Hz"], rel=0.03)
        assert result["reports"]["summary.json"]["failed_extractions"] == 0

    def test_edsr_lines(self, tmp_path):
        result = run_scenario("edsr-vs-cycle", seed=0, out_dir=str(tmp_path))
        lines = pd.read_csv(os.path.join(result["out_dir"], "edsr.csv"))
        assert set(lines["qubit"]) == {"Q2", "Q5"}
        assert result["reports"]["summary.json"]["max_splitting_Hz"] >= 0

    def test_interleaved_benchmarking(self, tmp_path):
        config = {"lengths": [1, 2, 4, 8, 16], "sequences_per_length": 20, "shots": 200,
                  "keep_fraction": 1.0, "depolarizing_p": 0.99}
        result = run_scenario("irb", seed=1, out_dir=str(tmp_path), config=config)
        fit = result["reports"]["fit.json"]
        assert fit["cz_fidelity_injected"] == pytest.approx(1 - 0.0114, abs=1e-3)
        assert 0.9 < fit["f_cz_unclamped"] < 1.05
        assert fit["native_gate_counts"]["cz_per_clifford"] == pytest.approx(1.5)
        decay = pd.read_csv(os.path.join(result["out_dir"], "decay.csv"))
        assert set(decay["curve"]) == {"reference", "interleaved"}

    def test_teleport_qpt(self, tmp_path):
        config = {"shots": 4000, "runs": 2, "bell_shots": 500, "ordering_shots": 2000}
        result = run_scenario("teleport-qpt", seed=4, out_dir=str(tmp_path), config=config)
        report = result["reports"]["qpt.json"]
        assert report["F_avg_exact"] == pytest.approx(report["F_avg_analytic"], abs=1e-3)
        assert report["bell"]["Q2Q5"]["F_bell_exact"] == pytest.approx(0.902, abs=1e-3)
        assert report["ordering"]["agree"]
        assert len(pd.read_csv(os.path.join(result["out_dir"], "counts.csv"))) == 24
        assert list(pd.read_csv(os.path.join(result["out_dir"], "series.csv"))["run"]) == [0, 1]

    def test_teleport_phase_map(self, tmp_path):
        config = {"theta1_rad": [0.0, np.pi], "theta2_rad": [0.0], "shots": 2000, "noise": {
            "bell_prep_depolarizing": 0.0, "local_cz_depolarizing": 0.0, "parity_error": 0.0,
            "confusion": [[1.0, 0.0], [0.0, 1.0]], "shuttled_bell_cz": False}}
        result = run_scenario("teleport-phase-map", seed=0, out_dir=str(tmp_path), config=config)
        assert result["reports"]["summary.json"]["contrast_exact"] == pytest.approx(1.0)

    def test_teleport_default_noise_evolves_the_shuttled_cz(self, tmp_path, monkeypatch):
        calls = []

        def counting_evolve(*args, **kwargs):
            calls.append(1)
            return evolve(*args, **kwargs)

        monkeypatch.setattr(protocol, "_shuttled_cz", None)
        monkeypatch.setattr(protocol, "evolve", counting_evolve)
        cfg = build_config("teleport-rabi", os.path.join(CONFIG_DIR, "teleport_rabi.yaml"))
        assert cfg.noise.shuttled_bell_cz
        run_scenario("teleport-rabi", seed=0, out_dir=str(tmp_path), config={"angles_rad": [0.5], "shots": 200})
        assert calls

    def test_exact_cz_skips_the_pulse(self, tmp_path, monkeypatch):
        monkeypatch.setattr(protocol, "_shuttled_cz", None)
        monkeypatch.setattr(protocol, "evolve", lambda *a, **k: pytest.fail("pulse evolved"))
        run_scenario("teleport-rabi", seed=0, out_dir=str(tmp_path),
                     config={"angles_rad": [0.5], "shots": 200, "noise": {"shuttled_bell_cz": False}})


def bad_qpt_outputs(ptm, choi_min_eigenvalue):
    return {"qpt.json": {"ptm": ptm, "choi_min_eigenvalue": choi_min_eigenvalue}}


class TestProcessReports:
    def test_physical_report_passes(self):
        check_process_reports("teleport-qpt", bad_qpt_outputs(np.diag([1.0, -1.0, 1.0, -1.0]), 0.0))
        check_process_reports("rb", {"fit.json": {"p": 0.9}, "decay.csv": pd.DataFrame({"L": [1]})})

    def test_negative_choi_is_numerical_error(self):
        with pytest.raises(NumericalError, match="Choi"):
            check_process_reports("teleport-qpt", bad_qpt_outputs(np.eye(4), -1e-3))

    def test_trace_decreasing_ptm_is_numerical_error(self):
        R = np.eye(4)
        R[0, 3] = 0.05
        with pytest.raises(NumericalError, match="trace preserving"):
            check_process_reports("teleport-qpt", bad_qpt_outputs(R, 0.0))

    def test_breach_stops_the_run_before_writing(self, tmp_path, monkeypatch):
        def runner(cfg, seed):
            return bad_qpt_outputs(0.9 * np.eye(4), 0.0)

        monkeypatch.setitem(SCENARIOS, "teleport-qpt", Scenario("teleport-qpt", "broken", runner))
        monkeypatch.setattr(scenarios, "check_outputs", lambda name, outputs: [])
        with pytest.raises(NumericalError):
            run_scenario("teleport-qpt", seed=0, out_dir=str(tmp_path))
        assert not os.path.exists(tmp_path / "teleport-qpt")

    def test_shipped_qpt_report_is_physical(self, tmp_path):
        result = run_scenario("teleport-qpt", seed=1, out_dir=str(tmp_path),
                              config={"shots": 2000, "runs": 1, "bell_shots": 200, "ordering_check": False})
        report = result["reports"]["qpt.json"]
        assert report["choi_min_eigenvalue"] >= -1e-6
        assert np.allclose(report["ptm"][0], [1.0, 0.0, 0.0, 0.0], atol=1e-6)
