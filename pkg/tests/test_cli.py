import json
import math
from pathlib import Path

import numpy as np
import pytest

from triosc.cli import load_config, main
from triosc.errors import ConfigError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

PI_2 = math.pi / 2


def base_config(**sections):
    cfg = {
        "schema_version": 1,
        "scenario": "test",
        "system": {
            "omega_b": 0.3, "resonance": "R1", "g_a": 0.001, "g_b": 0.001,
            "alpha": 0, "phi_a": PI_2, "theta_a": 0.0, "gamma_b": 0.0,
        },
        "truncation": {"n_a": 5, "n_b": 5},
    }
    cfg.update(sections)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfigValidation:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = base_config()
        cfg["system"]["bogus"] = 1.0
        with pytest.raises(ConfigError, match="bogus"):
            load_config(write_config(tmp_path, cfg))

    def test_invalid_json_line_diagnostic(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "schema_version": 1,\n  oops\n}\n')
        with pytest.raises(ConfigError, match=r":3:"):
            load_config(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/config.json")

    def test_alpha_enum(self, tmp_path):
        cfg = base_config()
        cfg["system"]["alpha"] = 2
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, cfg))

    def test_exit_codes(self, tmp_path, capsys):
        cfg = base_config()
        cfg["system"]["bogus"] = 1.0
        path = write_config(tmp_path, cfg)
        rc = main(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_section(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config())
        rc = main(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc != 0


class TestSubcommands:
    def test_simulate_deterministic(self, tmp_path):
        cfg = base_config(
            initial_state={"terms": [{"m": 0, "k": 1, "l": 0}]},
            simulate={"t_max": 10.0, "dt": 0.5},
        )
        path = write_config(tmp_path, cfg)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["simulate", "--config", path, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", path, "--out", str(out2)]) == 0
        b1 = (out1 / "trajectory.csv").read_bytes()
        b2 = (out2 / "trajectory.csv").read_bytes()
        assert b1 == b2
        manifest = json.loads((out1 / "manifest.json").read_text())
        assert manifest["subcommand"] == "simulate"
        assert manifest["outputs"] == ["trajectory.csv"]
        assert "runtime_s" in manifest

    def test_spectrum(self, tmp_path):
        cfg = base_config(
            spectrum={
                "g_values": {"min": 0.001, "max": 0.05, "n": 3},
                "g_ratio": 0.7071,
            }
        )
        path = write_config(tmp_path, cfg)
        assert main(["spectrum", "--config", path, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 75

    def test_perturb_angles(self, tmp_path):
        cfg = base_config(
            perturb={"angles_only": True, "omega_ratio": 0.3, "g_ratio": 0.5}
        )
        cfg["system"]["resonance"] = "R2"
        cfg["system"]["alpha"] = 1
        path = write_config(tmp_path, cfg)
        assert main(["perturb", "--config", path, "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "r2_angles.json").read_text())
        assert data["F_eig"] > 0.999
        assert abs(data["phi_a"] - 0.210573 * math.pi) < 0.01 * math.pi

    def test_drive_map(self, tmp_path):
        cfg = base_config(
            drive_map={
                "theta_c": {"min": PI_2, "max": PI_2, "n": 1},
                "x": {"min": 0.6326, "max": 0.6326, "n": 1},
            },
            target_state={
                "terms": [
                    {"m": 0, "k": 1, "l": 0, "amp_re": 1.0},
                    {"m": -1, "k": 0, "l": 1, "amp_re": 1.0},
                ]
            },
        )
        cfg["system"]["g_a"] = 0.01
        cfg["system"]["g_b"] = 0.01
        cfg["truncation"] = {"n_a": 5, "n_b": 5}
        path = write_config(tmp_path, cfg)
        assert main(["drive-map", "--config", path, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "drive_map.csv").read_text().splitlines()
        f = float(lines[1].split(",")[2])
        assert f > 0.99

    def test_grape_small(self, tmp_path):
        cfg = base_config(
            initial_state={"terms": [{"m": 0, "k": 1, "l": 0}]},
            target_state={"terms": [{"m": -1, "k": 0, "l": 1}]},
            grape={"duration": 6.0, "n_steps": 12, "max_iters": 8,
                   "active_controls": ["y", "z"], "method": "ascent"},
        )
        cfg["system"]["g_a"] = 0.1
        cfg["system"]["g_b"] = 0.1 / math.sqrt(2)
        path = write_config(tmp_path, cfg)
        assert main(["grape", "--config", path, "--out", str(tmp_path), "--seed", "1"]) == 0
        result = json.loads((tmp_path / "grape_result.json").read_text())
        assert result["seed"] == 1
        field = (tmp_path / "field.csv").read_text().splitlines()
        assert len(field) == 13

    def test_envelope(self, tmp_path):
        cfg = base_config(
            initial_state={"terms": [{"m": 0, "k": 1, "l": 0}]},
            target_state={"terms": [{"m": -1, "k": 0, "l": 1}]},
            envelope={"g_max": 0.05, "t_max": 20.0, "n_g": 6, "n_t": 64},
        )
        path = write_config(tmp_path, cfg)
        assert main(["envelope", "--config", path, "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "envelope.json").read_text())
        assert 0.0 <= data["value"] <= 1.0

    def test_rabi(self, tmp_path):
        cfg = base_config(
            rabi={
                "m": 1, "k": 2, "n": 25,
                "g_over_omega": {"min": 0.0, "max": 0.1, "n": 3},
                "n_offsets": [-1, 0, 1],
            }
        )
        path = write_config(tmp_path, cfg)
        assert main(["rabi", "--config", path, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "rabi_overlaps.csv").read_text().splitlines()
        assert len(lines) == 1 + 9

    def test_controllability(self, tmp_path):
        cfg = base_config(controllability={"model": "full", "controls": ["x", "y", "z"]})
        cfg["system"]["g_a"] = 0.1
        cfg["system"]["g_b"] = 0.0707
        cfg["truncation"] = {"n_a": 2, "n_b": 2}
        path = write_config(tmp_path, cfg)
        assert main(["controllability", "--config", path, "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "controllability.json").read_text())
        assert data["rank"] == 143
        assert data["controllable"] is True

    def test_robustness(self, tmp_path):
        cfg = base_config(
            initial_state={"terms": [{"m": 0, "k": 1, "l": 0}]},
            target_state={"terms": [{"m": -1, "k": 0, "l": 1}]},
            grape={"duration": 4.0, "n_steps": 8, "max_iters": 2,
                   "active_controls": ["y", "z"]},
            robustness={"deltas": [0.0, 0.05], "param_names": ["g_a"]},
        )
        cfg["system"]["g_a"] = 0.1
        cfg["system"]["g_b"] = 0.0707
        path = write_config(tmp_path, cfg)
        assert main(["robustness", "--config", path, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "robustness.csv").read_text().splitlines()
        assert lines[0] == "param,delta,fidelity_loss"
        assert len(lines) == 3

    def test_trunc_override(self, tmp_path):
        cfg = base_config(
            initial_state={"terms": [{"m": 0, "k": 1, "l": 0}]},
            simulate={"t_max": 2.0, "dt": 0.5},
        )
        path = write_config(tmp_path, cfg)
        assert main([
            "simulate", "--config", path, "--out", str(tmp_path),
            "--trunc-override", "4", "4",
        ]) == 0
        header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
        assert len(header.split(",")) == 2 + 48


class TestShippedScenarios:
    def test_all_present_and_valid(self):
        found = sorted(p.name for p in SCENARIOS.glob("*.json"))
        assert len(found) == 10
        for name in found:
            load_config(str(SCENARIOS / name))

    @pytest.mark.parametrize(
        "name,subcommand,outputs",
        [
            ("fig02_weak_dynamics.json", "simulate", ["trajectory.csv"]),
            ("fig05_r2_angles.json", "perturb", ["r2_angles.json"]),
            ("fig09_rabi_overlaps.json", "rabi", ["rabi_overlaps.csv"]),
            ("fig10_envelope_r1.json", "envelope", ["envelope.json"]),
            ("appd_controllability.json", "controllability", ["controllability.json"]),
        ],
    )
    def test_fast_scenarios_run(self, tmp_path, name, subcommand, outputs):
        rc = main([subcommand, "--config", str(SCENARIOS / name), "--out", str(tmp_path)])
        assert rc == 0
        for out in outputs:
            assert (tmp_path / out).exists()

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "name,subcommand",
        [
            ("fig03_spectrum_r1.json", "spectrum"),
            ("fig06_drive_map.json", "drive-map"),
            ("fig07_drive_dynamics.json", "simulate"),
        ],
    )
    def test_medium_scenarios_run(self, tmp_path, name, subcommand):
        rc = main([subcommand, "--config", str(SCENARIOS / name), "--out", str(tmp_path)])
        assert rc == 0
