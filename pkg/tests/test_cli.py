import json

import pytest

from blindmfg.cli import main
from blindmfg.payments import illustrative_scenario


def write_config(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


def base_complete_config():
    return {
        "grid": {"dim": 1, "n": 64},
        "time": {"T": 0.5, "steps": 128},
        "sigma": 0.1,
        "hamiltonian": {"kind": "smoothed_abs", "delta": 0.5},
        "cost": {"id": "product_form",
                 "phi": {"kind": "cosine", "amplitude": 0.3}},
        "density": {"weights": [1.0],
                    "atoms": [{"kind": "dirac", "center": 0.3}]},
        "solver": {"tol": 1e-8},
    }


def blind_config():
    cfg = base_complete_config()
    cfg["belief"] = cfg.pop("density")
    return cfg


class TestSolveComplete:
    def test_zero_cost_exits_clean(self, tmp_path):
        cfg = base_complete_config()
        cfg["cost"] = {"id": "zero"}
        path = write_config(tmp_path, "c.json", cfg)
        out = tmp_path / "out"
        assert main(["solve-complete", "--config", path, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["converged"]
        assert summary["iterations"] <= 2

    def test_artifacts_and_manifest(self, tmp_path):
        path = write_config(tmp_path, "c.json", base_complete_config())
        out = tmp_path / "out"
        assert main(["solve-complete", "--config", path, "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["artifacts"]) == {"u.csv", "m.csv", "summary.json",
                                              "history.csv"}
        for name in manifest["artifacts"]:
            assert (out / name).exists()
        assert manifest["config"]["sigma"] == 0.1
        summary = json.loads((out / "summary.json").read_text())
        assert summary["gap"] < 1e-8

    def test_validation_failure_field_path(self, tmp_path, capsys):
        cfg = base_complete_config()
        cfg["sigma"] = -0.1
        path = write_config(tmp_path, "c.json", cfg)
        assert main(["solve-complete", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2
        assert "sigma" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = base_complete_config()
        cfg["hamiltonian"]["viscosity"] = 1.0
        path = write_config(tmp_path, "c.json", cfg)
        assert main(["solve-complete", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2
        assert "hamiltonian.viscosity" in capsys.readouterr().err


class TestSolveBlind:
    def test_single_atom_byte_identical_to_complete(self, tmp_path):
        cpath = write_config(tmp_path, "c.json", base_complete_config())
        bpath = write_config(tmp_path, "b.json", blind_config())
        oc, ob = tmp_path / "oc", tmp_path / "ob"
        assert main(["solve-complete", "--config", cpath, "--out", str(oc)]) == 0
        assert main(["solve-blind", "--config", bpath, "--out", str(ob)]) == 0
        assert (oc / "u.csv").read_bytes() == (ob / "u.csv").read_bytes()

    def test_two_atom_artifacts(self, tmp_path):
        cfg = blind_config()
        cfg["belief"] = {"weights": [0.5, 0.5],
                         "atoms": [{"kind": "dirac", "center": 0.2},
                                   {"kind": "dirac", "center": 0.6}]}
        path = write_config(tmp_path, "b.json", cfg)
        out = tmp_path / "out"
        assert main(["solve-blind", "--config", path, "--out", str(out)]) == 0
        for name in ("belief_path.json", "m_0.csv", "m_1.csv", "history.csv"):
            assert (out / name).exists()
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "iter,drift_gap,value_change,wall_time"
        assert len(history) > 2

    def test_forced_nonconvergence_exit_3(self, tmp_path):
        cfg = blind_config()
        cfg["solver"] = {"max_iter": 1, "relaxation": 0.5}
        path = write_config(tmp_path, "b.json", cfg)
        out = tmp_path / "out"
        assert main(["solve-blind", "--config", path, "--out", str(out)]) == 3
        # artifacts still written with diagnostics
        summary = json.loads((out / "summary.json").read_text())
        assert not summary["converged"]
        assert (out / "u.csv").exists()

    def test_determinism(self, tmp_path):
        path = write_config(tmp_path, "b.json", blind_config())
        o1, o2 = tmp_path / "o1", tmp_path / "o2"
        main(["solve-blind", "--config", path, "--out", str(o1)])
        main(["solve-blind", "--config", path, "--out", str(o2)])
        for name in ("u.csv", "m.csv", "belief_path.json", "summary.json"):
            assert (o1 / name).read_bytes() == (o2 / name).read_bytes()


class TestSimulateObserved:
    @staticmethod
    def scenario_config(tmp_path, **overrides):
        sc = illustrative_scenario(0.1, 0.5, 0.5, 64, N_t=150,
                                   observation_dt=0.04, tolerance=0.05)
        cfg = sc.to_config()
        cfg["solver"] = {"relaxation": 1.0, "tol": 1e-9, "max_iter": 60}
        cfg.update(overrides)
        return write_config(tmp_path, "sim.json", cfg)

    def test_elimination_event_recorded(self, tmp_path):
        path = self.scenario_config(tmp_path)
        out = tmp_path / "out"
        assert main(["simulate-observed", "--config", path,
                     "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_events"] == 1
        assert summary["final_n_atoms"] == 1
        trace = json.loads((out / "trace.json").read_text())
        assert trace["true_atom"] == 0
        assert (out / "trace.csv").exists()

    def test_constant_cost_no_events(self, tmp_path):
        path = self.scenario_config(
            tmp_path, cost={"id": "constant", "field": {"kind": "well"}})
        out = tmp_path / "out"
        assert main(["simulate-observed", "--config", path,
                     "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_events"] == 0

    def test_bad_true_atom_exit_2(self, tmp_path, capsys):
        path = self.scenario_config(tmp_path, true_atom=5)
        assert main(["simulate-observed", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2
        assert "true_atom" in capsys.readouterr().err


class TestCertifyMonotone:
    @staticmethod
    def config(cost, trials):
        return {
            "grid": {"dim": 1, "n": 64},
            "cost": cost,
            "certify": {"trials": trials, "seed": 7},
        }

    def test_product_form_clean(self, tmp_path):
        path = write_config(tmp_path, "c.json", self.config(
            {"id": "product_form", "phi": {"kind": "cosine"}}, 200))
        out = tmp_path / "out"
        assert main(["certify-monotone", "--config", path,
                     "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["min_pairing"] >= -1e-10
        assert report["nonnegative"]

    def test_sqrt_moment_violation_is_finding_not_error(self, tmp_path):
        path = write_config(tmp_path, "c.json", self.config(
            {"id": "moment_form", "g": "sqrt"}, 500))
        out = tmp_path / "out"
        assert main(["certify-monotone", "--config", path,
                     "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["min_pairing"] < 0
        assert not report["nonnegative"]
        assert "witness" in report

    def test_zero_trials_exit_2(self, tmp_path):
        path = write_config(tmp_path, "c.json", self.config(
            {"id": "moment_form", "g": "sqrt"}, 0))
        assert main(["certify-monotone", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2


class TestValidateWeak:
    @staticmethod
    def config(**overrides):
        cfg = {
            "grid": {"dim": 1, "n": 64},
            "time": {"T": 0.4, "steps": 64},
            "sigma": 0.05,
            "drift": {"kind": "sine", "amplitude": 0.5},
            "belief": {"weights": [0.3, 0.7],
                       "atoms": [{"kind": "dirac", "center": 0.2},
                                 {"kind": "dirac", "center": 0.6}]},
            "phi": {"inner": {"kind": "cosine"}},
            "ladder": {"levels": 3},
        }
        cfg.update(overrides)
        return cfg

    def test_pushforward_ladder_order(self, tmp_path):
        path = write_config(tmp_path, "w.json", self.config())
        out = tmp_path / "out"
        assert main(["validate-weak", "--config", path, "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["residuals"]) == 3
        assert report["order_ok"]
        assert all(o >= 0.8 for o in report["orders"])

    def test_perturbed_path_violation_detected(self, tmp_path):
        path = write_config(tmp_path, "w.json", self.config(
            perturb={"at_fraction": 0.5, "weights": [0.5, 0.5]},
            ladder={"levels": 2}))
        out = tmp_path / "out"
        assert main(["validate-weak", "--config", path, "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["violation"]["detected"]

    def test_missing_phi_exit_2(self, tmp_path, capsys):
        cfg = self.config()
        del cfg["phi"]
        path = write_config(tmp_path, "w.json", cfg)
        assert main(["validate-weak", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2
        assert "phi" in capsys.readouterr().err


class TestConfigHandling:
    def test_unreadable_config(self, tmp_path, capsys):
        assert main(["solve-blind", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["solve-blind", "--config", str(path),
                     "--out", str(tmp_path / "o")]) == 2

    def test_output_directory_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = base_complete_config()
        cfg["cost"] = {"id": "zero"}
        cfg["output"] = {"directory": "from_config"}
        path = write_config(tmp_path, "c.json", cfg)
        assert main(["solve-complete", "--config", path]) == 0
        assert (tmp_path / "from_config" / "manifest.json").exists()


def test_shipped_illustrative_config_is_valid():
    import pathlib

    cfg_path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "illustrative.json"
    cfg = json.loads(cfg_path.read_text())
    assert cfg["grid"] == {"dim": 1, "n": 256}
    assert cfg["time"] == {"T": 2.0, "steps": 600}
    assert cfg["cost"] == {"id": "illustrative", "coupling": 0.5}
    assert cfg["true_atom"] == 0
