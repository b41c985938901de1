import json

import numpy as np
import pytest

from aggdiff.errors import ConfigError, StabilityError
from aggdiff.density import Grid
from aggdiff.energy import energy
from aggdiff.experiment import (AUDITS, ExperimentConfig, audit_lemmas, box_initial,
                                certificates_passed, dissipation_certificate, fit_rate,
                                initial_density, resolve_output, run_experiment)
from aggdiff.solver import Trajectory
from aggdiff.potential import gamma_rate

BASE = {"grid": {"half_width": 4.0, "n_cells": 64},
        "potential": {"form": "WeaklyConfiningPower", "alpha": 3.0}, "m": 4.0,
        "solver": {"t_end": 2.0, "sample_every": 0.25}}


def config(**over):
    d = json.loads(json.dumps(BASE))
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k].update(v)
        else:
            d[k] = v
    return ExperimentConfig.from_dict(d)


class TestConfig:
    def test_defaults(self):
        cfg = config()
        assert cfg.diagnostics["R1"] == 0.5 and cfg.diagnostics["rate_window"] == 0.5
        assert cfg.initial == {"type": "box", "width": 2.0}

    @pytest.mark.parametrize("diag,needle", [({"R1": 0.7}, "6*R1 < R_dom"),
                                             ({"R2": 1.0}, "R2 > 2*R1"),
                                             ({"R3": 1.5}, "R3 > R2")])
    def test_cross_field(self, diag, needle):
        with pytest.raises(ConfigError, match=needle.replace("*", r"\*")):
            config(diagnostics=diag)

    def test_a4(self):
        with pytest.raises(ConfigError, match="m > max"):
            config(m=3.0)
        assert config(m=3.0, override_assumptions=True).m == 3.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            config(colour="red")

    def test_missing_block(self):
        with pytest.raises(ConfigError, match="grid"):
            ExperimentConfig.from_dict({"potential": BASE["potential"], "m": 4.0})

    def test_unknown_initial(self):
        with pytest.raises(ConfigError, match="initial condition"):
            config(initial={"type": "gaussian"})

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(p)

    def test_output_root(self, monkeypatch, tmp_path):
        monkeypatch.setenv("AGGDIFF_OUTPUT_ROOT", str(tmp_path))
        assert resolve_output(config(output_dir="x")) == tmp_path / "x"
        assert resolve_output(config(output_dir="x"), "/abs") == type(tmp_path)("/abs")


class TestInitial:
    def test_two_bump(self):
        cfg = config(initial={"type": "two_bump", "distance": 2.0, "width": 0.5})
        rho = initial_density(cfg)
        x = rho.x
        assert rho.mass == pytest.approx(1.0, abs=1e-14)
        assert np.all(rho.values[np.abs(x) < 0.7] == 0)
        assert np.array_equal(rho.values, rho.values[::-1])

    def test_overlapping_bumps_rejected(self):
        with pytest.raises(ConfigError):
            initial_density(config(initial={"type": "two_bump", "distance": 0.4, "width": 0.5}))

    def test_perturbed_steady_seeded(self):
        a = initial_density(config(initial={"type": "perturbed_steady"}, seed=3))
        b = initial_density(config(initial={"type": "perturbed_steady"}, seed=3))
        c = initial_density(config(initial={"type": "perturbed_steady"}, seed=4))
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)
        assert a.mass == pytest.approx(1.0, abs=1e-13)


class TestFitRate:
    def test_exact_power_law(self):
        t = np.geomspace(1.0, 1e4, 401) - 1.0
        fit = fit_rate((t, 1.0 + (1 + t) ** -2.0), 1.0, 20.0)
        assert fit.available
        assert fit.p == pytest.approx(2.0, abs=1e-6)
        assert fit.C == pytest.approx(1.0, rel=1e-6)
        assert fit.bound_holds

    def test_exponential_dominated(self):
        t = np.linspace(0, 50, 201)
        for gamma in (0.5, 2.0, 20.0, 1e3):
            assert fit_rate((t, np.exp(-t)), 0.0, gamma).bound_holds

    def test_slower_decay_breaks_envelope(self):
        t = np.linspace(0, 1e4, 401)
        assert not fit_rate((t, (1 + t) ** -0.01), 0.0, 2.0).bound_holds

    def test_insufficient_decay(self):
        t = np.linspace(0, 1, 50)
        fit = fit_rate((t, 1.0 + 0.1 * (1 + t) ** -0.5), 1.0, 20.0)
        assert not fit.available and "decade" in fit.reason
        assert fit.bound_holds

    def test_window_start(self):
        t = np.arange(10.0)
        fit = fit_rate((t, np.exp(-t)), 0.0, 20.0, window=0.5)
        assert fit.window_start == 5.0


class TestRunExperiment:
    def test_minimal_run(self, tmp_path):
        out = run_experiment(config(), tmp_path / "run", plots=False)
        names = {p.name for p in (out / "certificates").iterdir()}
        assert names == {"subcriticality.json", "central_mass.json", "tightness.json",
                         "rate.json", "dissipation_floor.json", "hminus1.json"}
        man = json.loads((out / "manifest.json").read_text())
        assert {c["statement"] for c in man["certificates"].values()} == {
            "A6", "Lemma 3.5", "Theorem 3.2", "Theorem 2.1", "Theorem 2.3", "Proposition A.1"}
        assert man["gamma"] == gamma_rate(3.0, 3.0) == 20.0
        assert certificates_passed(out)
        for f in ("steady.csv", "steady.json", "rate_fit.json", "assumptions.json", "initial.csv"):
            assert (out / f).exists()
        assert not (tmp_path / "run.partial").exists()

    def test_deterministic(self, tmp_path):
        a = run_experiment(config(), tmp_path / "a", plots=False)
        b = run_experiment(config(), tmp_path / "b", plots=False)
        files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
        assert len(files) > 5
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_supercritical_box_flagged(self, tmp_path):
        out = run_experiment(config(initial={"type": "box", "width": 1.0}), tmp_path / "r", plots=False)
        cert = json.loads((out / "certificates" / "subcriticality.json").read_text())
        assert not cert["passed"] and cert["E0"] > cert["threshold"]
        assert not certificates_passed(out)

    def test_failed_marker(self, tmp_path, monkeypatch):
        def blowup(*args, **kw):
            raise StabilityError("negative density after step 7")

        monkeypatch.setattr("aggdiff.experiment.run", blowup)
        with pytest.raises(StabilityError):
            run_experiment(config(), tmp_path / "r", plots=False)
        out = tmp_path / "r"
        assert (out / "FAILED").read_text() == "StabilityError: negative density after step 7\n"
        assert (out / "steady.csv").exists()

    def test_assumption_failure(self, tmp_path):
        cfg = config(m=3.0, override_assumptions=True)
        cfg.override_assumptions = False
        with pytest.raises(ConfigError, match="A4"):
            run_experiment(cfg, tmp_path / "r", plots=False)
        assert (tmp_path / "r" / "FAILED").exists()


class TestDissipationCertificate:
    def test_converged_run_passes(self, tmp_path):
        # by t = 20 the energy gap is round-off; those samples carry no bound
        out = run_experiment(config(solver={"t_end": 20.0, "sample_every": 0.5}), tmp_path / "r",
                             plots=False)
        cert = json.loads((out / "certificates" / "dissipation_floor.json").read_text())
        assert cert["passed"] and cert["n_below_floor"] > 0
        assert 1.0 <= cert["worst_ratio"] < 100

    def test_zero_dissipation_with_gap_fails(self, spec3):
        rho = box_initial(Grid(4.0, 64))
        tr = Trajectory(times=[0.0], snapshots=[rho], energies=[energy(rho, spec3, 4.0)],
                        dissipation=[0.0])
        cert = dissipation_certificate(tr, spec3, 4.0, E_infty=0.0)
        assert not cert["passed"] and cert["worst_ratio"] == 0.0 and cert["n_below_floor"] == 0


class TestAudit:
    def test_small_sweep_passes(self):
        rep = audit_lemmas(config(), range(3))
        assert rep["ok"] and set(rep["lemmas"]) == set(AUDITS)
        assert rep["generator_version"] == "bumps-v1"
        for r in rep["lemmas"].values():
            assert r["failed"] == 0 and r["reproduce"] == []

    def test_exponent_flip_caught(self):
        lam = lambda z: 2.0 * (1 + np.asarray(z)) ** 3.0
        rep = audit_lemmas(config(), range(5), only=["point_mass"], lam=lam, config_path="c.json")
        r = rep["lemmas"]["point_mass"]
        assert not rep["ok"] and r["failed"] == 5
        assert r["reproduce"][0] == "aggdiff audit c.json --seeds 1 --seed-start 0 --only point_mass"

    def test_decreasing_family_vacuous(self):
        mu_dependent = ["css1", "css2", "rcss", "mu_moments", "generalized_hs"]
        rep = audit_lemmas(config(diagnostics={"audit_family": "decreasing"}), range(10),
                           only=mu_dependent)
        assert rep["ok"]
        assert all(rep["lemmas"][n]["all_vacuous"] for n in mu_dependent)

    def test_errors(self):
        with pytest.raises(ConfigError):
            audit_lemmas(config(), [])
        with pytest.raises(ConfigError):
            audit_lemmas(config(), [0], only=["lemma_9_9"])
