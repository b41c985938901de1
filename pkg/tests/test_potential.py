import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from aggdiff.density import Grid
from aggdiff.errors import DomainError
from aggdiff.potential import (Lambda_env, PotentialSpec, eval_W, eval_W1, eval_W2, eval_Wprime,
                               fit_envelope, from_config, gamma_rate, lambda_env, limit_W,
                               newtonian_linear, read_tabulated_csv, tabulated, tanh_saturating,
                               validate_assumptions, weakly_confining_power, wprime_sup)

BUILTINS = [
    weakly_confining_power(3.0, m=4.0),
    weakly_confining_power(2.0, m=3.0),
    weakly_confining_power(0.5, m=3.0),
    newtonian_linear(m=3.0),
    tanh_saturating(m=4.0),
]


class TestGammaRate:
    def test_values(self):
        assert gamma_rate(1, 1) == 8
        assert gamma_rate(3, 3) == 20
        assert gamma_rate(2, 1) == 28

    def test_errors(self):
        with pytest.raises(DomainError):
            gamma_rate(1.0, 0.0)
        with pytest.raises(DomainError):
            gamma_rate(1.0, 2.0)


class TestPowerFamily:
    def test_closed_form(self):
        spec = weakly_confining_power(3.0)
        assert eval_W(spec, np.array([0.0]))[0] == 0.0
        assert eval_W(spec, np.array([1.0]))[0] == pytest.approx(0.75, abs=1e-15)
        assert eval_W(spec, np.array([1e6]))[0] == pytest.approx(1.0, abs=1e-11)
        assert limit_W(spec) == (1.0, False)

    def test_strongly_confining_limit(self):
        assert limit_W(weakly_confining_power(0.5))[0] == math.inf
        assert limit_W(newtonian_linear())[0] == math.inf

    def test_envelope_exact(self):
        spec = weakly_confining_power(3.0)
        x = np.linspace(0.1, 10, 100)
        assert eval_Wprime(spec, x) == pytest.approx(lambda_env(spec, x), rel=1e-14)
        assert np.array_equal(lambda_env(spec, x), Lambda_env(spec, x))


class TestEnvelopes:
    def test_wprime_odd_extension_vanishes_at_origin(self):
        assert eval_Wprime(weakly_confining_power(3.0), np.array([0.0]))[0] == 0.0

    def test_lambda_at_zero(self):
        spec = weakly_confining_power(3.0)
        assert lambda_env(spec, 0.0) == spec.c_alpha

    def test_lambda_value(self):
        spec = PotentialSpec("WeaklyConfiningPower", 2.0, 2.0, 1.0, 1.0, None, {"strength": 1.0})
        assert lambda_env(spec, 1.0) == 0.25

    def test_fit_envelope_admissible(self):
        spec = tanh_saturating(2.0)
        x = np.linspace(1e-9, spec.params["x_max"], 5001)
        wp = eval_Wprime(spec, x)
        assert np.all(lambda_env(spec, x) <= wp)
        assert np.all(wp <= Lambda_env(spec, x))

    def test_fit_envelope_tight(self):
        # oracle: minimise W'(x)(1+x)^alpha with scipy on the same range
        spec = tanh_saturating(2.0)
        f = lambda x: float(eval_Wprime(spec, np.array([x]))[0] * (1 + x) ** spec.alpha)
        from scipy.optimize import minimize_scalar
        lo = min(f(1e-12), f(spec.params["x_max"]),
                 minimize_scalar(f, bounds=(0, spec.params["x_max"]), method="bounded").fun)
        c, _ = fit_envelope(spec, spec.params["x_max"])
        assert c == pytest.approx(lo, rel=1e-5)
        assert c <= lo


class TestSymmetry:
    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.form + str(s.alpha))
    def test_even_odd(self, spec):
        x = np.linspace(0, 7, 71)
        assert np.array_equal(eval_W(spec, x), eval_W(spec, -x))
        assert np.array_equal(eval_Wprime(spec, -x), -eval_Wprime(spec, x))
        assert np.array_equal(eval_W1(spec, -x), -eval_W1(spec, x))
        assert np.array_equal(eval_W2(spec, x), eval_W2(spec, -x))

    @given(st.floats(0.01, 20.0), st.sampled_from(range(len(BUILTINS))))
    def test_W_is_integral_of_Wprime(self, x, k):
        spec = BUILTINS[k]
        val, _ = integrate.quad(lambda y: float(eval_Wprime(spec, np.array([y]))[0]), 0, x,
                                epsabs=1e-13, epsrel=1e-12)
        assert eval_W(spec, np.array([x]))[0] == pytest.approx(val, abs=1e-8)

    @given(st.floats(0.01, 10.0), st.sampled_from(range(len(BUILTINS))))
    def test_antiderivatives(self, x, k):
        spec = BUILTINS[k]
        w1, _ = integrate.quad(lambda y: float(eval_W(spec, np.array([y]))[0]), 0, x,
                               epsabs=1e-13, epsrel=1e-12)
        w2, _ = integrate.quad(lambda y: float(eval_W1(spec, np.array([y]))[0]), 0, x,
                               epsabs=1e-13, epsrel=1e-12)
        assert eval_W1(spec, np.array([x]))[0] == pytest.approx(w1, abs=1e-8)
        assert eval_W2(spec, np.array([x]))[0] == pytest.approx(w2, abs=1e-8)

    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.form + str(s.alpha))
    def test_monotone(self, spec):
        x = np.linspace(0, 30, 3001)
        assert np.all(np.diff(eval_W(spec, x)) >= 0)


class TestValidate:
    @pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.form + str(s.alpha))
    def test_builtins_pass(self, spec):
        grid = Grid(4.0, 256)
        rep = validate_assumptions(spec, grid)
        assert rep.passed, rep.failed()
        assert all(c["violation"] >= 0 for c in rep.checks.values())

    def test_a4_strict(self):
        spec = weakly_confining_power(1.0, m=2.0)
        rep = validate_assumptions(spec)
        assert rep.failed() == ["A4"]

    def test_sign_change_located(self):
        x = np.linspace(0, 10, 101)
        wp = (1 + x) ** -2.0
        wp[40:45] = -0.01
        spec = tabulated(x, wp, 2.0, 2.0, c_alpha=1.0, C_beta=1.0, m=3.0)
        rep = validate_assumptions(spec)
        a1 = rep.checks["A1"]
        assert not a1["passed"]
        assert 3.9 <= a1["worst_location"] <= 4.0
        assert a1["violation"] > 0

    def test_envelope_violation_reported(self):
        spec = PotentialSpec("WeaklyConfiningPower", 3.0, 3.0, 3.0, 3.0, 4.0, {"strength": 2.0})
        rep = validate_assumptions(spec)
        assert not rep.checks["A2"]["passed"]
        assert rep.checks["A2"]["violation"] > 0

    def test_sup_norms(self):
        rep = validate_assumptions(weakly_confining_power(3.0, m=4.0))
        # sampling starts one sample spacing (1e-3) away from the origin
        assert rep.wprime_sup == pytest.approx(2.0, rel=1e-2)
        # W''' = 2 * 3 * 4 (1+x)^-5, sampled from x = 0.02 outwards
        assert rep.w3_sup == pytest.approx(24.0 * 1.02 ** -5, rel=1e-2)


class TestTabulated:
    def test_outside_table(self):
        x = np.linspace(0, 5, 51)
        spec = tabulated(x, (1 + x) ** -3.0, 3.0, 3.0)
        with pytest.raises(DomainError):
            eval_W(spec, np.array([6.0]))

    def test_matches_power_family(self):
        x = np.linspace(0, 20, 20001)
        spec = tabulated(x, 2 * (1 + x) ** -3.0, 3.0, 3.0)
        ref = weakly_confining_power(3.0)
        xs = np.array([0.3, 1.0, 4.2])
        assert eval_W(spec, xs) == pytest.approx(eval_W(ref, xs), abs=1e-6)
        lim, extrap = limit_W(spec)
        assert extrap and lim == pytest.approx(1.0, abs=1e-3)

    def test_csv(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("x,Wprime\n0,1\n1,0.5\n2,0.25\n")
        spec = read_tabulated_csv(p, 1.0, 1.0)
        assert eval_Wprime(spec, np.array([0.5]))[0] == pytest.approx(0.75)
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n0,1\n")
        with pytest.raises(DomainError):
            read_tabulated_csv(bad, 1.0, 1.0)

    def test_bad_abscissae(self):
        with pytest.raises(DomainError):
            tabulated([0.0, 2.0, 1.0], [1.0, 0.5, 0.2], 1.0, 1.0)


class TestConfig:
    def test_round_trip(self):
        spec = from_config({"form": "WeaklyConfiningPower", "alpha": 3.0}, m=4.0)
        assert spec == weakly_confining_power(3.0, m=4.0)
        assert spec.to_dict()["params"] == {"strength": 2.0}

    def test_unknown_form(self):
        with pytest.raises(DomainError):
            from_config({"form": "Gaussian"})

    def test_wprime_sup(self):
        assert wprime_sup(newtonian_linear(2.5)) == 2.5
