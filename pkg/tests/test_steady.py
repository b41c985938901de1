import math

import numpy as np
import pytest

from aggdiff.density import Density, Grid, make_density, mass_in, read_csv
from aggdiff.energy import bilinear_interaction
from aggdiff.errors import CertificateError, ConvergenceError, DomainError
from aggdiff.potential import newtonian_linear, tanh_saturating, weakly_confining_power
from aggdiff.solver import SolverConfig, Trajectory, run, stable_dt, step
from aggdiff.steady import (cached_steady, central_mass_bound, compute_steady,
                            euler_lagrange_spread, steady_energy_by_mass, steady_regularity_report,
                            subcritical_check, write_steady)

from conftest import box

GRID = Grid(4.0, 128)


class TestComputeSteady:
    def test_methods_agree(self, spec3):
        tol = 1e-7
        a = compute_steady(1.0, spec3, 4.0, tol, GRID, "fixed_point")
        b = compute_steady(1.0, spec3, 4.0, tol, GRID, "gradient_flow")
        l1 = np.sum(np.abs(a.density.values - b.density.values)) * GRID.dx
        assert l1 <= 10 * tol
        assert a.mass == pytest.approx(1.0, abs=1e-12)

    def test_euler_lagrange(self, steady128, spec3):
        assert euler_lagrange_spread(steady128, spec3, 4.0) <= 1e-10
        assert steady128.residual <= 1e-12

    def test_radially_decreasing(self, steady128):
        v = steady128.density.values
        assert np.array_equal(v, v[::-1])
        assert np.all(np.diff(v[v.size // 2:]) <= 0)

    def test_fixed_point_of_solver(self, steady128, spec3):
        rho = steady128.density
        dt = stable_dt(rho, spec3, 4.0, SolverConfig())
        assert np.max(np.abs(step(rho, spec3, 4.0, dt).values - rho.values)) <= 1e-8 * dt

    @pytest.mark.parametrize("delta", [0.1, 0.5, 1.0])
    def test_mass_scaling(self, spec3, delta):
        s = 0.5
        E_s = compute_steady(s, spec3, 4.0, 1e-9, GRID).energy.total
        E_big = compute_steady((1 + delta) * s, spec3, 4.0, 1e-9, GRID).energy.total
        assert E_big <= max((1 + delta) ** 4, (1 + delta) ** 2) * E_s

    def test_energy_increasing_in_mass(self, spec3):
        E = steady_energy_by_mass([0.25, 0.5, 0.75, 1.0, 1.25], spec3, 4.0, GRID)
        assert np.all(np.diff(E) > 0)

    def test_uniqueness_probe(self, spec3):
        tol = 1e-6
        inits = [box(GRID, half=0.5), box(GRID, half=1.5),
                 make_density(GRID, lambda y: np.exp(-y * y) * (np.abs(y) < 2)),
                 make_density(GRID, lambda y: ((np.abs(y) > 0.5) & (np.abs(y) < 1.5)) * 1.0),
                 make_density(GRID, lambda y: np.maximum(1 - np.abs(y), 0))]
        states = [compute_steady(1.0, spec3, 4.0, tol, GRID, "gradient_flow", initial=r).density.values
                  for r in inits]
        for i in range(5):
            for j in range(i):
                assert np.sum(np.abs(states[i] - states[j])) * GRID.dx <= 20 * tol

    def test_errors(self, spec3):
        with pytest.raises(DomainError):
            compute_steady(1.0, spec3, 4.0, 0.0, GRID)
        with pytest.raises(DomainError):
            compute_steady(-1.0, spec3, 4.0, 1e-6, GRID)
        with pytest.raises(DomainError):
            compute_steady(1.0, spec3, 4.0, 1e-6, GRID, "newton")
        with pytest.raises(ConvergenceError) as info:
            compute_steady(1.0, spec3, 4.0, 1e-12, GRID, max_iter=3)
        assert len(info.value.history) == 3

    def test_cache(self, spec3):
        a = cached_steady(1.0, spec3, 4.0, 1e-8, GRID)
        assert cached_steady(1.0, spec3, 4.0, 1e-8, GRID) is a

    def test_write(self, steady128, tmp_path):
        write_steady(steady128, tmp_path / "s.csv", tmp_path / "s.json")
        back = read_csv(tmp_path / "s.csv", half_width=4.0)
        assert np.array_equal(back.values, steady128.density.values)
        import json
        meta = json.loads((tmp_path / "s.json").read_text())
        assert set(meta) >= {"mass", "energy", "residual", "method"}


class TestSubcritical:
    def test_strongly_confining(self):
        out = subcritical_check(box(GRID), newtonian_linear(), 3.0)
        assert out["pass"] and out["margin"] == math.inf

    def test_steady_state_passes(self, steady128, spec3):
        out = subcritical_check(steady128.density, spec3, 4.0)
        assert out["pass"] and out["margin"] > 0

    def test_separated_halves_marginal(self, spec3):
        # two copies of rho_{inf,1/2}: margin = lim W / 4 - cross interaction
        g = Grid(12.0, 384)
        half = cached_steady(0.5, spec3, 4.0, 1e-8, g).density.values
        margins = []
        for k in (64, 96, 128):
            left, right = np.roll(half, -k), np.roll(half, k)
            rho = Density(g, left + right)
            out = subcritical_check(rho, spec3, 4.0)
            cross = bilinear_interaction(Density(g, left, symmetric=False),
                                         Density(g, right, symmetric=False), spec3)
            assert out["margin"] == pytest.approx(0.25 - cross, abs=1e-12)
            margins.append(out["margin"])
        assert margins[0] > margins[1] > margins[2] > 0
        assert margins[2] < 0.01

    def test_heavy_spread_fails(self, spec3):
        g = Grid(12.0, 384)
        rho = make_density(g, lambda x: ((np.abs(x) > 8) & (np.abs(x) < 10)) * 1.0)
        assert not subcritical_check(rho, spec3, 4.0)["pass"]


class TestCentralMass:
    def test_constant_trajectory(self, steady128):
        tr = Trajectory(snapshots=[steady128.density] * 3)
        assert central_mass_bound(tr, 0.5) == mass_in(steady128.density, 0.0, 0.5)

    def test_zero_radius(self, steady128):
        with pytest.raises(CertificateError):
            central_mass_bound(Trajectory(snapshots=[steady128.density]), 0.0)

    def test_two_bump_run(self, spec3):
        rho = make_density(GRID, lambda x: (np.abs(np.abs(x) - 1.0) < 0.5) * 1.0)
        tr = run(rho, spec3, 4.0, SolverConfig(t_end=5.0, sample_every=0.5))
        # mass starts off-centre, so the minimum is taken at t = 0
        assert central_mass_bound(tr, 1.0) == pytest.approx(0.25, abs=1e-12)
        with pytest.raises(CertificateError):
            central_mass_bound(tr, 0.5)


class TestRegularity:
    @pytest.mark.parametrize("m", [3.0, 4.0, 5.0])
    @pytest.mark.parametrize("spec", [weakly_confining_power(3.0), weakly_confining_power(2.0),
                                      newtonian_linear(), tanh_saturating()],
                             ids=["power3", "power2", "linear", "tanh"])
    def test_finite(self, spec, m):
        ss = compute_steady(1.0, spec, m, 1e-8, GRID)
        rep = steady_regularity_report(ss)
        assert np.isfinite(rep["sup_norm"]) and np.isfinite(rep["second_deriv_at_0"])
        assert rep["first_deriv_at_0"] == 0.0
        assert rep["second_deriv_at_0"] <= 0

    def test_sup_below_trajectory_max(self, steady128, spec3):
        tr = run(box(GRID, half=0.25), spec3, 4.0, SolverConfig(t_end=20.0, sample_every=1.0))
        traj_max = max(float(s.values.max()) for s in tr.snapshots)
        assert steady_regularity_report(steady128)["sup_norm"] <= traj_max
