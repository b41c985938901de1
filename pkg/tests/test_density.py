import numpy as np
import pytest
from hypothesis import given

from aggdiff.density import (Density, Grid, Interval, LevelSetDecomposition, bump_part,
                             cut_intervals, decompose_level_sets, from_json, h_representation,
                             make_density, mass_in, moment, phi_moment, phi_weight,
                             radially_decreasing_part, read_csv, reconstruct_from_levels,
                             steiner_symmetrize, to_json, write_csv)
from aggdiff.energy import internal_energy
from aggdiff.errors import ConstructionError, DomainError

from conftest import box
from strategies import components_above, decreasing_densities, symmetric_densities


def right_half_density(grid, half):
    """Symmetric density whose cells from the centre outward carry ``half``."""
    n = grid.n_cells // 2
    h = np.zeros(n)
    h[:len(half)] = half
    return Density(grid, np.concatenate([h[::-1], h]))


class TestGrid:
    def test_centers_mirror_exactly(self):
        g = Grid(3.0, 30)
        assert np.array_equal(g.centers, -g.centers[::-1])
        assert g.dx == pytest.approx(0.2)
        assert g.centers[0] == pytest.approx(-3.0 + 0.1)

    def test_rejects_odd_cells(self):
        with pytest.raises(DomainError):
            Grid(1.0, 7)


class TestMakeDensity:
    def test_box_normalization(self):
        rho = box(Grid(4.0, 16))
        assert rho.mass == pytest.approx(1.0, abs=1e-15)
        inside = np.abs(rho.x) < 0.5
        assert np.all(rho.values[inside] == 1.0)
        assert np.all(rho.values[~inside] == 0.0)

    def test_gaussian_mass(self):
        rho = make_density(Grid(8.0, 400), lambda x: np.exp(-x ** 2))
        assert abs(rho.mass - 1.0) <= 1e-10

    def test_negative_sample(self):
        with pytest.raises(DomainError):
            make_density(Grid(4.0, 16), lambda x: -np.ones_like(x))

    def test_zero_mass(self):
        with pytest.raises(ConstructionError):
            make_density(Grid(4.0, 16), lambda x: np.zeros_like(x))

    def test_mirror_averaging_and_outer_cells(self):
        rho = make_density(Grid(2.0, 20), lambda x: 2.0 + x)
        assert rho.symmetry_error() == 0.0
        assert rho.values[0] == 0.0 and rho.values[-1] == 0.0

    def test_declared_symmetric_mismatch(self):
        v = np.zeros(8)
        v[3] = 1.0
        with pytest.raises(ConstructionError):
            Density(Grid(1.0, 8), v)


class TestRadiallyDecreasingPart:
    def test_decreasing_is_fixed(self):
        rho = make_density(Grid(4.0, 64), lambda x: np.maximum(1 - np.abs(x) / 2, 0))
        assert np.array_equal(radially_decreasing_part(rho).values, rho.values)

    def test_running_minimum(self):
        rho = right_half_density(Grid(4.0, 16), [1.0, 0.5, 0.8])
        star = radially_decreasing_part(rho)
        assert star.values[8:11].tolist() == [1.0, 0.5, 0.5]

    def test_annulus_gives_zero(self):
        rho = make_density(Grid(4.0, 32), lambda x: ((np.abs(x) >= 1) & (np.abs(x) <= 2)) * 1.0)
        assert np.all(radially_decreasing_part(rho).values == 0.0)


class TestBumpPart:
    def test_values(self):
        rho = right_half_density(Grid(4.0, 16), [1.0, 0.5, 0.8])
        mu, mu_p, mu_m = bump_part(rho)
        assert mu[8:11] == pytest.approx([0.0, 0.0, 0.3], abs=1e-15)
        assert np.all(mu_p[:8] == 0) and np.all(mu_m[8:] == 0)
        assert np.array_equal(mu_p, mu_m[::-1])

    def test_decreasing_has_no_bump(self):
        rho = make_density(Grid(4.0, 64), lambda x: np.exp(-x ** 2))
        assert np.all(bump_part(rho)[0] == 0.0)

    @given(symmetric_densities())
    def test_split_identities(self, rho):
        star = radially_decreasing_part(rho)
        mu, _, _ = bump_part(rho)
        assert np.all(mu >= 0)
        assert np.all(star.values <= rho.values)
        assert np.array_equal(mu, rho.values - star.values)
        # the sum reproduces rho up to one rounding of the addition
        assert np.all(np.abs(star.values + mu - rho.values) <= np.spacing(rho.values))
        n = rho.grid.n_cells // 2
        assert np.all(np.diff(star.values[n:]) <= 0)
        assert (mu.sum() + star.values.sum()) * rho.dx == pytest.approx(rho.mass, rel=1e-14)


class TestSteinerSymmetrize:
    def test_decreasing_is_fixed(self):
        rho = make_density(Grid(4.0, 64), lambda x: np.maximum(1 - np.abs(x) / 2, 0))
        assert np.array_equal(steiner_symmetrize(rho).values, rho.values)

    def test_annulus_to_box(self):
        g = Grid(4.0, 32)
        rho = make_density(g, lambda x: 0.5 * ((np.abs(x) >= 1) & (np.abs(x) <= 2)), normalize=False)
        sym = steiner_symmetrize(rho)
        expect = 0.5 * (np.abs(g.centers) < 1)
        assert np.array_equal(sym.values, expect)

    @given(symmetric_densities())
    def test_equimeasurable(self, rho):
        sym = steiner_symmetrize(rho)
        # oracle: multisets of cell values agree
        assert np.array_equal(np.sort(sym.values), np.sort(rho.values))
        n = rho.grid.n_cells // 2
        assert np.all(np.diff(sym.values[n:]) <= 0)
        assert sym.mass == pytest.approx(rho.mass, rel=1e-14)
        assert internal_energy(sym, 3.0) == pytest.approx(internal_energy(rho, 3.0), rel=1e-13)


class TestDecomposeLevelSets:
    def test_box_single_band(self):
        dec = decompose_level_sets(box(Grid(4.0, 16)))
        assert dec.levels == (1.0,)
        (iv,) = dec.intervals[0]
        assert (iv.j, iv.c, iv.r) == (0, 0.0, 0.5)

    def test_two_bumps_above_saddle(self):
        g = Grid(4.0, 64)
        rho = make_density(g, lambda x: 0.2 * (np.abs(x) < 2.5) + (np.abs(np.abs(x) - 1.5) < 0.5)
                           + 0.6 * (np.abs(x) < 0.25))
        dec = decompose_level_sets(rho)
        saddle = 0.2
        for h, band in zip((0.0,) + dec.levels[:-1], dec.intervals):
            # oracle: explicit scan for connected components
            assert len(band) == len(components_above(rho.values, h))
            if saddle <= h < rho.values.max() - 0.5:
                assert len(band) >= 3

    def test_indexing_symmetric(self):
        g = Grid(4.0, 64)
        rho = make_density(g, lambda x: (np.abs(np.abs(x) - 1.5) < 0.5) + (np.abs(x) < 0.25))
        for band in decompose_level_sets(rho).intervals:
            by_j = {iv.j: iv for iv in band}
            for j, iv in by_j.items():
                assert by_j[-j].c == pytest.approx(-iv.c, abs=1e-15)
                assert by_j[-j].r == pytest.approx(iv.r, abs=1e-15)

    def test_non_monotone_levels(self):
        with pytest.raises(DomainError):
            decompose_level_sets(box(Grid(4.0, 16)), [0.5, 0.2])

    def test_user_levels_quantize(self):
        g = Grid(4.0, 64)
        rho = make_density(g, lambda x: np.maximum(1 - np.abs(x), 0))
        lv = np.linspace(0.05, rho.values.max(), 20)
        rec = reconstruct_from_levels(decompose_level_sets(rho, lv))
        err = np.sum(np.abs(rec - rho.values)) * g.dx
        assert err <= 2 * g.dx * np.max(np.diff(lv)) * g.n_cells

    @given(symmetric_densities())
    def test_auto_reconstruction_exact(self, rho):
        dec = decompose_level_sets(rho)
        rec = reconstruct_from_levels(dec)
        assert np.sum(np.abs(rec - rho.values)) * rho.dx <= 1e-12
        # admissibility: each band's set lies inside the previous band's set
        for lower, upper in zip(dec.intervals, dec.intervals[1:]):
            for iv in upper:
                assert any(o.lo <= iv.lo and iv.hi <= o.hi for o in lower)


class TestCutIntervals:
    def _dec(self, c, r):
        return LevelSetDecomposition((1.0,), ((Interval(-1, -c, r), Interval(1, c, r)),))

    def test_split(self):
        cut = cut_intervals(self._dec(2.0, 1.0), 2.0)
        pieces = sorted((iv.c, iv.r) for iv in cut.intervals[0] if iv.c > 0)
        assert pieces == [(1.5, 0.5), (2.5, 0.5)]
        assert sorted(iv.j for iv in cut.intervals[0]) == [-2, -1, 1, 2]

    def test_outside_is_identity(self):
        dec = self._dec(2.0, 1.0)
        assert cut_intervals(dec, 5.0) == dec

    def test_idempotent(self):
        once = cut_intervals(self._dec(2.0, 1.0), 2.3)
        assert cut_intervals(once, 2.3) == once

    def test_reconstruction_unchanged(self):
        g = Grid(4.0, 64)
        rho = make_density(g, lambda x: (np.abs(np.abs(x) - 1.5) < 0.75) * 1.0)
        dec = decompose_level_sets(rho)
        assert reconstruct_from_levels(cut_intervals(dec, 1.3)) == pytest.approx(
            reconstruct_from_levels(dec), abs=1e-14)


class TestHRepresentation:
    def test_unit_box(self):
        rep = h_representation(box(Grid(4.0, 16)), 11)
        assert rep.h_values == pytest.approx(rep.s_nodes, abs=1e-15)
        assert rep.h_values[0] == 0 and rep.h_values[-1] == 1.0

    def test_half_box(self):
        rho = box(Grid(4.0, 16), half=1.0)
        rep = h_representation(rho, 11)
        assert rep.h_values == pytest.approx(rep.s_nodes / 2, abs=1e-15)

    @given(symmetric_densities(n_half=24))
    def test_level_size_times_slope(self, rho):
        rep = h_representation(rho, 50)
        s, h = rep.s_nodes, rep.h_values
        # oracle: s(h) = int min(rho, h) evaluated directly
        direct = np.array([np.sum(np.minimum(rho.values, hv)) * rho.dx for hv in h])
        assert direct == pytest.approx(s, abs=1e-12)
        # forward-difference slope against the measured size of {rho > h}
        fd = np.diff(h) / np.diff(s)
        mid = (h[1:] + h[:-1]) / 2
        size = np.array([np.sum(rho.values > hv) * rho.dx for hv in mid])
        assert fd * size == pytest.approx(np.ones_like(fd), rel=1e-9)
        assert rep.level_size()[:-1] * rep.h_prime[:-1] == pytest.approx(1.0, rel=1e-12)

    @given(symmetric_densities(n_half=24))
    def test_convex_monotone(self, rho):
        rep = h_representation(rho, 40)
        assert np.all(np.diff(rep.h_values) >= 0)
        assert np.all(np.diff(rep.h_prime) >= 0)
        assert np.all(np.diff(rep.level_size()) <= 1e-15)
        assert rep.h_values[-1] == pytest.approx(rho.values.max(), rel=1e-14)


class TestMoments:
    def test_first_moment_box(self):
        assert moment(box(Grid(4.0, 16)), 1) == pytest.approx(0.25, abs=1e-15)

    def test_zeroth_moment(self):
        assert moment(box(Grid(4.0, 16)), 0) == pytest.approx(1.0, abs=1e-15)

    def test_second_moment(self):
        # midpoint rule is exact for the box only up to dx^2/12 per unit mass
        g = Grid(4.0, 800)
        assert moment(box(g, half=1.0), 2) == pytest.approx(1 / 3, abs=g.dx ** 2 / 12 + 1e-12)

    def test_negative_order(self):
        with pytest.raises(DomainError):
            moment(box(Grid(4.0, 16)), -1)


class TestPhiMoment:
    def test_vanishes_inside(self):
        assert phi_moment(box(Grid(4.0, 64)), 0.5) == 0.0

    def test_spike_at_6R1(self):
        g = Grid(8.0, 64)
        i = g.n_cells // 2 + 25
        R1 = g.centers[i] / 6  # the spike cell centre sits exactly at 6 R1
        v = np.zeros(g.n_cells)
        v[i] = v[g.n_cells - 1 - i] = 0.5 / g.dx
        rho = Density(g, v)
        assert phi_moment(rho, R1) == pytest.approx(0.5 * R1 ** 2, rel=1e-12)

    def test_branch_continuity(self):
        R1 = 0.7
        x = 6 * R1
        assert phi_weight(np.array([x]), R1)[0] == pytest.approx(R1 * x - 5.5 * R1 ** 2, rel=1e-14)
        assert phi_weight(np.array([x + 1e-9]), R1)[0] == pytest.approx(0.5 * R1 ** 2, rel=1e-7)

    def test_domain_too_small(self):
        with pytest.raises(DomainError):
            phi_moment(box(Grid(2.0, 16)), 0.5)


class TestMassIn:
    def test_partial_cells(self):
        rho = box(Grid(4.0, 16))
        assert mass_in(rho, 0.0, 0.25) == pytest.approx(0.25)
        assert mass_in(rho, -10, 10) == pytest.approx(1.0)


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        rho = make_density(Grid(3.0, 48), lambda x: np.exp(-x ** 2) * (np.abs(x) < 2.5))
        p = tmp_path / "rho.csv"
        write_csv(rho, p)
        assert p.read_text().splitlines()[0] == "x,rho"
        back = read_csv(p)
        assert back.grid == rho.grid
        assert np.array_equal(back.values, rho.values)

    def test_json_round_trip(self):
        rho = box(Grid(4.0, 16))
        back = from_json(to_json(rho))
        assert back.grid == rho.grid and np.array_equal(back.values, rho.values)

    @given(decreasing_densities())
    def test_operations_are_pure(self, rho):
        before = rho.values.copy()
        steiner_symmetrize(rho)
        decompose_level_sets(rho)
        h_representation(rho, 10)
        assert np.array_equal(rho.values, before)
