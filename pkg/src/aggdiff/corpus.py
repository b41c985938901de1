"""Seeded random densities for audits and calibration."""

from __future__ import annotations

import numpy as np

from .density import Density, Grid, make_density

GENERATOR_VERSION = "bumps-v1"


def random_bumps(seed: int, grid: Grid, support: float | None = None,
                 n_bumps: tuple[int, int] = (1, 4), decreasing: bool = False) -> Density:
    """Sum of 1-4 symmetric box/triangle bump pairs at +-c, normalised.

    Bumps live inside [-support, support] (default 0.8 * half_width).
    With ``decreasing`` all bumps are centred at 0, giving a radially
    decreasing profile.
    """
    rng = np.random.default_rng(seed)
    L = support if support is not None else 0.8 * grid.half_width
    k = int(rng.integers(n_bumps[0], n_bumps[1] + 1))
    shapes = []
    for _ in range(k):
        w = rng.uniform(0.05, 0.35) * L
        c = 0.0 if decreasing else rng.uniform(0.0, L - w)
        h = rng.uniform(0.2, 1.0)
        tri = bool(rng.integers(0, 2))
        shapes.append((c, w, h, tri))

    def sampler(x):
        out = np.zeros_like(x)
        for c, w, h, tri in shapes:
            for cc in (c, -c) if c > 0 else (c,):
                d = np.abs(x - cc)
                out += h * np.where(d < w, 1.0 - d / w if tri else 1.0, 0.0)
        return out

    rho = make_density(grid, sampler)
    if rho.mass == 0:
        return random_bumps(seed + 10_000_019, grid, support, n_bumps, decreasing)
    return rho


def random_decreasing(seed: int, grid: Grid, support: float | None = None) -> Density:
    """Random radially decreasing density (running minimum of random bumps)."""
    from .density import radially_decreasing_part

    rho = random_bumps(seed, grid, support)
    star = radially_decreasing_part(rho)
    if star.mass <= 0:
        return random_bumps(seed, grid, support, decreasing=True)
    return Density(grid, star.values / star.mass)
