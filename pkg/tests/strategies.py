"""Hypothesis strategies and brute-force oracles shared by the tests."""

import numpy as np
from hypothesis import strategies as st

from aggdiff.density import Density, Grid


@st.composite
def symmetric_densities(draw, n_half=16, half_width=4.0, normalize=True):
    """Symmetric densities with random right-half values (outer cell 0).

    Values are drawn from a small set so that plateaus and ties occur."""
    vals = draw(st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0, 1.3]),
                         min_size=n_half - 1, max_size=n_half - 1))
    half = np.array(vals + [0.0])
    if half.sum() == 0:
        half[0] = 1.0
    v = np.concatenate([half[::-1], half])
    grid = Grid(half_width, 2 * n_half)
    if normalize:
        v = v / (v.sum() * grid.dx)
    return Density(grid, v)


@st.composite
def decreasing_densities(draw, n_half=16, half_width=4.0):
    rho = draw(symmetric_densities(n_half, half_width))
    n = rho.grid.n_cells // 2
    half = np.sort(rho.values[n:])[::-1]
    half[-1] = 0.0
    v = np.concatenate([half[::-1], half])
    return Density(rho.grid, v / (v.sum() * rho.grid.dx))


def components_above(values, h):
    """Maximal runs of cells with value > h, by an explicit scan."""
    runs, start = [], None
    for i, v in enumerate(values):
        if v > h and start is None:
            start = i
        if v <= h and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(values) - 1))
    return runs


def quad_double(f, a, b, n=4000):
    """Midpoint-rule double integral of f(x, y) over [a, b]^2 at resolution n."""
    x = a + (np.arange(n) + 0.5) * (b - a) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    return float(np.sum(f(X, Y)) * ((b - a) / n) ** 2)
