"""Piecewise-constant densities with arbitrary breakpoints.

Curves move level-set intervals continuously, so their densities do not live
on the simulation grid.  ``Piecewise`` stores them exactly and evaluates the
energies in closed form (interaction via the second antiderivative of W).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import Density
from .energy import EnergyBreakdown, rect_kernel
from .potential import PotentialSpec


@dataclass(frozen=True)
class Piecewise:
    """rho = values[k] on (edges[k], edges[k+1])."""

    edges: np.ndarray
    values: np.ndarray

    @classmethod
    def from_density(cls, rho: Density) -> "Piecewise":
        return cls(rho.grid.edges.copy(), rho.values.copy())

    @classmethod
    def from_layers(cls, weights, lo, hi) -> "Piecewise":
        """Sum of weight * indicator(lo, hi) over all layer intervals."""
        w = np.asarray(weights, float)
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        keep = (hi > lo) & (w != 0)
        w, lo, hi = w[keep], lo[keep], hi[keep]
        if w.size == 0:
            return cls(np.array([0.0, 0.0]), np.array([0.0]))
        pts = np.concatenate([lo, hi])
        jumps = np.concatenate([w, -w])
        order = np.argsort(pts, kind="stable")
        pts, jumps = pts[order], jumps[order]
        edges, idx = np.unique(pts, return_inverse=True)
        dj = np.bincount(idx, weights=jumps, minlength=edges.size)
        vals = np.cumsum(dj)[:-1]
        # cancellation of +w/-w leaves round-off where the value should vanish
        scale = np.max(np.abs(w))
        vals[np.abs(vals) < 1e-13 * scale] = 0.0
        return cls(edges, np.maximum(vals, 0.0))

    def compact(self) -> "Piecewise":
        """Drop zero-width pieces."""
        wid = np.diff(self.edges)
        keep = wid > 0
        if keep.all():
            return self
        e = np.concatenate([self.edges[:-1][keep], [self.edges[-1]]])
        return Piecewise(e, self.values[keep])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> float:
        return float(np.sum(self.values * self.widths))

    def internal_energy(self, m: float) -> float:
        return float(np.sum(self.values ** m * self.widths) / (m - 1))

    def interaction_energy(self, spec: PotentialSpec) -> float:
        p = self.compact()
        nz = p.values > 0
        lo = p.edges[:-1][nz]
        hi = p.edges[1:][nz]
        v = p.values[nz]
        if v.size == 0:
            return 0.0
        K = rect_kernel(spec, lo, hi, lo, hi)
        return 0.5 * float(v @ K @ v)

    def energy(self, spec: PotentialSpec, m: float) -> EnergyBreakdown:
        return EnergyBreakdown(self.internal_energy(m), self.interaction_energy(spec))

    def moment(self, k: float, a: float = -np.inf, b: float = np.inf) -> float:
        """int_a^b |x|^k rho over pieces clipped to [a, b] (exact)."""
        lo = np.clip(self.edges[:-1], a, b)
        hi = np.clip(self.edges[1:], a, b)
        return float(np.sum(self.values * _abs_power_integral(lo, hi, k)))

    def integral_of_power(self, m: float, a: float = -np.inf, b: float = np.inf) -> float:
        """int_a^b rho^m."""
        lo = np.clip(self.edges[:-1], a, b)
        hi = np.clip(self.edges[1:], a, b)
        return float(np.sum(self.values ** m * (hi - lo)))

    def sample(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        i = np.searchsorted(self.edges, x, side="right") - 1
        ok = (i >= 0) & (i < self.values.size)
        out = np.zeros_like(x)
        out[ok] = self.values[i[ok]]
        return out

    def to_density(self, grid) -> Density:
        return Density(grid, self.cell_averages(grid))

    def cell_averages(self, grid) -> np.ndarray:
        """Project onto a grid by exact cell averaging."""
        ge = grid.edges
        F = np.concatenate([[0.0], np.cumsum(self.values * self.widths)])

        def prim(x):
            i = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.values.size - 1)
            inside = (x >= self.edges[0]) & (x <= self.edges[-1])
            val = F[i] + self.values[i] * (x - self.edges[i])
            return np.where(x < self.edges[0], 0.0, np.where(inside, val, F[-1]))

        return np.diff(prim(ge)) / grid.dx


def _abs_power_integral(lo, hi, k):
    """int_lo^hi |x|^k dx, elementwise (lo <= hi)."""
    def P(x):
        return np.sign(x) * np.abs(x) ** (k + 1) / (k + 1)
    return P(hi) - P(lo)
