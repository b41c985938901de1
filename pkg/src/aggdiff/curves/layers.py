"""Layer-interval curves.

A curve is stored as a flat list of layer intervals: interval k carries the
height weight ``w[k]`` (the thickness of its band in h) and the interval
``[c[k] - r[k], c[k] + r[k]]``.  Intervals that belong to the same
super-level set share a ``group`` id; only those may collide.

At t = 0 every point of interval k moves with the affine velocity
``dc[k] + (x - c[k]) * dr[k] / r[k]``, which gives the flux J = sum w * vel
and the exact transport cost int J^2 / rho.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..density import LevelSetDecomposition
from ..errors import CurveDomainError
from ..piecewise import Piecewise


@dataclass(frozen=True)
class LayerData:
    w: np.ndarray
    c: np.ndarray
    r: np.ndarray
    j: np.ndarray
    group: np.ndarray

    @classmethod
    def from_decomposition(cls, dec: LevelSetDecomposition) -> "LayerData":
        w, c, r, j, g = [], [], [], [], []
        for k, (dh, band) in enumerate(zip(dec.thickness, dec.intervals)):
            for iv in band:
                w.append(dh)
                c.append(iv.c)
                r.append(iv.r)
                j.append(iv.j)
                g.append(k)
        return cls(np.asarray(w, float), np.asarray(c, float), np.asarray(r, float),
                   np.asarray(j, int), np.asarray(g, int))

    @property
    def lo(self) -> np.ndarray:
        return self.c - self.r

    @property
    def hi(self) -> np.ndarray:
        return self.c + self.r

    def piecewise(self) -> Piecewise:
        return Piecewise.from_layers(self.w, self.lo, self.hi)

    def __len__(self):
        return self.w.size


class LayerCurve:
    """t -> LayerData with known initial velocities.

    ``motion(t)`` returns (w, c, r) at time t.  ``dc`` and ``dr`` are the
    t-derivatives of c and r at t = 0 (``dw`` of the weights, if they vary,
    does not enter the velocity field: see ``cost``).
    """

    def __init__(self, base: LayerData, motion: Callable, dc, dr, t_max: float = np.inf,
                 name: str = "curve"):
        self.base = base
        self.motion = motion
        self.dc = np.asarray(dc, float)
        self.dr = np.asarray(dr, float)
        self.t_max = t_max
        self.name = name
        self.window, self._first = self._window()

    # -- validity ---------------------------------------------------------

    def _window(self):
        b = self.base
        lo_v = self.dc - self.dr
        hi_v = self.dc + self.dr
        best, first = self.t_max, None
        for g in np.unique(b.group):
            idx = np.flatnonzero(b.group == g)
            if idx.size < 2:
                continue
            idx = idx[np.argsort(b.c[idx], kind="stable")]
            left, right = idx[:-1], idx[1:]
            gap = b.lo[right] - b.hi[left]
            closing = hi_v[left] - lo_v[right]
            hit = closing > 0
            if not hit.any():
                continue
            times = np.where(hit, np.maximum(gap, 0.0) / np.where(hit, closing, 1.0), np.inf)
            k = int(np.argmin(times))
            if times[k] < best:
                best = float(times[k])
                first = (int(g), int(b.j[left[k]]), int(b.j[right[k]]))
        return best, first

    def _describe(self) -> str:
        if self._first is None:
            return f"the curve is only defined up to t = {self.t_max:g}"
        g, a, c = self._first
        return f"intervals j={a} and j={c} of level set {g} collide at t = {self.window:.6g}"

    def at(self, t: float) -> LayerData:
        if t < 0:
            raise CurveDomainError("curves are evaluated for t >= 0")
        if t > self.window:
            raise CurveDomainError(f"{self.name}: t = {t:.6g} is past the validity window; "
                                   + self._describe())
        if t == 0:
            return self.base
        w, c, r = self.motion(t)
        b = self.base
        return LayerData(np.asarray(w, float), np.asarray(c, float), np.asarray(r, float), b.j, b.group)

    def state(self, t: float) -> Piecewise:
        return self.at(t).piecewise()

    # -- transport --------------------------------------------------------

    def velocity_coefficients(self):
        """(a, b) with point velocity a + b x on every layer interval."""
        b = self.base
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(b.r > 0, self.dr / b.r, 0.0)
        return self.dc - b.c * slope, slope

    def cost(self) -> float:
        a, s = self.velocity_coefficients()
        return flux_cost(self.base.w, self.base.lo, self.base.hi, a, s)

    def translation_cost_bound(self) -> float:
        """int sum_j |I_j| |c_j'|^2 dh (the Jensen bound for translations)."""
        b = self.base
        return float(np.sum(b.w * 2 * b.r * self.dc ** 2))

    @property
    def moving(self) -> np.ndarray:
        return (self.dc != 0) | (self.dr != 0)


def flux_cost(w, lo, hi, a, b) -> float:
    """Exact int J^2 / rho for rho = sum w 1_[lo,hi], J = sum w (a + b x) 1_[lo,hi]."""
    w = np.asarray(w, float)
    keep = (np.asarray(hi) > np.asarray(lo)) & (w > 0)
    if not keep.any():
        return 0.0
    w, lo, hi, a, b = (np.asarray(v, float)[keep] for v in (w, lo, hi, a, b))
    pts = np.concatenate([lo, hi])
    edges, inv = np.unique(pts, return_inverse=True)
    n = edges.size

    def cum(vals):
        d = np.bincount(inv, weights=np.concatenate([vals, -vals]), minlength=n)
        return np.cumsum(d)[:-1]

    rho = cum(w)
    A = cum(w * a)
    B = cum(w * b)
    p, q = edges[:-1], edges[1:]
    ok = rho > 1e-13 * w.max()
    num = A * A * (q - p) + A * B * (q * q - p * p) + B * B * (q ** 3 - p ** 3) / 3.0
    return float(np.sum(num[ok] / rho[ok]))
