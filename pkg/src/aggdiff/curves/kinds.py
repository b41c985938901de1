"""Curve kinds and their construction from a density."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..density import Density, cut_intervals, decompose_level_sets, level_profile
from ..errors import DomainError
from ..piecewise import Piecewise
from .layers import LayerCurve, LayerData


@dataclass(frozen=True)
class CSS1:
    """Every off-centre interval moves toward 0 at unit speed."""


@dataclass(frozen=True)
class CSS2:
    """Intervals (cut at R2, then R3) with centre in [R1, R2] move at unit speed."""

    R1: float
    R2: float
    R3: float | None = None

    def __post_init__(self):
        if not (self.R1 > 0 and self.R2 > 2 * self.R1):
            raise DomainError(f"CSS2 needs R2 > 2 R1 > 0 (got R1={self.R1}, R2={self.R2})")
        if self.R3 is not None and not self.R3 > self.R2:
            raise DomainError(f"CSS2 needs R3 > R2 (got R3={self.R3}, R2={self.R2})")


@dataclass(frozen=True)
class RCSS:
    """Centres contract as c_j e^{-t}."""


@dataclass(frozen=True)
class LocalCompression:
    """Push-forward by v(x) = -(x - r)/(4 R1) on [r, 6 R1], odd in x."""

    R1: float
    r: float

    def __post_init__(self):
        if not self.R1 > 0:
            raise DomainError("LocalCompression needs R1 > 0")
        if not 2 * self.R1 <= self.r <= 4 * self.R1:
            raise DomainError(f"LocalCompression needs 2 R1 <= r <= 4 R1 (got r={self.r}, R1={self.R1})")


@dataclass(frozen=True)
class HsLinear:
    """h_t = (1 - t) h_0 + t h_1 between radially decreasing densities."""

    target: Density = field(compare=False)


@dataclass(frozen=True)
class GeneralizedHsLinear:
    """The h(s)-linear curve carried by the level-set intervals of a general
    density.  M defaults to ||W'||_inf / lambda(2R) when built by the analysis."""

    target: Density = field(compare=False)
    M: float = 1.0

    def __post_init__(self):
        if not self.M >= 1:
            raise DomainError("GeneralizedHsLinear needs M >= 1")


CurveKind = CSS1 | CSS2 | RCSS | LocalCompression | HsLinear | GeneralizedHsLinear


# ---------------------------------------------------------------------------
# CSS family


def _translation_curve(layers: LayerData, dc: np.ndarray, name: str) -> LayerCurve:
    def motion(t):
        return layers.w, layers.c + dc * t, layers.r
    return LayerCurve(layers, motion, dc, np.zeros_like(dc), name=name)


def css1_curve(rho: Density) -> LayerCurve:
    layers = LayerData.from_decomposition(decompose_level_sets(rho))
    return _translation_curve(layers, -np.sign(layers.j).astype(float), "CSS1")


def css2_layers(rho: Density, kind: CSS2) -> LayerData:
    dec = cut_intervals(decompose_level_sets(rho), kind.R2)
    if kind.R3 is not None:
        dec = cut_intervals(dec, kind.R3)
    return LayerData.from_decomposition(dec)


def css2_moving(layers: LayerData, kind: CSS2) -> np.ndarray:
    ac = np.abs(layers.c)
    return (layers.j != 0) & (ac >= kind.R1) & (ac <= kind.R2)


def css2_curve(rho: Density, kind: CSS2) -> LayerCurve:
    layers = css2_layers(rho, kind)
    dc = np.where(css2_moving(layers, kind), -np.sign(layers.j), 0).astype(float)
    return _translation_curve(layers, dc, "CSS2")


def rcss_curve(rho: Density) -> LayerCurve:
    layers = LayerData.from_decomposition(decompose_level_sets(rho))
    off = layers.j != 0

    def motion(t):
        return layers.w, np.where(off, layers.c * np.exp(-t), layers.c), layers.r
    dc = np.where(off, -layers.c, 0.0)
    return LayerCurve(layers, motion, dc, np.zeros_like(dc), name="RCSS")


# ---------------------------------------------------------------------------
# local compression


class CompressionCurve:
    """Exact push-forward of a piecewise-constant density under the
    compression velocity; [r, 6 R1] shrinks toward r by the factor
    e^{-t/(4 R1)} and its density grows by the inverse factor."""

    def __init__(self, rho: Density, kind: LocalCompression):
        if not 6 * kind.R1 <= rho.grid.half_width:
            raise DomainError(f"6 R1 = {6 * kind.R1} exceeds the domain half width {rho.grid.half_width}")
        self.kind = kind
        self.base = Piecewise.from_density(rho)
        self.window = np.inf
        self.name = "LocalCompression"
        a, b = kind.r, 6 * kind.R1
        e = self.base.edges
        cuts = np.array([-b, -a, a, b])
        edges = np.union1d(e, cuts[(cuts > e[0]) & (cuts < e[-1])])
        mid = 0.5 * (edges[:-1] + edges[1:])
        self._edges = edges
        self._vals = self.base.sample(mid)
        self._inner = (np.abs(mid) > a) & (np.abs(mid) < b)

    def state(self, t: float) -> Piecewise:
        if t < 0:
            raise DomainError("curves are evaluated for t >= 0")
        if t == 0:
            return self.base
        k = self.kind
        a = k.r
        f = np.exp(-t / (4 * k.R1))
        e = self._edges
        moved = np.sign(e) * (a + (np.abs(e) - a) * f)
        inner = self._inner
        # endpoints move piece by piece: the edge at +-6R1 is shared with an
        # outer piece that stays put, and the vacated strip stays empty
        lo = np.where(inner, moved[:-1], e[:-1])
        hi = np.where(inner, moved[1:], e[1:])
        vals = np.where(inner, self._vals / f, self._vals)
        return Piecewise.from_layers(vals, lo, hi)

    def cost(self) -> float:
        """2 int_r^{6R1} ((x - r)/(4 R1))^2 rho dx, exactly."""
        k = self.kind
        a, b = k.r, 6 * k.R1
        e, v = self.base.edges, self.base.values
        lo = np.clip(e[:-1], a, b) - a
        hi = np.clip(e[1:], a, b) - a
        return float(2 * np.sum(v * (hi ** 3 - lo ** 3) / 3.0) / (4 * k.R1) ** 2)


# ---------------------------------------------------------------------------
# h(s)-linear curves


def _require_decreasing(rho: Density, what: str):
    v = rho.values
    half = v[v.size // 2:]
    if np.any(np.diff(half) > 0) or rho.symmetry_error() > 0:
        raise DomainError(f"{what} must be symmetric and radially decreasing")


def _merged_bands(rho0: Density, rho1: Density):
    """Common s-partition of the two layer-cake profiles.

    Returns (s_lo, s_hi, band0, g0, g1): on [s_lo, s_hi] the density rho0 is
    in its band ``band0`` with h0' = g0, and h1' = g1.
    """
    t0, size0, sb0 = level_profile(rho0.values, rho0.dx)
    t1, size1, sb1 = level_profile(rho1.values, rho1.dx)
    m0, m1 = sb0[-1], sb1[-1]
    if abs(m0 - m1) > 1e-9 * max(m0, m1):
        raise DomainError(f"h(s)-linear curves need equal masses (got {m0:.12g} and {m1:.12g})")
    sb1 = sb1 * (m0 / m1)
    s = np.unique(np.concatenate([[0.0], sb0, sb1[:-1]]))
    s = s[s <= m0]
    s_lo, s_hi = s[:-1], s[1:]
    keep = s_hi > s_lo
    s_lo, s_hi = s_lo[keep], s_hi[keep]
    mid = 0.5 * (s_lo + s_hi)
    b0 = np.minimum(np.searchsorted(sb0, mid), sb0.size - 1)
    b1 = np.minimum(np.searchsorted(sb1, mid), sb1.size - 1)
    return s_lo, s_hi, b0, 1.0 / size0[b0], 1.0 / size1[b1]


class HsCurve(LayerCurve):
    """Layer curve whose weights g_t ds follow h_t' = (1 - t) g0 + t g1."""

    def __init__(self, base, motion, dc, dr, g0, g1, ds, name):
        self.g0, self.g1, self.ds = g0, g1, ds
        super().__init__(base, motion, dc, dr, t_max=1.0, name=name)

    def shape_integrals(self, t: float = 0.0) -> dict:
        """int (d_t h')^2 / h_t'^4 ds and int (d_t h')^2 / (h_t'^3 h_1') ds over the sub-bands."""
        gs = (1 - t) * self.g0 + t * self.g1
        dg = self.g1 - self.g0
        sub = np.unique(self.base.group, return_index=True)[1]
        gsu, dgu, g1u, dsu = gs[sub], dg[sub], self.g1[sub], self.ds[sub]
        return {"convexity": float(np.sum(dsu * dgu ** 2 / gsu ** 4)),
                "cost": float(np.sum(dsu * dgu ** 2 / (gsu ** 3 * g1u)))}


def hs_linear_curve(rho0: Density, rho1: Density) -> HsCurve:
    _require_decreasing(rho0, "rho0")
    _require_decreasing(rho1, "rho1")
    s_lo, s_hi, _, g0, g1 = _merged_bands(rho0, rho1)
    ds = s_hi - s_lo
    n = ds.size
    grp = np.arange(n)
    base = LayerData(g0 * ds, np.zeros(n), 0.5 / g0, np.zeros(n, int), grp)

    def motion(t):
        g = (1 - t) * g0 + t * g1
        return g * ds, np.zeros(n), 0.5 / g

    # r = 1/(2 g) so dr/dt = -(g1 - g0)/(2 g0^2)
    dr = -(g1 - g0) / (2 * g0 ** 2)
    return HsCurve(base, motion, np.zeros(n), dr, g0, g1, ds, "HsLinear")


def _stacked_centres(c, r, j):
    """Centres of the symmetrised intervals I_j^#, stacked outward from I_0
    in the order of the original centres."""
    out = np.zeros_like(c)
    r0 = r[j == 0].sum()
    pos = np.flatnonzero(j > 0)
    pos = pos[np.argsort(c[pos], kind="stable")]
    run = r0
    for k in pos:
        out[k] = run + r[k]
        run += 2 * r[k]
    return out


def generalized_hs_curve(rho0: Density, rho1: Density, M: float) -> HsCurve:
    _require_decreasing(rho1, "target")
    dec = decompose_level_sets(rho0)
    s_lo, s_hi, b0, g0s, g1s = _merged_bands(rho0, rho1)
    ds_sub = s_hi - s_lo
    w, c, r, j, grp, g0, g1, ds, csharp = ([] for _ in range(9))
    for k in range(ds_sub.size):
        band = dec.intervals[b0[k]]
        cc = np.array([iv.c for iv in band])
        rr = np.array([iv.r for iv in band])
        jj = np.array([iv.j for iv in band])
        cs = _stacked_centres(cc, rr, jj)
        cs[jj < 0] = -_stacked_centres(-cc, rr, -jj)[jj < 0]
        nb = cc.size
        w.append(np.full(nb, g0s[k] * ds_sub[k]))
        c.append(cc)
        r.append(rr)
        j.append(jj)
        grp.append(np.full(nb, k))
        g0.append(np.full(nb, g0s[k]))
        g1.append(np.full(nb, g1s[k]))
        ds.append(np.full(nb, ds_sub[k]))
        csharp.append(cs)
    w, c, r, g0, g1, ds, csharp = (np.concatenate(a).astype(float) for a in (w, c, r, g0, g1, ds, csharp))
    j, grp = np.concatenate(j).astype(int), np.concatenate(grp).astype(int)
    base = LayerData(w, c, r, j, grp)
    sgn = np.sign(j).astype(float)
    compress = g1 - g0 > 0
    centre = j == 0
    ac, acs = np.abs(c), np.abs(csharp)

    def motion(t):
        g = (1 - t) * g0 + t * g1
        f = g0 / g
        rt = r * f
        comp = ac - M * (acs - acs * f) - (M - 1) * (r - rt)
        expand = ac + (r - rt)
        ct = np.where(centre, c, sgn * np.where(compress, comp, expand))
        return g * ds, ct, rt

    sigma = -(g1 - g0) / g0  # d/dt (g0 / g_t) at t = 0
    dr = r * sigma
    dcomp = sigma * (M * acs + (M - 1) * r)
    dexp = -r * sigma
    dc = np.where(centre, 0.0, sgn * np.where(compress, dcomp, dexp))
    return HsCurve(base, motion, dc, dr, g0, g1, ds, "GeneralizedHsLinear")


# ---------------------------------------------------------------------------


def build_curve(rho: Density, kind):
    if isinstance(kind, CSS1):
        return css1_curve(rho)
    if isinstance(kind, CSS2):
        return css2_curve(rho, kind)
    if isinstance(kind, RCSS):
        return rcss_curve(rho)
    if isinstance(kind, LocalCompression):
        return CompressionCurve(rho, kind)
    if isinstance(kind, HsLinear):
        return hs_linear_curve(rho, kind.target)
    if isinstance(kind, GeneralizedHsLinear):
        return generalized_hs_curve(rho, kind.target, kind.M)
    raise DomainError(f"unknown curve kind {kind!r}")


def evaluate_curve(rho: Density, kind, t: float) -> Piecewise:
    """rho_t as an exact piecewise-constant density (``.to_density(grid)``
    projects it back onto a grid)."""
    return build_curve(rho, kind).state(t)


def curve_cost(rho: Density, kind) -> dict:
    """Exact int v^2 rho at t = 0 and the matching upper bound."""
    curve = build_curve(rho, kind)
    cost = curve.cost()
    if isinstance(kind, LocalCompression):
        bound = 1.0 * rho.mass
    elif isinstance(kind, (HsLinear, GeneralizedHsLinear)):
        bound = None
    else:
        bound = curve.translation_cost_bound()
    out = {"cost": cost, "bound": bound}
    if isinstance(kind, HsLinear):
        R = max(rho.support_radius(), kind.target.support_radius())
        out["bound"] = float(R * kind.target.values.max() / 6.0 * curve.shape_integrals()["cost"])
    return out
