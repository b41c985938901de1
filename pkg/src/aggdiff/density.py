"""Cell-averaged densities on a symmetric uniform grid and the structural
decompositions built from them (radially decreasing part, bump part,
decreasing rearrangement, layer-cake intervals, h(s)-representation)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, DomainError

SYM_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on [-half_width, half_width]."""

    half_width: float
    n_cells: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError("half_width must be positive")
        if self.n_cells <= 0 or self.n_cells % 2:
            raise DomainError("n_cells must be a positive even integer")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        # built from signed half-integer offsets so that x[n-1-i] == -x[i] bitwise
        k = np.arange(self.n_cells) - (self.n_cells - 1) / 2.0
        return k * self.dx

    @property
    def edges(self) -> np.ndarray:
        k = np.arange(self.n_cells + 1) - self.n_cells / 2.0
        return k * self.dx

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "n_cells": self.n_cells}


class Density:
    """Nonnegative cell averages on a Grid.

    Values are stored in a read-only array.  ``symmetric`` records whether the
    density was declared mirror-symmetric; in that case the symmetry is
    asserted at construction.
    """

    __slots__ = ("grid", "values", "mass", "symmetric")

    def __init__(self, grid: Grid, values, symmetric: bool = True, check_support: bool = True):
        v = np.array(values, dtype=float)
        if v.shape != (grid.n_cells,):
            raise ConstructionError(f"expected {grid.n_cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConstructionError("density values must be finite")
        if np.any(v < 0):
            raise DomainError(f"negative density value {v.min()}")
        if check_support and (v[0] != 0 or v[-1] != 0):
            raise ConstructionError("outermost cells must carry value 0 (compact support)")
        if symmetric:
            err = np.max(np.abs(v - v[::-1])) if v.size else 0.0
            if err > SYM_TOL * max(1.0, float(v.max(initial=0.0))):
                raise ConstructionError(f"density declared symmetric but mirror error is {err}")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.mass = float(v.sum() * grid.dx)
        self.symmetric = symmetric

    @property
    def x(self) -> np.ndarray:
        return self.grid.centers

    @property
    def dx(self) -> float:
        return self.grid.dx

    def with_values(self, values, symmetric: bool | None = None) -> "Density":
        return Density(self.grid, values, self.symmetric if symmetric is None else symmetric)

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.values - self.values[::-1])))

    def support_radius(self, rel: float = 1e-12) -> float:
        """Smallest R with all cells of value > rel*max inside [-R, R]."""
        v = self.values
        thr = rel * float(v.max(initial=0.0))
        idx = np.flatnonzero(v > thr)
        if idx.size == 0:
            return 0.0
        e = self.grid.edges
        return float(max(-e[idx[0]], e[idx[-1] + 1]))

    def __repr__(self):
        return f"Density(n_cells={self.grid.n_cells}, half_width={self.grid.half_width}, mass={self.mass:.12g})"


def make_density(grid: Grid, sampler: Callable[[np.ndarray], np.ndarray],
                 normalize: bool = True) -> Density:
    """Sample ``sampler`` at cell centres, mirror-average, zero the two
    outermost cells and optionally normalise to unit mass."""
    x = grid.centers
    v = np.asarray(sampler(x), dtype=float) * np.ones_like(x)
    if np.any(~np.isfinite(v)):
        raise DomainError("sampler returned non-finite values")
    if np.any(v < 0):
        raise DomainError(f"sampler returned negative value {v.min()} at x={x[np.argmin(v)]}")
    v = (v + v[::-1]) / 2.0
    v[0] = v[-1] = 0.0
    if normalize:
        mass = v.sum() * grid.dx
        if not mass > 0:
            raise ConstructionError("cannot normalise a density of zero mass")
        v = v / mass
    return Density(grid, v)


def _require_symmetric(rho: Density):
    if rho.symmetry_error() > SYM_TOL * max(1.0, float(rho.values.max(initial=0.0))):
        raise DomainError("operation requires a mirror-symmetric density")


def _right_half(v: np.ndarray) -> np.ndarray:
    return v[v.size // 2:]


def _from_right_half(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half[::-1], half])


def radially_decreasing_part(rho: Density) -> Density:
    """rho*(x) = min over 0 <= y <= x of rho(y), taken outward on each half."""
    _require_symmetric(rho)
    half = np.minimum.accumulate(_right_half(rho.values))
    return Density(rho.grid, _from_right_half(half))


def bump_part(rho: Density):
    """(mu, mu_plus, mu_minus) with mu = rho - rho* split by sign of x."""
    star = radially_decreasing_part(rho)
    mu = rho.values - star.values
    n2 = rho.grid.n_cells // 2
    mu_plus = mu.copy()
    mu_plus[:n2] = 0.0
    mu_minus = mu.copy()
    mu_minus[n2:] = 0.0
    return mu, mu_plus, mu_minus


def steiner_symmetrize(rho: Density) -> Density:
    """Symmetric decreasing rearrangement of the cell values.

    Cell values are sorted in decreasing order and placed outward from the
    centre in mirror pairs, so the multiset of values is preserved exactly.
    For an odd number of cells holding a given value one cell of the pair
    carries the average, which is the only rounding involved.
    """
    v = np.sort(rho.values)[::-1]
    # pair consecutive sorted values; average each pair onto the mirror cells
    half = (v[0::2] + v[1::2]) / 2.0
    return Density(rho.grid, _from_right_half(half))


# ---------------------------------------------------------------------------
# layer cake


@dataclass(frozen=True)
class Interval:
    """I_j = (c - r, c + r) with signed index j and the cells it covers."""

    j: int
    c: float
    r: float
    cells: tuple[int, int] | None = None  # [first, last] cell index, inclusive

    @property
    def lo(self) -> float:
        return self.c - self.r

    @property
    def hi(self) -> float:
        return self.c + self.r


@dataclass(frozen=True)
class LevelSetDecomposition:
    """Layer-cake data: band k spans heights (levels[k-1], levels[k]] (with
    levels[-1] = 0) and its super-level set is intervals[k]."""

    levels: tuple[float, ...]
    intervals: tuple[tuple[Interval, ...], ...]
    grid: Grid | None = None

    @property
    def thickness(self) -> np.ndarray:
        lv = np.asarray(self.levels, float)
        return np.diff(np.concatenate([[0.0], lv]))

    def n_intervals(self) -> int:
        return sum(len(b) for b in self.intervals)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (start, end) index pairs."""
    if not mask.any():
        return []
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _index_intervals(runs, edges, n_cells) -> tuple[Interval, ...]:
    """Turn cell runs into intervals with symmetric signed indices."""
    mid = n_cells // 2
    out = []
    pos, neg = [], []
    for a, b in runs:
        lo, hi = edges[a], edges[b + 1]
        c, r = (lo + hi) / 2.0, (hi - lo) / 2.0
        if a <= mid - 1 and b >= mid:
            out.append(Interval(0, 0.0 if a + b == n_cells - 1 else c, r, (a, b)))
        elif a >= mid:
            pos.append((c, r, (a, b)))
        else:
            neg.append((c, r, (a, b)))
    pos.sort()
    neg.sort(reverse=True)
    for k, (c, r, cells) in enumerate(pos, 1):
        out.append(Interval(k, c, r, cells))
    for k, (c, r, cells) in enumerate(neg, 1):
        out.append(Interval(-k, c, r, cells))
    out.sort(key=lambda iv: iv.c)
    return tuple(out)


def decompose_level_sets(rho: Density, levels="auto") -> LevelSetDecomposition:
    """Split each super-level set {rho > h} into maximal runs of cells.

    With ``levels="auto"`` the levels are the sorted distinct positive cell
    values and band k uses the set {rho > levels[k-1]}, so the reconstruction
    is exact.  User levels must increase strictly; values above the top
    level are truncated in the reconstruction.
    """
    v = rho.values
    if isinstance(levels, str):
        if levels != "auto":
            raise DomainError(f"unknown levels spec {levels!r}")
        lv = np.unique(v[v > 0])
    else:
        lv = np.asarray(levels, dtype=float)
        if lv.ndim != 1 or np.any(np.diff(lv) <= 0) or (lv.size and lv[0] <= 0):
            raise DomainError("levels must be positive and strictly increasing")
    edges = rho.grid.edges
    base = np.concatenate([[0.0], lv[:-1]]) if lv.size else lv
    bands = []
    for h in base:
        bands.append(_index_intervals(_runs(v > h), edges, rho.grid.n_cells))
    return LevelSetDecomposition(tuple(float(x) for x in lv), tuple(bands), rho.grid)


def reconstruct_from_levels(dec: LevelSetDecomposition, grid: Grid | None = None) -> np.ndarray:
    """Cell averages of sum_k thickness_k * indicator(C_k)."""
    g = grid or dec.grid
    edges = g.edges
    out = np.zeros(g.n_cells)
    for dh, band in zip(dec.thickness, dec.intervals):
        for iv in band:
            lo = np.clip(iv.lo, edges[:-1], edges[1:])
            hi = np.clip(iv.hi, edges[:-1], edges[1:])
            out += dh * (hi - lo) / g.dx
    return out


def cut_intervals(dec: LevelSetDecomposition, X: float) -> LevelSetDecomposition:
    """Cut every off-centre interval containing +-X in its interior at +-X."""
    if not X > 0:
        raise DomainError("cut position must be positive")
    bands = []
    for band in dec.intervals:
        pieces = []
        for iv in band:
            if iv.j != 0 and iv.lo < X < iv.hi:
                pieces += [(iv.lo, X), (X, iv.hi)]
            elif iv.j != 0 and iv.lo < -X < iv.hi:
                pieces += [(iv.lo, -X), (-X, iv.hi)]
            else:
                pieces.append(iv)
        if len(pieces) == len(band):
            bands.append(band)
            continue
        bands.append(_reindex(pieces))
    return LevelSetDecomposition(dec.levels, tuple(bands), dec.grid)


def _reindex(pieces) -> tuple[Interval, ...]:
    centre = [p for p in pieces if isinstance(p, Interval) and p.j == 0]
    rest = []
    for p in pieces:
        if isinstance(p, Interval):
            if p.j != 0:
                rest.append((p.lo, p.hi, p.cells))
        else:
            rest.append((p[0], p[1], None))
    pos = sorted((r for r in rest if r[0] + r[1] > 0), key=lambda r: r[0])
    neg = sorted((r for r in rest if r[0] + r[1] < 0), key=lambda r: -r[1])
    out = list(centre)
    for k, (lo, hi, cells) in enumerate(pos, 1):
        out.append(Interval(k, (lo + hi) / 2, (hi - lo) / 2, cells))
    for k, (lo, hi, cells) in enumerate(neg, 1):
        out.append(Interval(-k, (lo + hi) / 2, (hi - lo) / 2, cells))
    out.sort(key=lambda iv: iv.c)
    return tuple(out)


# ---------------------------------------------------------------------------
# h(s) representation


@dataclass(frozen=True)
class HRepresentation:
    """Samples of h(s) on s in [0, mass] with right derivatives h'(s) and
    the super-level intervals C(s) = {rho > h(s)} on each [s_k, s_{k+1})."""

    s_nodes: np.ndarray
    h_values: np.ndarray
    h_prime: np.ndarray
    intervals: tuple[tuple[tuple[float, float], ...], ...]
    kinks: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def level_size(self) -> np.ndarray:
        return np.array([sum(b - a for a, b in ivs) for ivs in self.intervals])


def level_profile(values: np.ndarray, dx: float):
    """Band data of a piecewise-constant profile.

    Returns (tops, sizes, s_breaks): band k spans heights (tops[k-1], tops[k]]
    with |{rho > tops[k-1]}| = sizes[k], and s_breaks[k] = s(tops[k]).
    """
    vals = np.sort(values[values > 0])
    tops = np.unique(vals)
    if tops.size == 0:
        return tops, tops, tops
    # cells strictly above each band's base
    counts = vals.size - np.searchsorted(vals, np.concatenate([[0.0], tops[:-1]]), side="right")
    sizes = counts * dx
    thick = np.diff(np.concatenate([[0.0], tops]))
    s_breaks = np.cumsum(sizes * thick)
    return tops, sizes, s_breaks


def h_representation(rho: Density, n_s: int | None = None) -> HRepresentation:
    """Exact piecewise-linear inverse of s(h) = int min(rho, h).

    Nodes are ``n_s`` uniform points on [0, mass] merged with the kinks of h,
    so that h is linear between consecutive nodes.
    """
    v = rho.values
    dx = rho.dx
    tops, sizes, s_breaks = level_profile(v, dx)
    mass = float(v.sum() * dx)
    if n_s is None:
        n_s = rho.grid.n_cells
    s_uni = np.linspace(0.0, mass, max(int(n_s), 2))
    s_knots = np.concatenate([[0.0], s_breaks])
    h_knots = np.concatenate([[0.0], tops])
    s_breaks_clean = s_breaks[:-1] if s_breaks.size else s_breaks
    nodes = np.unique(np.concatenate([s_uni, s_breaks_clean]))
    nodes = nodes[nodes <= mass]
    # a kink within rounding of a uniform node would leave a degenerate segment
    tol = 64 * np.finfo(float).eps * max(mass, 1.0)
    keep = np.concatenate([[True], np.diff(nodes) > tol])
    nodes = nodes[keep]
    nodes[-1] = mass
    h = np.interp(nodes, s_knots, h_knots)
    # band and level set of [s_k, s_{k+1}) are read at the segment midpoint;
    # a node left an ulp below a dropped kink would otherwise pick the
    # degenerate band
    mid = np.append(0.5 * (nodes[1:] + nodes[:-1]), nodes[-1])
    band = np.searchsorted(s_breaks, mid, side="right")
    band = np.minimum(band, tops.size - 1)
    hp = 1.0 / sizes[band]
    edges = rho.grid.edges
    ivs = []
    for hv in np.interp(mid, s_knots, h_knots):
        runs = _runs(v > hv)
        ivs.append(tuple((float(edges[a]), float(edges[b + 1])) for a, b in runs))
    return HRepresentation(nodes, h, hp, tuple(ivs), s_breaks)


# ---------------------------------------------------------------------------
# moments


def moment(rho: Density, k: float) -> float:
    """sum |x_i|^k rho_i dx."""
    if k < 0:
        raise DomainError("moment order must be nonnegative")
    x = np.abs(rho.x)
    w = np.ones_like(x) if k == 0 else x ** k
    return float(np.sum(w * rho.values) * rho.dx)


def phi_weight(x, R1: float) -> np.ndarray:
    """0 on |x|<=5R1, (|x|-5R1)^2/2 up to 6R1, R1|x| - 5.5 R1^2 beyond."""
    a = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(a)
    mid = (a > 5 * R1) & (a <= 6 * R1)
    out[mid] = 0.5 * (a[mid] - 5 * R1) ** 2
    far = a > 6 * R1
    out[far] = R1 * a[far] - 5.5 * R1 ** 2
    return out


def phi_moment(rho: Density, R1: float) -> float:
    if not R1 > 0:
        raise DomainError("R1 must be positive")
    if not 6 * R1 < rho.grid.half_width:
        raise DomainError(f"6*R1 = {6 * R1} must be below the domain half width {rho.grid.half_width}")
    return float(np.sum(phi_weight(rho.x, R1) * rho.values) * rho.dx)


def mass_in(rho: Density, a: float, b: float) -> float:
    """Exact integral of the piecewise-constant density over [a, b]."""
    e = rho.grid.edges
    lo = np.clip(a, e[:-1], e[1:])
    hi = np.clip(b, e[:-1], e[1:])
    return float(np.sum(rho.values * (hi - lo)))


# ---------------------------------------------------------------------------
# serialization


def write_csv(rho: Density, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho"])
        for xi, vi in zip(rho.x, rho.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_csv(path, half_width: float | None = None) -> Density:
    xs, vs = [], []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        for row in r:
            xs.append(float(row["x"]))
            vs.append(float(row["rho"]))
    xs = np.asarray(xs)
    n = xs.size
    if half_width is None:
        dx = (xs[-1] - xs[0]) / (n - 1)
        half_width = round(n * dx / 2, 12)
    grid = Grid(half_width, n)
    vs = np.asarray(vs)
    return Density(grid, vs, symmetric=bool(np.max(np.abs(vs - vs[::-1])) <= SYM_TOL))


def to_json(rho: Density) -> str:
    return json.dumps({"half_width": rho.grid.half_width, "n_cells": rho.grid.n_cells,
                       "values": [float(v) for v in rho.values]})


def from_json(text: str) -> Density:
    d = json.loads(text)
    vs = np.asarray(d["values"], float)
    return Density(Grid(float(d["half_width"]), int(d["n_cells"])), vs,
                   symmetric=bool(np.max(np.abs(vs - vs[::-1])) <= SYM_TOL))
