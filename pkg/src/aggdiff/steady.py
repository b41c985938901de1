"""Steady states, the sub-criticality certificate, the central-mass floor
and regularity diagnostics."""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass

import numpy as np

from . import density as dens
from .density import Density, Grid, mass_in
from .energy import EnergyBreakdown, convolve, dissipation_rate, energy
from .errors import CertificateError, ConvergenceError, DomainError, DomainEscapeError
from .potential import PotentialSpec, eval_W, limit_W
from .solver import SolverConfig, _finish, _Stepper, _check_escape

DEFAULT_GRID = Grid(6.0, 384)


@dataclass(frozen=True)
class SteadyState:
    density: Density
    mass: float
    energy: EnergyBreakdown
    residual: float
    method: str
    iterations: int
    history: tuple = ()

    def to_dict(self) -> dict:
        return {"mass": self.mass, "energy": self.energy.total,
                "internal": self.energy.internal, "interaction": self.energy.interaction,
                "residual": self.residual, "method": self.method, "iterations": self.iterations}


def _box(grid: Grid, mass: float, width: float = 1.0) -> np.ndarray:
    x = grid.centers
    w = min(width, 0.5 * grid.half_width)
    v = np.where(np.abs(x) < w, 1.0, 0.0)
    v[[0, -1]] = 0.0
    return v * mass / (v.sum() * grid.dx)


def _project(conv: np.ndarray, mass: float, m: float, dx: float, bracket_hi: float):
    """rho = ((m-1)/m (C - conv)_+)^(1/(m-1)) with C bisected to match mass."""
    def build(C):
        r = ((m - 1) / m * np.maximum(C - conv, 0.0)) ** (1.0 / (m - 1))
        r[0] = r[-1] = 0.0
        return r

    lo, hi = 0.0, bracket_hi
    while build(hi).sum() * dx < mass:
        hi *= 2
    for _ in range(60):
        C = 0.5 * (lo + hi)
        if build(C).sum() * dx > mass:
            hi = C
        else:
            lo = C
    C = 0.5 * (lo + hi)
    r = build(C)
    s = r.sum() * dx
    return r * (mass / s) if s > 0 else r, C


def _fixed_point(mass, spec, m, tol, grid, v0, max_iter):
    dx = grid.dx
    Wmax = float(eval_W(spec, np.array([2 * grid.half_width]))[0])
    v = v0.copy()
    theta = 1.0
    hist = []
    prev = np.inf
    for k in range(1, max_iter + 1):
        conv = convolve(v, spec, dx, "W", symmetric=True)
        bracket = m / (m - 1) * float(v.max()) ** (m - 1) + Wmax
        w, _ = _project(conv, mass, m, dx, bracket)
        change = float(np.sum(np.abs(w - v)) * dx)
        hist.append(change)
        if change > prev:
            theta = max(theta / 2, 1 / 64)
        prev = change
        v = (1 - theta) * v + theta * w if theta < 1 else w
        v = (v + v[::-1]) / 2
        if change < 0.01 * tol:
            return v, k, hist
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} iterations "
                           f"(last change {hist[-1]:.3e})", hist)


def _gradient_flow(mass, spec, m, tol, grid, v0, max_steps):
    dx = grid.dx
    cfg = SolverConfig(diffusion_mode="semi_implicit", cfl_advection=0.9)
    st = _Stepper(spec, m, dx, cfg)
    v = v0.copy()
    target = (0.1 * tol) ** 2
    hist = []
    for k in range(1, max_steps + 1):
        dt, f = st.stable_dt(v, True)
        v = _finish(st.advance(v, dt, True, f), dx)
        _check_escape(v, dx)
        if k % 20 == 0:
            D = dissipation_rate(Density(grid, v, check_support=False), spec, m)
            hist.append(D)
            if D <= target:
                return v, k, hist
    raise ConvergenceError(f"gradient flow did not reach dissipation {target:.1e} in {max_steps} steps", hist)


def compute_steady(mass: float, spec: PotentialSpec, m: float, tol: float = 1e-6,
                   grid: Grid | None = None, method: str = "fixed_point",
                   initial: Density | None = None, max_iter: int = 200000) -> SteadyState:
    """Steady state of mass ``mass`` on ``grid``.

    ``fixed_point`` iterates the Euler-Lagrange map rho <- ((m-1)/m (C - W*rho)_+)^(1/(m-1))
    with C bisected for the mass; it stops when the L1 change drops below
    tol/100.  ``gradient_flow`` runs the solver (semi-implicit diffusion) until
    the dissipation drops below (tol/10)^2.  Both target the same discrete
    equations.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if not mass > 0:
        raise DomainError("mass must be positive")
    grid = grid or DEFAULT_GRID
    if initial is not None:
        if initial.grid != grid:
            raise DomainError("initial density lives on a different grid")
        v0 = np.array(initial.values) * (mass / initial.mass)
    else:
        v0 = _box(grid, mass)
    if method == "fixed_point":
        v, it, hist = _fixed_point(mass, spec, m, tol, grid, v0, min(max_iter, 20000))
    elif method == "gradient_flow":
        v, it, hist = _gradient_flow(mass, spec, m, tol, grid, v0, max_iter)
    else:
        raise DomainError(f"unknown steady method {method!r}")
    rho = Density(grid, v)
    if rho.values[2] > 0 or rho.values[-3] > 0:
        raise DomainEscapeError("steady state touches the grid boundary; enlarge the domain")
    D = dissipation_rate(rho, spec, m)
    return SteadyState(rho, rho.mass, energy(rho, spec, m), D, method, it, tuple(hist[-50:]))


def euler_lagrange_spread(ss: SteadyState, spec: PotentialSpec, m: float,
                          inner: float = 0.9, rel: float = 0.01) -> float:
    """Std of m/(m-1) rho^(m-1) + W*rho over the inner part of {rho > rel*max}."""
    rho = ss.density
    v = rho.values
    xi = m / (m - 1) * v ** (m - 1) + convolve(v, spec, rho.dx, "W", symmetric=True)
    sup = v > rel * v.max()
    R = np.max(np.abs(rho.x[sup]))
    keep = sup & (np.abs(rho.x) <= inner * R)
    return float(np.std(xi[keep]))


def steady_energy_by_mass(masses, spec, m, grid=None, tol=1e-8):
    return [compute_steady(s, spec, m, tol, grid).energy.total for s in masses]


# ---------------------------------------------------------------------------
# cache for E_infty


_CACHE: dict[str, SteadyState] = {}
_LOCK = threading.Lock()


def cache_key(spec: PotentialSpec, m: float, mass: float, grid: Grid, method: str, tol: float) -> str:
    blob = json.dumps({"p": spec.to_dict(), "m": m, "mass": mass, "g": grid.to_dict(),
                       "method": method, "tol": tol}, sort_keys=True, default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


def cached_steady(mass, spec, m, tol=1e-8, grid=None, method="fixed_point") -> SteadyState:
    grid = grid or DEFAULT_GRID
    key = cache_key(spec, m, mass, grid, method, tol)
    with _LOCK:
        hit = _CACHE.get(key)
    if hit is None:
        hit = compute_steady(mass, spec, m, tol, grid, method)
        with _LOCK:
            _CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# certificates


def subcritical_check(rho_in: Density, spec: PotentialSpec, m: float, tol: float = 1e-8) -> dict:
    """Energy threshold E(0) < lim W / 4 + 2 E[rho_{inf,1/2}].

    Strongly confining potentials pass automatically with margin +inf.
    """
    lim, extrapolated = limit_W(spec)
    E0 = energy(rho_in, spec, m).total
    if math.isinf(lim):
        return {"pass": True, "margin": math.inf, "E0": E0, "threshold": math.inf,
                "limit_extrapolated": extrapolated}
    half = cached_steady(0.5 * rho_in.mass, spec, m, tol, rho_in.grid)
    thr = 0.25 * lim * rho_in.mass ** 2 + 2 * half.energy.total
    margin = thr - E0
    return {"pass": bool(margin > 0), "margin": float(margin), "E0": E0, "threshold": thr,
            "limit_extrapolated": extrapolated}


def central_mass_bound(trajectory, R1: float, floor: float = 1e-3) -> float:
    """min over samples of int_0^R1 rho; raises if it is not above ``floor``."""
    vals = [mass_in(r, 0.0, R1) for r in trajectory.snapshots]
    c = float(min(vals)) if vals else 0.0
    if not c > floor:
        raise CertificateError(f"central mass {c:.3e} on [0, {R1}] not above floor {floor}")
    return c


def steady_regularity_report(ss: SteadyState) -> dict:
    """sup norm, and first/second derivative at 0 from the four centre cells."""
    v = ss.density.values
    dx = ss.density.dx
    h = v.size // 2
    d1 = (v[h] - v[h - 1]) / dx
    # f(3dx/2) - f(dx/2) = dx^2 f''(0) + O(dx^4)
    d2 = ((v[h + 1] + v[h - 2]) / 2 - (v[h] + v[h - 1]) / 2) / dx ** 2
    return {"sup_norm": float(v.max()), "first_deriv_at_0": float(d1),
            "second_deriv_at_0": float(d2)}


def write_steady(ss: SteadyState, csv_path, json_path) -> None:
    dens.write_csv(ss.density, csv_path)
    with open(json_path, "w") as fh:
        json.dump(ss.to_dict(), fh, indent=2, sort_keys=True)
