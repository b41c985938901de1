"""Energy slopes along curves, compared with the analytic decay bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..density import Density, bump_part, mass_in, radially_decreasing_part
from ..errors import DomainError
from ..piecewise import Piecewise
from ..potential import PotentialSpec, Lambda_env, lambda_env, wprime_sup
from .kinds import (CSS2, LocalCompression, CompressionCurve, css1_curve,
                    css2_curve, css2_moving, rcss_curve)

FD_STEP = 1e-3


@dataclass(frozen=True)
class Slope:
    """One-sided derivative at t = 0 from steps h and h/2, Richardson-extrapolated."""

    value: float
    raw_h: float
    raw_half: float
    h: float

    @property
    def error_estimate(self) -> float:
        return abs(self.value - self.raw_half)


@dataclass(frozen=True)
class CurveReport:
    kind: str
    dE_dt_measured: float
    dI_dt_measured: float
    dS_dt_measured: float
    cost: float
    analytic_bound: float
    bound_satisfied: bool
    slack: float
    applicable: bool = True
    tolerance: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("kind", "dE_dt_measured", "dI_dt_measured",
                                           "dS_dt_measured", "cost", "analytic_bound",
                                           "bound_satisfied", "slack", "applicable", "tolerance")}
        d.update({k: _plain(v) for k, v in self.extras.items()})
        return d


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def fd_step(window: float, step: float = FD_STEP) -> float:
    h = min(step, 0.25 * window)
    if not h > 1e-9:
        from ..errors import CurveDomainError
        raise CurveDomainError(f"validity window {window:.3e} too small for a finite-difference slope")
    return h


def energy_slopes(curve, spec: PotentialSpec, m: float, step: float = FD_STEP):
    """(dS, dI) slopes of the energy along ``curve`` at t = 0."""
    h = fd_step(curve.window, step)
    p0, p1, p2 = curve.state(0.0), curve.state(h / 2), curve.state(h)
    S = [p.internal_energy(m) for p in (p0, p1, p2)]
    I = [p.interaction_energy(spec) for p in (p0, p1, p2)]
    return _slope(S, h), _slope(I, h)


def _slope(vals, h) -> Slope:
    f0, f1, f2 = vals
    d_half = (f1 - f0) / (h / 2)
    d_h = (f2 - f0) / h
    return Slope(2 * d_half - d_h, d_h, d_half, h)


def tolerance(*vals: float) -> float:
    return 1e-9 + 1e-6 * sum(abs(v) for v in vals)


def mu_piecewise(rho: Density) -> Piecewise:
    mu, _, _ = bump_part(rho)
    return Piecewise(rho.grid.edges.copy(), mu)


def _finish(kind, dS, dI, cost, bound, measured, extras, applicable=True):
    tol = tolerance(measured, bound)
    ok = bool(measured <= bound + tol) if applicable else True
    extras = dict(extras)
    extras.setdefault("fd_step", dI.h)
    extras["dI_dt_raw"] = dI.raw_half
    extras["dS_dt_raw"] = dS.raw_half
    return CurveReport(kind, dS.value + dI.value, dI.value, dS.value, cost, bound, ok,
                       float(bound - measured), applicable, tol, extras)


# ---------------------------------------------------------------------------
# CSS family


def css1_bound(rho: Density, spec: PotentialSpec, R3: float, m: float = 2.0) -> CurveReport:
    """dI/dt along CSS1 against -2 lambda(2 R3) (int_0^R3 mu)^2; also dS/dt <= 0."""
    if not R3 > 0:
        raise DomainError("R3 must be positive")
    curve = css1_curve(rho)
    dS, dI = energy_slopes(curve, spec, m)
    mu_mass = mu_piecewise(rho).moment(0, 0.0, R3)
    lam = float(lambda_env(spec, 2 * R3))
    bound = -2 * lam * mu_mass ** 2
    rep = _finish("CSS1", dS, dI, curve.cost(), bound, dI.value,
                  {"mu_mass_0_R3": mu_mass, "lambda_2R3": lam,
                   "cost_bound": curve.translation_cost_bound(),
                   "dS_nonpositive": bool(dS.value <= tolerance(dS.value)),
                   "window": curve.window})
    return _with_flag(rep, rep.extras["dS_nonpositive"])


def _with_flag(rep: CurveReport, extra_ok: bool) -> CurveReport:
    if extra_ok:
        return rep
    return CurveReport(rep.kind, rep.dE_dt_measured, rep.dI_dt_measured, rep.dS_dt_measured,
                       rep.cost, rep.analytic_bound, False, rep.slack, rep.applicable,
                       rep.tolerance, rep.extras)


def css2_bracket(rho: Density, spec: PotentialSpec, R1: float, R2: float, R3: float,
                 c_rho: float) -> dict:
    mu = mu_piecewise(rho)
    near = mu.moment(0, R2, R3)
    far = mu.moment(0, R3, np.inf)
    good = 0.5 * c_rho * float(lambda_env(spec, 2 * R2 + 4 * R1 / c_rho))
    sup = wprime_sup(spec)
    Lam = float(Lambda_env(spec, R3 - R2))
    bad = sup * near + Lam * far
    return {"bracket": good - bad, "good": good, "bad": bad, "mu_R2_R3": near,
            "mu_beyond_R3": far, "wprime_sup": sup, "Lambda_R3_R2": Lam,
            "mu_2R1_R2": mu.moment(0, 2 * R1, R2)}


def css2_bound(rho: Density, spec: PotentialSpec, R1: float, R2: float, R3: float,
               c_rho: float, m: float = 2.0) -> CurveReport:
    """dI/dt along CSS2 against -(moving mass) * bracket.

    The bound only applies when the bracket is nonnegative; otherwise the
    report is marked not applicable.  ``c_rho`` must not exceed the mass of
    rho on [0, R1].
    """
    kind = CSS2(R1, R2, R3)
    if not 0 < c_rho <= mass_in(rho, 0.0, R1) * (1 + 1e-12):
        raise DomainError(f"c_rho = {c_rho} must lie in (0, int_0^R1 rho]")
    curve = css2_curve(rho, kind)
    dS, dI = energy_slopes(curve, spec, m)
    b = curve.base
    mv = css2_moving(b, kind) & (b.j > 0)
    moving_mass = float(np.sum(b.w[mv] * 2 * b.r[mv]))
    br = css2_bracket(rho, spec, R1, R2, R3, c_rho)
    applicable = br["bracket"] >= 0
    bound = -moving_mass * br["bracket"]
    extras = dict(br, moving_mass=moving_mass, cost_bound=curve.translation_cost_bound(),
                  window=curve.window,
                  moving_mass_covers=bool(moving_mass >= br["mu_2R1_R2"] - 1e-12))
    rep = _finish("CSS2", dS, dI, curve.cost(), bound, dI.value, extras, applicable)
    return _with_flag(rep, dS.value <= tolerance(dS.value))


def rcss_bound(rho: Density, spec: PotentialSpec, R: float, m: float = 2.0) -> CurveReport:
    """dI/dt along RCSS against -(lambda(2R)/R) int_0^inf x^2 mu.

    Also evaluates the combined gradient-flow estimate -(dE)^2 / cost and
    compares it with -lambda(2R)^2 / (2 R^2) int_0^inf x^2 mu.
    """
    if rho.support_radius(0.0) > R * (1 + 1e-12):
        raise DomainError(f"support radius {rho.support_radius(0.0)} exceeds R = {R}")
    curve = rcss_curve(rho)
    dS, dI = energy_slopes(curve, spec, m)
    x2mu = mu_piecewise(rho).moment(2, 0.0, np.inf)
    lam = float(lambda_env(spec, 2 * R))
    bound = -lam / R * x2mu
    cost = curve.cost()
    dE = dS.value + dI.value
    combined = -(dE ** 2) / cost if (cost > 0 and dE < 0) else 0.0
    combined_bound = -lam ** 2 / (2 * R ** 2) * x2mu
    comb_ok = combined <= combined_bound + tolerance(combined, combined_bound)
    extras = {"x2_mu": x2mu, "lambda_2R": lam, "cost_bound": curve.translation_cost_bound(),
              "combined_estimate": combined, "combined_bound": combined_bound,
              "combined_satisfied": bool(comb_ok), "window": curve.window}
    rep = _finish("RCSS", dS, dI, cost, bound, dI.value, extras)
    return _with_flag(rep, comb_ok and dS.value <= tolerance(dS.value))


# ---------------------------------------------------------------------------
# local compression


def local_compression_bound(rho: Density, spec: PotentialSpec, m: float, R1: float, R2: float,
                            r: float | None = None, c_rho: float | None = None) -> CurveReport:
    """Slopes along the local compression curve.

    ``r`` defaults to the clustering radius of rho* with R = 2 R1.  The
    interaction slope is compared with

        -[c/2 lambda(12 R1 + 4 R1 / c) - ||W'|| int_{2R1}^{R2} mu - Lambda(R2 - 6 R1)]
         * int_r^{6R1} (x - r)/(4 R1) rho,

    with c = c_rho (default: the mass of rho on [0, R1]), and the internal
    slope with 2 (m - 1)/(4 R1) int_r^{6R1} rho^m.
    """
    from .lemmas import clustering_radius

    if not R2 > 6 * R1:
        raise DomainError(f"R2 = {R2} must exceed 6 R1 = {6 * R1}")
    if r is None:
        star = radially_decreasing_part(rho)
        r, _ = clustering_radius(star, 2 * R1, m)
    kind = LocalCompression(R1, r)
    curve = CompressionCurve(rho, kind)
    dS, dI = energy_slopes(curve, spec, m)
    p = curve.base
    a, b = r, 6 * R1
    lo = np.clip(p.edges[:-1], a, b) - a
    hi = np.clip(p.edges[1:], a, b) - a
    lever = float(np.sum(p.values * (hi ** 2 - lo ** 2) / 2.0) / (4 * R1))
    power = p.integral_of_power(m, a, b)
    S_bound = 2 * (m - 1) / (4 * R1) * power
    if c_rho is None:
        c_rho = mass_in(rho, 0.0, R1)
    mu = mu_piecewise(rho)
    good = 0.5 * c_rho * float(lambda_env(spec, 12 * R1 + 4 * R1 / c_rho)) if c_rho > 0 else 0.0
    bracket = (good - wprime_sup(spec) * mu.moment(0, 2 * R1, R2) - float(Lambda_env(spec, R2 - 6 * R1)))
    I_bound = -bracket * lever
    S_ok = dS.value <= S_bound + tolerance(dS.value, S_bound)
    cost = curve.cost()
    extras = {"r": r, "lever": lever, "int_rho_m": power, "dS_bound": S_bound,
              "dS_satisfied": bool(S_ok), "bracket": bracket, "c_rho": c_rho,
              "cost_le_one": bool(cost <= rho.mass + 1e-12)}
    rep = _finish("LocalCompression", dS, dI, cost, I_bound, dI.value, extras)
    return _with_flag(rep, S_ok and cost <= rho.mass + 1e-12)
