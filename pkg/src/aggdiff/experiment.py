"""Experiment orchestration: configuration, runs with certificates, lemma
audits over random densities and rate fitting."""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import density as dens
from .corpus import GENERATOR_VERSION, random_bumps, random_decreasing
from .curves import (css1_bound, css2_bound, generalized_hs_linear_analysis,
                     hs_linear_curve_analysis, interval_pair_check, mu_moment_inequalities,
                     point_mass_check, rcss_bound)
from .curves.lemmas import clustering_inequality, clustering_radius, dissipation_lower_bound
from .curves.reports import mu_piecewise
from .density import Density, Grid, make_density, mass_in
from .errors import AggDiffError, CertificateError, ConfigError
from .potential import from_config, gamma_rate, validate_assumptions
from .solver import SolverConfig, Trajectory, run
from .steady import central_mass_bound, compute_steady, subcritical_check, write_steady

OUTPUT_ENV = "AGGDIFF_OUTPUT_ROOT"

DEFAULT_DIAGNOSTICS = {"R1": 0.5, "R2": 1.5, "R3": 2.5, "central_floor": 1e-3,
                       "rate_window": 0.5, "audit_cells": 128, "audit_family": "bumps",
                       "steady_tol": 1e-10}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    grid: dict
    potential: dict
    m: float
    initial: dict = field(default_factory=lambda: {"type": "box", "width": 2.0})
    solver: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    output_dir: str = "run"
    seed: int = 0
    override_assumptions: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("grid", "potential", "m"):
            if key not in d:
                raise ConfigError(f"config is missing the {key!r} block")
        cfg = cls(**d)
        cfg.diagnostics = {**DEFAULT_DIAGNOSTICS, **cfg.diagnostics}
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- derived objects --------------------------------------------------

    def make_grid(self) -> Grid:
        try:
            return Grid(float(self.grid["half_width"]), int(self.grid["n_cells"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"grid block needs half_width and n_cells ({exc})") from exc

    def make_potential(self):
        return from_config(self.potential, self.m)

    def make_solver(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def validate(self) -> None:
        """Cross-field checks; raises ConfigError naming the constraint."""
        try:
            grid = self.make_grid()
        except AggDiffError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        dg = self.diagnostics
        R1, R2, R3 = (float(dg[k]) for k in ("R1", "R2", "R3"))
        if not R1 > 0:
            raise ConfigError("R1 must be positive")
        if not 6 * R1 < grid.half_width:
            raise ConfigError(f"constraint 6*R1 < R_dom violated: 6*{R1} >= {grid.half_width}")
        if not R2 > 2 * R1:
            raise ConfigError(f"constraint R2 > 2*R1 violated: {R2} <= {2 * R1}")
        if not R3 > R2:
            raise ConfigError(f"constraint R3 > R2 violated: {R3} <= {R2}")
        if not 0 < float(dg["rate_window"]) <= 1:
            raise ConfigError("rate_window must lie in (0, 1]")
        try:
            spec = self.make_potential()
            self.make_solver()
        except (AggDiffError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        need = max(2.0, spec.alpha)
        if not float(self.m) > need and not self.override_assumptions:
            raise ConfigError(f"constraint m > max(2, alpha) violated: m = {self.m}, alpha = {spec.alpha}")
        kind = self.initial.get("type")
        if kind not in INITIAL_GENERATORS:
            raise ConfigError(f"unknown initial condition {kind!r}; choose from {sorted(INITIAL_GENERATORS)}")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def resolve_output(cfg: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    p = Path(cfg.output_dir)
    return p if p.is_absolute() else output_root() / p


# ---------------------------------------------------------------------------
# initial conditions


def box_initial(grid: Grid, width: float = 2.0) -> Density:
    """Unit-mass box on |x| < width/2."""
    return make_density(grid, lambda x: (np.abs(x) < width / 2).astype(float))


def two_bump_initial(grid: Grid, distance: float = 2.0, width: float = 0.5) -> Density:
    """Two boxes of width ``width`` centred at +-distance/2."""
    if width > distance:
        raise ConfigError("two_bump: width must not exceed distance (the bumps would overlap)")
    return make_density(grid, lambda x: (np.abs(np.abs(x) - distance / 2) < width / 2).astype(float))


def perturbed_steady_initial(grid: Grid, spec, m: float, amplitude: float = 0.2,
                             seed: int = 0) -> Density:
    """Steady state plus ``amplitude`` times a random symmetric bump profile."""
    ss = compute_steady(1.0, spec, m, 1e-8, grid)
    bumps = random_bumps(seed, grid, support=0.5 * grid.half_width)
    v = ss.density.values + amplitude * bumps.values
    return Density(grid, v / (v.sum() * grid.dx))


INITIAL_GENERATORS = ("box", "two_bump", "perturbed_steady")


def initial_density(cfg: ExperimentConfig, grid: Grid | None = None, spec=None) -> Density:
    grid = grid or cfg.make_grid()
    ic = dict(cfg.initial)
    kind = ic.pop("type")
    if kind == "box":
        return box_initial(grid, **ic)
    if kind == "two_bump":
        return two_bump_initial(grid, **ic)
    spec = spec or cfg.make_potential()
    ic.setdefault("seed", cfg.seed)
    return perturbed_steady_initial(grid, spec, cfg.m, **ic)


# ---------------------------------------------------------------------------
# rate fit


@dataclass(frozen=True)
class RateFit:
    """E - E_inf ~ C (1+t)^(-p) over the window, and the 1/gamma envelope check."""

    p: float
    C: float
    gamma: float
    bound_holds: bool
    residual: float
    C_env: float
    window_start: float
    available: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def fit_rate(trajectory, E_infty: float, gamma: float, window: float = 0.5) -> RateFit:
    """Least squares of log(E - E_inf) on log(1+t) over the last ``window``
    fraction of samples.

    ``trajectory`` is a Trajectory or a (times, energies) pair.  The
    envelope C_env (1+t)^(-1/gamma) is pinned at the window start and
    checked at every later sample.  Without a decade of decay in the window
    the power fit is reported unavailable, but the envelope is still checked.
    """
    if isinstance(trajectory, Trajectory):
        t, E = np.asarray(trajectory.times), trajectory.total_energy
    else:
        t, E = (np.asarray(a, float) for a in trajectory)
    gap = E - E_infty
    if t.size < 2:
        return RateFit(np.nan, np.nan, gamma, True, np.nan, np.nan, np.nan, False, "fewer than two samples")
    k0 = min(int(np.floor((1 - window) * t.size)), t.size - 2)
    tw, gw = t[k0:], gap[k0:]
    C_env = max(gw[0], 0.0) * (1 + tw[0]) ** (1 / gamma)
    env = C_env * (1 + tw) ** (-1 / gamma)
    holds = bool(np.all(gw <= env * (1 + 1e-12) + 1e-15))
    pos = gw > 0
    if pos.sum() < 2 or gw[pos].max() < 10 * gw[pos].min():
        return RateFit(np.nan, np.nan, gamma, holds, np.nan, float(C_env), float(tw[0]), False,
                       "less than one decade of decay in the window")
    X = np.log1p(tw[pos])
    Y = np.log(gw[pos])
    A = np.column_stack([np.ones_like(X), -X])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    return RateFit(float(coef[1]), float(np.exp(coef[0])), gamma, holds, res, float(C_env),
                   float(tw[0]), True)


# ---------------------------------------------------------------------------
# certificates


def tightness_certificate(traj: Trajectory, R1: float, m: float, head: float = 0.1,
                          ratio: float = 1.1, fd_tol: float = 1e-4) -> dict:
    """First-moment bound and the m_phi differential inequality.

    m1 after the first ``head`` fraction of the horizon must stay within
    ``ratio`` times its maximum over that head.  Between samples,
    (m_phi(t_{k+1}) - m_phi(t_k)) / dt <= mean of int_{5R1<|x|<6R1} rho^m
    at the two ends + fd_tol.
    """
    t = np.asarray(traj.times)
    m1 = np.asarray(traj.m1)
    cut = t[0] + head * (t[-1] - t[0])
    early = m1[t <= cut]
    late = m1[t > cut]
    ref = float(early.max())
    m1_ok = bool(late.size == 0 or late.max() <= ratio * ref)
    mphi = np.asarray(traj.mphi)
    ann = np.array([float(np.sum(np.where((np.abs(s.x) >= 5 * R1) & (np.abs(s.x) <= 6 * R1),
                                          s.values ** m, 0.0)) * s.dx) for s in traj.snapshots])
    if np.all(np.isfinite(mphi)) and t.size > 1:
        rate = np.diff(mphi) / np.diff(t)
        rhs = 0.5 * (ann[1:] + ann[:-1])
        slack = rhs + fd_tol - rate
        phi_ok = bool(np.all(slack >= 0))
        worst = float(slack.min())
    else:
        phi_ok, worst = False, float("nan")
    return {"statement": "Theorem 3.2", "passed": m1_ok and phi_ok, "m1_max_head": ref,
            "m1_max_tail": float(late.max()) if late.size else ref, "m1_ok": m1_ok,
            "mphi_ok": phi_ok, "mphi_worst_slack": worst}


def dissipation_certificate(traj: Trajectory, spec, m: float, E_infty: float,
                            c: float | None = None, gap_floor: float = 1e-12) -> dict:
    """D >= c lambda(R)^3 / R^{8/3} (E - E_inf) at every sample, R = max(1, support radius).

    Samples with E - E_inf <= ``gap_floor`` are skipped (bound reported as 0):
    there the gap is round-off in E and the same cut is used when c is
    calibrated.
    """
    ratios, bounds, skipped = [], [], 0
    for snap, e, D in zip(traj.snapshots, traj.energies, traj.dissipation):
        if e.total - E_infty <= gap_floor:
            skipped += 1
            bounds.append(0.0)
            continue
        R = max(1.0, snap.support_radius(0.0))
        b = dissipation_lower_bound(snap, spec, m, R, E_infty, c)
        bounds.append(b)
        ratios.append(np.inf if b == 0 else D / b)
    worst = float(np.min(ratios)) if ratios else np.inf
    return {"statement": "Theorem 2.3", "passed": bool(worst >= 1.0), "worst_ratio": worst,
            "gap_floor": gap_floor, "n_below_floor": skipped, "bound": bounds}


def hminus1_certificate(traj: Trajectory, tail: int = 10, slack: float = 1e-6) -> dict:
    """H^-1 distance to the steady state nonincreasing over the last ``tail`` samples."""
    h = np.asarray(traj.hminus1[-tail:])
    inc = float(np.max(np.diff(h))) if h.size > 1 else 0.0
    return {"statement": "Proposition A.1", "passed": bool(inc <= slack), "max_increase": inc,
            "final": float(h[-1]) if h.size else float("nan")}


# ---------------------------------------------------------------------------
# run_experiment


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def run_experiment(cfg: ExperimentConfig, out_dir=None, plots: bool = True) -> Path:
    """Run the configured simulation and write the artifact directory.

    Files are written to ``<out>.partial`` and moved into place at the end;
    if anything raises, the partial outputs are moved anyway with a FAILED
    marker holding the error, and the error is re-raised.
    """
    out = resolve_output(cfg, out_dir)
    work = out.with_name(out.name + ".partial")
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    try:
        _run_into(cfg, work, plots)
    except Exception as exc:
        (work / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        _move(work, out)
        raise
    _move(work, out)
    return out


def _move(src: Path, dst: Path) -> None:
    if dst.exists():
        shutil.rmtree(dst)
    os.replace(src, dst)


def _run_into(cfg: ExperimentConfig, work: Path, plots: bool) -> None:
    grid = cfg.make_grid()
    spec = cfg.make_potential()
    m = float(cfg.m)
    dg = cfg.diagnostics
    report = validate_assumptions(spec, grid, m)
    _write_json(work / "assumptions.json", report.to_dict())
    if not report.passed and not cfg.override_assumptions:
        raise ConfigError(f"potential assumptions fail: {report.failed()}")
    rho0 = initial_density(cfg, grid, spec)
    dens.write_csv(rho0, work / "initial.csv")

    ss = compute_steady(rho0.mass, spec, m, float(dg["steady_tol"]), grid)
    write_steady(ss, work / "steady.csv", work / "steady.json")
    E_inf = ss.energy.total

    traj = run(rho0, spec, m, cfg.make_solver(), R1=float(dg["R1"]), reference=ss.density,
               override_assumptions=True)
    files = traj.write(work / "trajectory", cfg.to_dict(), spec.to_dict())

    gamma = gamma_rate(spec.alpha, spec.beta)
    fit = fit_rate(traj, E_inf, gamma, float(dg["rate_window"]))
    _write_json(work / "rate_fit.json", fit.to_dict())

    certs = {}
    sub = subcritical_check(rho0, spec, m)
    certs["subcriticality"] = {"statement": "A6", "passed": bool(sub["pass"]), **sub}
    try:
        c_rho = central_mass_bound(traj, float(dg["R1"]), float(dg["central_floor"]))
        certs["central_mass"] = {"statement": "Lemma 3.5", "passed": True, "c_rho": c_rho}
    except CertificateError as exc:
        certs["central_mass"] = {"statement": "Lemma 3.5", "passed": False, "error": str(exc)}
    certs["tightness"] = tightness_certificate(traj, float(dg["R1"]), m)
    certs["rate"] = {"statement": "Theorem 2.1", "passed": fit.bound_holds, "gamma": gamma,
                     "C_env": fit.C_env, "observed_p": fit.p}
    certs["dissipation_floor"] = dissipation_certificate(traj, spec, m, E_inf)
    with open(work / "trajectory" / "dissipation_bound.csv", "w") as fh:
        fh.write("t,dissipation,bound\n")
        for t, D, b in zip(traj.times, traj.dissipation, certs["dissipation_floor"]["bound"]):
            fh.write(f"{t!r},{float(D)!r},{float(b)!r}\n")
    certs["hminus1"] = hminus1_certificate(traj)
    cdir = work / "certificates"
    cdir.mkdir()
    for name, c in certs.items():
        _write_json(cdir / f"{name}.json", c)

    manifest = {"config": cfg.to_dict(), "potential": spec.to_dict(), "grid": grid.to_dict(),
                "gamma": gamma, "E_infty": E_inf, "steady_residual": ss.residual,
                "certificates": {k: {"statement": v["statement"], "passed": v["passed"]}
                                 for k, v in certs.items()},
                "trajectory_files": files, "n_samples": len(traj.times),
                "final_time": traj.times[-1]}
    if plots:
        from .plots import emit_plots
        manifest["plots"] = emit_plots(work, manifest=manifest)
    _write_json(work / "manifest.json", manifest)


def certificates_passed(out_dir) -> bool:
    with open(Path(out_dir) / "manifest.json") as fh:
        man = json.load(fh)
    return all(c["passed"] for c in man["certificates"].values())


# ---------------------------------------------------------------------------
# lemma audits


AUDITS = ("point_mass", "interval_pair", "css1", "css2", "rcss", "clustering",
          "hs_linear", "mu_moments", "generalized_hs")

STATEMENTS = {"point_mass": "Lemma 4.5", "interval_pair": "Lemma 4.6", "css1": "Lemma 4.8",
              "css2": "Lemma 4.10 / Corollary 4.11", "rcss": "Lemma 4.12 / Corollary 4.13",
              "clustering": "Lemma 5.2", "hs_linear": "Lemma 6.3 / Lemma 6.4",
              "mu_moments": "Lemma 6.7", "generalized_hs": "Lemma 6.6 / Lemma 6.8"}


@dataclass
class AuditTally:
    statement: str
    passed: int = 0
    failed: int = 0
    vacuous: int = 0
    worst_slack: float = float("inf")
    failing_seeds: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, seed: int, outcome: str, slack: float = float("inf"), error: str | None = None):
        if outcome == "vacuous":
            self.vacuous += 1
            return
        if outcome == "pass":
            self.passed += 1
        else:
            self.failed += 1
            self.failing_seeds.append(seed)
            if error:
                self.errors.append(f"seed {seed}: {error}")
        if np.isfinite(slack):
            self.worst_slack = min(self.worst_slack, float(slack))


def _audit_seed(name: str, seed: int, ctx: dict):
    """(outcome, slack, error) for one lemma and one seed."""
    spec, m = ctx["spec"], ctx["m"]
    rho = ctx["density"](seed)
    mu_mass = mu_piecewise(rho).mass
    rng = np.random.default_rng(seed)
    if name == "point_mass":
        r = np.linspace(*sorted(rng.uniform(0.01, 2.0, 2)), 50)
        x = np.linspace(*sorted(rng.uniform(0.01, 4.0, 2)), 50)
        res = point_mass_check(spec, r, x, lam=ctx.get("lam"))
        return ("pass" if res["passed"] else "fail"), res["worst_slack"], None
    if name == "interval_pair":
        c1, c2 = rng.uniform(-3, 3, 2)
        r1, r2 = rng.uniform(0.05, 1.0, 2)
        v1 = rng.normal()
        # relative velocity that does not increase |c1 - c2|
        v2 = v1 - np.sign(c2 - c1) * abs(rng.normal())
        res = interval_pair_check(spec, c1, r1, c2, r2, v1, v2)
        return ("pass" if res["passed"] and res["fd_agrees"] else "fail"), -res["slope"], None
    if name == "clustering":
        R = 1.0
        prof = ctx["decreasing"](seed)
        p = _restrict_profile(prof, R)
        r, a = clustering_radius(p, R, m)
        lhs, rhs = clustering_inequality(p, r, R, m, a)
        ok = R <= r <= 2 * R and lhs <= rhs
        return ("pass" if ok else "fail"), rhs - lhs, None
    if name == "hs_linear":
        an = hs_linear_curve_analysis(ctx["decreasing"](seed), ctx["steady"], spec, m, n_t=11)
        pr = an.profile
        slack = float(np.min(pr.second_diff - pr.rhs_average))
        return ("pass" if an.report.bound_satisfied else "fail"), slack, None
    if mu_mass <= 1e-14:
        return "vacuous", np.inf, None
    if name == "mu_moments":
        c1, c2 = mu_moment_inequalities(mu_piecewise(rho))
        ok = c1.holds and c2.holds
        return ("pass" if ok else "fail"), min(c1.lhs - c1.rhs, c2.lhs - c2.rhs), None
    if name == "css1":
        rep = css1_bound(rho, spec, ctx["R3"], m)
    elif name == "rcss":
        rep = rcss_bound(rho, spec, max(rho.support_radius(0.0), 1e-9), m)
    elif name == "css2":
        R1, R2 = ctx["R1"], ctx["R2"]
        c_rho = mass_in(rho, 0.0, R1)
        if c_rho <= 0 or mu_piecewise(rho).moment(0, R1, R2) <= 0:
            return "vacuous", np.inf, None
        rep = css2_bound(rho, spec, R1, R2, ctx["R3"], c_rho, m)
        if not rep.applicable:
            return "vacuous", np.inf, None
    elif name == "generalized_hs":
        rep = generalized_hs_linear_analysis(rho, ctx["steady"], spec, m)
    else:
        raise ConfigError(f"unknown audit {name!r}")
    return ("pass" if rep.bound_satisfied else "fail"), rep.slack, None


def _restrict_profile(rho: Density, R: float):
    """The right half of a radially decreasing density, rescaled so that
    [R, 3R] covers the outer part of its support."""
    from .piecewise import Piecewise

    e = rho.grid.edges
    half = rho.grid.n_cells // 2
    s = max(rho.support_radius(0.0), rho.dx)
    scale = 3 * R / s
    return Piecewise(e[half:] * scale, rho.values[half:])


def audit_lemmas(cfg: ExperimentConfig, seeds, only=None, lam=None, config_path: str = "<config>") -> dict:
    """Run every lemma check over seeded random densities.

    ``only`` restricts to a subset of AUDITS; ``lam`` replaces the lower
    envelope in the point-mass check (mutation testing).  A check that has
    nothing to test for a seed (no bump part, bracket negative) counts as a
    vacuous pass.  ``ok`` is the conjunction of all non-vacuous outcomes.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("seed list must be nonempty")
    names = list(only) if only else list(AUDITS)
    for n in names:
        if n not in AUDITS:
            raise ConfigError(f"unknown audit {n!r}; choose from {AUDITS}")
    spec = cfg.make_potential()
    m = float(cfg.m)
    dg = cfg.diagnostics
    grid = Grid(cfg.make_grid().half_width, int(dg["audit_cells"]))
    family = dg["audit_family"]
    support = min(0.8 * grid.half_width, float(dg["R3"]) * 1.2)
    if family == "bumps":
        density = lambda s: random_bumps(s, grid, support)
    elif family == "decreasing":
        density = lambda s: random_bumps(s, grid, support, decreasing=True)
    else:
        raise ConfigError(f"unknown audit_family {family!r}")
    ctx = {"spec": spec, "m": m, "grid": grid, "density": density, "lam": lam,
           "decreasing": lambda s: random_decreasing(s, grid, support),
           "R1": float(dg["R1"]), "R2": float(dg["R2"]), "R3": float(dg["R3"])}
    if {"hs_linear", "generalized_hs"} & set(names):
        ctx["steady"] = compute_steady(1.0, spec, m, float(dg["steady_tol"]), grid).density
    tallies = {n: AuditTally(STATEMENTS[n]) for n in names}
    for seed in seeds:
        for n in names:
            try:
                outcome, slack, err = _audit_seed(n, seed, ctx)
            except (AggDiffError, FloatingPointError) as exc:
                outcome, slack, err = "fail", np.inf, f"{type(exc).__name__}: {exc}"
            tallies[n].add(seed, outcome, slack, err)
    lemmas = {}
    for n, t in tallies.items():
        d = asdict(t)
        d["worst_slack"] = t.worst_slack if np.isfinite(t.worst_slack) else None
        d["all_vacuous"] = t.passed == 0 and t.failed == 0
        d["reproduce"] = [f"aggdiff audit {config_path} --seeds 1 --seed-start {s} --only {n}"
                          for s in t.failing_seeds]
        lemmas[n] = d
    return {"generator_version": GENERATOR_VERSION, "family": family, "grid": grid.to_dict(),
            "seeds": [seeds[0], seeds[-1]], "n_seeds": len(seeds), "lemmas": lemmas,
            "ok": all(t.failed == 0 for t in tallies.values())}
