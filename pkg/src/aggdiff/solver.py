"""Finite-volume time integration of d_t rho + d_x(rho u) = d_xx(rho^m).

Default scheme (``gradient``): the flux at face i+1/2 is

    F = -rho_up * (xi_{i+1} - xi_i) / dx,   xi = m/(m-1) rho^(m-1) + W*rho,

with rho_up taken from the upwind side of the velocity -d_x xi.  This is the
same PDE written as a gradient flow.  The scheme conserves mass exactly,
keeps rho >= 0 under the time-step cap, dissipates the discrete energy at
the semi-discrete level, and its steady states are exactly the discrete
Euler-Lagrange solutions computed by the fixed-point solver.

The ``split`` scheme is the textbook alternative: upwind rho*u with
face-averaged u plus centred differences of rho^m.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import density as dens
from .density import Density, moment, phi_weight
from .energy import convolve, dissipation_rate, energy, h_minus_one_distance
from .errors import DomainError, DomainEscapeError, StabilityError
from .potential import PotentialSpec, validate_assumptions

NEG_TOL = 1e-14


@dataclass
class SolverConfig:
    """Time-stepping parameters.

    ``sample_every`` is a time interval; ``sample_every_steps`` (if set)
    samples by step count instead.  ``max_steps`` bounds the run.
    """

    t_end: float = 10.0
    cfl_advection: float = 0.4
    cfl_diffusion: float = 0.4
    sample_every: float = 0.1
    diffusion_mode: str = "explicit"
    scheme: str = "gradient"
    sample_every_steps: int | None = None
    max_steps: int | None = None
    positivity_cap: float = 0.9

    def __post_init__(self):
        for name in ("cfl_advection", "cfl_diffusion", "positivity_cap"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise DomainError(f"{name} must lie in (0, 1], got {v}")
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if self.diffusion_mode not in ("explicit", "semi_implicit"):
            raise DomainError(f"unknown diffusion_mode {self.diffusion_mode!r}")
        if self.scheme not in ("gradient", "split"):
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.sample_every_steps is None and not self.sample_every > 0:
            raise DomainError("sample_every must be positive")


# ---------------------------------------------------------------------------
# core update on raw arrays


def _is_mirror(v: np.ndarray) -> bool:
    return bool(np.array_equal(v, v[::-1]))


class _Stepper:
    """Precomputes nothing beyond the cached kernels; holds scheme choices."""

    def __init__(self, spec: PotentialSpec, m: float, dx: float, config: SolverConfig):
        self.spec = spec
        self.m = m
        self.dx = dx
        self.cfg = config

    # face quantities -----------------------------------------------------
    def faces(self, v, sym):
        """(advective face flux per unit dt-free, diffusion data, outflow rate)."""
        m, dx, spec = self.m, self.dx, self.spec
        if self.cfg.scheme == "gradient":
            conv = convolve(v, spec, dx, "W", symmetric=sym)
            p = m / (m - 1) * v ** (m - 1)
            dxi = np.diff(p + conv)
            up = np.where(dxi < 0, v[:-1], v[1:])
            drift = -np.diff(conv) / dx
            return {"dxi": dxi, "up": up, "drift": drift, "dp": np.diff(p), "conv": conv}
        u = -convolve(v, spec, dx, "Wprime", symmetric=sym)
        uf = 0.5 * (u[:-1] + u[1:])
        return {"uf": uf, "drift": uf}

    def stable_dt(self, v, sym, t_left=np.inf):
        cfg, dx, m = self.cfg, self.dx, self.m
        f = self.faces(v, sym)
        umax = float(np.max(np.abs(f["drift"]))) if v.size > 1 else 0.0
        cands = [t_left]
        if umax > 0:
            cands.append(cfg.cfl_advection * dx / umax)
        pmax = float(np.max(v)) ** (m - 1) if v.size else 0.0
        if cfg.diffusion_mode == "explicit" and pmax > 0:
            cands.append(cfg.cfl_diffusion * dx * dx / (2 * m * pmax))
        rate = self._outflow_rate(v, f)
        if rate > 0:
            cands.append(cfg.positivity_cap / rate)
        return float(min(cands)), f

    def _outflow_rate(self, v, f):
        """max over cells of (outgoing face speed sum)/dx for the explicit part."""
        dx = self.dx
        if self.cfg.scheme == "gradient":
            if self.cfg.diffusion_mode == "explicit":
                V = -f["dxi"] / dx
            else:
                V = f["drift"]
        else:
            V = f["uf"]
            if self.cfg.diffusion_mode == "explicit":
                # centred rho^m flux: bound its outflow by 2 rho^(m-1)/dx per face
                pm = float(np.max(v)) ** (self.m - 1) if v.size else 0.0
                return float(np.max(np.abs(V), initial=0.0)) * 2 / dx + 4 * pm / dx ** 2
        out = np.zeros(v.size)
        out[:-1] += np.maximum(V, 0.0)
        out[1:] += np.maximum(-V, 0.0)
        return float(np.max(out) / dx)

    # update --------------------------------------------------------------
    def advance(self, v, dt, sym, f=None):
        if f is None:
            f = self.faces(v, sym)
        dx, m = self.dx, self.m
        if self.cfg.scheme == "gradient":
            if self.cfg.diffusion_mode == "explicit":
                F = -f["up"] * f["dxi"] / dx
                return self._apply(v, F, dt)
            # drift upwinded explicitly, diffusion implicit with secant coefficient
            Fa = -f["up"] * (np.diff(f["conv"])) / dx
            dv = np.diff(v)
            with np.errstate(divide="ignore", invalid="ignore"):
                sec = np.where(dv != 0, f["dp"] / np.where(dv != 0, dv, 1.0),
                               m * np.maximum((v[:-1] + v[1:]) / 2, 0.0) ** (m - 2))
            Dc = f["up"] * sec
            return self._implicit(v, Fa, Dc, dt, sym)
        uf = f["uf"]
        Fa = np.where(uf > 0, uf * v[:-1], uf * v[1:])
        if self.cfg.diffusion_mode == "explicit":
            F = Fa - np.diff(v ** m) / dx
            return self._apply(v, F, dt)
        dv = np.diff(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            Dc = np.where(dv != 0, np.diff(v ** m) / np.where(dv != 0, dv, 1.0),
                          m * ((v[:-1] + v[1:]) / 2) ** (m - 1))
        return self._implicit(v, Fa, Dc, dt, sym)

    def _apply(self, v, F, dt):
        Fp = np.concatenate([[0.0], F, [0.0]])
        return v - (dt / self.dx) * (Fp[1:] - Fp[:-1])

    def _implicit(self, v, Fa, Dc, dt, sym):
        """Solve (I + dt/dx^2 L) w = v - dt/dx div(Fa) with L from Dc."""
        dx = self.dx
        Fp = np.concatenate([[0.0], Fa, [0.0]])
        rhs = v - (dt / dx) * (Fp[1:] - Fp[:-1])
        c = dt / dx ** 2 * Dc  # face coefficients, len n-1
        n = v.size
        if sym:
            h = n // 2
            # right half decouples: the centre face carries zero flux
            cr = c[h:]  # faces between right-half cells
            w = self._tridiag(rhs[h:], cr)
            return np.concatenate([w[::-1], w])
        return self._tridiag(rhs, c)

    @staticmethod
    def _tridiag(rhs, c):
        n = rhs.size
        diag = np.ones(n)
        diag[:-1] += c
        diag[1:] += c
        ab = np.zeros((3, n))
        ab[0, 1:] = -c
        ab[1] = diag
        ab[2, :-1] = -c
        return solve_banded((1, 1), ab, rhs)


def _finish(v_new, dx):
    low = float(v_new.min()) if v_new.size else 0.0
    if low < -NEG_TOL:
        raise StabilityError(f"negative density {low} produced; time step too large")
    if low < 0:
        v_new = np.maximum(v_new, 0.0)
    return v_new


# ---------------------------------------------------------------------------
# public API


def stable_dt(rho: Density, spec: PotentialSpec, m: float, config: SolverConfig) -> float:
    """Largest admissible step: the CFL formula, capped at t_end and by the
    exact positivity limit of the upwind update."""
    st = _Stepper(spec, m, rho.dx, config)
    dt, _ = st.stable_dt(rho.values, _is_mirror(rho.values), config.t_end)
    return dt


def step(rho: Density, spec: PotentialSpec, m: float, dt: float,
         config: SolverConfig | None = None) -> Density:
    """One conservative update of size dt."""
    cfg = config or SolverConfig()
    st = _Stepper(spec, m, rho.dx, cfg)
    v = rho.values
    sym = _is_mirror(v)
    v_new = _finish(st.advance(v, dt, sym), rho.dx)
    return Density(rho.grid, v_new, symmetric=rho.symmetric, check_support=False)


@dataclass
class Trajectory:
    """Sampled solution with diagnostics."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    m1: list = field(default_factory=list)
    mphi: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    hminus1: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def total_energy(self) -> np.ndarray:
        return np.array([e.total for e in self.energies])

    @property
    def final(self) -> Density:
        return self.snapshots[-1]

    def energy_rows(self):
        for k, t in enumerate(self.times):
            e = self.energies[k]
            yield [t, e.internal, e.interaction, e.total, self.dissipation[k],
                   self.m1[k], self.mphi[k], self.hminus1[k]]

    def write(self, directory, config: dict | None = None, potential: dict | None = None,
              snapshot_stride: int = 1) -> list[str]:
        """Energy CSV, snapshot CSVs and a JSON manifest."""
        os.makedirs(directory, exist_ok=True)
        files = ["energy.csv"]
        with open(os.path.join(directory, "energy.csv"), "w") as fh:
            fh.write("t,internal,interaction,total,dissipation,m1,mphi,hminus1\n")
            for row in self.energy_rows():
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        for k in range(0, len(self.snapshots), snapshot_stride):
            name = f"snapshot_t{k}.csv"
            dens.write_csv(self.snapshots[k], os.path.join(directory, name))
            files.append(name)
        grid = self.snapshots[0].grid.to_dict() if self.snapshots else None
        manifest = {"config": config, "potential": potential, "grid": grid,
                    "sample_times": [float(t) for t in self.times], "files": files,
                    "meta": self.meta}
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return files + ["manifest.json"]


def read_energy_csv(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = ["t", "internal", "interaction", "total", "dissipation", "m1", "mphi", "hminus1"]
    return {c: data[:, i] for i, c in enumerate(cols)}


def _check_escape(v, dx):
    edge_mass = (v[0] + v[1] + v[-2] + v[-1]) * dx
    if edge_mass > 1e-10:
        raise DomainEscapeError(f"mass {edge_mass:.3e} within two cells of the boundary")


def run(rho_in: Density, spec: PotentialSpec, m: float, config: SolverConfig,
        R1: float | None = None, reference: Density | None = None,
        override_assumptions: bool = False) -> Trajectory:
    """Integrate to t_end (or max_steps) and sample diagnostics.

    ``R1`` enables the m_phi moment; ``reference`` (e.g. the steady state)
    enables the H^-1 distance column.
    """
    if not override_assumptions:
        rep = validate_assumptions(spec, rho_in.grid, m)
        if not rep.passed:
            raise DomainError(f"potential assumptions fail: {rep.failed()} (pass override_assumptions=True to run anyway)")
    grid = rho_in.grid
    dx = grid.dx
    st = _Stepper(spec, m, dx, config)
    v = np.array(rho_in.values)
    sym = rho_in.symmetric and _is_mirror(v)
    use_phi = R1 is not None and 6 * R1 < grid.half_width
    phi = phi_weight(grid.centers, R1) if use_phi else None
    traj = Trajectory(meta={"scheme": config.scheme, "diffusion_mode": config.diffusion_mode,
                            "m": m, "R1": R1})

    def sample(t, nstep):
        r = Density(grid, v, symmetric=rho_in.symmetric, check_support=False)
        traj.times.append(float(t))
        traj.steps.append(nstep)
        traj.snapshots.append(r)
        traj.energies.append(energy(r, spec, m))
        traj.m1.append(moment(r, 1))
        traj.mphi.append(float(np.sum(phi * v) * dx) if use_phi else float("nan"))
        traj.dissipation.append(dissipation_rate(r, spec, m))
        traj.hminus1.append(h_minus_one_distance(r, reference) if reference is not None else float("nan"))

    t = 0.0
    nstep = 0
    sample(t, 0)
    next_sample = config.sample_every
    by_steps = config.sample_every_steps
    max_steps = config.max_steps if config.max_steps is not None else np.inf
    while nstep < max_steps and t < config.t_end * (1 - 1e-14):
        target = config.t_end if by_steps is not None else min(config.t_end, next_sample)
        left = target - t
        dt, f = st.stable_dt(v, sym, left)
        if dt <= 0:
            break
        v = _finish(st.advance(v, dt, sym, f), dx)
        nstep += 1
        t = target if dt >= left else t + dt
        _check_escape(v, dx)
        if by_steps is not None:
            if nstep % by_steps == 0:
                sample(t, nstep)
        elif t >= next_sample * (1 - 1e-14):
            sample(t, nstep)
            next_sample += config.sample_every
    if traj.steps[-1] != nstep:
        sample(t, nstep)
    traj.meta["n_steps"] = nstep
    traj.meta["t_final"] = t
    return traj
