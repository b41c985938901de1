"""Stand-alone inequality checks: point-mass and interval-pair decay, local
clustering, mu-moment comparisons and the dissipation floor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..density import Density
from ..errors import ConsistencyError, DomainError
from ..energy import energy, rect_kernel
from ..piecewise import Piecewise
from ..potential import PotentialSpec, eval_W, lambda_env


# ---------------------------------------------------------------------------
# point mass and interval pairs


def point_mass_check(spec: PotentialSpec, r, x, lam=None) -> dict:
    """-int_{-r}^{r} W'(x - y) dy <= -2 lambda(r + x) min(r, x) on the (r, x) grid.

    The left side is W(x - r) - W(x + r) exactly.  ``lam`` overrides the
    lower envelope (used to check that a corrupted envelope is caught).
    """
    r, x = np.meshgrid(np.asarray(r, float), np.asarray(x, float), indexing="ij")
    if np.any(r <= 0) or np.any(x <= 0):
        raise DomainError("r and x must be positive")
    lam = lam if lam is not None else (lambda z: lambda_env(spec, z))
    lhs = eval_W(spec, x - r) - eval_W(spec, x + r)
    rhs = -2 * lam(r + x) * np.minimum(r, x)
    tol = 1e-12 * (1 + np.abs(rhs))
    ok = lhs <= rhs + tol
    return {"passed": bool(ok.all()), "failures": int((~ok).sum()),
            "worst_slack": float(np.min(rhs - lhs)), "n": int(ok.size)}


def pair_interaction(spec: PotentialSpec, c1, r1, c2, r2) -> float:
    """I[chi_1, chi_2] = int_{I1} int_{I2} W(x - y) dy dx."""
    K = rect_kernel(spec, [c1 - r1], [c1 + r1], [c2 - r2], [c2 + r2])
    return float(K[0, 0])


def interval_pair_check(spec: PotentialSpec, c1, r1, c2, r2, v1, v2, h: float = 1e-4) -> dict:
    """Sign of d/dt I[chi_{I1(t)}, chi_{I2(t)}] when |c1 - c2| does not grow.

    Centres move as c_i + v_i t.  The slope is the exact derivative
    -(v2 - v1) int_{I1} [W(x - c2 + r2) - W(x - c2 - r2)] dx, computed from
    the first antiderivative, with a finite-difference cross-check.
    """
    from ..potential import eval_W1

    rel = np.sign(c2 - c1) * (v2 - v1)
    if rel > 0:
        return {"applicable": False, "slope": float("nan"), "passed": True}
    a, b = c1 - r1, c1 + r1

    def prim(z):  # int_a^b W(x - z) dx
        return float(eval_W1(spec, np.array(b - z)) - eval_W1(spec, np.array(a - z)))

    slope = -(v2 - v1) * (prim(c2 - r2) - prim(c2 + r2))
    fd = (pair_interaction(spec, c1 + v1 * h, r1, c2 + v2 * h, r2)
          - pair_interaction(spec, c1 - v1 * h, r1, c2 - v2 * h, r2)) / (2 * h)
    size = 4 * r1 * r2 * (1 + abs(c2 - c1))
    scale = abs(v2 - v1) * size
    # the difference quotient also carries round-off of order 100 eps * I / h
    # (four cancelling antiderivative terms)
    fd_tol = 1e-5 * (scale + abs(slope)) + 1e-14 * size / h
    return {"applicable": True, "slope": slope, "fd_slope": fd,
            "passed": bool(slope <= 1e-12 * scale),
            "fd_agrees": bool(abs(fd - slope) <= fd_tol)}


# ---------------------------------------------------------------------------
# local clustering


def clustering_constant(m: float) -> float:
    if not m > 1:
        raise DomainError("m must exceed 1")
    return max(10000.0, 200.0 * 2.0 ** (2.0 / (m - 1)))


def _as_piecewise(rho) -> Piecewise:
    if isinstance(rho, Piecewise):
        return rho
    if isinstance(rho, Density):
        return Piecewise.from_density(rho)
    edges, values = rho
    return Piecewise(np.asarray(edges, float), np.asarray(values, float))


def clustering_inequality(p: Piecewise, r: float, R: float, m: float, a: float) -> tuple[float, float]:
    """(int_r^{3R} rho^m, a int_r^{3R} (x - r) rho), exactly."""
    lhs = p.integral_of_power(m, r, 3 * R)
    lo = np.clip(p.edges[:-1], r, 3 * R) - r
    hi = np.clip(p.edges[1:], r, 3 * R) - r
    rhs = a * float(np.sum(p.values * (hi ** 2 - lo ** 2) / 2.0))
    return lhs, rhs


def clustering_radius(rho, R: float, m: float) -> tuple[float, float]:
    """An r in [R, 2R] with int_r^{3R} rho^m <= a int_r^{3R} (x - r) rho.

    ``rho`` (a Density, Piecewise or (edges, values)) must be nonincreasing
    on [R, 3R]; a = C_m rho(R)^{m-1} / R with rho(R) the value of the piece
    just right of R.  If rho vanishes on [1.5R, 3R] the answer is 1.5R;
    otherwise the edges inside [R, 2R] (plus R, 1.5R, 2R) are scanned from
    the left and, failing that, a refinement of each piece.
    """
    if not R > 0:
        raise DomainError("R must be positive")
    p = _as_piecewise(rho)
    e = p.edges
    sel = (e[1:] > R) & (e[:-1] < 3 * R)
    vals = p.values[sel]
    if np.any(np.diff(vals) > 1e-14 * max(vals.max(initial=0.0), 1e-300)):
        raise DomainError("rho must be nonincreasing on [R, 3R]")
    C = clustering_constant(m)
    rho_R = float(p.sample(np.array([R]))[0])
    a = C / R * rho_R ** (m - 1)
    if p.integral_of_power(1.0, 1.5 * R, 3 * R) == 0.0:
        return 1.5 * R, a
    cand = np.unique(np.concatenate([[R, 1.5 * R, 2 * R], e[(e > R) & (e < 2 * R)]]))
    for r in cand:
        lhs, rhs = clustering_inequality(p, r, R, m, a)
        if lhs <= rhs:
            return float(r), a
    fine = np.linspace(R, 2 * R, 20001)
    for r in fine:
        lhs, rhs = clustering_inequality(p, r, R, m, a)
        if lhs <= rhs:
            return float(r), a
    raise ConsistencyError(f"no r in [{R}, {2 * R}] satisfies the clustering inequality; "
                           "the profile is not monotone or is under-resolved")


# ---------------------------------------------------------------------------
# mu moments


@dataclass(frozen=True)
class MomentCheck:
    lhs: float
    rhs: float
    holds: bool
    equality: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "equality": self.equality}


def mu_moment_inequalities(mu, rel_eq: float = 1e-6) -> tuple[MomentCheck, MomentCheck]:
    """int x^2 mu >= (int mu)^3 / (3 |mu|^2) and >= 2^{3/2} (int x mu)^{3/2} / (3 |mu|^{1/2}),
    over x > 0.  ``equality`` flags agreement to ``rel_eq`` (a box [0, L] attains both)."""
    p = _as_piecewise(mu)
    if np.any(p.values < 0):
        raise DomainError("mu must be nonnegative")
    sup = float(np.max(p.values[p.edges[1:] > 0], initial=0.0))
    m0 = p.moment(0, 0.0, np.inf)
    m1 = p.moment(1, 0.0, np.inf)
    m2 = p.moment(2, 0.0, np.inf)
    if sup == 0:
        z = MomentCheck(0.0, 0.0, True, True)
        return z, z
    r1 = m0 ** 3 / (3 * sup ** 2)
    r2 = 2 ** 1.5 / (3 * sup ** 0.5) * m1 ** 1.5
    out = []
    for rhs in (r1, r2):
        tol = 1e-12 * max(m2, rhs)
        out.append(MomentCheck(m2, rhs, bool(m2 >= rhs - tol), bool(abs(m2 - rhs) <= rel_eq * max(m2, 1e-300))))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# dissipation floor


def dissipation_lower_bound(rho: Density, spec: PotentialSpec, m: float, R: float,
                            E_infty: float, c: float | None = None) -> float:
    """c lambda(R)^3 / R^{8/3} (E[rho] - E_infty), floored at 0.

    ``c`` defaults to the frozen corpus constant ``theorem_2_3_c``.
    """
    if rho.support_radius(0.0) > R * (1 + 1e-12):
        raise DomainError(f"support radius {rho.support_radius(0.0)} exceeds R = {R}")
    if c is None:
        from ..constants import get_constant
        c = get_constant("theorem_2_3_c")
    gap = energy(rho, spec, m).total - E_infty
    return float(max(c * float(lambda_env(spec, R)) ** 3 / R ** (8.0 / 3.0) * gap, 0.0))


def dissipation_shape(spec: PotentialSpec, R: float) -> float:
    return float(lambda_env(spec, R)) ** 3 / R ** (8.0 / 3.0)
