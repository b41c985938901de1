"""Interaction potentials W, their derivatives and antiderivatives, and
sampled checks of the structural assumptions on W.

Every potential is even with W(0) = 0.  Besides W, W' and W''' each form
provides the first two antiderivatives

    W1(x) = int_0^x W,      W2(x) = int_0^x W1,

(W1 odd, W2 even).  They give closed-form double integrals of W over
rectangles, which the curve machinery uses to evaluate the interaction
energy of piecewise-constant densities exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .errors import DomainError

FORMS = ("WeaklyConfiningPower", "NewtonianLinear", "TanhSaturating", "Tabulated")


@dataclass(frozen=True)
class PotentialSpec:
    """Immutable description of an interaction potential.

    ``params`` holds form-specific parameters: ``strength`` for the power
    family, ``slope`` for the linear one, ``scale`` for tanh and the arrays
    ``x``/``wprime`` for tabulated data.
    """

    form: str
    alpha: float
    beta: float
    c_alpha: float
    C_beta: float
    m_diffusion: float | None = None
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise DomainError(f"unknown potential form {self.form!r}")
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("alpha and beta must be positive")
        if not (self.c_alpha > 0 and self.C_beta > 0):
            raise DomainError("envelope constants must be positive")

    def to_dict(self) -> dict:
        d = {
            "form": self.form,
            "alpha": self.alpha,
            "beta": self.beta,
            "c_alpha": self.c_alpha,
            "C_beta": self.C_beta,
            "m_diffusion": self.m_diffusion,
        }
        p = {k: v for k, v in self.params.items() if isinstance(k, str) and not k.startswith("_")}
        if self.form == "Tabulated":
            p = {"x": [float(v) for v in p["x"]], "wprime": [float(v) for v in p["wprime"]]}
        d["params"] = p
        return d


# ---------------------------------------------------------------------------
# factories


def weakly_confining_power(alpha: float = 3.0, m: float | None = None,
                           strength: float | None = None) -> PotentialSpec:
    """W'(x) = k (1+|x|)^(-alpha) sign(x).

    For alpha > 1 the default k = alpha - 1 gives W(x) = 1 - (1+|x|)^(1-alpha),
    which tends to 1 (weakly confining).  For alpha <= 1 the default is k = 1
    and W grows without bound.  The envelope is exact: c_alpha = C_beta = k
    with beta = alpha.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    k = strength if strength is not None else (alpha - 1.0 if alpha > 1 else 1.0)
    return PotentialSpec("WeaklyConfiningPower", alpha, alpha, k, k, m, {"strength": k})


def newtonian_linear(slope: float = 1.0, alpha: float = 0.5, beta: float = 0.5,
                     x_max: float = 10.0, m: float | None = None) -> PotentialSpec:
    """W(x) = slope |x|.

    W' is constant, so the lower envelope holds with c_alpha = slope for
    any alpha > 0, while the decaying upper envelope can only hold on a
    bounded range; C_beta is set so that it holds on [0, x_max].
    """
    if slope <= 0:
        raise DomainError("slope must be positive")
    C = slope * (1.0 + x_max) ** beta
    return PotentialSpec("NewtonianLinear", alpha, beta, slope, C, m,
                         {"slope": slope, "x_max": x_max})


def tanh_saturating(scale: float = 2.0, alpha: float = 3.0, beta: float = 3.0,
                    x_max: float = 10.0, m: float | None = None) -> PotentialSpec:
    """W(x) = scale * tanh(|x|/scale), so W' = sech^2(x/scale).

    W' decays exponentially, so the algebraic lower envelope can only hold
    on a bounded range [0, x_max]; the upper envelope holds globally.  Both
    constants are fitted numerically (see ``fit_envelope``).
    """
    if scale <= 0:
        raise DomainError("scale must be positive")
    proto = PotentialSpec("TanhSaturating", alpha, beta, 1.0, 1.0, m,
                          {"scale": scale, "x_max": x_max})
    # the upper envelope is global: the maximiser of sech^2 (1+x)^beta is finite
    x_hi = max(x_max, 40.0 * scale + 10.0 * beta)
    c, _ = fit_envelope(proto, x_max)
    _, C = fit_envelope(proto, x_hi)
    return PotentialSpec("TanhSaturating", alpha, beta, c, C, m,
                         {"scale": scale, "x_max": x_max})


def tabulated(x, wprime, alpha: float, beta: float, c_alpha: float | None = None,
              C_beta: float | None = None, m: float | None = None) -> PotentialSpec:
    """Potential from samples of W' on 0 = x_0 < x_1 < ... (linear in between).

    Missing envelope constants are fitted on the table range.
    """
    x = np.asarray(x, dtype=float)
    wp = np.asarray(wprime, dtype=float)
    if x.ndim != 1 or x.shape != wp.shape or x.size < 2:
        raise DomainError("tabulated W' needs two equal-length 1D arrays")
    if x[0] != 0.0 or np.any(np.diff(x) <= 0):
        raise DomainError("table abscissae must start at 0 and increase strictly")
    params = {"x": x, "wprime": wp}
    proto = PotentialSpec("Tabulated", alpha, beta, 1.0, 1.0, m, params)
    c_fit, C_fit = fit_envelope(proto, float(x[-1]))
    c = c_alpha if c_alpha is not None else (c_fit if c_fit > 0 else 1e-300)
    C = C_beta if C_beta is not None else (C_fit if C_fit > 0 else 1e-300)
    return PotentialSpec("Tabulated", alpha, beta, c, C, m, params)


def read_tabulated_csv(path, alpha: float, beta: float, m: float | None = None,
                       **kw) -> PotentialSpec:
    """Read a two-column CSV with header ``x,Wprime``."""
    xs, ws = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "Wprime"]:
            raise DomainError("tabulated potential CSV must have header x,Wprime")
        for row in reader:
            xs.append(float(row["x"]))
            ws.append(float(row["Wprime"]))
    return tabulated(xs, ws, alpha, beta, m=m, **kw)


def from_config(block: dict, m: float | None = None) -> PotentialSpec:
    """Build a potential from an experiment-config block."""
    block = dict(block)
    form = block.pop("form")
    if form == "WeaklyConfiningPower":
        return weakly_confining_power(block.get("alpha", 3.0), m, block.get("strength"))
    if form == "NewtonianLinear":
        return newtonian_linear(m=m, **block)
    if form == "TanhSaturating":
        return tanh_saturating(m=m, **block)
    if form == "Tabulated":
        path = block.pop("path", None)
        if path is not None:
            return read_tabulated_csv(path, m=m, **block)
        return tabulated(block.pop("x"), block.pop("wprime"), m=m, **block)
    raise DomainError(f"unknown potential form {form!r}")


# ---------------------------------------------------------------------------
# repeated integrals of (1+y)^q, used by the power family


def _iint(q: float, n: int, x: np.ndarray) -> np.ndarray:
    """n-fold integral from 0 of (1+y)^q, for x >= 0 (n = 1, 2, 3)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.25
    if np.any(small):
        xs = x[small]
        acc = np.zeros_like(xs)
        # Taylor series: sum_j binom(q, j) x^(j+n) j!/(j+n)!
        b = 1.0
        for j in range(40):
            if j:
                b *= (q - j + 1) / j
            coef = b / np.prod(np.arange(j + 1, j + n + 1, dtype=float))
            acc += coef * xs ** (j + n)
        out[small] = acc
    big = ~small
    if np.any(big):
        X = 1.0 + x[big]
        lx = np.log(X)
        acc = np.zeros_like(X)
        for k in range(n):
            p = q + k + 1
            if abs(p) < 1e-12:
                prim = lx
            else:
                prim = np.expm1(p * lx) / p
            acc += math.comb(n - 1, k) * X ** (n - 1 - k) * (-1.0) ** k * prim
        out[big] = acc / math.factorial(n - 1)
    return out


def _li2(z):
    """Dilogarithm Li2(z) for real z <= 1."""
    return special.spence(1.0 - z)


# ---------------------------------------------------------------------------
# evaluators on x >= 0; the public functions add the parity


def _table_check(spec, a):
    xt = spec.params["x"]
    if np.any(a > xt[-1] * (1 + 1e-12)):
        raise DomainError(f"tabulated potential queried at |x|={float(a.max())} beyond table end {xt[-1]}")


def _tab_segments(spec):
    """Cumulative integrals of the piecewise-linear W' at table nodes."""
    cache = spec.params.get("_cum")
    if cache is not None:
        return cache
    xt = np.asarray(spec.params["x"], float)
    ft = np.asarray(spec.params["wprime"], float)
    h = np.diff(xt)
    s = np.diff(ft) / h
    # exact polynomial integrals on each segment: f = f0 + s (y - x0)
    W = np.zeros_like(xt)
    W1 = np.zeros_like(xt)
    W2 = np.zeros_like(xt)
    for i in range(h.size):
        d = h[i]
        f0 = ft[i]
        W[i + 1] = W[i] + f0 * d + s[i] * d ** 2 / 2
        W1[i + 1] = W1[i] + W[i] * d + f0 * d ** 2 / 2 + s[i] * d ** 3 / 6
        W2[i + 1] = W2[i] + W1[i] * d + W[i] * d ** 2 / 2 + f0 * d ** 3 / 6 + s[i] * d ** 4 / 24
    cache = (xt, ft, s, W, W1, W2)
    spec.params["_cum"] = cache
    return cache


def _tab_eval(spec, a, order):
    xt, ft, s, W, W1, W2 = _tab_segments(spec)
    idx = np.clip(np.searchsorted(xt, a, side="right") - 1, 0, xt.size - 2)
    d = a - xt[idx]
    f0 = ft[idx]
    sl = s[idx]
    if order == 0:
        return f0 + sl * d
    if order == -1:
        return W[idx] + f0 * d + sl * d ** 2 / 2
    if order == -2:
        return W1[idx] + W[idx] * d + f0 * d ** 2 / 2 + sl * d ** 3 / 6
    return W2[idx] + W1[idx] * d + W[idx] * d ** 2 / 2 + f0 * d ** 3 / 6 + sl * d ** 4 / 24


def _wp_pos(spec, a):
    f = spec.form
    if f == "WeaklyConfiningPower":
        return spec.params["strength"] * (1.0 + a) ** (-spec.alpha)
    if f == "NewtonianLinear":
        return np.full_like(a, spec.params["slope"])
    if f == "TanhSaturating":
        return 1.0 / np.cosh(a / spec.params["scale"]) ** 2
    _table_check(spec, a)
    return _tab_eval(spec, a, 0)


def _w_pos(spec, a, order):
    """order -1: W, -2: W1, -3: W2 (all on a >= 0)."""
    f = spec.form
    if f == "WeaklyConfiningPower":
        return spec.params["strength"] * _iint(-spec.alpha, -order, a)
    if f == "NewtonianLinear":
        k = spec.params["slope"]
        return k * a ** (-order) / math.factorial(-order)
    if f == "TanhSaturating":
        sc = spec.params["scale"]
        u = a / sc
        if order == -1:
            return sc * np.tanh(u)
        # log cosh u = u - log 2 + log1p(e^{-2u})
        if order == -2:
            return sc ** 2 * (u - math.log(2.0) + np.log1p(np.exp(-2 * u)))
        return sc ** 3 * (u * u / 2 - u * math.log(2.0)
                          + 0.5 * _li2(-np.exp(-2 * u)) - 0.5 * _li2(-1.0))
    _table_check(spec, a)
    return _tab_eval(spec, a, order)


def eval_W(spec: PotentialSpec, x):
    """W(x), even, W(0) = 0."""
    x = np.asarray(x, dtype=float)
    return _w_pos(spec, np.abs(x), -1)


def eval_Wprime(spec: PotentialSpec, x):
    """W'(x) with the odd extension W'(-x) = -W'(x) and W'(0) = 0."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * _wp_pos(spec, np.abs(x))


def eval_W1(spec: PotentialSpec, x):
    """First antiderivative of W from 0 (odd)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * _w_pos(spec, np.abs(x), -2)


def eval_W2(spec: PotentialSpec, x):
    """Second antiderivative of W from 0 (even)."""
    x = np.asarray(x, dtype=float)
    return _w_pos(spec, np.abs(x), -3)


def eval_W3prime(spec: PotentialSpec, x, h: float | None = None):
    """W'''(x) for x > 0; closed form where available, else 4th-order
    central differences of W' with step h."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if spec.form == "WeaklyConfiningPower":
        al = spec.alpha
        return np.sign(x) * spec.params["strength"] * al * (al + 1) * (1 + a) ** (-al - 2)
    if spec.form == "NewtonianLinear":
        return np.zeros_like(a)
    if h is None:
        h = 1e-3
    f = lambda y: _wp_pos(spec, np.abs(y))
    return np.sign(x) * (-f(a + 2 * h) + 16 * f(a + h) - 30 * f(a)
                         + 16 * f(a - h) - f(a - 2 * h)) / (12 * h * h)


def wprime_sup(spec: PotentialSpec, x_max: float = 50.0) -> float:
    """Sampled sup of |W'| on (0, x_max]."""
    if spec.form == "WeaklyConfiningPower":
        return float(spec.params["strength"])
    if spec.form == "NewtonianLinear":
        return float(spec.params["slope"])
    if spec.form == "TanhSaturating":
        return 1.0
    return float(np.max(np.abs(spec.params["wprime"])))


def limit_W(spec: PotentialSpec) -> tuple[float, bool]:
    """(lim_{x->inf} W(x), extrapolated flag).  inf for strongly confining."""
    f = spec.form
    if f == "WeaklyConfiningPower":
        if spec.alpha > 1:
            return spec.params["strength"] / (spec.alpha - 1.0), False
        return math.inf, False
    if f == "NewtonianLinear":
        return math.inf, False
    if f == "TanhSaturating":
        return float(spec.params["scale"]), False
    # extrapolate the last decade of samples: fit W' ~ a x^-p on the tail
    xt = np.asarray(spec.params["x"], float)
    ft = np.asarray(spec.params["wprime"], float)
    W_end = float(_tab_eval(spec, np.array([xt[-1]]), -1)[0])
    tail = xt >= xt[-1] / 10
    if np.sum(tail) < 3 or np.any(ft[tail] <= 0) or xt[tail][0] <= 0:
        return W_end, True
    p, loga = np.polyfit(np.log(xt[tail]), np.log(ft[tail]), 1)
    p = -p
    if p <= 1:
        return math.inf, True
    a = math.exp(loga)
    return W_end + a * xt[-1] ** (1 - p) / (p - 1), True


# ---------------------------------------------------------------------------
# envelopes and assumption checks


def lambda_env(spec: PotentialSpec, x):
    """Lower envelope c_alpha (1+|x|)^(-alpha)."""
    x = np.asarray(x, dtype=float)
    return spec.c_alpha * (1.0 + np.abs(x)) ** (-spec.alpha)


def Lambda_env(spec: PotentialSpec, x):
    """Upper envelope C_beta (1+|x|)^(-beta)."""
    x = np.asarray(x, dtype=float)
    return spec.C_beta * (1.0 + np.abs(x)) ** (-spec.beta)


def fit_envelope(spec: PotentialSpec, x_max: float, n: int = 400001) -> tuple[float, float]:
    """Tightest (c_alpha, C_beta) for which the envelopes hold on [0, x_max],
    found by dense sampling and widened by a relative margin of 1e-6."""
    xs = np.linspace(0.0, x_max, n)
    if spec.form == "Tabulated":
        xt = np.asarray(spec.params["x"], float)
        xs = np.union1d(xs, xt[xt <= x_max])
    wp = _wp_pos(spec, xs)
    c = float(np.min(wp * (1 + xs) ** spec.alpha)) * (1 - 1e-6)
    C = float(np.max(wp * (1 + xs) ** spec.beta)) * (1 + 1e-6)
    return c, C


@dataclass
class EnvelopeReport:
    """Outcome of the assumption checks; failures are reported, not raised."""

    checks: dict[str, dict]
    wprime_sup: float
    w3_sup: float
    tightest_c_alpha: float
    tightest_C_beta: float

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c["passed"]]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "wprime_sup": self.wprime_sup,
            "w3_sup": self.w3_sup,
            "tightest_c_alpha": self.tightest_c_alpha,
            "tightest_C_beta": self.tightest_C_beta,
        }


def _check(passed, loc=None, mag=0.0, **extra):
    d = {"passed": bool(passed), "worst_location": None if loc is None else float(loc),
         "violation": float(max(mag, 0.0))}
    d.update(extra)
    return d


def validate_assumptions(spec: PotentialSpec, grid=None, m: float | None = None,
                         n_samples: int = 20000) -> EnvelopeReport:
    """Sample W, W' and W''' on (0, half_width] and check the structural
    assumptions: attractive even W with W(0)=0, algebraic envelopes on W',
    bounded W' and W''', and m > max(2, alpha)."""
    if grid is not None:
        x_max = grid.half_width * 2.0  # differences of grid points reach 2 R_dom
        eps = grid.dx
    else:
        x_max = 20.0
        eps = x_max / 1000
    if spec.form == "Tabulated":
        x_max = min(x_max, float(spec.params["x"][-1]) - eps)
    xs = np.linspace(0.0, x_max, n_samples + 1)[1:]
    checks = {}

    w0 = float(eval_W(spec, np.array([0.0]))[0])
    W = eval_W(spec, xs)
    Wm = eval_W(spec, -xs)
    wp = _wp_pos(spec, xs)
    even_err = np.abs(W - Wm)
    bad = np.flatnonzero(wp <= 0)
    a1_ok = w0 == 0.0 and even_err.max() == 0.0 and bad.size == 0
    loc = xs[bad[0]] if bad.size else None
    checks["A1"] = _check(a1_ok, loc, float(-wp.min()) if bad.size else abs(w0),
                          W_at_0=w0)

    lam = lambda_env(spec, xs)
    Lam = Lambda_env(spec, xs)
    low = lam - wp
    high = wp - Lam
    tol = 1e-12 * np.maximum(np.abs(wp), 1e-300)
    v = np.maximum(low - tol, high - tol)
    i = int(np.argmax(v))
    a2_ok = v[i] <= 0 and spec.alpha >= spec.beta
    checks["A2"] = _check(a2_ok, xs[i] if v[i] > 0 else None, max(float(v[i]), 0.0),
                          alpha_ge_beta=spec.alpha >= spec.beta)

    xe = xs[xs > eps]
    w3 = np.abs(eval_W3prime(spec, xe, h=eps / 4))
    w3_sup = float(np.max(w3)) if w3.size else 0.0
    checks["A3"] = _check(np.isfinite(w3_sup), None, 0.0, sup=w3_sup)

    wp_sup = float(np.max(np.abs(wp)))
    checks["A2_bounded"] = _check(np.isfinite(wp_sup), None, 0.0, sup=wp_sup)

    mm = m if m is not None else spec.m_diffusion
    if mm is None:
        checks["A4"] = _check(True, None, 0.0, note="no diffusion exponent supplied")
    else:
        need = max(2.0, spec.alpha)
        checks["A4"] = _check(mm > need, None, need - mm if mm <= need else 0.0, m=mm)

    c_t = float(np.min(wp * (1 + xs) ** spec.alpha))
    C_t = float(np.max(wp * (1 + xs) ** spec.beta))
    return EnvelopeReport(checks, wp_sup, w3_sup, c_t, C_t)


def gamma_rate(alpha: float, beta: float) -> float:
    """Algebraic equilibration exponent 2 + a + 4a^2/b + a^3/b^2."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    if alpha < beta:
        raise DomainError("requires alpha >= beta")
    return 2.0 + alpha + 4.0 * alpha ** 2 / beta + alpha ** 3 / beta ** 2
