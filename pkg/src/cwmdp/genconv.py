"""Exact prelimit generators and their convergence to the limiting operators.

For a regime with space scale ``b``, flatness order ``k``, centering point
``m`` and speed ``r = n b^{-2(k+1)}``, the nonlinear generator acting on a
test function ``f`` at a rescaled point ``x`` (chain position
``y = m + x / b``) is

    H_n f(x) = b^{4k+2} [ up(y) expm1(r (f(x+h) - f(x)))
                        + down(y) expm1(r (f(x-h) - f(x))) ],

with jump ``h = 2 b / n`` and per-spin rates ``up = (1 - y)/2 e^{U'(y)}``,
``down = (1 + y)/2 e^{-U'(y)}``.  The linear generator of the weak-
convergence scaling replaces ``expm1(r .)`` by the plain increment and the
prefactor by ``n^{(2k+1)/(k+1)}``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError, DomainError, NumericRangeError
from .hamiltonian import make_hamiltonian

__all__ = [
    "TestFunction",
    "witness_family",
    "nonlinear_generator",
    "linear_generator",
    "limit_nonlinear",
    "limit_linear",
    "brute_force_nonlinear",
    "ConvergenceReport",
    "convergence_ladder",
    "ContainmentReport",
    "upsilon_prime",
    "containment_bound",
    "DEFAULT_LADDER",
]

DEFAULT_LADDER = (1_000, 10_000, 100_000, 1_000_000)
EXP_SWITCH = 500.0
EXP_MAX = 709.0

# septic smoothstep: C^3 transition from 0 to 1 on [0, 1]
_SMOOTHSTEP = Polynomial([0, 0, 0, 0, 35, -84, 70, -20])


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported test function with three analytic derivatives.

    ``kind="bump"``: ``height * exp(1 - 1/(1 - z^2))`` for
    ``z = (x - center)/width``, zero for ``|z| >= 1``.
    ``kind="polynomial_capped"``: polynomial (``coeffs``, lowest degree
    first) times a C^3 cutoff equal to one on ``|x| <= cap_radius`` and zero
    beyond ``cap_radius + 1``.
    """

    __test__ = False

    kind: str = "bump"
    center: float = 0.0
    width: float = 1.0
    height: float = 1.0
    coeffs: tuple = ()
    cap_radius: float = 1.0

    def __post_init__(self):
        if self.kind == "bump":
            if not self.width > 0:
                raise DomainError("bump width must be positive")
        elif self.kind == "polynomial_capped":
            if not self.cap_radius > 0 or not self.coeffs:
                raise DomainError("capped polynomial needs coefficients and a positive radius")
        else:
            raise DomainError(f"unknown test function kind {self.kind!r}")

    @classmethod
    def bump(cls, center=0.0, width=1.0, height=1.0):
        return cls("bump", float(center), float(width), float(height))

    @classmethod
    def polynomial_capped(cls, coeffs, cap_radius):
        return cls("polynomial_capped", coeffs=tuple(float(c) for c in coeffs),
                   cap_radius=float(cap_radius))

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=1):
        if order not in (0, 1, 2, 3):
            raise DomainError("derivatives of order 0..3 are available")
        x = np.asarray(x, dtype=float)
        if self.kind == "bump":
            return self._bump(x, order)
        return self._capped(x, order)

    def _bump(self, x, order):
        z = (x - self.center) / self.width
        q = 1.0 - z * z
        # exp(1 - 1/q) underflows to zero long before q reaches 1e-3
        inside = q > 1e-3
        qs = np.where(inside, q, 1.0)
        F = np.where(inside, np.exp(1.0 - 1.0 / qs), 0.0)
        if order == 0:
            out = F
        else:
            g1 = -2 * z / qs**2
            if order == 1:
                out = g1 * F
            else:
                g2 = -2 / qs**2 - 8 * z * z / qs**3
                if order == 2:
                    out = (g2 + g1 * g1) * F
                else:
                    g3 = -24 * z / qs**3 - 48 * z**3 / qs**4
                    out = (g3 + 3 * g1 * g2 + g1**3) * F
        return self.height * out / self.width**order

    def _cutoff(self, x, order):
        ax = np.abs(x)
        t = np.clip(ax - self.cap_radius, 0.0, 1.0)
        step = _SMOOTHSTEP.deriv(order)(t) if order else _SMOOTHSTEP(t)
        if order == 0:
            return 1.0 - step
        inside = (ax > self.cap_radius) & (ax < self.cap_radius + 1.0)
        sign = np.where(x < 0, (-1.0) ** order, 1.0)
        return np.where(inside, -sign * step, 0.0)

    def _capped(self, x, order):
        p = Polynomial(self.coeffs)
        out = np.zeros_like(x)
        for i in range(order + 1):
            pi = p.deriv(i)(x) if i else p(x)
            out = out + math.comb(order, i) * pi * self._cutoff(x, order - i)
        return out

    def to_dict(self):
        d = asdict(self)
        d["coeffs"] = list(self.coeffs)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "coeffs" in d:
            d["coeffs"] = tuple(d["coeffs"])
        return cls(**d)


def witness_family():
    """Three bumps covering [-3, 3] with different centres and scales."""
    return [
        TestFunction.bump(center=0.0, width=2.0, height=1.0),
        TestFunction.bump(center=1.0, width=1.5, height=0.5),
        TestFunction.bump(center=-1.0, width=2.5, height=0.75),
    ]


def _chain_rates(params, y):
    u = params.uprime(y)
    return (1.0 - y) / 2.0 * np.exp(u), (1.0 + y) / 2.0 * np.exp(-u)


def _positions(regime, n, x):
    x = np.asarray(x, dtype=float)
    y = regime.m + x / regime.space_scale(n)
    if np.any(np.abs(y) > 1.0 + 1e-12):
        raise DomainError("rescaled points map outside [-1, 1]")
    # rounding can push grid end points just past +-1
    return np.clip(y, -1.0, 1.0)


def _scaled_expm1(logpref, z):
    """``exp(logpref) * expm1(z)`` without overflowing for large ``z``."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        big = z > EXP_SWITCH
        if np.any(big):
            top = np.max(np.where(big, logpref + z, -np.inf))
            if top > EXP_MAX:
                raise NumericRangeError(
                    f"exponent {top:.1f} exceeds the double range in H_n f"
                )
        small = np.exp(logpref) * np.expm1(np.where(big, 0.0, z))
        large = np.exp(np.where(big, logpref + z, -np.inf)) - np.exp(logpref)
    return np.where(big, large, small)


def nonlinear_generator(params, regime, n, f, x):
    """Exact ``H_n f`` at rescaled points ``x`` (any grid points of the chain)."""
    if regime.kind in ("clt", "clt_temp"):
        raise ConfigurationError("weak-convergence regimes have a linear generator")
    p = regime.effective_params(params, n)
    b = regime.space_scale(n)
    k = regime.k if regime.kind != "ldp" else 0
    r = regime.speed(n)
    h = regime.step(n)
    x = np.asarray(x, dtype=float)
    y = _positions(regime, n, x)
    up, down = _chain_rates(p, y)
    f0 = f(x)
    pref = b ** (4 * k + 2)
    with np.errstate(divide="ignore"):
        lu = np.log(pref * up)
        ld = np.log(pref * down)
    return _scaled_expm1(lu, r * (f(x + h) - f0)) + _scaled_expm1(ld, r * (f(x - h) - f0))


def linear_generator(params, regime, n, f, x):
    """Exact generator of the weak-convergence scaling applied to ``f``."""
    if regime.kind not in ("clt", "clt_temp"):
        raise ConfigurationError("linear generator needs a clt or clt_temp regime")
    p = regime.effective_params(params, n)
    k = regime.k
    h = regime.step(n)
    x = np.asarray(x, dtype=float)
    up, down = _chain_rates(p, _positions(regime, n, x))
    f0 = f(x)
    pref = float(n) ** ((2 * k + 1) / (k + 1.0))
    return pref * (up * (f(x + h) - f0) + down * (f(x - h) - f0))


def limit_nonlinear(spec, f, x):
    """``H f(x) = H(x, f'(x))``."""
    return spec.hamiltonian(np.asarray(x, float), f.derivative(x, 1))


def limit_linear(spec, f, x):
    """``A f = b f' + D f''`` for a quadratic Hamiltonian ``b p + D p^2``."""
    if not spec.is_quadratic:
        raise ConfigurationError("linear limit needs a quadratic Hamiltonian")
    x = np.asarray(x, float)
    return spec.drift(x) * f.derivative(x, 1) + spec.D * f.derivative(x, 2)


def brute_force_nonlinear(params, regime, n, f):
    """``e^{-rF} (A_n e^{rF}) / r`` on the whole grid via a dense generator.

    Returns ``(x, values)`` with ``x`` the rescaled grid.  Intended for small
    ``n`` as an independent check of :func:`nonlinear_generator`.
    """
    p = regime.effective_params(params, n)
    j = np.arange(n + 1)
    y = (2.0 * j - n) / n
    u = p.uprime(y)
    Q = np.zeros((n + 1, n + 1))
    Q[j[:-1], j[:-1] + 1] = (n - j[:-1]) * np.exp(u[:-1])
    Q[j[1:], j[1:] - 1] = j[1:] * np.exp(-u[1:])
    Q[j, j] = -Q.sum(axis=1)
    A = regime.time_dilation(n) * Q
    x = regime.space_scale(n) * (y - regime.m)
    r = regime.speed(n)
    F = np.asarray(f(x), float)
    return x, np.exp(-r * F) * (A @ np.exp(r * F)) / r


def rescaled_grid(regime, n, K):
    """Rescaled chain positions inside ``[-K, K]``."""
    s = regime.space_scale(n)
    lo = max(-1.0, regime.m - K / s)
    hi = min(1.0, regime.m + K / s)
    j = np.arange(math.ceil(n * (1 + lo) / 2 - 1e-9), math.floor(n * (1 + hi) / 2 + 1e-9) + 1)
    return s * ((2.0 * j - n) / n - regime.m)


@dataclass
class ConvergenceReport:
    regime: dict
    params: dict
    test_function: dict
    generator: str
    K: float
    ns: list
    b_n: list
    errors: list
    argmax: list
    rungs: list = field(default_factory=list, repr=False, compare=False)
    strictly_decreasing: bool = field(init=False)
    ratio: float = field(init=False)

    def __post_init__(self):
        e = self.errors
        self.strictly_decreasing = all(a > b for a, b in zip(e, e[1:]))
        self.ratio = e[-1] / e[0] if e[0] > 0 else math.nan

    def passed(self, factor=0.1):
        return self.strictly_decreasing and self.ratio < factor

    def to_json(self):
        d = asdict(self)
        d.pop("rungs")
        d["ratio"] = self.ratio
        d["strictly_decreasing"] = self.strictly_decreasing
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        """Per-rung rows ``n, x, prelimit, limit``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "x", "prelimit", "limit"])
        for n, (x, pre, lim) in zip(self.ns, self.rungs):
            for row in zip(x, pre, lim):
                w.writerow([n] + [repr(float(v)) for v in row])
        return buf.getvalue()


def convergence_ladder(params, regime, f, ns=DEFAULT_LADDER, K=3.0):
    """Sup-distance between prelimit and limit generators on a size ladder.

    Every rung must satisfy the regime's admissibility checks.  The nonlinear
    generator is used for ``ldp``/``mdp``/``mdp_temp``; the linear one for
    ``clt``/``clt_temp``.
    """
    linear = regime.kind in ("clt", "clt_temp")
    spec = make_hamiltonian(regime, params)
    ns = [int(n) for n in ns]
    if not ns or any(a >= b for a, b in zip(ns, ns[1:])):
        raise ConfigurationError("ladder must be nonempty and strictly increasing")
    errors, argmax, bs, rungs = [], [], [], []
    for n in ns:
        regime.check(n)
        x = rescaled_grid(regime, n, K)
        if x.size == 0:
            raise ConfigurationError(f"no grid points with |x| <= {K} at n = {n}")
        if linear:
            pre, lim = linear_generator(params, regime, n, f, x), limit_linear(spec, f, x)
        else:
            pre, lim = nonlinear_generator(params, regime, n, f, x), limit_nonlinear(spec, f, x)
        rungs.append((x, pre, lim))
        diff = np.abs(pre - lim)
        i = int(np.argmax(diff))
        errors.append(float(diff[i]))
        argmax.append(float(x[i]))
        bs.append(float(regime.space_scale(n)))
    return ConvergenceReport(
        regime=regime.to_dict(),
        params=params.to_dict() if params is not None else {},
        test_function=f.to_dict(),
        generator="linear" if linear else "nonlinear",
        K=float(K),
        ns=[int(n) for n in ns],
        b_n=bs,
        errors=errors,
        argmax=argmax,
        rungs=rungs,
    )


# --- containment -----------------------------------------------------------

def upsilon_prime(x):
    """Derivative of ``log(1 + x^2 / 2)``."""
    x = np.asarray(x, dtype=float)
    return x / (1.0 + 0.5 * x * x)


@dataclass(frozen=True)
class ContainmentReport:
    grid_sup: float
    argmax: float
    M: float
    c_norm_A: float
    analytic_bound: float

    @property
    def holds(self):
        return self.grid_sup <= self.analytic_bound + 1e-9


def _default_containment_grid(R=1e6):
    core = np.linspace(-10.0, 10.0, 20_001)
    tail = np.logspace(1.0, math.log10(R), 20_001)
    return np.concatenate([-tail[::-1], core, tail])


def _one_sided_lipschitz(drift):
    """``max(0, sup b')`` for a polynomial drift; inf if unbounded above."""
    d = drift.deriv()
    if d.degree() <= 0:
        return max(0.0, float(d.coef[0]) if d.coef.size else 0.0)
    lead = d.coef[-1]
    if d.degree() % 2 == 1 or lead > 0:
        return math.inf
    crit = d.deriv().roots()
    crit = crit[np.abs(crit.imag) < 1e-12].real
    return max(0.0, float(np.max(d(crit))) if crit.size else 0.0)


def containment_bound(spec, grid=None):
    """Grid supremum of ``H(x, Upsilon'(x))`` and the bound ``4 (M + c|A|)``.

    ``M`` is the one-sided Lipschitz constant of the drift and ``c|A|`` the
    diffusion coefficient ``D``.
    """
    if not spec.is_quadratic:
        raise ConfigurationError("containment bound applies to quadratic Hamiltonians")
    if abs(float(spec.drift(0.0))) > 0:
        raise ConfigurationError("the bound assumes a drift vanishing at the origin")
    x = _default_containment_grid() if grid is None else np.asarray(grid, float)
    vals = spec.hamiltonian(x, upsilon_prime(x))
    i = int(np.argmax(vals))
    M = _one_sided_lipschitz(spec.drift)
    return ContainmentReport(float(vals[i]), float(x[i]), M, float(spec.D),
                             4.0 * (M + float(spec.D)))
