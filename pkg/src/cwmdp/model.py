"""Potentials, the G-functions, mean-field fixed points and the limit ODE.

For a potential ``U`` the magnetisation chain jumps up at rate
``n (1 - x)/2 exp(U'(x))`` and down at rate ``n (1 + x)/2 exp(-U'(x))``.
Everything in the package is expressed through

    G1(x) = cosh(U'(x)) - x sinh(U'(x))
    G2(x) = sinh(U'(x)) - x cosh(U'(x))

whose zeros (of G2) are the equilibria of the mean-field flow
``m' = 2 G2(m)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import DomainError, UnsupportedOrderError

__all__ = [
    "ModelParams",
    "FixedPointReport",
    "PathGrid",
    "eval_g",
    "g_derivative",
    "find_fixed_points",
    "meanfield_flow",
]

KINDS = ("curie_weiss", "curie_weiss_field", "temp_rescaled", "polynomial")

# evaluation is allowed slightly past [-1, 1]
DOMAIN_SLACK = 0.5
MAX_FD_ORDER = 5
# base finite-difference step per derivative order, scaled by max(1, |x|);
# relative accuracy ~1e-12 (order 1), ~1e-9 (orders 2-3), ~1e-6 (orders 4-5)
FD_STEPS = {1: 1e-3, 2: 2e-2, 3: 2e-2, 4: 8e-2, 5: 8e-2}


@dataclass(frozen=True)
class ModelParams:
    """Interaction potential of the magnetisation dynamics.

    Use the constructors :meth:`curie_weiss`, :meth:`temp_rescaled` and
    :meth:`polynomial` rather than filling the fields by hand.  For
    ``polynomial`` the coefficients are those of ``U`` itself, lowest
    degree first.
    """

    kind: str = "curie_weiss"
    beta: float = 1.0
    field: float = 0.0
    kappa: float = 0.0
    b_n: float = 1.0
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if self.kind in ("curie_weiss", "curie_weiss_field") and not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.kind == "temp_rescaled":
            if not self.kappa >= 0:
                raise DomainError("kappa must be nonnegative")
            if not self.b_n > 0:
                raise DomainError("b_n must be positive")
        if self.kind == "polynomial" and len(self.coeffs) < 2:
            raise DomainError("polynomial potential needs at least a linear term")

    @classmethod
    def curie_weiss(cls, beta, field=0.0):
        if field:
            return cls(kind="curie_weiss_field", beta=float(beta), field=float(field))
        return cls(kind="curie_weiss", beta=float(beta))

    @classmethod
    def temp_rescaled(cls, kappa, b_n):
        """Curie-Weiss at ``beta = 1 + kappa / b_n**2``."""
        return cls(kind="temp_rescaled", kappa=float(kappa), b_n=float(b_n))

    @classmethod
    def polynomial(cls, coeffs):
        return cls(kind="polynomial", coeffs=tuple(float(c) for c in coeffs))

    @property
    def closed_form(self):
        """True when U' is affine, so G-derivatives are available exactly."""
        return self.kind != "polynomial"

    @property
    def effective_beta(self):
        if self.kind == "temp_rescaled":
            return 1.0 + self.kappa / self.b_n**2
        if self.kind == "polynomial":
            return float(self.uprime_coeffs[1]) if len(self.uprime_coeffs) > 1 else 0.0
        return self.beta

    @property
    def uprime_coeffs(self):
        """Coefficients of U', lowest degree first."""
        if self.kind == "polynomial":
            return P.polyder(np.asarray(self.coeffs))
        return np.array([self.field, self.effective_beta])

    def uprime(self, x):
        return P.polyval(x, self.uprime_coeffs)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind in ("curie_weiss", "curie_weiss_field"):
            d["beta"] = self.beta
        if self.kind == "curie_weiss_field":
            d["field"] = self.field
        if self.kind == "temp_rescaled":
            d.update(kappa=self.kappa, b_n=self.b_n)
        if self.kind == "polynomial":
            d["coeffs"] = list(self.coeffs)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "curie_weiss")
        if kind == "polynomial":
            return cls.polynomial(d["coeffs"])
        if kind == "temp_rescaled":
            return cls.temp_rescaled(d.get("kappa", 0.0), d["b_n"])
        return cls.curie_weiss(d.get("beta", 1.0), d.get("field", 0.0))


def _which(which):
    w = str(which).upper().lstrip("G")
    if w not in ("1", "2"):
        raise DomainError(f"which must be G1 or G2, got {which!r}")
    return int(w)


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + DOMAIN_SLACK):
        raise DomainError("G-functions are evaluated on a neighbourhood of [-1, 1]")
    return x


def _g(params, w, x):
    u = params.uprime(x)
    if w == 1:
        return np.cosh(u) - x * np.sinh(u)
    return np.sinh(u) - x * np.cosh(u)


def _finite(value):
    if not np.all(np.isfinite(value)):
        raise DomainError("non-finite G value")
    return value if np.ndim(value) else float(value)


def eval_g(params, which, x):
    """Value of G1 or G2 at ``x`` (scalar or array)."""
    w = _which(which)
    x = _check_domain(x)
    return _finite(_g(params, w, x))


def _closed_form_derivative(params, w, order, x):
    # U' = beta x + B, so d^l/dx^l of sinh(U'), cosh(U') are beta^l sinh/cosh
    beta = params.effective_beta
    u = params.uprime(x)

    def sh(l):  # l-th derivative of sinh at u, without the beta^l factor
        return np.sinh(u) if l % 2 == 0 else np.cosh(u)

    def ch(l):
        return np.cosh(u) if l % 2 == 0 else np.sinh(u)

    first, second = (ch, sh) if w == 1 else (sh, ch)
    out = beta**order * first(order) - x * beta**order * second(order)
    if order >= 1:
        out = out - order * beta ** (order - 1) * second(order - 1)
    return out


@lru_cache(maxsize=None)
def _central_weights(order):
    half = (order + 1) // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return offsets, np.linalg.solve(vander, rhs)


def _richardson_derivative(func, order, x, levels=2):
    h0 = FD_STEPS[order] * max(1.0, abs(x))
    offsets, weights = _central_weights(order)

    def stencil(h):
        return float(np.dot(weights, func(x + offsets * h))) / h**order

    table = [stencil(h0 / 2**i) for i in range(levels + 1)]
    for level in range(1, levels + 1):
        factor = 4.0**level
        table = [(factor * table[i + 1] - table[i]) / (factor - 1) for i in range(len(table) - 1)]
    return table[0]


def g_derivative(params, which, order, x):
    """``order``-th derivative of G1 or G2 at ``x``.

    Exact for the Curie-Weiss family; for polynomial potentials a central
    difference table with two Richardson levels.
    """
    w = _which(which)
    order = int(order)
    if order < 0:
        raise UnsupportedOrderError("derivative order must be nonnegative")
    if order == 0:
        return eval_g(params, w, x)
    x = _check_domain(x)
    if params.closed_form:
        return _finite(_closed_form_derivative(params, w, order, x))
    if order > MAX_FD_ORDER:
        raise UnsupportedOrderError(
            f"finite-difference derivatives are limited to order {MAX_FD_ORDER}"
        )
    if np.ndim(x):
        return _finite(
            np.array([_richardson_derivative(lambda s: _g(params, w, s), order, xi) for xi in x])
        )
    return _finite(_richardson_derivative(lambda s: _g(params, w, s), order, float(x)))


@dataclass
class FixedPointReport:
    """Zeros of G2 in [-1, 1].

    ``stability`` holds sign(G2'(m)) per root; ``stable`` uses the first
    non-vanishing derivative, so a flat but attracting root (beta = 1)
    counts as stable.
    """

    roots: np.ndarray
    stability: list
    flatness_order: list
    stable: list
    residuals: np.ndarray

    def positive_root(self):
        pos = self.roots[self.roots > 0]
        if not len(pos):
            raise DomainError("no positive fixed point")
        return float(pos.max())


def flatness_order(params, m, max_order=MAX_FD_ORDER):
    """Largest l such that G2^(j)(m) vanishes for every j <= l."""
    derivs = [float(g_derivative(params, 2, j, m)) for j in range(max_order + 1)]
    tol = 1e-7 * (1.0 + max(abs(d) for d in derivs))
    order = -1
    for d in derivs:
        if abs(d) >= tol:
            break
        order += 1
    return order, derivs, tol


def find_fixed_points(params, grid_size=10_001):
    """All roots of G2 on [-1, 1] by a sign scan followed by bracketing.

    An empty report is a valid outcome.
    """
    grid = np.linspace(-1.0, 1.0, grid_size)
    vals = _g(params, 2, grid)
    roots = []
    for i, v in enumerate(vals):
        if v == 0.0:
            roots.append(grid[i])
        elif i + 1 < len(vals) and vals[i + 1] != 0.0 and np.sign(v) != np.sign(vals[i + 1]):
            root = brentq(
                lambda s: float(_g(params, 2, s)), grid[i], grid[i + 1], xtol=1e-16, rtol=1e-15,
                maxiter=200,
            )
            roots.append(root)
    roots = np.array(sorted(roots))
    stability, flat, stable = [], [], []
    for m in roots:
        order, derivs, tol = flatness_order(params, m)
        flat.append(order)
        g1 = derivs[1]
        stability.append(int(np.sign(g1)) if abs(g1) >= tol else 0)
        lead = next((d for d in derivs[1:] if abs(d) >= tol), 0.0)
        # attracting iff the leading term of G2 is an odd power with negative coefficient
        lead_order = derivs.index(lead) if lead else -1
        stable.append(bool(lead < 0 and lead_order % 2 == 1))
    residuals = _g(params, 2, roots) if len(roots) else np.empty(0)
    return FixedPointReport(roots, stability, flat, stable, np.abs(residuals))


@dataclass
class PathGrid:
    """A curve sampled on a uniform time mesh."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if len(self.times) < 3:
            raise DomainError("a path needs at least two mesh intervals")
        steps = np.diff(self.times)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
            raise DomainError("mesh must be uniform and increasing")

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def T(self):
        return float(self.times[-1] - self.times[0])

    @property
    def velocity(self):
        # second order: central inside, one-sided at the ends
        return np.gradient(self.values, self.dt, edge_order=2)

    def reversed(self):
        return PathGrid(self.times.copy(), self.values[::-1].copy())


def meanfield_flow(params, m0, T, dt=1e-3):
    """Integrate ``m' = 2 G2(m)`` with classical RK4 on a uniform mesh."""
    if not -1.0 <= m0 <= 1.0:
        raise DomainError("m0 must lie in [-1, 1]")
    if not dt > 0 or not T > 0:
        raise DomainError("T and dt must be positive")
    steps = max(2, int(math.ceil(T / dt - 1e-9)))
    h = T / steps
    out = np.empty(steps + 1)
    out[0] = m = float(m0)

    def rhs(s):
        return 2.0 * float(_g(params, 2, s))

    for i in range(steps):
        k1 = rhs(m)
        k2 = rhs(m + 0.5 * h * k1)
        k3 = rhs(m + 0.5 * h * k2)
        k4 = rhs(m + h * k3)
        m = m + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if abs(m) > 1.0 + 1e-6:
            raise DomainError(f"mean-field step left [-1, 1] at t={h * (i + 1):.6g}")
        out[i + 1] = m
    return PathGrid(np.linspace(0.0, T, steps + 1), out)
