"""Limiting Hamiltonians, Lagrangians, actions and quasi-potentials.

Every moderate-deviation regime has a Hamiltonian of the quadratic form
``H(x, p) = b(x) p + D p**2`` with polynomial drift ``b`` and constant
``D > 0``; the Lagrangian is then ``(v - b(x))**2 / (4 D)``.  The speed-n
large-deviation Hamiltonian is

    H(x, p) = (cosh(2p) - 1) G1(x) + sinh(2p) G2(x),

whose Lagrangian has no closed form here and is computed by a safeguarded
Newton iteration in ``p``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, NumericRangeError, OptimizationError, RegimeError
from .model import ModelParams, PathGrid, eval_g, find_fixed_points, g_derivative

__all__ = [
    "HamiltonianSpec",
    "AnalyticPath",
    "QuasiPotential",
    "make_hamiltonian",
    "quadratic",
    "lagrangian",
    "legendre_roundtrip",
    "numerical_lagrangian",
    "action",
    "optimal_path",
    "reversed_relaxation",
    "quasi_potential",
    "ellis_constant_check",
]

P_BRACKET = 20.0


@dataclass(frozen=True)
class HamiltonianSpec:
    """Either ``family="quadratic"`` (``drift``, ``D``) or ``family="ldp"``
    (``params``)."""

    family: str
    drift: Polynomial = None
    D: float = None
    params: ModelParams = None
    label: str = ""

    def __post_init__(self):
        if self.family == "quadratic":
            if self.drift is None or not self.D > 0:
                raise DomainError("quadratic Hamiltonian needs a drift and D > 0")
        elif self.family == "ldp":
            if self.params is None:
                raise DomainError("LDP Hamiltonian needs model parameters")
        else:
            raise DomainError(f"unknown Hamiltonian family {self.family!r}")

    @property
    def is_quadratic(self):
        return self.family == "quadratic"

    def _g(self, x):
        return eval_g(self.params, 1, x), eval_g(self.params, 2, x)

    def _gprime(self, x, order=1):
        return g_derivative(self.params, 1, order, x), g_derivative(self.params, 2, order, x)

    def __call__(self, x, p):
        return self.hamiltonian(x, p)

    def hamiltonian(self, x, p):
        if self.is_quadratic:
            return self.drift(x) * p + self.D * p * p
        g1, g2 = self._g(x)
        return np.expm1(2 * p) * (g1 + g2) / 2 + np.expm1(-2 * p) * (g1 - g2) / 2

    def rate_form(self, x, p):
        """The LDP Hamiltonian written with the jump rates of the chain."""
        u = self.params.uprime(x)
        return ((1 - x) / 2 * np.exp(u) * np.expm1(2 * p)
                + (1 + x) / 2 * np.exp(-u) * np.expm1(-2 * p))

    def dh_dp(self, x, p):
        if self.is_quadratic:
            return self.drift(x) + 2 * self.D * p
        g1, g2 = self._g(x)
        return 2 * np.sinh(2 * p) * g1 + 2 * np.cosh(2 * p) * g2

    def d2h_dp2(self, x, p):
        if self.is_quadratic:
            return 2 * self.D + 0 * np.asarray(x, dtype=float)
        g1, g2 = self._g(x)
        return 4 * np.cosh(2 * p) * g1 + 4 * np.sinh(2 * p) * g2

    def dh_dx(self, x, p):
        if self.is_quadratic:
            return self.drift.deriv()(x) * p
        d1, d2 = self._gprime(x)
        return (np.cosh(2 * p) - 1) * d1 + np.sinh(2 * p) * d2

    def lagrangian_with_grad(self, x, v):
        """(L, dL/dx, dL/dv) at arrays ``x``, ``v``."""
        if self.is_quadratic:
            r = v - self.drift(x)
            return (r * r / (4 * self.D), -r * self.drift.deriv()(x) / (2 * self.D),
                    r / (2 * self.D))
        x = np.atleast_1d(np.asarray(x, float))
        v = np.broadcast_to(np.asarray(v, float), x.shape)
        p = np.array([_ldp_momentum(self, xi, vi) for xi, vi in zip(x, v)])
        val = p * v - self.hamiltonian(x, p)
        return val, -self.dh_dx(x, p), p


def quadratic(drift_coeffs, D, label=""):
    """Quadratic Hamiltonian from drift coefficients (lowest degree first)."""
    return HamiltonianSpec("quadratic", drift=Polynomial(drift_coeffs), D=float(D), label=label)


def make_hamiltonian(regime, params=None, m=None):
    """Limiting Hamiltonian of ``regime`` around the centering point ``m``."""
    kind = regime.kind
    if kind == "ldp":
        return HamiltonianSpec("ldp", params=params, label="ldp")
    if kind in ("mdp_temp", "clt_temp"):
        return quadratic([0.0, 2 * regime.kappa, 0.0, -2.0 / 3.0], 2.0,
                         label=f"temp_rescaled(kappa={regime.kappa:g})")
    if params is None:
        raise RegimeError("model parameters are required")
    k = regime.k
    m = regime.m if m is None else m
    derivs = [float(g_derivative(params, 2, j, m)) for j in range(2 * k + 2)]
    tol = 1e-7 * (1.0 + abs(derivs[-1]))
    bad = [j for j in range(2 * k + 1) if abs(derivs[j]) >= tol]
    if bad:
        raise RegimeError(
            f"G2^({bad[0]})({m:.6g}) = {derivs[bad[0]]:.3g} does not vanish; "
            f"m is not a flat fixed point of order {k}"
        )
    lead = derivs[2 * k + 1]
    if k > 0 and lead > 0:
        raise RegimeError("G2^(2k+1)(m) must be nonpositive for k > 0")
    coeffs = np.zeros(2 * k + 2)
    coeffs[2 * k + 1] = 2.0 * lead / math.factorial(2 * k + 1)
    D = 2.0 * float(eval_g(params, 1, m))
    return HamiltonianSpec("quadratic", drift=Polynomial(coeffs), D=D,
                           label=f"{kind}(k={k}, m={m:.6g})")


def _ldp_momentum(spec, x, v):
    """Maximiser p of ``p v - H(x, p)``; NaN when it leaves the bracket."""
    lo, hi = -P_BRACKET, P_BRACKET
    flo = v - spec.dh_dp(x, lo)
    fhi = v - spec.dh_dp(x, hi)
    if flo < 0 or fhi > 0:
        return math.nan
    p = 0.0
    for _ in range(200):
        f = v - spec.dh_dp(x, p)
        if abs(f) <= 1e-13 * (1.0 + abs(v)):
            return p
        if f > 0:
            lo = p
        else:
            hi = p
        step = f / spec.d2h_dp2(x, p)
        q = p + step
        if not lo < q < hi:
            q = 0.5 * (lo + hi)
        if abs(q - p) <= 1e-16 * (1.0 + abs(p)):
            return q
        p = q
    raise NumericRangeError("Legendre maximiser did not converge")


def lagrangian(spec, x, v):
    """Legendre transform ``sup_p p v - H(x, p)``.

    For the LDP family, velocities outside the range of ``dH/dp`` on the
    momentum bracket give ``inf`` with a RuntimeWarning.
    """
    if spec.is_quadratic:
        r = v - spec.drift(x)
        return r * r / (4 * spec.D)
    if np.ndim(x) or np.ndim(v):
        return np.vectorize(lambda a, b: lagrangian(spec, a, b))(x, v)
    p = _ldp_momentum(spec, float(x), float(v))
    if math.isnan(p):
        warnings.warn("velocity outside the attainable range; Lagrangian is +inf",
                      RuntimeWarning, stacklevel=2)
        return math.inf
    return p * v - float(spec.hamiltonian(x, p))


def numerical_lagrangian(spec, x, v):
    """``sup_p p v - H(x, p)`` by direct maximisation over ``p``.

    Works from the Hamiltonian alone, so it serves as an independent check
    of the closed-form and Newton-based Lagrangians.
    """
    res = minimize_scalar(lambda p: float(spec.hamiltonian(x, p)) - p * v, bracket=(-1.0, 1.0),
                          method="brent", options={"xtol": 1e-14, "maxiter": 500})
    if not np.isfinite(res.fun):
        raise NumericRangeError("Legendre maximisation failed")
    return -float(res.fun)


def legendre_roundtrip(spec, x, p):
    """``sup_v p v - L(x, v)`` by one-dimensional maximisation over ``v``."""
    res = minimize_scalar(lambda v: lagrangian(spec, x, v) - p * v, bracket=(-1.0, 1.0),
                          method="brent", options={"xtol": 1e-13, "maxiter": 500})
    if not np.isfinite(res.fun):
        raise NumericRangeError("Legendre maximisation failed")
    return -float(res.fun)


@dataclass(frozen=True)
class AnalyticPath:
    """A curve given by closed forms, for action evaluation with refinement."""

    gamma: Callable
    dgamma: Callable
    T: float

    def grid(self, M):
        t = np.linspace(0.0, self.T, M + 1)
        return t, self.gamma(t), self.dgamma(t)


def action(spec, path, I0=0.0, rtol=1e-6, max_intervals=2**22):
    """``I0 + int_0^T L(gamma, gamma') dt`` by the composite trapezoid rule.

    A :class:`~cwmdp.model.PathGrid` is integrated on its own mesh with
    finite-difference velocities; an :class:`AnalyticPath` is refined by
    mesh doubling until the relative change drops below ``rtol``.
    """
    def integrate(t, x, v):
        vals = lagrangian(spec, x, v)
        return float(np.trapezoid(vals, t))

    if isinstance(path, PathGrid):
        total = integrate(path.times, path.values, path.velocity)
    else:
        M = 64
        total = integrate(*path.grid(M))
        while M < max_intervals:
            M *= 2
            new = integrate(*path.grid(M))
            done = abs(new - total) <= rtol * max(abs(new), 1e-300)
            total = new
            if done:
                break
    total += I0
    if not np.isfinite(total):
        warnings.warn("non-finite Lagrangian along the path; action is +inf",
                      RuntimeWarning, stacklevel=2)
        return math.inf
    return total


def reversed_relaxation(spec, a, T):
    """Time reversal of the zero-cost flow ``x' = b(x)`` started at ``a``.

    The returned path runs from the relaxed position at time ``T`` back to
    ``a``; its velocity is ``-b``, so the Lagrangian along it is ``b^2 / D``.
    """
    if not spec.is_quadratic:
        raise DomainError("relaxation paths are provided for quadratic Hamiltonians")
    sol = solve_ivp(lambda t, x: spec.drift(x), (0.0, T), [float(a)], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise OptimizationError("relaxation flow failed")

    def gamma(t):
        return sol.sol(T - np.asarray(t, float))[0]

    def dgamma(t):
        return -spec.drift(gamma(t))

    return AnalyticPath(gamma, dgamma, float(T))


# --- optimal paths ---------------------------------------------------------

@nb.njit(cache=True)
def _poly_flow(c, dc, D, x0, p0, T, steps, blowup, xs, ps):
    # RK4 for x' = b(x) + 2 D p, p' = -b'(x) p; returns steps completed
    h = T / steps
    x, p = x0, p0
    xs[0], ps[0] = x, p
    for i in range(steps):
        kx = np.empty(4)
        kp = np.empty(4)
        for s in range(4):
            if s == 0:
                xi, pi = x, p
            elif s < 3:
                xi, pi = x + 0.5 * h * kx[s - 1], p + 0.5 * h * kp[s - 1]
            else:
                xi, pi = x + h * kx[2], p + h * kp[2]
            b = 0.0
            for j in range(c.shape[0] - 1, -1, -1):
                b = b * xi + c[j]
            db = 0.0
            for j in range(dc.shape[0] - 1, -1, -1):
                db = db * xi + dc[j]
            kx[s] = b + 2.0 * D * pi
            kp[s] = -db * pi
        x = x + h * (kx[0] + 2 * kx[1] + 2 * kx[2] + kx[3]) / 6
        p = p + h * (kp[0] + 2 * kp[1] + 2 * kp[2] + kp[3]) / 6
        if not (abs(x) < blowup and np.isfinite(p)):
            return i + 1, x, p
        xs[i + 1], ps[i + 1] = x, p
    return steps, x, p


def _hamilton_flow(spec, x0, p0, T, steps, blowup):
    if spec.is_quadratic:
        xs = np.empty(steps + 1)
        ps = np.empty(steps + 1)
        c = np.asarray(spec.drift.coef, float)
        dc = np.asarray(spec.drift.deriv().coef, float)
        done, x, p = _poly_flow(c, dc, float(spec.D), float(x0), float(p0), float(T),
                                steps, float(blowup), xs, ps)
        if done < steps or not np.isfinite(x):
            end = x if np.isfinite(x) else p
            return xs[:done], ps[:done], math.copysign(math.inf, end)
        return xs, ps, x
    h = T / steps
    xs = np.empty(steps + 1)
    ps = np.empty(steps + 1)
    xs[0], ps[0] = x0, p0
    x, p = x0, p0

    def f(x, p):
        return float(spec.dh_dp(x, p)), -float(spec.dh_dx(x, p))

    for i in range(steps):
        k1 = f(x, p)
        k2 = f(x + 0.5 * h * k1[0], p + 0.5 * h * k1[1])
        k3 = f(x + 0.5 * h * k2[0], p + 0.5 * h * k2[1])
        k4 = f(x + h * k3[0], p + h * k3[1])
        x = x + h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
        p = p + h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
        if not (abs(x) < blowup and np.isfinite(p)):
            return xs[: i + 1], ps[: i + 1], math.copysign(math.inf, x if np.isfinite(x) else p)
        xs[i + 1], ps[i + 1] = x, p
    return xs, ps, x


def _shoot(spec, x_start, x_end, T, M, h_max=5e-3, tol=1e-10):
    sub = max(1, math.ceil(T / (M * h_max)))
    if sub * M % 2:
        sub += 1
    steps = sub * M
    scale = max(1.0, abs(x_start), abs(x_end))
    blowup = 1e3 * scale
    if spec.family == "ldp":
        blowup = 1.0 + 1e-9

    def mismatch(p0):
        return _hamilton_flow(spec, x_start, p0, T, steps, blowup)[2] - x_end

    # Newton with secant slopes, then a bracketed solve if that stalls
    D = spec.D if spec.is_quadratic else 2.0
    p0 = (x_end - x_start) / (2 * D * T)
    root = None
    for _ in range(40):
        f0 = mismatch(p0)
        if not np.isfinite(f0):
            break
        if abs(f0) <= tol * scale:
            root = p0
            break
        dp = 1e-7 * max(abs(p0), 1e-8)
        f1 = mismatch(p0 + dp)
        slope = (f1 - f0) / dp
        if not np.isfinite(slope) or slope == 0:
            break
        p0 = p0 - f0 / slope
    if root is None:
        root = _bracket_root(mismatch, p0 if np.isfinite(p0) else 0.0, tol * scale)
    xs, ps, end = _hamilton_flow(spec, x_start, root, T, steps, blowup)
    if not np.isfinite(end) or abs(end - x_end) > 1e-6 * scale:
        raise OptimizationError("shooting did not reach the end point")
    t = np.linspace(0.0, T, steps + 1)
    vel = np.asarray(spec.dh_dp(xs, ps), float)
    lag = ps * vel - np.asarray(spec.hamiltonian(xs, ps), float)
    value = float(simpson(lag, x=t))
    if not np.isfinite(value):
        raise OptimizationError("non-finite action along the shooting solution")
    return PathGrid(t[::sub], xs[::sub]), value


def _bracket_root(func, guess, xtol):
    def sgn(p):
        v = func(p)
        return v if not np.isnan(v) else math.inf

    width = max(abs(guess), 1e-12)
    f0 = sgn(guess)
    if f0 == 0:
        return guess
    direction = -1.0 if f0 > 0 else 1.0
    lo, flo = guess, f0
    for _ in range(200):
        hi = guess + direction * width
        fhi = sgn(hi)
        if np.sign(fhi) != np.sign(flo):
            a, b = sorted((lo, hi))

            def g(p):
                v = sgn(p)
                return max(min(v, 1e300), -1e300)

            return brentq(g, a, b, xtol=1e-300, rtol=1e-15, maxiter=500)
        lo, flo = hi, fhi
        width *= 2.0
    raise OptimizationError("could not bracket the initial momentum")


def _direct(spec, x_start, x_end, T, M, init=None, max_iter=200):
    dt = T / M
    t = np.linspace(0.0, T, M + 1)
    path = np.linspace(x_start, x_end, M + 1) if init is None else np.array(init, float)
    path[0], path[-1] = x_start, x_end

    def objective(y):
        xm = 0.5 * (y[1:] + y[:-1])
        v = np.diff(y) / dt
        val, lx, lv = spec.lagrangian_with_grad(xm, v)
        grad = np.zeros_like(y)
        grad[:-1] += (0.5 * lx - lv / dt) * dt
        grad[1:] += (0.5 * lx + lv / dt) * dt
        grad[0] = grad[-1] = 0.0
        return float(np.sum(val) * dt), grad

    # tridiagonal Hessian from three coloured gradient differences
    def hessian(y, g0):
        eps = 1e-6 * max(1.0, np.max(np.abs(y)))
        ab = np.zeros((3, M + 1))
        for c in range(3):
            e = np.zeros_like(y)
            e[c::3] = eps
            e[0] = e[-1] = 0.0
            dg = (objective(y + e)[1] - g0) / eps
            for i in range(c, M + 1, 3):
                if i == 0 or i == M:
                    continue
                ab[1, i] = dg[i]
                if i > 0:
                    ab[2, i - 1] = dg[i - 1]
                if i < M:
                    ab[0, i + 1] = dg[i + 1]
        ab[1, 0] = ab[1, M] = 1.0
        ab[0, 1] = 0.0
        ab[2, M - 1] = 0.0
        return ab

    val, g = objective(path)
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= 1e-12 * max(1.0, abs(val)):
            break
        ab = hessian(path, g)
        try:
            step = solve_banded((1, 1), ab, -g)
        except (np.linalg.LinAlgError, ValueError):
            step = -g
        if not np.all(np.isfinite(step)) or float(step @ g) >= 0:
            step = -g
        a = 1.0
        while a > 1e-12:
            trial = path + a * step
            tv, tg = objective(trial)
            if np.isfinite(tv) and tv <= val + 1e-4 * a * float(step @ g):
                break
            a *= 0.5
        else:
            break
        converged = abs(val - tv) <= 1e-15 * max(1.0, abs(val))
        path, val, g = trial, tv, tg
        if converged:
            break
    return PathGrid(t, path), val


def optimal_path(spec, x_start, x_end, T, M=256, method="shooting"):
    """Minimiser of the action between two points over ``[0, T]``.

    ``method="shooting"`` solves Hamilton's equations with a root search on
    the initial momentum and falls back to ``"direct"``, Newton descent on
    the midpoint-discretised action over the interior mesh nodes.
    Returns ``(path, action)``.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    if M < 64:
        raise DomainError("mesh must have at least 64 intervals")
    if method == "shooting":
        try:
            return _shoot(spec, float(x_start), float(x_end), float(T), M)
        except (OptimizationError, ValueError, FloatingPointError, NumericRangeError):
            pass
    elif method != "direct":
        raise DomainError(f"unknown method {method!r}")
    path, value = _direct(spec, float(x_start), float(x_end), float(T), M)
    if not np.isfinite(value):
        raise OptimizationError("path optimisation failed", best=path, best_action=value)
    return path, value


# --- quasi-potentials ------------------------------------------------------

@dataclass(frozen=True)
class QuasiPotential:
    """``S`` and ``S'`` as polynomials, normalised so ``S(0) = 0``."""

    S: Polynomial
    dS: Polynomial
    residual: float


def quasi_potential(spec, check_grid=None):
    """Nonzero solution of ``H(x, S'(x)) = 0``: ``S' = -b / D``."""
    if not spec.is_quadratic:
        raise DomainError("closed-form quasi-potentials exist for the quadratic family only")
    dS = -spec.drift / spec.D
    S = dS.integ(lbnd=0.0)
    x = np.linspace(-3.0, 3.0, 601) if check_grid is None else np.asarray(check_grid)
    residual = float(np.max(np.abs(spec.hamiltonian(x, dS(x)))))
    return QuasiPotential(S, dS, residual)


def ellis_constant_check(beta):
    """Both expressions of the super-critical quasi-potential curvature.

    Returns ``(lhs, rhs)`` with ``lhs = 1/phi''(beta m) - beta`` for
    ``phi = log cosh`` and ``rhs = -G2'(m) / G1(m)`` at the positive
    fixed point ``m``.
    """
    if not beta > 1:
        raise DomainError("the constant is defined for beta > 1")
    params = ModelParams.curie_weiss(beta)
    m = find_fixed_points(params).positive_root()
    lhs = math.cosh(beta * m) ** 2 - beta
    rhs = -float(g_derivative(params, 2, 1, m)) / float(eval_g(params, 1, m))
    return lhs, rhs
