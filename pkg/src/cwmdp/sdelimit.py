"""Limiting diffusions of the weak-convergence scalings.

The limit of the rescaled chain solves ``dY = b(Y) dt + sigma dW`` with the
polynomial drift ``b`` and ``sigma = sqrt(2 D)`` read off the quadratic
Hamiltonian ``b p + D p^2``.  Paths are integrated by Euler-Maruyama with
counter-based normals, so path ``i`` of seed ``s`` does not depend on the
ensemble size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from . import _rng
from .errors import DomainError
from .hamiltonian import HamiltonianSpec, make_hamiltonian, quasi_potential
from .model import eval_g, g_derivative

__all__ = [
    "DiffusionSpec",
    "make_diffusion",
    "EnsembleSummary",
    "integrate_sde",
    "StationaryDensity",
    "stationary_density",
    "long_run_samples",
    "long_run_histogram_check",
    "stationary_constant_report",
    "BLOWUP",
]

BLOWUP = 1e6


@dataclass(frozen=True)
class DiffusionSpec:
    drift: Polynomial
    sigma: float
    label: str = ""

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if float(self.drift(0.0)) != 0.0:
            raise DomainError("drift must vanish at the origin")

    @property
    def D(self):
        return 0.5 * self.sigma**2

    @classmethod
    def from_hamiltonian(cls, spec: HamiltonianSpec):
        if not spec.is_quadratic:
            raise DomainError("diffusion limits come from quadratic Hamiltonians")
        return cls(spec.drift, math.sqrt(2.0 * spec.D), spec.label)

    def generator(self, f, df, d2f, x):
        return self.drift(x) * df(x) + self.D * d2f(x)


def make_diffusion(regime, params=None):
    """Diffusion limit for a ``clt``/``clt_temp`` (or matching mdp) regime."""
    return DiffusionSpec.from_hamiltonian(make_hamiltonian(regime, params))


@nb.njit(cache=True)
def _em_kernel(coef, sigma, y0, dt, steps, keys, record_steps, out, diverged):
    sq = sigma * math.sqrt(dt)
    nrec = record_steps.shape[0]
    for i in range(keys.shape[0]):
        y = y0
        r = 0
        while r < nrec and record_steps[r] == 0:
            out[i, r] = y
            r += 1
        for s in range(steps):
            b = 0.0
            for j in range(coef.shape[0] - 1, -1, -1):
                b = b * y + coef[j]
            y = y + b * dt + sq * _rng.std_normal(keys[i], s)
            if not abs(y) < 1e6:
                diverged[i] = True
                break
            while r < nrec and record_steps[r] == s + 1:
                out[i, r] = y
                r += 1
        while r < nrec:
            out[i, r] = np.nan
            r += 1


@dataclass(frozen=True)
class EnsembleSummary:
    """Terminal values of the non-diverged paths plus optional recordings.

    ``paths`` has one row per path (diverged rows hold NaN after the
    blow-up) and one column per entry of ``times``.
    """

    samples: np.ndarray
    seed: int
    T: float
    dt: float
    n_paths: int
    diverged: np.ndarray
    times: np.ndarray = None
    paths: np.ndarray = None

    @property
    def n_diverged(self):
        return int(np.count_nonzero(self.diverged))

    @property
    def mean(self):
        return float(np.mean(self.samples))

    @property
    def var(self):
        return float(np.var(self.samples))

    def histogram(self, bins=50):
        return np.histogram(self.samples, bins=bins, density=True)


def integrate_sde(spec, y0, T, dt, n_paths, seed, record_times=None):
    """Euler-Maruyama ensemble; path ``i`` uses the normals of stream ``i``.

    Paths leaving ``|y| < 1e6`` are flagged as diverged and excluded from
    ``samples``.  ``record_times`` are rounded to the step grid.
    """
    if not (T > 0 and dt > 0 and n_paths >= 1):
        raise DomainError("T, dt and n_paths must be positive")
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T:
        raise DomainError("T must be a multiple of dt")
    rec = np.array([steps], dtype=np.int64)
    if record_times is not None:
        rec = np.rint(np.asarray(record_times, float) / dt).astype(np.int64)
        if np.any(rec < 0) or np.any(rec > steps) or np.any(np.diff(rec) < 0):
            raise DomainError("record times must be sorted and inside [0, T]")
        rec = np.append(rec, steps)
    keys = _rng.replica_keys(seed, n_paths)
    out = np.empty((n_paths, rec.size))
    diverged = np.zeros(n_paths, dtype=np.bool_)
    coef = np.asarray(spec.drift.coef, float)
    _em_kernel(coef, float(spec.sigma), float(y0), float(dt), steps, keys, rec, out, diverged)
    if record_times is None:
        times = paths = None
    else:
        times = rec[:-1] * dt
        paths = out[:, :-1]
    return EnsembleSummary(out[~diverged, -1], int(seed), float(T), float(dt), int(n_paths),
                           diverged, times, paths)


@dataclass(frozen=True)
class StationaryDensity:
    """Density ``exp(exponent(y)) / Z`` on the real line."""

    exponent: Polynomial
    Z: float
    window: float

    def pdf(self, y):
        return np.exp(self.exponent(np.asarray(y, float))) / self.Z

    def mass(self, a, b):
        return quad(lambda t: float(self.pdf(t)), a, b, epsabs=1e-13, epsrel=1e-11)[0]

    def grid(self, num=2001):
        y = np.linspace(-self.window, self.window, num)
        return y, self.pdf(y)

    def moment(self, k):
        L = self.window
        return quad(lambda t: t**k * float(self.pdf(t)), -L, L, epsabs=1e-13,
                    epsrel=1e-11, limit=200)[0]

    def excess_kurtosis(self):
        m1 = self.moment(1)
        c2 = self.moment(2) - m1**2
        m4 = (self.moment(4) - 4 * m1 * self.moment(3) + 6 * m1**2 * self.moment(2)
              - 3 * m1**4)
        return m4 / c2**2 - 3.0


def stationary_density(spec, log_cut=40.0):
    """Fokker-Planck stationary density ``exp(int 2 b / sigma^2)``.

    Raises DomainError unless the exponent tends to ``-inf`` on both sides.
    The integration window is where the exponent is within ``log_cut`` of
    its maximum.
    """
    phi = (2.0 / spec.sigma**2 * spec.drift).integ(lbnd=0.0)
    phi = Polynomial(np.trim_zeros(phi.coef, "b") if np.any(phi.coef) else [0.0])
    deg = phi.degree()
    if deg < 2 or deg % 2 or phi.coef[-1] >= 0:
        raise DomainError("drift is not confining; no stationary density")
    crit = phi.deriv().roots()
    crit = crit[np.abs(crit.imag) < 1e-9].real
    top = float(np.max(phi(crit))) if crit.size else float(phi(0.0))
    L = 1.0
    while phi(L) > top - log_cut or phi(-L) > top - log_cut:
        L *= 1.25
    shifted = Polynomial(phi.coef - np.r_[top, np.zeros(deg)])
    Z = quad(lambda t: math.exp(shifted(t)), -L, L, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return StationaryDensity(shifted, Z, L)


def long_run_samples(spec, n_paths=10_000, T=50.0, dt=1e-3, burn_in=None, spacing=1.0,
                     seed=0, y0=0.0):
    """Pooled ensemble values at times ``burn_in, burn_in + spacing, ..., T``."""
    burn_in = T / 2 if burn_in is None else burn_in
    times = np.arange(burn_in, T + 0.5 * spacing, spacing)
    ens = integrate_sde(spec, y0, T, dt, n_paths, seed, record_times=times)
    vals = ens.paths[~ens.diverged].ravel()
    return vals


def long_run_histogram_check(spec, samples, bins=40):
    """L1 distance between a histogram and the stationary bin probabilities.

    Mass outside the histogram range counts toward the distance.
    """
    rho = stationary_density(spec)
    lo, hi = np.quantile(samples, [1e-3, 1 - 1e-3])
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(samples, edges)
    emp = counts / samples.size
    probs = np.array([rho.mass(a, b) for a, b in zip(edges[:-1], edges[1:])])
    outside_emp = 1.0 - emp.sum()
    outside_true = 1.0 - probs.sum()
    return float(np.abs(emp - probs).sum() + abs(outside_emp - outside_true))


@dataclass(frozen=True)
class StationaryConstantReport:
    """Computed versus displayed constant of ``exp(-c y^{2k+2} / (2k+2)!)``."""

    k: int
    m: float
    computed_c: float
    displayed_c: float
    computed_exponent: Polynomial
    quasi_potential: Polynomial
    exponent_vs_quasi_potential: float

    @property
    def ratio(self):
        return self.displayed_c / self.computed_c

    def summary(self):
        return (f"k={self.k} m={self.m:.6g}: Fokker-Planck c = |G2^(2k+1)(m)|/G1(m) = "
                f"{self.computed_c:.12g}; displayed c = 4|G2^(2k+1)(m)| = "
                f"{self.displayed_c:.12g}; ratio {self.ratio:.6g}; "
                f"max |log-density + S| = {self.exponent_vs_quasi_potential:.3g}")


def stationary_constant_report(params, regime, grid=None):
    """Compare the stationary exponent with the quasi-potential and with the
    constant ``4 |G2^{(2k+1)}(m)|``."""
    k, m = regime.k, regime.m
    spec = make_hamiltonian(regime, params)
    dspec = DiffusionSpec.from_hamiltonian(spec)
    rho = stationary_density(dspec)
    qp = quasi_potential(spec)
    x = np.linspace(-3.0, 3.0, 601) if grid is None else np.asarray(grid, float)
    # the density exponent is only defined up to a constant; both vanish at 0
    expo = rho.exponent - rho.exponent(0.0)
    gap = float(np.max(np.abs(expo(x) + qp.S(x))))
    lead = abs(float(g_derivative(params, 2, 2 * k + 1, m)))
    g1 = float(eval_g(params, 1, m))
    return StationaryConstantReport(k, m, lead / g1, 4.0 * lead, expo, qp.S, gap)
