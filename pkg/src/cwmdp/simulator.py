"""Exact simulation of the magnetisation jump chain and its rescalings.

The chain lives on ``E_n = {-1, -1 + 2/n, ..., 1}``; state index ``j``
counts up-spins, ``x = (2 j - n) / n``.  Paths are generated event by
event (competing exponential clocks) by a compiled kernel; every replica
draws from its own counter-based stream, see :mod:`cwmdp._rng`.

Rescaled processes ``Y(t) = s_n (m_n(d_n t) - m)`` are obtained by running
the raw chain to horizon ``d_n T`` and relabelling, where the space scale
``s_n`` and time dilation ``d_n`` come from :class:`ScalingRegime`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from . import _rng
from .errors import ConfigurationError, DomainError
from .model import ModelParams, PathGrid

__all__ = [
    "ChainState",
    "ScalingRegime",
    "TrajectorySample",
    "jump_rates",
    "rate_tables",
    "simulate_chain",
    "simulate_rescaled",
    "simulate_ensemble",
    "exit_time_diagnostic",
    "ensemble_mean_path",
    "transient_law",
    "sample_transient",
]

REGIME_KINDS = ("ldp", "mdp", "clt", "mdp_temp", "clt_temp")


@dataclass(frozen=True)
class ChainState:
    n: int
    x: float
    t: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be a positive integer")
        j = self.n * (1.0 + self.x) / 2.0
        if abs(j - round(j)) > 1e-9 * max(1, self.n) or not 0 <= round(j) <= self.n:
            raise DomainError(f"x={self.x} is not a point of E_{self.n}")

    @property
    def index(self):
        return int(round(self.n * (1.0 + self.x) / 2.0))


@dataclass(frozen=True)
class ScalingRegime:
    """Space/time rescaling of the magnetisation around a centering point.

    ``mdp``: ``b_n (m_n(b_n^{2k} t) - m)`` with ``b_n = b_scale * n**b_exponent``.
    ``clt``: ``n^{1/(2k+2)} (m_n(n^{k/(k+1)} t) - m)``.
    ``mdp_temp`` / ``clt_temp``: the critical scalings (k = 1, m = 0) with the
    chain run at ``beta = 1 + kappa / b_n**2`` (``b_n = n^{1/4}`` for clt_temp).
    ``ldp``: no rescaling.

    With ``strict=True`` the sequence must satisfy ``b_n -> inf`` and
    ``b_n^{2(k+1)}/n -> 0``; per-size checks are in :meth:`violations`.
    """

    kind: str = "ldp"
    k: int = 0
    m: float = 0.0
    b_exponent: float = 0.0
    b_scale: float = 1.0
    kappa: float = 0.0
    strict: bool = True

    def __post_init__(self):
        if self.kind not in REGIME_KINDS:
            raise ConfigurationError(f"unknown regime kind {self.kind!r}")
        if self.k < 0 or int(self.k) != self.k:
            raise ConfigurationError("flatness order k must be a nonnegative integer")
        if self.kind in ("mdp_temp", "clt_temp"):
            if self.k != 1 or self.m != 0.0:
                raise ConfigurationError("temperature-rescaled regimes have k=1, m=0")
            if not self.kappa >= 0:
                raise ConfigurationError("kappa must be nonnegative")
        if self.kind in ("mdp", "mdp_temp") and self.strict:
            alpha = self.b_exponent
            if not 0 < alpha < 1.0 / (2 * (self.k + 1)):
                raise ConfigurationError(
                    f"b_n = n^{alpha} violates b_n -> inf, b_n^{2 * (self.k + 1)}/n -> 0"
                )
            if not self.b_scale > 0:
                raise ConfigurationError("b_scale must be positive")

    @classmethod
    def ldp(cls):
        return cls(kind="ldp")

    @classmethod
    def mdp(cls, k=0, m=0.0, b_exponent=None, b_scale=1.0, strict=True):
        if b_exponent is None:
            b_exponent = 1.0 / (4 * (k + 1))
        return cls(kind="mdp", k=k, m=float(m), b_exponent=b_exponent, b_scale=b_scale,
                   strict=strict)

    @classmethod
    def clt(cls, k=0, m=0.0):
        return cls(kind="clt", k=k, m=float(m))

    @classmethod
    def mdp_temp(cls, kappa, b_exponent=1.0 / 8, b_scale=1.0):
        return cls(kind="mdp_temp", k=1, kappa=float(kappa), b_exponent=b_exponent,
                   b_scale=b_scale)

    @classmethod
    def clt_temp(cls, kappa):
        return cls(kind="clt_temp", k=1, kappa=float(kappa))

    @property
    def is_mdp(self):
        return self.kind in ("mdp", "mdp_temp")

    def b(self, n):
        if self.is_mdp:
            return self.b_scale * float(n) ** self.b_exponent
        return self.space_scale(n)

    def space_scale(self, n):
        if self.is_mdp:
            return self.b(n)
        if self.kind == "clt":
            return float(n) ** (1.0 / (2 * self.k + 2))
        if self.kind == "clt_temp":
            return float(n) ** 0.25
        return 1.0

    def time_dilation(self, n):
        if self.is_mdp:
            return self.b(n) ** (2 * self.k)
        if self.kind == "clt":
            return float(n) ** (self.k / (self.k + 1.0))
        if self.kind == "clt_temp":
            return float(n) ** 0.5
        return 1.0

    def speed(self, n):
        """Large-deviation speed r(n); None for the weak-convergence regimes."""
        if self.is_mdp:
            return n * self.b(n) ** (-2.0 * (self.k + 1))
        if self.kind == "ldp":
            return float(n)
        return None

    def step(self, n):
        """Size of one jump of the rescaled process."""
        return 2.0 * self.space_scale(n) / n

    def effective_params(self, params, n):
        if self.kind in ("mdp_temp", "clt_temp"):
            return ModelParams.temp_rescaled(self.kappa, self.space_scale(n))
        if params is None:
            raise ConfigurationError("model parameters are required for this regime")
        return params

    def violations(self, n):
        out = []
        if self.is_mdp and self.strict:
            b = self.b(n)
            if b < 2.0:
                out.append(f"b_n = {b:.4g} < 2 at n = {n}")
            ratio = b ** (2 * (self.k + 1)) / n
            if ratio > 0.1:
                out.append(f"b_n^{2 * (self.k + 1)}/n = {ratio:.4g} > 0.1 at n = {n}")
        return out

    def check(self, n):
        bad = self.violations(n)
        if bad:
            raise ConfigurationError("; ".join(bad))

    def to_dict(self):
        return {
            "kind": self.kind, "k": self.k, "m": self.m, "b_exponent": self.b_exponent,
            "b_scale": self.b_scale, "kappa": self.kappa, "strict": self.strict,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{key: d[key] for key in d if key in cls.__dataclass_fields__})


@dataclass
class TrajectorySample:
    """One realised (rescaled) path.

    ``times``/``values`` include the initial point; they are None when the
    path was run without event recording, in which case only the summary
    fields are available.
    """

    regime: ScalingRegime
    n: int
    seed: int
    replica: int
    T: float
    y0: float
    terminal: float
    sup_abs: float
    n_events: int
    times: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    def value_at(self, t):
        """Right-continuous evaluation of the recorded path."""
        if self.times is None:
            raise ValueError("path was simulated without event recording")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.clip(idx, 0, None)]


def jump_rates(state, params):
    """(rate up, rate down) of the magnetisation chain at ``state``."""
    n, x = state.n, state.x
    u = float(params.uprime(x))
    j = state.index
    # (1 - x)/2 = (n - j)/n and (1 + x)/2 = j/n hold exactly on the grid
    return (n - j) * math.exp(u), j * math.exp(-u)


def grid(n):
    return (2.0 * np.arange(n + 1) - n) / n


def rate_tables(params, n):
    """Up and down rates on every point of E_n."""
    x = grid(n)
    u = params.uprime(x)
    j = np.arange(n + 1, dtype=float)
    return (n - j) * np.exp(u), j * np.exp(-u)


@nb.njit(cache=True)
def _run_chain(j0, up, down, t_end, key, times, states):
    """Event-driven run; returns (j, events, jmin, jmax, complete).

    Records into ``times``/``states`` while capacity lasts (both may be
    empty); ``complete`` is False if the buffers overflowed.
    """
    j = j0
    jmin = j0
    jmax = j0
    t = 0.0
    cap = times.shape[0]
    events = 0
    counter = 0
    while True:
        a = up[j]
        tot = a + down[j]
        if tot <= 0.0:
            break
        u = _rng.uniform(key, counter)
        counter += 1
        t += -math.log1p(-u) / tot
        if t > t_end:
            break
        v = _rng.uniform(key, counter)
        counter += 1
        if v * tot < a:
            j += 1
        else:
            j -= 1
        if j < jmin:
            jmin = j
        if j > jmax:
            jmax = j
        if events < cap:
            times[events] = t
            states[events] = j
        events += 1
    return j, events, jmin, jmax, events <= cap


def _round_to_grid(n, x0, m):
    if not -1.0 - 1e-12 <= x0 <= 1.0 + 1e-12:
        raise ConfigurationError(f"start point {x0} lies outside [-1, 1]")
    jf = n * (1.0 + x0) / 2.0
    lo = math.floor(jf)
    frac = jf - lo
    if abs(frac - 0.5) < 1e-9:
        jm = n * (1.0 + m) / 2.0
        j = lo if abs(lo - jm) <= abs(lo + 1 - jm) else lo + 1
    else:
        j = lo if frac < 0.5 else lo + 1
    return int(min(max(j, 0), n))


def _simulate(params, regime, n, y0, T, seed, replica, record_events, tables=None):
    if T < 0:
        raise DomainError("horizon must be nonnegative")
    scale = regime.space_scale(n)
    dil = regime.time_dilation(n)
    m = regime.m
    j0 = _round_to_grid(n, m + y0 / scale, m)
    up, down = tables if tables is not None else rate_tables(regime.effective_params(params, n), n)
    key = _rng.replica_key(seed, replica)
    t_end = dil * T

    cap = 0
    if record_events:
        cap = int(1.2 * t_end * (up[j0] + down[j0])) + 64
    while True:
        times = np.empty(cap)
        states = np.empty(cap, dtype=np.int64)
        j, events, jmin, jmax, complete = _run_chain(j0, up, down, t_end, key, times, states)
        if complete or not record_events:
            break
        cap = 2 * events

    def rescale(idx):
        return scale * ((2.0 * idx - n) / n - m)

    y_start = rescale(j0)
    sup_abs = max(abs(rescale(jmin)), abs(rescale(jmax)))
    sample = TrajectorySample(
        regime=regime, n=n, seed=seed, replica=replica, T=T, y0=y_start,
        terminal=rescale(j), sup_abs=sup_abs, n_events=int(events),
    )
    if record_events:
        sample.times = np.concatenate(([0.0], times[:events] / dil))
        sample.values = np.concatenate(([y_start], rescale(states[:events])))
    return sample


def simulate_chain(params, n, x0, T, seed, replica=0, record_events=True):
    """Unrescaled path of the magnetisation started at the grid point ``x0``."""
    ChainState(n, x0)
    return _simulate(params, ScalingRegime.ldp(), n, x0, T, seed, replica, record_events)


def simulate_rescaled(params, regime, n, y0, T, seed, replica=0, record_events=True):
    """Path of the rescaled process started at (the grid point nearest) ``y0``."""
    regime.check(n)
    return _simulate(params, regime, n, y0, T, seed, replica, record_events)


def simulate_ensemble(params, regime, n, y0, T, n_replicas, seed, record_events=False):
    """Independent replicas ``0 .. n_replicas-1``, ordered by replica index."""
    regime.check(n)
    tables = rate_tables(regime.effective_params(params, n), n)
    return [
        _simulate(params, regime, n, y0, T, seed, r, record_events, tables)
        for r in range(n_replicas)
    ]


def exit_time_diagnostic(samples, C, T=None):
    """Fraction of replicas whose path reaches ``|Y| >= C`` before ``T``."""
    if len(samples) < 100:
        raise ConfigurationError("exit-time diagnostic needs at least 100 replicas")
    if T is not None and any(abs(s.T - T) > 1e-12 for s in samples):
        raise ConfigurationError("samples were simulated to a different horizon")
    sup = np.array([s.sup_abs for s in samples])
    return float(np.mean(sup >= C))


def ensemble_mean_path(samples, times):
    """Mean of recorded paths on ``times``."""
    return PathGrid(times, np.mean([s.value_at(times) for s in samples], axis=0))


def _generator(params, n):
    up, down = rate_tables(params, n)
    # forward equation dp/dt = Q^T p for the birth-death generator Q
    main = -(up + down)
    return sparse.diags([up[:-1], main, down[1:]], [-1, 0, 1], format="csc")


def transient_law(params, regime, n, y0, T, rtol=1e-9, atol=1e-13):
    """Exact law of the rescaled chain at time ``T`` by the forward equation.

    Returns ``(y, p)`` over all of E_n.  Used where event-driven sampling
    of many replicas is too expensive (the number of jumps grows like
    ``n * time_dilation``).
    """
    regime.check(n)
    eff = regime.effective_params(params, n)
    scale = regime.space_scale(n)
    m = regime.m
    j0 = _round_to_grid(n, m + y0 / scale, m)
    p0 = np.zeros(n + 1)
    p0[j0] = 1.0
    y = scale * (grid(n) - m)
    if T == 0:
        return y, p0
    QT = _generator(eff, n) * regime.time_dilation(n)
    sol = solve_ivp(
        lambda t, p: QT @ p, (0.0, T), p0, method="BDF", jac=QT, rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise DomainError(f"forward equation failed: {sol.message}")
    p = np.clip(sol.y[:, -1], 0.0, None)
    return y, p / p.sum()


def sample_transient(params, regime, n, y0, T, n_replicas, seed, law=None):
    """Replicas of ``Y(T)`` drawn by inversion from :func:`transient_law`."""
    y, p = law if law is not None else transient_law(params, regime, n, y0, T)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = _rng.uniforms_for_keys(_rng.replica_keys(seed, n_replicas), 0)
    return y[np.minimum(np.searchsorted(cdf, u, side="right"), len(y) - 1)]
