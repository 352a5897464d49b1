"""End-to-end protocols shared by the command line and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .sdelimit import integrate_sde, make_diffusion
from .simulator import _round_to_grid, sample_transient, simulate_ensemble, transient_law
from .stats import ks_distance, ks_threshold

__all__ = [
    "CompareResult",
    "chain_samples",
    "clt_compare",
    "repeated_clt_compare",
    "containment_smoke",
    "table1_rows",
]


def _sub_seed(seed, index):
    return int(_rng.replica_key(seed, index))


def chain_samples(params, regime, n, y0, T, n_replicas, seed, sampler="auto", law=None):
    """Rescaled chain values at time ``T``; returns ``(samples, start)``.

    ``sampler="events"`` runs the event-driven chain for every replica;
    ``"transient"`` draws from the exact law at ``T``.  ``"auto"`` picks the
    event-driven chain unless time is dilated (flat fixed points), where the
    jump count per replica becomes prohibitive.
    """
    if sampler == "auto":
        sampler = "events" if regime.time_dilation(n) == 1.0 else "transient"
    if sampler == "events":
        runs = simulate_ensemble(params, regime, n, y0, T, n_replicas, seed)
        return np.array([s.terminal for s in runs]), runs[0].y0
    if sampler == "transient":
        law = law if law is not None else transient_law(params, regime, n, y0, T)
        scale = regime.space_scale(n)
        j0 = _round_to_grid(n, regime.m + y0 / scale, regime.m)
        start = scale * ((2.0 * j0 - n) / n - regime.m)
        return sample_transient(params, regime, n, y0, T, n_replicas, seed, law=law), float(start)
    raise ValueError(f"unknown sampler {sampler!r}")


@dataclass(frozen=True)
class CompareResult:
    ks: float
    threshold: float
    start: float
    chain: np.ndarray
    sde: np.ndarray

    @property
    def passed(self):
        return self.ks < self.threshold

    def summary(self):
        return {"ks": self.ks, "threshold": self.threshold, "pass": bool(self.passed),
                "start": self.start, "chain_mean": float(np.mean(self.chain)),
                "chain_var": float(np.var(self.chain)), "sde_mean": float(np.mean(self.sde)),
                "sde_var": float(np.var(self.sde))}


def clt_compare(params, regime, n, T, n_replicas, seed, dt=1e-3, y0=0.0, sampler="auto",
                law=None, threshold=None):
    """Two-sample KS distance between the rescaled chain and its diffusion limit.

    The diffusion starts at the chain's actual (grid-rounded) start.
    """
    chain, start = chain_samples(params, regime, n, y0, T, n_replicas, _sub_seed(seed, 0),
                                 sampler, law)
    spec = make_diffusion(regime, params)
    sde = integrate_sde(spec, start, T, dt, n_replicas, _sub_seed(seed, 1)).samples
    thr = ks_threshold(chain.size, sde.size) if threshold is None else threshold
    return CompareResult(ks_distance(chain, sde), float(thr), float(start), chain, sde)


def repeated_clt_compare(params, regime, n, T, n_replicas, seed, repetitions, dt=1e-3,
                         y0=0.0, sampler="auto", threshold=None):
    """Independent repetitions of :func:`clt_compare` with derived seeds."""
    law = None
    if sampler == "transient" or (sampler == "auto" and regime.time_dilation(n) != 1.0):
        law = transient_law(params, regime, n, y0, T)
    return [
        clt_compare(params, regime, n, T, n_replicas, _sub_seed(seed, 100 + r), dt, y0,
                    sampler, law, threshold)
        for r in range(repetitions)
    ]


def containment_smoke(params, regime, n, T, n_replicas, seed, levels):
    """``P(sup_{t <= T} |Y_n(t)| >= C)`` for each ``C`` in ``levels``."""
    runs = simulate_ensemble(params, regime, n, 0.0, T, n_replicas, seed)
    sup = np.array([s.sup_abs for s in runs])
    return np.array([np.mean(sup >= C) for C in levels])


def table1_rows():
    """Map of scaling exponents to rescaled processes and limit objects."""
    return [
        {"alpha": "0", "temperature": "all beta", "process": "m_n(t)",
         "limit": "LDP at speed n", "regime": "ldp"},
        {"alpha": "(0, 1/2)", "temperature": "all beta", "process": "n^a m_n(t)",
         "limit": "LDP at speed n^(1-2a), L = (v - 2(beta-1)x)^2/8", "regime": "mdp k=0 m=0"},
        {"alpha": "(0, 1/2)", "temperature": "beta > 1", "process": "n^a (m_n(t) -+ m_beta)",
         "limit": "LDP at speed n^(1-2a), L = (v - 2x G2'(m))^2/(8 G1(m))",
         "regime": "mdp k=0 m=m_beta"},
        {"alpha": "1/2", "temperature": "all beta", "process": "n^(1/2) m_n(t)",
         "limit": "dY = 2(beta-1) Y dt + 2 dW", "regime": "clt k=0 m=0"},
        {"alpha": "1/2", "temperature": "beta > 1", "process": "n^(1/2) (m_n(t) -+ m_beta)",
         "limit": "dY = 2 G2'(m) Y dt + 2 sqrt(G1(m)) dW", "regime": "clt k=0 m=m_beta"},
        {"alpha": "(0, 1/4)", "temperature": "beta = 1", "process": "n^a m_n(n^(2a) t)",
         "limit": "LDP at speed n^(1-4a), L = (v + (2/3)x^3)^2/8", "regime": "mdp k=1 m=0"},
        {"alpha": "(0, 1/4)", "temperature": "beta = 1 + kappa n^(-2a), kappa >= 0",
         "process": "n^a m_n(n^(2a) t)",
         "limit": "LDP at speed n^(1-4a), L = (v - 2(kappa x - x^3/3))^2/8",
         "regime": "mdp_temp"},
        {"alpha": "1/4", "temperature": "beta = 1", "process": "n^(1/4) m_n(n^(1/2) t)",
         "limit": "dY = -(2/3) Y^3 dt + 2 dW", "regime": "clt k=1 m=0"},
        {"alpha": "1/4", "temperature": "beta = 1 + kappa n^(-1/2), kappa >= 0",
         "process": "n^(1/4) m_n(n^(1/2) t)",
         "limit": "dY = 2(kappa Y - Y^3/3) dt + 2 dW", "regime": "clt_temp"},
    ]

