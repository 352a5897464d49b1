"""Distribution comparisons and rate fits used by the experiments."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

__all__ = [
    "ks_distance",
    "ks_threshold",
    "wasserstein1",
    "decay_rate_fit",
    "DecayFit",
    "KS_C05",
    "EmpiricalDistribution",
    "summary_json",
]


KS_C05 = 1.36


def _values(a):
    return a.samples if isinstance(a, EmpiricalDistribution) else np.asarray(a, float)


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic (sup distance of the CDFs)."""
    a, b = _values(a), _values(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    return float(_st.ks_2samp(a, b).statistic)


def ks_threshold(n1, n2, c=KS_C05):
    """Two-sample critical value ``c sqrt((n1 + n2) / (n1 n2))``; 5% for c = 1.36."""
    return float(c * math.sqrt((n1 + n2) / (n1 * n2)))


def wasserstein1(a, b):
    """L1 distance between the quantile functions."""
    return float(_st.wasserstein_distance(_values(a), _values(b)))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    speeds: tuple
    rates: tuple


def decay_rate_fit(speeds, probabilities):
    """Least-squares fit of ``-log p_n = slope * r(n) + intercept``.

    ``rates`` holds the per-rung values ``-log p_n / r(n)``.  Rungs with zero
    probability carry no information and are dropped with a warning; at
    least three usable rungs are required.
    """
    r = np.asarray(speeds, float)
    p = np.asarray(probabilities, float)
    keep = p > 0
    if not np.all(keep):
        warnings.warn(f"dropping {np.count_nonzero(~keep)} zero-probability rung(s)",
                      RuntimeWarning, stacklevel=2)
    if np.count_nonzero(keep) < 3:
        raise ValueError("need at least three rungs with positive probability")
    r, p = r[keep], p[keep]
    slope, intercept = np.polyfit(r, -np.log(p), 1)
    return DecayFit(float(slope), float(intercept), tuple(r.tolist()),
                    tuple((-np.log(p) / r).tolist()))


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, float))
        if s.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def size(self):
        return int(self.samples.size)

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.samples.size

    def quantile(self, q):
        return np.quantile(self.samples, q)

    @property
    def mean(self):
        return float(np.mean(self.samples))

    @property
    def var(self):
        return float(np.var(self.samples))

    @property
    def excess_kurtosis(self):
        return float(_st.kurtosis(self.samples, fisher=True, bias=True))

    def summary(self):
        q = self.quantile([0.05, 0.25, 0.5, 0.75, 0.95])
        return {
            "n": int(self.samples.size),
            "mean": self.mean,
            "var": self.var,
            "excess_kurtosis": self.excess_kurtosis,
            "quantiles": {k: float(v) for k, v in zip(("q05", "q25", "q50", "q75", "q95"), q)},
        }


def summary_json(obj):
    """Deterministic JSON (sorted keys, fixed float repr, trailing newline)."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
