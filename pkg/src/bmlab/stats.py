"""Mergeable moment accumulators, jackknife errors, normality tests and verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats


class MomentAccumulator:
    """Streaming moments of a k-vector statistic.

    Keeps count, mean, central moment sums of orders 2-4 per component and
    the cross-product (co-moment) matrix. Two accumulators merge with the
    pairwise update formulas of Chan et al. / Pebay, so partial runs can be
    combined in any grouping.
    """

    def __init__(self, k: int):
        self.k = k
        self.n = 0
        self.mean = np.zeros(k)
        self.m2 = np.zeros(k)
        self.m3 = np.zeros(k)
        self.m4 = np.zeros(k)
        self.comoment = np.zeros((k, k))

    @classmethod
    def from_batch(cls, x) -> "MomentAccumulator":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        acc = cls(x.shape[1])
        n = x.shape[0]
        if n == 0:
            return acc
        acc.n = n
        acc.mean = x.mean(axis=0)
        dev = x - acc.mean
        acc.m2 = np.sum(dev**2, axis=0)
        acc.m3 = np.sum(dev**3, axis=0)
        acc.m4 = np.sum(dev**4, axis=0)
        acc.comoment = dev.T @ dev
        return acc

    def add(self, x) -> "MomentAccumulator":
        merged = self.merge(MomentAccumulator.from_batch(x))
        self.__dict__.update(merged.__dict__)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.k != self.k:
            raise ValueError("cannot merge accumulators of different width")
        if other.n == 0:
            return self.copy()
        if self.n == 0:
            return other.copy()
        na, nb = float(self.n), float(other.n)
        n = na + nb
        delta = other.mean - self.mean
        out = MomentAccumulator(self.k)
        out.n = self.n + other.n
        out.mean = self.mean + delta * nb / n
        out.m2 = self.m2 + other.m2 + delta**2 * na * nb / n
        out.m3 = (self.m3 + other.m3 + delta**3 * na * nb * (na - nb) / n**2
                  + 3.0 * delta * (na * other.m2 - nb * self.m2) / n)
        out.m4 = (self.m4 + other.m4
                  + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
                  + 6.0 * delta**2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
                  + 4.0 * delta * (na * other.m3 - nb * self.m3) / n)
        out.comoment = self.comoment + other.comoment + np.outer(delta, delta) * na * nb / n
        return out

    def copy(self) -> "MomentAccumulator":
        out = MomentAccumulator(self.k)
        out.n = self.n
        out.mean = self.mean.copy()
        out.m2, out.m3, out.m4 = self.m2.copy(), self.m3.copy(), self.m4.copy()
        out.comoment = self.comoment.copy()
        return out

    @property
    def variance(self) -> np.ndarray:
        return self.m2 / (self.n - 1) if self.n > 1 else np.full(self.k, np.nan)

    @property
    def covariance(self) -> np.ndarray:
        return self.comoment / (self.n - 1) if self.n > 1 else np.full((self.k, self.k), np.nan)

    @property
    def kurtosis(self) -> np.ndarray:
        """Standardised fourth moment ``n M4 / M2^2`` (3 for a Gaussian)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.n * self.m4 / self.m2**2

    @property
    def skewness(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return math.sqrt(self.n) * self.m3 / self.m2**1.5

    def variance_se(self) -> np.ndarray:
        """Large-sample SE of the variance, ``sqrt((mu4 - sigma^4) / n)``."""
        mu4 = self.m4 / self.n
        s2 = self.m2 / self.n
        return np.sqrt(np.maximum(mu4 - s2**2, 0.0) / self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean.tolist(), "variance": self.variance.tolist(),
                "kurtosis": self.kurtosis.tolist()}


def tree_merge(accs) -> MomentAccumulator:
    """Deterministic pairwise merge of a sequence of accumulators."""
    accs = list(accs)
    if not accs:
        raise ValueError("nothing to merge")
    while len(accs) > 1:
        nxt = [accs[i].merge(accs[i + 1]) for i in range(0, len(accs) - 1, 2)]
        if len(accs) % 2:
            nxt.append(accs[-1])
        accs = nxt
    return accs[0]


# jackknife --------------------------------------------------------------------

def jackknife_covariance(x) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance matrix (ddof=1) and its entrywise jackknife SE."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, k = x.shape
    if n < 3:
        raise ValueError("jackknife needs at least 3 samples")
    s = x.sum(axis=0)
    sxy = x.T @ x
    cov = (sxy - np.outer(s, s) / n) / (n - 1)
    se = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            loo_s_i = s[i] - x[:, i]
            loo_s_j = s[j] - x[:, j]
            loo = (sxy[i, j] - x[:, i] * x[:, j] - loo_s_i * loo_s_j / (n - 1)) / (n - 2)
            se[i, j] = se[j, i] = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return cov, se


# verdicts ---------------------------------------------------------------------------

RULES = ("abs", "se", "rel", "min", "max")


@dataclass
class Verdict:
    """``pass`` iff ``observed`` is within ``tolerance`` of ``predicted`` under ``rule``.

    ``se`` multiplies ``tolerance`` for the ``se`` rule; ``min`` and ``max``
    are one-sided (``observed >= predicted`` / ``observed <= predicted``).
    """

    name: str
    observed: float
    predicted: float
    rule: str
    tolerance: float = 0.0
    se: float = 0.0
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown tolerance rule {self.rule!r}")

    @property
    def margin(self) -> float:
        if self.rule == "abs":
            return self.tolerance
        if self.rule == "se":
            return self.tolerance * self.se
        if self.rule == "rel":
            return self.tolerance * abs(self.predicted)
        return 0.0

    @property
    def passed(self) -> bool:
        if not (math.isfinite(self.observed) and math.isfinite(self.predicted)):
            return False
        if self.rule == "min":
            return self.observed >= self.predicted
        if self.rule == "max":
            return self.observed <= self.predicted
        return abs(self.observed - self.predicted) <= self.margin

    def to_dict(self) -> dict:
        out = {"name": self.name, "observed": self.observed, "predicted": self.predicted,
               "rule": self.rule, "tolerance": self.tolerance, "se": self.se, "pass": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class KSResult:
    statistic: float
    p_value: float


def ks_normal_test(values, mean: float = 0.0, sd: float = 1.0) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against ``N(mean, sd^2)`` (asymptotic p-value).

    ``mean`` and ``sd`` are the predicted values, never estimated from ``values``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"KS test needs at least 100 values, got {x.size}")
    if not sd > 0:
        raise ValueError("predicted standard deviation must be positive")
    res = sstats.kstest((x - mean) / sd, "norm", method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))


def variance_verdict(name: str, samples, predicted: float, k_se: float = 3.0) -> Verdict:
    cov, se = jackknife_covariance(np.asarray(samples, dtype=float)[:, None])
    return Verdict(name, float(cov[0, 0]), float(predicted), "se", k_se, float(se[0, 0]))


def covariance_verdict(samples, predicted, k_se: float = 3.0, names=None) -> list[Verdict]:
    """Entrywise check of the empirical covariance of ``R x k`` samples against ``predicted``."""
    samples = np.asarray(samples, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    k = samples.shape[1]
    if k < 2:
        raise ValueError("covariance_verdict needs at least two statistics")
    if predicted.shape != (k, k):
        raise ValueError(f"predicted matrix must be {k}x{k}")
    names = names or [f"f{i}" for i in range(k)]
    cov, se = jackknife_covariance(samples)
    out = []
    for i in range(k):
        for j in range(i, k):
            out.append(Verdict(f"cov[{names[i]},{names[j]}]", float(cov[i, j]), float(predicted[i, j]),
                               "se", k_se, float(se[i, j])))
    return out


def trend_verdict(name: str, xs, estimates, ses, k_se: float = 2.0) -> Verdict:
    """No significant increase: weighted LS slope of ``estimates`` on ``xs`` is <= k_se * SE."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(estimates, dtype=float)
    s = np.asarray(ses, dtype=float)
    w = 1.0 / np.maximum(s, 1e-300) ** 2
    xbar = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * y) / sxx)
    slope_se = float(1.0 / math.sqrt(sxx))
    return Verdict(name, slope, k_se * slope_se, "max", detail={"slope_se": slope_se})
