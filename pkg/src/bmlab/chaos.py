"""The distribution-valued field <Phi_N, f> and its Wiener chaos components.

Scalings used throughout (``B_N`` is the cube ``|j|_inf <= N/2``):

* ``raw``        ``N^-d  sum_j (H(X_j) - h0) f(j/N)``
* ``centered``   ``N^-d/2 sum_j (H(X_j) - h0) f(j/N)`` (the sum of all ``S_{N,q}``)
* ``clt_scaled`` ``N^d/2 / sqrt(C) * raw``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import signal

from .errors import FeasibilityError
from .hermite import HermiteExpansion, hermite_table
from .sampler import lattice_points

CONTRACTION_GUARD = 10**10


class Normalization(str, enum.Enum):
    RAW = "raw"
    CENTERED = "centered"
    CLT = "clt_scaled"


# test functions ---------------------------------------------------------------

def _sin_integral(k: int, a: float, b: float) -> float:
    """``int_a^b sqrt(2) sin(k pi (x + 1/2)) dx``."""
    w = k * math.pi
    return math.sqrt(2.0) * (math.cos(w * (a + 0.5)) - math.cos(w * (b + 0.5))) / w


@dataclass(frozen=True)
class TestFunction:
    """Bounded test function on ``D = [-1/2, 1/2]^d``.

    Kinds: ``constant_one``, ``box_indicator`` (closed box ``[lo, hi]``,
    optionally scaled by ``|Q|^(-1/2)``), ``eigenfunction`` (Dirichlet
    Laplacian mode with multi-index ``k``) and ``custom``.
    """

    __test__ = False  # not a pytest class

    d: int
    kind: str
    lo: tuple = ()
    hi: tuple = ()
    normalized: bool = False
    k: tuple = ()
    fn: Callable | None = None
    sup_bound: float = 1.0
    name: str = ""

    @classmethod
    def constant_one(cls, d: int) -> "TestFunction":
        return cls(d, "constant_one", sup_bound=1.0, name="one")

    @classmethod
    def box_indicator(cls, lo: Sequence[float], hi: Sequence[float], normalized: bool = True,
                      name: str = "") -> "TestFunction":
        lo, hi = tuple(float(v) for v in lo), tuple(float(v) for v in hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi in every coordinate")
        if any(a < -0.5 or b > 0.5 for a, b in zip(lo, hi)):
            raise ValueError("box must lie inside [-1/2, 1/2]^d")
        vol = math.prod(b - a for a, b in zip(lo, hi))
        sup = vol**-0.5 if normalized else 1.0
        return cls(len(lo), "box_indicator", lo=lo, hi=hi, normalized=normalized, sup_bound=sup,
                   name=name or f"box{lo}-{hi}")

    @classmethod
    def lattice_box(cls, N: int, lo_idx: Sequence[int], hi_idx: Sequence[int], normalized: bool = True,
                    name: str = "") -> "TestFunction":
        """Box whose faces sit half a lattice step outside the sites ``lo_idx..hi_idx``.

        Then ``N^d |Q|`` is exactly the number of lattice points in the box.
        """
        lo = [(a - 0.5) / N for a in lo_idx]
        hi = [(b + 0.5) / N for b in hi_idx]
        return cls.box_indicator(lo, hi, normalized, name)

    @classmethod
    def eigenfunction(cls, k: Sequence[int]) -> "TestFunction":
        k = tuple(int(v) for v in k)
        if any(v < 1 for v in k):
            raise ValueError("eigenmode indices must be >= 1")
        return cls(len(k), "eigenfunction", k=k, sup_bound=math.sqrt(2.0) ** len(k),
                   name="phi" + "".join(f"_{v}" for v in k))

    @classmethod
    def custom(cls, d: int, fn: Callable, sup_bound: float, name: str = "custom") -> "TestFunction":
        if not math.isfinite(sup_bound):
            raise ValueError("custom test functions must declare a finite sup bound")
        return cls(d, "custom", fn=fn, sup_bound=float(sup_bound), name=name)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant_one":
            return np.ones(x.shape[:-1])
        if self.kind == "box_indicator":
            inside = np.all((x >= np.array(self.lo)) & (x <= np.array(self.hi)), axis=-1)
            return inside * (self.volume**-0.5 if self.normalized else 1.0)
        if self.kind == "eigenfunction":
            out = np.ones(x.shape[:-1])
            for a, ka in enumerate(self.k):
                out = out * math.sqrt(2.0) * np.sin(ka * math.pi * (x[..., a] + 0.5))
            return out
        return np.asarray(self.fn(x), dtype=float)

    def on_lattice(self, N: int) -> np.ndarray:
        """``f(j/N)`` on ``B_N`` as a cube of side ``2 floor(N/2) + 1``."""
        pts = lattice_points(N, self.d) / N
        side = 2 * (N // 2) + 1
        return self(pts).reshape((side,) * self.d)

    def _axis_integral(self, a: int, lo: float, hi: float) -> float:
        """Integral over ``[lo, hi]`` of the a-th tensor factor (box / one / eigen only)."""
        if self.kind == "eigenfunction":
            return _sin_integral(self.k[a], lo, hi)
        if self.kind == "box_indicator":
            return max(0.0, min(hi, self.hi[a]) - max(lo, self.lo[a]))
        return hi - lo

    def inner(self, other: "TestFunction", nodes: int = 64) -> float:
        """``<f, g>_{L^2(D)}``; closed forms where available, tensor Gauss-Legendre otherwise."""
        kinds = {self.kind, other.kind}
        if "custom" not in kinds:
            if self.kind == "eigenfunction" and other.kind == "eigenfunction":
                return 1.0 if self.k == other.k else 0.0
            scale = 1.0
            for f in (self, other):
                if f.kind == "box_indicator" and f.normalized:
                    scale *= f.volume**-0.5
            box = [f for f in (self, other) if f.kind == "box_indicator"]
            lo = [-0.5] * self.d
            hi = [0.5] * self.d
            for b in box:
                lo = [max(p, q) for p, q in zip(lo, b.lo)]
                hi = [min(p, q) for p, q in zip(hi, b.hi)]
            if any(p >= q for p, q in zip(lo, hi)):
                return 0.0
            eig = [f for f in (self, other) if f.kind == "eigenfunction"]
            if not eig:
                return scale * math.prod(q - p for p, q in zip(lo, hi))
            return scale * math.prod(eig[0]._axis_integral(a, lo[a], hi[a]) for a in range(self.d))
        x, w = leggauss(nodes)
        x, w = 0.5 * x, 0.5 * w
        grid = np.stack(np.meshgrid(*([x] * self.d), indexing="ij"), axis=-1)
        weights = math.prod(np.meshgrid(*([w] * self.d), indexing="ij"))
        return float(np.sum(weights * self(grid) * other(grid)))

    def l2_norm_sq(self) -> float:
        return self.inner(self)

    def to_dict(self) -> dict:
        if self.kind == "box_indicator":
            return {"kind": "box_indicator", "lo": list(self.lo), "hi": list(self.hi),
                    "normalized": self.normalized, "name": self.name}
        if self.kind == "eigenfunction":
            return {"kind": "eigenfunction", "k": list(self.k)}
        if self.kind == "constant_one":
            return {"kind": "constant_one", "d": self.d}
        raise ValueError("custom test functions are not serialisable")

    @classmethod
    def from_dict(cls, spec: dict, d: int) -> "TestFunction":
        kind = spec["kind"]
        if kind == "constant_one":
            return cls.constant_one(d)
        if kind == "eigenfunction":
            return cls.eigenfunction(spec["k"])
        if kind == "box_indicator":
            return cls.box_indicator(spec["lo"], spec["hi"], spec.get("normalized", True), spec.get("name", ""))
        raise ValueError(f"unknown test function kind {kind!r}")


# statistics -----------------------------------------------------------------------

@dataclass
class ChaosStatistic:
    N: int
    q: int | str
    value: float
    normalization: Normalization


def _weights(f, N: int, d: int) -> np.ndarray:
    if isinstance(f, TestFunction):
        return f.on_lattice(N)
    w = np.asarray(f, dtype=float)
    side = 2 * (N // 2) + 1
    return w.reshape((side,) * d)


def _check_window(window: np.ndarray, N: int, d: int | None = None) -> np.ndarray:
    window = np.asarray(window, dtype=float)
    side = 2 * (N // 2) + 1
    if d is None:
        d = window.ndim
    if window.size != side**d:
        raise ValueError(f"window has {window.size} values, B_N for N={N}, d={d} has {side ** d}")
    return window.reshape((side,) * d)


def functional_values(windows: np.ndarray, e: HermiteExpansion, f, N: int, d: int,
                      normalization: Normalization | str = Normalization.RAW, C: float | None = None) -> np.ndarray:
    """Batched :func:`functional` over a leading replica axis; returns plain floats."""
    normalization = Normalization(normalization)
    side = 2 * (N // 2) + 1
    windows = np.asarray(windows, dtype=float).reshape((-1,) + (side,) * d)
    w = _weights(f, N, d)
    centered = e(windows, centered=True)
    raw = np.tensordot(centered, w, axes=d) * float(N) ** (-d)
    return raw * _scale(normalization, N, d, C)


def _scale(normalization: Normalization, N: int, d: int, C: float | None) -> float:
    if normalization is Normalization.RAW:
        return 1.0
    if normalization is Normalization.CENTERED:
        return float(N) ** (d / 2)
    if C is None or not C > 0:
        raise ValueError("clt_scaled normalisation needs a positive limit constant C")
    return float(N) ** (d / 2) / math.sqrt(C)


def functional(window, e: HermiteExpansion, f, N: int,
               normalization: Normalization | str = Normalization.RAW, C: float | None = None) -> ChaosStatistic:
    """``<Phi_N, f>`` for one window of field values (``h0`` subtracted)."""
    normalization = Normalization(normalization)
    d = f.d if isinstance(f, TestFunction) else np.ndim(window)
    win = _check_window(window, N, d)
    val = functional_values(win[None], e, f, N, d, normalization, C)[0]
    return ChaosStatistic(N, "all", float(val), normalization)


def chaos_component_values(windows: np.ndarray, q: int, c_q: float, f, N: int, d: int,
                           variance_base: float = 1.0) -> np.ndarray:
    side = 2 * (N // 2) + 1
    windows = np.asarray(windows, dtype=float).reshape((-1,) + (side,) * d)
    w = _weights(f, N, d)
    hq = hermite_table(q, windows, variance_base)[q]
    return c_q * float(N) ** (-d / 2) * np.tensordot(hq, w, axes=d)


def chaos_component(window, q: int, c_q: float, f, N: int, variance_base: float = 1.0) -> ChaosStatistic:
    """``S_{N,q}(f) = N^-d/2 c_q sum_j He_q(X_j) f(j/N)``."""
    d = f.d if isinstance(f, TestFunction) else np.ndim(window)
    win = _check_window(window, N, d)
    val = chaos_component_values(win[None], q, c_q, f, N, d, variance_base)[0]
    return ChaosStatistic(N, q, float(val), Normalization.CENTERED)


# exact moments --------------------------------------------------------------------------

def _lag_overlap(fw: np.ndarray, gw: np.ndarray) -> np.ndarray:
    """``sum_{k in B_N cap (B_N - u)} f(k + u) g(k)`` on lags ``u in [-2h, 2h]^d``."""
    return signal.correlate(fw, gw, mode="full", method="direct" if fw.size <= 4096 else "fft")


def exact_covariance(q: int, c_q: float, model, f, g, N: int) -> float:
    """``Cov(S_{N,q}(f), S_{N,q}(g)) = q! c_q^2 N^-d sum_{j,k} rho(j-k)^q f(j/N) g(k/N)``."""
    d = model.d
    fw, gw = _weights(f, N, d), _weights(g, N, d)
    overlap = _lag_overlap(fw, gw)
    h = N // 2
    rho_q = model.rho_grid(2 * h) ** q
    return math.factorial(q) * c_q * c_q * float(N) ** (-d) * float(np.sum(rho_q * overlap))


def exact_variance(q: int, c_q: float, model, f, N: int) -> float:
    """Exact ``Var(S_{N,q}(f))`` summed lag by lag over the window overlap."""
    v = exact_covariance(q, c_q, model, f, f, N)
    fw = np.abs(_weights(f, N, model.d))
    bound = math.factorial(q) * c_q * c_q * float(N) ** (-model.d) * float(
        np.sum(np.abs(model.rho_grid(2 * (N // 2))) ** q * _lag_overlap(fw, fw)))
    # a variance: only roundoff may push it below zero
    assert v >= -1e-10 * bound, f"negative variance {v}"
    return max(v, 0.0)


def functional_covariance(e: HermiteExpansion, model, f, g, N: int) -> float:
    """Exact ``Cov`` of the centered functionals (``N^-d/2`` scale), all chaoses of ``e``."""
    return sum(exact_covariance(q, c, model, f, g, N) for q, c in e.coeffs.items() if c != 0.0)


def functional_variance(e: HermiteExpansion, model, f, N: int) -> float:
    return sum(exact_variance(q, c, model, f, N) for q, c in e.coeffs.items() if c != 0.0)


def limit_variance(q: int, c_q: float, model, f, quadrature_grid: int = 64, radius: int = 16) -> float:
    """``q! c_q^2 (sum_u rho(u)^q) int_D f^2``."""
    from .covariance import lq_sum
    from .errors import DivergenceError

    s = lq_sum(model, q, radius)
    if not s.converged:
        raise DivergenceError(f"sum_u |rho(u)|^{q} does not converge")
    if isinstance(f, TestFunction):
        norm = f.inner(f, quadrature_grid)
    else:
        raise TypeError("limit_variance needs a TestFunction")
    return math.factorial(q) * c_q * c_q * s.total * norm


def contraction_norm_sq(q: int, r: int, c_q: float, model, f, N: int, absolute: bool = False) -> float:
    """Squared norm of ``s_{N,q} (x)_r s_{N,q}``.

    ``c_q^4 N^-2d sum_{j1..j4} prod f(j_l/N) rho(j1-j2)^r rho(j3-j4)^r
    rho(j1-j3)^(q-r) rho(j2-j4)^(q-r)``. The quadruple sum is evaluated as
    ``trace((P B)^2)`` with ``P = F A F``, ``A = rho^r``, ``B = rho^(q-r)``
    over ``B_N x B_N``; ``absolute`` replaces ``rho`` by ``|rho|``.
    """
    if not 1 <= r <= q - 1:
        raise ValueError(f"contraction order r={r} must satisfy 1 <= r <= q-1 (q={q})")
    d = model.d
    pts = lattice_points(N, d)
    n = len(pts)
    if n**4 > CONTRACTION_GUARD:
        raise FeasibilityError(f"|B_N|^4 = {n ** 4:.3e} exceeds the guard {CONTRACTION_GUARD:.0e} (N={N}, d={d})")
    lags = pts[:, None, :] - pts[None, :, :]
    rho = model.rho(lags)
    if absolute:
        rho = np.abs(rho)
    fv = _weights(f, N, d).reshape(-1)
    P = fv[:, None] * rho**r * fv[None, :]
    PB = P @ rho ** (q - r)
    return c_q**4 * float(N) ** (-2 * d) * float(np.einsum("ij,ji->", PB, PB))


# fourth moment -----------------------------------------------------------------------

@dataclass
class FourthMoment:
    m4: float
    gap: float
    se: float
    n: int


def _standardized_m4(s1, s2, s3, s4, n):
    mean = s1 / n
    c2 = s2 / n - mean**2
    c4 = s4 / n - 4 * mean * s3 / n + 6 * mean**2 * s2 / n - 3 * mean**4
    return c4 / c2**2


def fourth_moment_gap(samples) -> FourthMoment:
    """Fourth moment of the standardised samples, its gap to 3 and a jackknife SE."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError(f"fourth_moment_gap needs at least 100 samples, got {n}")
    x = x - x.mean()
    sums = [np.sum(x**p) for p in (1, 2, 3, 4)]
    m4 = float(_standardized_m4(*sums, n))
    loo = _standardized_m4(sums[0] - x, sums[1] - x**2, sums[2] - x**3, sums[3] - x**4, n - 1)
    se = float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return FourthMoment(m4, m4 - 3.0, se, n)
