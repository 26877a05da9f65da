"""Probabilists' Hermite algebra.

Expansions are taken against a centered Gaussian of variance ``g``
(``variance_base``) using the Wick polynomials

    He_q^{[g]}(x) = g^{q/2} He_q(x / sqrt(g)),

which obey ``E[He_p^{[g]}(X) He_q^{[g]}(Y)] = q! Cov(X, Y)^q 1{p = q}``.
For ``g = 1`` they are the usual probabilists' Hermite polynomials. An
observable is written ``H = h0 + sum_q c_q He_q^{[g]}`` where ``c_q`` is the
literal coefficient of the q-th polynomial, so the variance carried by the
q-th chaos is ``q! c_q^2 g^q``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite_e import hermegauss

from .errors import DivergenceError, QuadratureError

RANK_ZERO_THRESHOLD = 1e-12


def eval_hermite(q: int, x, variance: float = 1.0):
    """Evaluate He_q^{[variance]} at ``x`` with the three-term recurrence.

    ``He_{q+1} = x He_q - q g He_{q-1}``, ``He_0 = 1``, ``He_1 = x``.
    Scalars in, scalars out; arrays are handled elementwise.
    """
    if q < 0:
        raise ValueError(f"Hermite degree must be nonnegative, got {q}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev[()] if prev.ndim == 0 else prev
    cur = x.copy()
    for n in range(1, q):
        prev, cur = cur, x * cur - n * variance * prev
    return cur[()] if cur.ndim == 0 else cur


def hermite_table(q_max: int, x, variance: float = 1.0) -> np.ndarray:
    """Stack ``He_0 .. He_{q_max}`` evaluated at ``x``; shape ``(q_max + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((q_max + 1,) + x.shape)
    out[0] = 1.0
    if q_max >= 1:
        out[1] = x
    for n in range(1, q_max):
        out[n + 1] = x * out[n] - n * variance * out[n - 1]
    return out


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 0!! = 1``."""
    if n <= 0:
        return 1
    return math.prod(range(n, 0, -2))


@dataclass(frozen=True)
class HermiteExpansion:
    variance_base: float
    h0: float
    coeffs: Mapping[int, float]
    q_max: int
    tail_variance: float = 0.0

    def __post_init__(self):
        if not self.variance_base > 0:
            raise ValueError(f"variance_base must be positive, got {self.variance_base}")
        # normalise to a plain dict sorted by degree
        clean = {int(q): float(c) for q, c in sorted(self.coeffs.items()) if 1 <= int(q) <= self.q_max}
        object.__setattr__(self, "coeffs", clean)

    @property
    def rank(self) -> int:
        return hermite_rank(self)

    def coeff(self, q: int) -> float:
        return self.coeffs.get(q, 0.0)

    def chaos_variance(self, q: int) -> float:
        """Variance of ``c_q He_q^{[g]}(X_o)``."""
        return math.factorial(q) * self.coeff(q) ** 2 * self.variance_base**q

    @property
    def variance(self) -> float:
        """``Var[H(X_o)]`` including the reported tail."""
        return sum(self.chaos_variance(q) for q in self.coeffs) + self.tail_variance

    def __call__(self, x, centered: bool = False):
        """Evaluate the truncated expansion (minus ``h0`` when ``centered``)."""
        x = np.asarray(x, dtype=float)
        table = hermite_table(self.q_max, x, self.variance_base)
        out = np.zeros_like(x) if centered else np.full_like(x, self.h0)
        for q, c in self.coeffs.items():
            out = out + c * table[q]
        return out

    def scaled(self, factor: float) -> "HermiteExpansion":
        return HermiteExpansion(
            self.variance_base,
            factor * self.h0,
            {q: factor * c for q, c in self.coeffs.items()},
            self.q_max,
            factor**2 * self.tail_variance,
        )

    def to_dict(self) -> dict:
        return {
            "variance_base": self.variance_base,
            "h0": self.h0,
            "coeffs": [[q, c] for q, c in self.coeffs.items()],
            "tail_variance": self.tail_variance,
            "q_max": self.q_max,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "HermiteExpansion":
        coeffs = {int(q): float(c) for q, c in data["coeffs"]}
        q_max = int(data.get("q_max", max(coeffs, default=1)))
        return cls(
            float(data["variance_base"]),
            float(data["h0"]),
            coeffs,
            q_max,
            float(data.get("tail_variance", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "HermiteExpansion":
        return cls.from_dict(json.loads(text))


def from_hermite_coeffs(coeffs: Mapping[int, float], variance_base: float = 1.0, h0: float = 0.0) -> HermiteExpansion:
    """Build an expansion directly from its Hermite coefficients."""
    q_max = max((int(q) for q in coeffs), default=1)
    return HermiteExpansion(variance_base, h0, dict(coeffs), q_max, 0.0)


def expand_polynomial(monomial_coeffs: Sequence[float], variance_base: float = 1.0, q_max: int | None = None) -> HermiteExpansion:
    """Exact expansion of ``sum_n a_n x^n``.

    Uses ``x^n = sum_k C(n, 2k) (2k-1)!! g^k He_{n-2k}^{[g]}(x)``. Chaoses
    above ``q_max`` are dropped and their variance reported as the tail.
    """
    if not variance_base > 0:
        raise ValueError(f"variance_base must be positive, got {variance_base}")
    a = [float(v) for v in monomial_coeffs]
    degree = len(a) - 1
    while degree > 0 and a[degree] == 0.0:
        degree -= 1
    full = [0.0] * (degree + 1)
    for n in range(degree + 1):
        if a[n] == 0.0:
            continue
        for k in range(n // 2 + 1):
            full[n - 2 * k] += a[n] * math.comb(n, 2 * k) * double_factorial(2 * k - 1) * variance_base**k
    if q_max is None:
        q_max = max(degree, 1)
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    coeffs = {q: full[q] for q in range(1, min(degree, q_max) + 1) if full[q] != 0.0}
    tail = sum(math.factorial(q) * full[q] ** 2 * variance_base**q for q in range(q_max + 1, degree + 1))
    return HermiteExpansion(variance_base, full[0], coeffs, q_max, tail)


def expand_power(p: int, variance_base: float = 1.0) -> HermiteExpansion:
    """Expansion of ``x^p``."""
    if p < 1:
        raise ValueError("power must be at least 1")
    return expand_polynomial([0.0] * p + [1.0], variance_base)


def _quadrature_projection(H: Callable, sigma: float, q_max: int, n: int):
    nodes, weights = hermegauss(n)
    weights = weights / math.sqrt(2.0 * math.pi)
    values = np.asarray(H(sigma * nodes), dtype=float)
    if values.shape != nodes.shape:
        values = np.broadcast_to(values, nodes.shape).astype(float)
    he = hermite_table(q_max, nodes)
    proj = he @ (weights * values)  # E[H(sigma Z) He_q(Z)]
    coeffs = np.array([proj[q] / (math.factorial(q) * sigma**q) for q in range(q_max + 1)])
    second = float(weights @ values**2)
    return coeffs, second


def expand(H, variance_base: float = 1.0, q_max: int = 10, tol: float = 1e-10,
           n_start: int = 64, n_max: int = 1024) -> HermiteExpansion:
    """Hermite expansion of an observable against ``N(0, variance_base)``.

    Polynomials (``numpy.polynomial.Polynomial``) take the exact path. Other
    callables are projected with Gauss-Hermite quadrature, doubling the node
    count until successive coefficient vectors agree to ``tol`` (relative to
    the largest coefficient, floored at one).
    """
    if not variance_base > 0:
        raise ValueError(f"variance_base must be positive, got {variance_base}")
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    if isinstance(H, Polynomial):
        return expand_polynomial(H.convert().coef, variance_base, q_max)

    sigma = math.sqrt(variance_base)
    n = max(n_start, 2 * q_max + 2)
    prev, prev_second = _quadrature_projection(H, sigma, q_max, n)
    while True:
        n *= 2
        if n > n_max:
            raise QuadratureError(
                f"Hermite projection did not settle to {tol:g} with up to {n // 2} nodes")
        cur, second = _quadrature_projection(H, sigma, q_max, n)
        scale = max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) < tol * scale and abs(second - prev_second) < tol * max(1.0, abs(second)):
            break
        prev, prev_second = cur, second

    captured = sum(math.factorial(q) * cur[q] ** 2 * variance_base**q for q in range(1, q_max + 1))
    tail = second - cur[0] ** 2 - captured
    # negative residue is quadrature roundoff
    tail = max(tail, 0.0)
    coeffs = {q: float(cur[q]) for q in range(1, q_max + 1)}
    return HermiteExpansion(variance_base, float(cur[0]), coeffs, q_max, float(tail))


def hermite_rank(e: HermiteExpansion, rel_threshold: float = RANK_ZERO_THRESHOLD) -> int:
    """Smallest ``q >= 1`` whose coefficient is not numerically zero."""
    mags = {q: abs(c) for q, c in e.coeffs.items()}
    biggest = max(mags.values(), default=0.0)
    if biggest == 0.0:
        raise ValueError("all Hermite coefficients vanish: the observable is a.s. constant")
    floor = rel_threshold * biggest
    return min(q for q, m in mags.items() if m >= floor and m > 0.0)


@dataclass
class LimitConstant:
    """``sum_q q! c_q^2 sum_u rho(u)^q`` in its signed and absolute forms.

    ``signed`` includes the estimated tail of every converged lattice sum;
    ``absolute`` is the plain truncated sum and ``tail_estimate`` bounds what it leaves out.
    """

    signed: float
    absolute: float
    per_q: dict[int, float] = field(default_factory=dict)
    per_q_abs: dict[int, float] = field(default_factory=dict)
    truncated: bool = False
    tail_estimate: float = 0.0

    @property
    def C(self) -> float:
        return self.signed


def limit_constant(e: HermiteExpansion, model, radius: int = 16) -> LimitConstant:
    """Limit variance constant of the Breuer-Major functional.

    Raises :class:`DivergenceError` when ``sum_u |rho(u)|^m`` fails the
    convergence diagnostic for the Hermite rank ``m``. ``truncated`` is set
    when a higher chaos sum did not converge or the expansion has a tail.
    """
    from .covariance import lq_sum

    m = hermite_rank(e)
    lead = lq_sum(model, m, radius)
    if not lead.converged:
        raise DivergenceError(
            f"sum_u |rho(u)|^{m} does not converge (partial {lead.partial:.6g} at radius {radius})")
    per_q, per_q_abs = {}, {}
    truncated = e.tail_variance > 0.0
    tail_est = 0.0
    for q, c in e.coeffs.items():
        if q < m or c == 0.0:
            continue
        s = lead if q == m else lq_sum(model, q, radius)
        truncated = truncated or not s.converged
        w = math.factorial(q) * c * c
        per_q[q] = w * (s.total if s.converged else s.signed_partial)
        per_q_abs[q] = w * s.partial
        tail_est += w * s.tail_estimate
    return LimitConstant(sum(per_q.values()), sum(per_q_abs.values()), per_q, per_q_abs, truncated, tail_est)
