"""Stationary covariance models on Z^d and lattice Green functions."""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import integrate, special

from .errors import EmbeddingError, GreenMismatchError, SingularityError

KINDS = ("delta", "finite_support", "power_law", "gff_green")
EMBEDDING_TOL = 1e-9
DOUBLING_TOL = 1e-8
SUMMABLE_SHELL_SLOPE = -1.5


def _as_lattice(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    if u.ndim == 0:
        u = u.reshape(1)
    if u.shape[-1] != d:
        raise ValueError(f"lattice vectors must have last axis {d}, got shape {u.shape}")
    return u


@dataclass(frozen=True)
class CovarianceModel:
    """A stationary covariance ``rho(u) = E[X_o X_u]`` on ``Z^d``.

    Use the classmethod constructors rather than the raw initialiser.
    ``table`` holds ``(u, rho(u))`` pairs for finite-support models and is
    closed under ``u -> -u``.
    """

    d: int
    kind: str
    variance: float = 1.0
    amplitude: float = 0.0
    exponent: float = 0.0
    table: tuple = ()
    name: str = ""
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "gff_green" and self.d < 3:
            raise ValueError("the lattice GFF needs d >= 3")
        if self.kind == "finite_support":
            r = self.support_radius
            dense = np.zeros((2 * r + 1,) * self.d)
            for u, v in self.table:
                dense[tuple(np.asarray(u) + r)] = v
            object.__setattr__(self, "_dense", dense)
        if not self.variance > 0:
            raise ValueError("rho(0) must be positive")

    # constructors -------------------------------------------------------
    @classmethod
    def delta(cls, d: int, variance: float = 1.0) -> "CovarianceModel":
        return cls(d, "delta", variance=float(variance), name="delta")

    @classmethod
    def finite_support(cls, d: int, table, name: str = "finite_support") -> "CovarianceModel":
        """``table`` is a mapping ``u -> rho(u)`` or rows ``[u_1, .., u_d, rho]``.

        Missing mirror entries ``-u`` are filled in; conflicting ones raise.
        """
        if isinstance(table, Mapping):
            items = [(tuple(int(c) for c in np.atleast_1d(u)), float(v)) for u, v in table.items()]
        else:
            items = [(tuple(int(c) for c in row[:d]), float(row[d])) for row in table]
        entries: dict[tuple, float] = {}
        for u, v in items:
            if len(u) != d:
                raise ValueError(f"lag {u} is not {d}-dimensional")
            for key in (u, tuple(-c for c in u)):
                if key in entries and not math.isclose(entries[key], v, rel_tol=0, abs_tol=1e-15):
                    raise ValueError(f"asymmetric table: rho{u} != rho{tuple(-c for c in u)}")
                entries[key] = v
        origin = (0,) * d
        if origin not in entries:
            raise ValueError("finite-support table must include rho(0)")
        var = entries[origin]
        if not var > 0:
            raise ValueError("rho(0) must be positive")
        for u, v in entries.items():
            if abs(v) > var * (1 + 1e-12):
                raise ValueError(f"|rho{u}| = {abs(v)} exceeds rho(0) = {var}")
        table_t = tuple(sorted((u, v) for u, v in entries.items() if v != 0.0 or u == origin))
        return cls(d, "finite_support", variance=var, table=table_t, name=name)

    @classmethod
    def nearest_neighbour(cls, d: int, c: float, variance: float = 1.0) -> "CovarianceModel":
        table = {(0,) * d: variance}
        for a in range(d):
            e = [0] * d
            e[a] = 1
            table[tuple(e)] = c
        return cls.finite_support(d, table, name=f"nn({c:g})")

    @classmethod
    def separable_tent(cls, d: int, width: int) -> "CovarianceModel":
        """``prod_i (1 - |u_i| / width)_+``; positive definite as a product of Fejer kernels."""
        table = {}
        for u in itertools.product(range(-width + 1, width), repeat=d):
            table[u] = math.prod(1.0 - abs(c) / width for c in u)
        return cls.finite_support(d, table, name=f"tent({width})")

    @classmethod
    def power_law(cls, d: int, amplitude: float, exponent: float, variance: float = 1.0) -> "CovarianceModel":
        """``rho(u) = amplitude (1 + |u|_2)^(-exponent)`` for ``u != 0``, ``rho(0) = variance``."""
        if abs(amplitude) * 2.0 ** (-exponent) > variance:
            raise ValueError("power-law amplitude violates |rho(u)| <= rho(0)")
        return cls(d, "power_law", variance=float(variance), amplitude=float(amplitude),
                   exponent=float(exponent), name=f"power_law({amplitude:g},{exponent:g})")

    @classmethod
    def gff(cls, d: int) -> "CovarianceModel":
        return cls(d, "gff_green", variance=discrete_green(d, (0,) * d), name="gff")

    # evaluation ---------------------------------------------------------
    @property
    def support_radius(self) -> int | None:
        """Largest ``|u|_inf`` with ``rho(u) != 0``; ``None`` for infinite support."""
        if self.kind == "delta":
            return 0
        if self.kind == "finite_support":
            return max(max(abs(c) for c in u) for u, _ in self.table)
        return None

    def rho(self, u) -> np.ndarray:
        """Covariance at lattice vector(s) ``u`` (last axis of length ``d``)."""
        u = _as_lattice(u, self.d)
        if self.kind == "delta":
            return np.where(np.all(u == 0, axis=-1), self.variance, 0.0)
        if self.kind == "finite_support":
            r = self.support_radius
            inside = np.all(np.abs(u) <= r, axis=-1)
            idx = np.clip(u + r, 0, 2 * r)
            vals = self._dense[tuple(np.moveaxis(idx, -1, 0))]
            return np.where(inside, vals, 0.0)
        if self.kind == "power_law":
            norm = np.sqrt(np.sum(u.astype(float) ** 2, axis=-1))
            return np.where(norm == 0, self.variance, self.amplitude * (1.0 + norm) ** (-self.exponent))
        return green_values(self.d, u)

    def rho_grid(self, radius: int) -> np.ndarray:
        """Dense array of ``rho`` on ``[-radius, radius]^d`` (index ``u + radius``)."""
        axes = [np.arange(-radius, radius + 1)] * self.d
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return self.rho(grid)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "delta":
            out["variance"] = self.variance
        elif self.kind == "finite_support":
            out["table"] = [list(u) + [v] for u, v in self.table]
        elif self.kind == "power_law":
            out.update(amplitude=self.amplitude, exponent=self.exponent, variance=self.variance)
        return out

    @classmethod
    def from_dict(cls, spec: Mapping) -> "CovarianceModel":
        kind = spec["kind"]
        d = int(spec["d"])
        if kind == "delta":
            return cls.delta(d, spec.get("variance", 1.0))
        if kind == "finite_support":
            return cls.finite_support(d, spec["table"])
        if kind == "nearest_neighbour":
            return cls.nearest_neighbour(d, spec["c"], spec.get("variance", 1.0))
        if kind == "tent":
            return cls.separable_tent(d, int(spec["width"]))
        if kind == "power_law":
            return cls.power_law(d, spec["amplitude"], spec["exponent"], spec.get("variance", 1.0))
        if kind in ("gff_green", "gff"):
            return cls.gff(d)
        raise ValueError(f"unknown covariance kind {kind!r}")


def rho_eval(model: CovarianceModel, u) -> float:
    return float(model.rho(np.asarray(u).reshape(1, model.d))[0])


# lattice sums -------------------------------------------------------------

@dataclass
class LqSum:
    partial: float
    signed_partial: float
    converged: bool
    radius: int
    tail_estimate: float = 0.0
    shell_slope: float = float("nan")
    signed_tail: float = 0.0

    @property
    def total(self) -> float:
        """Best estimate of the full signed sum (partial plus estimated tail)."""
        return self.signed_partial + self.signed_tail


def _cube_sums_power_law(model: CovarianceModel, q: int, radii: Iterable[int]):
    """``sum_{0 < |u|_inf <= R} f(|u|_2^2)`` for each R via convolved square histograms."""
    out_abs, out_signed = [], []
    for R in radii:
        one = np.zeros(R * R + 1)
        np.add.at(one, np.arange(-R, R + 1) ** 2, 1.0)
        counts = np.array([1.0])
        for _ in range(model.d):
            counts = np.convolve(counts, one)
        s = np.arange(counts.size, dtype=float)
        vals = model.amplitude * (1.0 + np.sqrt(s)) ** (-model.exponent)
        counts[0] = 0.0
        out_abs.append(float(counts @ np.abs(vals) ** q))
        out_signed.append(float(counts @ vals**q))
    return np.array(out_abs), np.array(out_signed)


def _symmetry_classes(d: int, R: int):
    """Sorted nonnegative representatives with ``|u|_inf <= R`` and their orbit sizes."""
    reps, mult = [], []
    for t in itertools.combinations_with_replacement(range(R + 1), d):
        nz = sum(1 for c in t if c)
        perms = math.factorial(d)
        for v in set(t):
            perms //= math.factorial(t.count(v))
        reps.append(t)
        mult.append(perms * 2**nz)
    return np.array(reps, dtype=np.int64), np.array(mult, dtype=float)


def _shell_sums(model: CovarianceModel, q: int, R: int):
    """Per-shell sums ``sum_{|u|_inf = s}`` for ``s = 0..R`` (absolute and signed)."""
    abs_sh = np.zeros(R + 1)
    sgn_sh = np.zeros(R + 1)
    abs_sh[0] = abs(model.variance) ** q
    sgn_sh[0] = model.variance**q
    if model.kind == "delta":
        return abs_sh, sgn_sh
    if model.kind == "finite_support":
        for u, v in model.table:
            s = max(abs(c) for c in u)
            if 0 < s <= R:
                abs_sh[s] += abs(v) ** q
                sgn_sh[s] += v**q
        return abs_sh, sgn_sh
    if model.kind == "power_law":
        ca, cs = _cube_sums_power_law(model, q, range(1, R + 1))
        abs_sh[1:] = np.diff(np.concatenate([[0.0], ca]))
        sgn_sh[1:] = np.diff(np.concatenate([[0.0], cs]))
        return abs_sh, sgn_sh
    reps, mult = _symmetry_classes(model.d, R)
    vals = model.rho(reps)
    shell = reps.max(axis=1)
    nz = shell > 0
    np.add.at(abs_sh, shell[nz], mult[nz] * np.abs(vals[nz]) ** q)
    np.add.at(sgn_sh, shell[nz], mult[nz] * vals[nz] ** q)
    return abs_sh, sgn_sh


def lq_sum(model: CovarianceModel, q: int, radius: int = 16) -> LqSum:
    """Truncated ``sum_{|u|_inf <= radius} |rho(u)|^q`` with a convergence diagnostic.

    Converged when doubling the radius moves the absolute sum by less than
    1e-8 relative, or when the shell sums over ``(radius, 2 radius]`` decay
    faster than ``s^-1.5`` (log-log least squares), in which case the
    integral-test tail beyond ``2 radius`` is reported.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    if q < 1:
        raise ValueError("q must be at least 1")
    abs_sh, sgn_sh = _shell_sums(model, q, 2 * radius)
    partial = float(abs_sh[: radius + 1].sum())
    signed = float(sgn_sh[: radius + 1].sum())
    doubled = float(abs_sh.sum())
    change = abs(doubled - partial)
    signed_change = float(sgn_sh[radius + 1:].sum())
    if change <= DOUBLING_TOL * abs(doubled):
        return LqSum(partial, signed, True, radius, change, signed_tail=signed_change)

    s = np.arange(radius + 1, 2 * radius + 1, dtype=float)
    tail = abs_sh[radius + 1:]
    ok = tail > 0
    slope = float("nan")
    if ok.sum() >= 3:
        slope = float(np.polyfit(np.log(s[ok]), np.log(tail[ok]), 1)[0])
    if np.isfinite(slope) and slope < SUMMABLE_SHELL_SLOPE:
        factor = s[-1] / (-slope - 1.0)
        return LqSum(partial, signed, True, radius, change + tail[-1] * factor, slope,
                     signed_change + sgn_sh[-1] * factor)
    return LqSum(partial, signed, False, radius, float("inf"), slope)


# Green functions -----------------------------------------------------------

_GREEN_CACHE: dict[tuple, float] = {}
_GREEN_LOCK = threading.Lock()
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _bessel_series(nu: np.ndarray, order: int = 4) -> np.ndarray:
    """Coefficients ``a_k`` of ``e^-z I_nu(z) sqrt(2 pi z) ~ sum_k a_k z^-k``."""
    mu = 4.0 * nu.astype(float) ** 2
    coef = np.ones(nu.shape + (order + 1,))
    term = np.ones(nu.shape)
    for k in range(1, order + 1):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0)
        coef[..., k] = term
    return coef


def _green_batch(d: int, reps: np.ndarray) -> np.ndarray:
    """``G(o, u) = int_0^inf prod_j e^{-2t} I_{u_j}(2t) dt`` for each row of ``reps``.

    The theta-integrals of the lattice Fourier representation are done in
    closed form (modified Bessel functions); the remaining time integral uses
    Gauss-Legendre on dyadic panels up to ``T`` plus the large-``t``
    asymptotic series beyond it.
    """
    reps = np.abs(np.asarray(reps, dtype=np.int64))
    n = reps.shape[0]
    if n == 0:
        return np.zeros(0)
    umax = int(reps.max()) if reps.size else 0
    T = float(2 ** math.ceil(math.log2(max(4096.0, 400.0 * umax * umax))))
    edges = np.concatenate([[0.0], 2.0 ** np.arange(-6, int(math.log2(T)) + 1)])
    total = np.zeros(n)
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (b - a) * _GL_NODES + 0.5 * (b + a)
        w = 0.5 * (b - a) * _GL_WEIGHTS
        vals = np.ones((n, t.size))
        for j in range(d):
            vals *= special.ive(reps[:, j][:, None].astype(float), 2.0 * t[None, :])
        total += vals @ w
    # tail: prod_j (4 pi t)^{-1/2} sum_k a_k (2t)^{-k}
    order = 4
    series = np.zeros((n, order + 1))
    series[:, 0] = 1.0
    for j in range(d):
        cj = _bessel_series(reps[:, j], order)
        new = np.zeros_like(series)
        for k in range(order + 1):
            for m in range(order + 1 - k):
                new[:, k + m] += series[:, k] * cj[:, m]
        series = new
    tail = np.zeros(n)
    for k in range(order + 1):
        p = d / 2.0 + k
        tail += series[:, k] * 2.0 ** (-k) * T ** (1.0 - p) / (p - 1.0)
    return total + (4.0 * math.pi) ** (-d / 2.0) * tail


def _canonical(u) -> tuple:
    return tuple(sorted(abs(int(c)) for c in u))


def green_values(d: int, u) -> np.ndarray:
    """Vectorised, cached ``G(o, u)`` for lattice vectors ``u`` (last axis ``d``)."""
    if d < 3:
        raise ValueError("the lattice Green function on Z^d is finite only for d >= 3")
    u = _as_lattice(u, d)
    flat = np.sort(np.abs(u.reshape(-1, d)), axis=1)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    keys = [(d,) + tuple(int(c) for c in row) for row in uniq]
    with _GREEN_LOCK:
        missing = [i for i, k in enumerate(keys) if k not in _GREEN_CACHE]
    if missing:
        vals = _green_batch(d, uniq[missing])
        with _GREEN_LOCK:
            for i, v in zip(missing, vals):
                _GREEN_CACHE.setdefault(keys[i], float(v))
    with _GREEN_LOCK:
        table = np.array([_GREEN_CACHE[k] for k in keys])
    return table[inverse].reshape(u.shape[:-1])


def green_quad(d: int, u, tol: float = 1e-12) -> float:
    """Adaptive-quadrature evaluation of the same time integral (slow, used for checks)."""
    u = [abs(int(c)) for c in u]

    def integrand(t):
        return math.prod(special.ive(c, 2.0 * t) for c in u)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=1000)
    return val


def green_random_walk(d: int, targets, n_walks: int = 20000, n_steps: int = 2000, seed: int = 0):
    """Occupation-time Monte Carlo estimate of ``G(o, u)`` for each target.

    ``G(o, u) = E[#visits of simple random walk from o to u] / (2d)``. Visits
    after ``n_steps`` are added from the local central limit theorem.
    Returns ``(estimates, standard_errors)``.
    """
    targets = _as_lattice(targets, d).reshape(-1, d)
    R = int(np.abs(targets).max()) if targets.size else 0
    side = 2 * R + 1
    lookup = -np.ones((side,) * d, dtype=np.int64)
    for i, t in enumerate(targets):
        lookup[tuple(t + R)] = i
    k = len(targets)
    counts = np.zeros(n_walks * k, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox(seed))
    pos = np.zeros((n_walks, d), dtype=np.int64)
    walk_ids = np.arange(n_walks)

    def tally():
        inside = np.all(np.abs(pos) <= R, axis=1)
        idx = lookup[tuple((pos[inside] + R).T)]
        hit = idx >= 0
        np.add.at(counts, walk_ids[inside][hit] * k + idx[hit], 1)

    tally()
    for _ in range(n_steps):
        axis = rng.integers(0, d, size=n_walks)
        step = rng.integers(0, 2, size=n_walks) * 2 - 1
        pos[walk_ids, axis] += step
        tally()
    visits = counts.reshape(n_walks, k).astype(float)
    mean = visits.mean(axis=0)
    se = visits.std(axis=0, ddof=1) / math.sqrt(n_walks)
    tails = np.empty(k)
    for i, t in enumerate(targets):
        r2 = float(np.sum(t.astype(float) ** 2))
        f = lambda s: (d / (2 * math.pi * s)) ** (d / 2) * math.exp(-d * r2 / (2 * s))
        tails[i] = integrate.quad(f, n_steps + 0.5, np.inf, epsabs=1e-12)[0]
    return (mean + tails) / (2 * d), se / (2 * d)


def discrete_green(d: int, u, tol: float = 1e-10, cross_check: bool = False,
                   n_walks: int = 20000, n_steps: int = 2000, seed: int = 0) -> float:
    """Green function of the lattice Laplacian, ``(-Delta) G = delta_o`` on ``Z^d``.

    With ``cross_check`` the value is compared with the random-walk estimate
    and :class:`GreenMismatchError` is raised beyond three standard errors.
    """
    if d < 3:
        raise ValueError("the lattice Green function on Z^d is finite only for d >= 3")
    u = _as_lattice(u, d).reshape(d)
    val = float(green_values(d, u.reshape(1, d))[0])
    if cross_check:
        est, se = green_random_walk(d, u.reshape(1, d), n_walks, n_steps, seed)
        if abs(est[0] - val) > 3.0 * se[0] + tol:
            raise GreenMismatchError(
                f"G(o,{tuple(u)}): quadrature {val:.6g} vs random walk {est[0]:.6g} +- {se[0]:.2g}")
    return val


@dataclass
class GreenFunction:
    d: int
    radius: int
    values: np.ndarray  # G(o, u) on [-radius, radius]^d, index u + radius
    method: str = "fourier_integral"

    @property
    def diagonal(self) -> float:
        return float(self.values[(self.radius,) * self.d])

    def __call__(self, u) -> np.ndarray:
        u = _as_lattice(u, self.d)
        return self.values[tuple(np.moveaxis(u + self.radius, -1, 0))]

    def laplacian_residual(self) -> np.ndarray:
        """``(-Delta G)(u) - delta_o(u)`` on the interior of the cached cube."""
        g = self.values
        inner = (slice(1, -1),) * self.d
        lap = 2 * self.d * g[inner]
        for a in range(self.d):
            lap = lap - np.roll(g, 1, axis=a)[inner] - np.roll(g, -1, axis=a)[inner]
        lap[(self.radius - 1,) * self.d] -= 1.0
        return lap


def green_function(d: int, radius: int) -> GreenFunction:
    """Cache ``G(o, u)`` on the cube ``|u|_inf <= radius``."""
    axes = [np.arange(-radius, radius + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return GreenFunction(d, radius, green_values(d, grid))


def gradient_covariance(d: int, axis: int, radius: int) -> CovarianceModel:
    """Covariance of ``X_{j+e} - X_j`` for the infinite-volume GFF, truncated at ``radius``.

    ``rho(u) = 2 G(u) - G(u + e) - G(u - e)``, decaying like ``|u|^-d``.
    """
    e = np.zeros(d, dtype=np.int64)
    e[axis] = 1
    axes = [np.arange(-radius, radius + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = 2 * green_values(d, grid) - green_values(d, grid + e) - green_values(d, grid - e)
    table = {tuple(int(c) for c in u): float(v) for u, v in zip(grid.reshape(-1, d), vals.reshape(-1))}
    return CovarianceModel.finite_support(d, table, name=f"gff_gradient(axis={axis},r={radius})")


def continuous_green(d: int, x, y) -> float:
    """Whole-space Green function ``c_d |x - y|^(2-d)``, ``c_d = Gamma(d/2 - 1) / (4 pi^(d/2))``."""
    if d < 3:
        raise ValueError("continuous_green is defined here for d >= 3")
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if r == 0.0:
        raise SingularityError("continuous Green function is singular at x = y")
    return green_constant(d) * r ** (2 - d)


def green_constant(d: int) -> float:
    return math.gamma(d / 2 - 1) / (4 * math.pi ** (d / 2))


# circulant embedding -------------------------------------------------------

def periodized_covariance(model: CovarianceModel, M: int) -> np.ndarray:
    """Covariance on the torus ``(Z/MZ)^d``.

    Finite-support models are summed over all periodic images; infinite
    support is truncated at the minimum image.
    """
    d = model.d
    if model.kind == "delta":
        c = np.zeros((M,) * d)
        c[(0,) * d] = model.variance
        return c
    if model.kind == "finite_support":
        c = np.zeros((M,) * d)
        for u, v in model.table:
            c[tuple(np.mod(u, M))] += v
        return c
    axes = [((np.arange(M) + M // 2) % M) - M // 2] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return model.rho(grid)


def spectral_density(model: CovarianceModel, M: int) -> np.ndarray:
    """Eigenvalues of the circulant covariance on the ``M``-torus, shape ``(M,)*d``.

    Raises :class:`EmbeddingError` when the smallest value is below
    ``-1e-9 * max``; smaller negatives are roundoff and clamped to zero.
    """
    if M < 2 or M % 2:
        raise ValueError(f"torus size must be a positive even integer, got {M}")
    lam = np.fft.fftn(periodized_covariance(model, M)).real
    top = float(lam.max())
    low = float(lam.min())
    if low < -EMBEDDING_TOL * top:
        raise EmbeddingError(
            f"circulant embedding of {model.name or model.kind} on M={M} has spectral value {low:.3g} "
            f"(max {top:.3g}); increase the torus size M or check positive definiteness")
    return np.clip(lam, 0.0, None)
