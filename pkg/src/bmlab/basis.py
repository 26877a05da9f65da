"""Dirichlet Laplacian eigenbasis on D = [-1/2, 1/2]^d and negative Sobolev norms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .hermite import HermiteExpansion


@dataclass(frozen=True)
class EigenMode:
    k: tuple

    def __post_init__(self):
        if len(self.k) == 0 or any(int(v) < 1 for v in self.k):
            raise ValueError(f"eigenmode indices must all be >= 1, got {self.k}")

    @property
    def d(self) -> int:
        return len(self.k)

    @property
    def eigenvalue(self) -> float:
        return math.pi**2 * sum(v * v for v in self.k)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.ones(x.shape[:-1])
        for a, ka in enumerate(self.k):
            out = out * math.sqrt(2.0) * np.sin(ka * math.pi * (x[..., a] + 0.5))
        return out


def eigenmode(k) -> EigenMode:
    return EigenMode(tuple(int(v) for v in np.atleast_1d(k)))


def mode_indices(d: int, K_max: int) -> np.ndarray:
    """All ``k in {1..K_max}^d`` in C order, shape ``(K_max^d, d)``."""
    axes = [np.arange(1, K_max + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def eigenvalues(d: int, K_max: int) -> np.ndarray:
    """``pi^2 |k|^2`` on the cube of modes, shape ``(K_max,)*d``."""
    k2 = np.arange(1, K_max + 1, dtype=float) ** 2
    lam = np.zeros((K_max,) * d)
    for a in range(d):
        shape = [1] * d
        shape[a] = K_max
        lam = lam + k2.reshape(shape)
    return math.pi**2 * lam


def axis_table(K_max: int, points) -> np.ndarray:
    """``sqrt(2) sin(k pi (x + 1/2))`` for ``k = 1..K_max`` at 1-d ``points``."""
    k = np.arange(1, K_max + 1)[:, None]
    return math.sqrt(2.0) * np.sin(k * math.pi * (np.asarray(points, dtype=float)[None, :] + 0.5))


def _separable_transform(values: np.ndarray, table: np.ndarray, d: int) -> np.ndarray:
    """Contract each of the last ``d`` axes of ``values`` with ``table`` (K x side)."""
    out = values
    for a in range(d):
        ax = out.ndim - d + a
        out = np.moveaxis(np.tensordot(out, table, axes=([ax], [1])), -1, ax)
    return out


@dataclass
class SobolevCoefficients:
    alpha: float
    K_max: int
    coeffs: np.ndarray  # shape (K_max,)*d
    N: int = 0
    sup_abs: float = 0.0  # sup |H - h0| over the window, for the tail bound

    @property
    def d(self) -> int:
        return self.coeffs.ndim


def project(window, e: HermiteExpansion, N: int, k) -> float:
    """``N^-d/2 sum_j (H(X_j) - h0) phi_k(j/N)``."""
    k = tuple(int(v) for v in np.atleast_1d(k))
    d = len(k)
    side = 2 * (N // 2) + 1
    window = np.asarray(window, dtype=float)
    if window.size != side**d:
        raise ValueError(f"window has {window.size} values, B_N for N={N}, d={d} has {side ** d}")
    y = e(window.reshape((side,) * d), centered=True)
    x = np.arange(-(N // 2), N // 2 + 1) / N
    phi = np.ones((side,) * d)
    for a, ka in enumerate(k):
        shape = [1] * d
        shape[a] = side
        phi = phi * (math.sqrt(2.0) * np.sin(ka * math.pi * (x + 0.5))).reshape(shape)
    return float(N ** (-d / 2) * np.sum(y * phi))


def project_all(windows, e: HermiteExpansion | None, N: int, d: int, K_max: int) -> np.ndarray:
    """Coefficients on every mode in ``{1..K_max}^d`` for a batch of windows.

    ``windows`` has shape ``(R,) + (side,)*d``; with ``e=None`` the windows
    are taken as already-centred observable values. Returns ``(R,) + (K_max,)*d``.
    """
    side = 2 * (N // 2) + 1
    windows = np.asarray(windows, dtype=float).reshape((-1,) + (side,) * d)
    y = windows if e is None else e(windows, centered=True)
    x = np.arange(-(N // 2), N // 2 + 1) / N
    return N ** (-d / 2) * _separable_transform(y, axis_table(K_max, x), d)


def sobolev_coefficients(window, e: HermiteExpansion, N: int, d: int, alpha: float, K_max: int) -> SobolevCoefficients:
    side = 2 * (N // 2) + 1
    win = np.asarray(window, dtype=float).reshape((side,) * d)
    coeffs = project_all(win[None], e, N, d, K_max)[0]
    sup_abs = float(np.max(np.abs(e(win, centered=True))))
    return SobolevCoefficients(alpha, K_max, coeffs, N, sup_abs)


def mode_tail_sum(alpha: float, d: int, K_max: int) -> float:
    """Upper bound on ``sum_{|k|_inf > K_max} (1 + lambda_k)^-alpha`` (integral test).

    ``d pi^(-2 alpha) K^(d - 2 alpha) / (2 alpha - d)``; infinite for ``alpha <= d/2``.
    """
    if alpha <= d / 2:
        return math.inf
    return d * math.pi ** (-2 * alpha) * K_max ** (d - 2 * alpha) / (2 * alpha - d)


@dataclass
class SobolevNorm:
    value: float
    tail_bound: float


def _check_alpha(alpha: float, d: int):
    if alpha <= d / 2:
        warnings.warn(f"alpha={alpha} <= d/2={d / 2}: the H^-alpha norm of white noise is not finite",
                      RuntimeWarning, stacklevel=3)


def sobolev_norm_sq(c: SobolevCoefficients) -> SobolevNorm:
    """Truncated ``sum_k (1 + lambda_k)^-alpha |<Phi_N, phi_k>|^2`` with an analytic tail bound."""
    d = c.d
    _check_alpha(c.alpha, d)
    w = (1.0 + eigenvalues(d, c.K_max)) ** (-c.alpha)
    value = float(np.sum(w * c.coeffs**2))
    if c.N < 1:
        return SobolevNorm(value, math.inf)  # no window recorded, no coefficient bound
    side = 2 * (c.N // 2) + 1
    coeff_bound = c.N ** (-d / 2) * side**d * c.sup_abs * math.sqrt(2.0) ** d
    if coeff_bound == 0.0:
        return SobolevNorm(value, 0.0)
    return SobolevNorm(value, coeff_bound**2 * mode_tail_sum(c.alpha, d, c.K_max))


def sobolev_norms(coeffs: np.ndarray, alpha: float) -> np.ndarray:
    """Truncated norms for a batch of coefficient cubes, shape ``(R,) + (K,)*d``."""
    d = coeffs.ndim - 1
    w = (1.0 + eigenvalues(d, coeffs.shape[1])) ** (-alpha)
    return np.sum((w * coeffs**2).reshape(coeffs.shape[0], -1), axis=1)


def sobolev_spectrum_rows(c: SobolevCoefficients):
    """Rows ``(k flattened, lambda_k, coefficient, weighted summand)``."""
    lam = eigenvalues(c.d, c.K_max)
    w = (1.0 + lam) ** (-c.alpha)
    for k in mode_indices(c.d, c.K_max):
        idx = tuple(k - 1)
        yield ("-".join(str(int(v)) for v in k), float(lam[idx]), float(c.coeffs[idx]),
               float(w[idx] * c.coeffs[idx] ** 2))


@dataclass
class KernelBound:
    value: float
    tail_bound: float

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.tail_bound)


def kernel_matrix(alpha: float, d: int, points: np.ndarray, K_max: int) -> np.ndarray:
    """``sum_{k <= K_max} (1 + lambda_k)^-alpha phi_k(x) phi_k(y)`` for all point pairs."""
    points = np.asarray(points, dtype=float).reshape(-1, d)
    w = (1.0 + eigenvalues(d, K_max)) ** (-alpha)
    tables = [axis_table(K_max, points[:, a]) for a in range(d)]  # each K x P
    # Phi[k1..kd, p] built axis by axis
    phi = tables[0]
    for a in range(1, d):
        phi = (phi[..., None, :] * tables[a].reshape((1,) * a + (K_max, -1)))
    phi = phi.reshape(-1, points.shape[0])
    return phi.T @ (w.reshape(-1, 1) * phi)


def kernel_grid(resolution: int, d: int) -> np.ndarray:
    """Cell-centred uniform grid of ``resolution^d`` points in ``D``."""
    x = (np.arange(resolution) + 0.5) / resolution - 0.5
    return np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)


def kernel_bound(alpha: float, resolution: int, K_max: int, d: int = 1) -> KernelBound:
    """Max over a grid of the truncated kernel, with the tail bound ``2^d * mode_tail_sum``."""
    _check_alpha(alpha, d)
    mat = kernel_matrix(alpha, d, kernel_grid(resolution, d), K_max)
    return KernelBound(float(mat.max()), 2.0**d * mode_tail_sum(alpha, d, K_max))
