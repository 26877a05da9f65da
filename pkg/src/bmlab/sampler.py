"""Gaussian field realisations on finite lattices.

Stationary fields live on the torus ``(Z/MZ)^d`` (circulant embedding); the
lattice GFF lives on the box ``{0..M}^d`` with zero boundary and is stored by
its interior ``{1..M-1}^d``. Randomness comes from a Philox counter-based
generator keyed by ``(seed, replica_index)``, so any replica can be
regenerated in isolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .covariance import CovarianceModel, spectral_density
from .errors import WindowError

SEED_MASK = (1 << 64) - 1


def replica_rng(seed: int, replica_index: int) -> np.random.Generator:
    """Independent stream for one replica: Philox keyed by ``(seed, replica_index)``."""
    key = ((int(replica_index) & SEED_MASK) << 64) | (int(seed) & SEED_MASK)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class FieldSample:
    d: int
    M: int
    values: np.ndarray
    kind: str  # "torus" | "zero_boundary_box"
    seed: int
    replica_index: int
    model_id: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field sample contains non-finite values")

    @property
    def meta(self) -> dict:
        return {"d": self.d, "M": self.M, "kind": self.kind, "seed": self.seed,
                "replica_index": self.replica_index, "model": self.model_id}

    @property
    def center(self) -> tuple:
        """Array index of the lattice point used as window centre by default."""
        if self.kind == "torus":
            return (self.M // 2,) * self.d
        return (self.M // 2 - 1,) * self.d


@dataclass(frozen=True)
class Window:
    """The cube ``B_N(i) = {j : |i - j|_inf <= N/2}`` placed at array index ``center``."""

    N: int
    center: tuple | None = None

    @property
    def half(self) -> int:
        return self.N // 2

    @property
    def side(self) -> int:
        return 2 * self.half + 1

    def size(self, d: int) -> int:
        return self.side**d


def lattice_points(N: int, d: int) -> np.ndarray:
    """Points of ``B_N`` in C order, shape ``(|B_N|, d)``."""
    h = N // 2
    axes = [np.arange(-h, h + 1)] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


# stationary fields -------------------------------------------------------------

def default_torus_size(model: CovarianceModel, N: int) -> int:
    """``max(2N, 2 r + 2)`` rounded up to even, ``r`` the support radius (``N`` if infinite)."""
    r = model.support_radius
    if r is None:
        r = N
    M = max(2 * N, 2 * r + 2)
    return M + (M % 2)


def _circulant_fields(sqrt_lam: np.ndarray, rngs) -> np.ndarray:
    d = sqrt_lam.ndim
    shape = sqrt_lam.shape
    z = np.empty((len(rngs),) + shape, dtype=complex)
    for i, rng in enumerate(rngs):
        z[i].real = rng.standard_normal(shape)
        z[i].imag = rng.standard_normal(shape)
    y = sfft.fftn(sqrt_lam * z, axes=tuple(range(1, d + 1)))
    return y.real


def sample_stationary(model: CovarianceModel, M: int, seed: int, replica_index: int) -> FieldSample:
    """One stationary field on the ``M``-torus by circulant embedding.

    With ``Z = A + iB`` (independent standard normal parts) the real part of
    ``FFT(sqrt(lam / M^d) Z)`` has the periodised covariance exactly.
    """
    lam = spectral_density(model, M)
    sqrt_lam = np.sqrt(lam / lam.size)
    vals = _circulant_fields(sqrt_lam, [replica_rng(seed, replica_index)])[0]
    return FieldSample(model.d, M, vals, "torus", seed, replica_index, model.name or model.kind)


def sample_stationary_batch(model: CovarianceModel, M: int, seed: int, replica_indices) -> np.ndarray:
    """Values of several replicas, shape ``(len(replica_indices),) + (M,)*d``.

    Row ``i`` equals ``sample_stationary(model, M, seed, replica_indices[i]).values``.
    """
    lam = spectral_density(model, M)
    sqrt_lam = np.sqrt(lam / lam.size)
    rngs = [replica_rng(seed, r) for r in replica_indices]
    return _circulant_fields(sqrt_lam, rngs)


# zero-boundary GFF --------------------------------------------------------------

def box_eigenvalues(d: int, M: int) -> np.ndarray:
    """``sum_i 4 sin^2(pi k_i / (2M))`` for ``k in {1..M-1}^d``."""
    k = np.arange(1, M)
    one = 4.0 * np.sin(np.pi * k / (2 * M)) ** 2
    lam = np.zeros((M - 1,) * d)
    for a in range(d):
        shape = [1] * d
        shape[a] = M - 1
        lam = lam + one.reshape(shape)
    return lam


def _check_gff(d: int, M: int):
    if d < 3:
        raise ValueError("the lattice GFF sampler needs d >= 3")
    if M < 8:
        raise ValueError("GFF box size M must be at least 8")


def sample_gff(d: int, M: int, seed: int, replica_index: int) -> FieldSample:
    """Zero-boundary discrete GFF on ``{0..M}^d``.

    ``X = sum_k Z_k psi_k / sqrt(lam_k)`` with the orthonormal sine basis
    ``psi_k``; the synthesis is a type-I discrete sine transform.
    """
    _check_gff(d, M)
    vals = sample_gff_batch(d, M, seed, [replica_index])[0]
    return FieldSample(d, M, vals, "zero_boundary_box", seed, replica_index, "gff")


def sample_gff_batch(d: int, M: int, seed: int, replica_indices, workers: int | None = None) -> np.ndarray:
    _check_gff(d, M)
    inv_sqrt = 1.0 / np.sqrt(box_eigenvalues(d, M))
    out = np.empty((len(replica_indices),) + inv_sqrt.shape)
    for i, r in enumerate(replica_indices):
        z = replica_rng(seed, r).standard_normal(inv_sqrt.shape)
        out[i] = sfft.dstn(z * inv_sqrt, type=1, norm="ortho", workers=workers)
    return out


def box_green_solve(rhs: np.ndarray) -> np.ndarray:
    """Apply ``(-Delta_box)^{-1}`` with zero boundary to an interior array."""
    d = rhs.ndim
    M = rhs.shape[0] + 1
    lam = box_eigenvalues(d, M)
    return sfft.idstn(sfft.dstn(rhs, type=1, norm="ortho") / lam, type=1, norm="ortho")


def box_green_column(d: int, M: int, site) -> np.ndarray:
    """``G_box(., site)`` over the interior; ``site`` is an array index."""
    rhs = np.zeros((M - 1,) * d)
    rhs[tuple(site)] = 1.0
    return box_green_solve(rhs)


def box_green_diagonal(d: int, M: int, site) -> float:
    """``sum_k psi_k(x)^2 / lam_k`` evaluated directly from the eigen-sum."""
    k = np.arange(1, M)
    lam = box_eigenvalues(d, M)
    psi2 = np.ones((M - 1,) * d)
    for a, x in enumerate(site):
        one = (2.0 / M) * np.sin(np.pi * k * (x + 1) / M) ** 2
        shape = [1] * d
        shape[a] = M - 1
        psi2 = psi2 * one.reshape(shape)
    return float(np.sum(psi2 / lam))


# derived fields and windows ------------------------------------------------------

def gradient_field(sample: FieldSample, axis: int) -> FieldSample:
    """Forward difference ``X_{j+e_axis} - X_j``.

    Periodic on the torus; in the box the zero boundary value closes the last
    slice, so the result keeps the sample's shape and coordinates.
    """
    if not 0 <= axis < sample.d:
        raise ValueError(f"axis {axis} out of range for d={sample.d}")
    grad = gradient_values(sample.values, axis, periodic=sample.kind == "torus")
    return FieldSample(sample.d, sample.M, grad, sample.kind, sample.seed, sample.replica_index,
                       f"grad{axis}({sample.model_id})")


def gradient_values(values: np.ndarray, axis: int, periodic: bool, batch: bool = False) -> np.ndarray:
    ax = axis + 1 if batch else axis
    if periodic:
        return np.roll(values, -1, axis=ax) - values
    shifted = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    src[ax] = slice(1, None)
    dst[ax] = slice(0, -1)
    shifted[tuple(dst)] = values[tuple(src)]
    return shifted - values


def window_slices(kind: str, d: int, M: int, window: Window, center=None):
    """Index arrays selecting ``B_N`` from a sample array, after margin checks."""
    h = window.half
    if center is None:
        center = window.center
    if center is None:
        center = (M // 2,) * d if kind == "torus" else (M // 2 - 1,) * d
    center = tuple(int(c) for c in center)
    if kind == "torus":
        buffer = math.ceil(window.N / 2)
        if window.side + buffer > M:
            raise WindowError(
                f"window N={window.N} needs a torus of size >= {window.side + buffer}, got M={M}")
        return [np.arange(c - h, c + h + 1) % M for c in center]
    margin = M // 4
    idx = []
    for c in center:
        lo, hi = c - h + 1, c + h + 1  # lattice coordinates
        if lo < margin or hi > M - margin:
            raise WindowError(
                f"window N={window.N} at index {c} leaves lattice range [{lo}, {hi}] "
                f"outside the central region [{margin}, {M - margin}] of the M={M} box")
        idx.append(np.arange(c - h, c + h + 1))
    return idx


def extract_window(sample: FieldSample, window: Window) -> np.ndarray:
    """Copy of the windowed values as a cube of side ``2 floor(N/2) + 1``."""
    idx = window_slices(sample.kind, sample.d, sample.M, window)
    return sample.values[np.ix_(*idx)].copy()


def extract_windows(values: np.ndarray, kind: str, d: int, M: int, window: Window) -> np.ndarray:
    """Batched :func:`extract_window` for arrays with a leading replica axis."""
    idx = window_slices(kind, d, M, window)
    return values[(slice(None),) + np.ix_(*idx)]


# raw dumps ---------------------------------------------------------------------------

def dump_sample(sample: FieldSample, path) -> None:
    """JSON header line, then little-endian float64 values in row-major order."""
    header = {"d": sample.d, "M": sample.M, "kind": sample.kind, "seed": sample.seed,
              "replica_index": sample.replica_index}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())


def load_sample(path) -> FieldSample:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    side = header["M"] if header["kind"] == "torus" else header["M"] - 1
    vals = data.reshape((side,) * header["d"]).copy()
    return FieldSample(header["d"], header["M"], vals, header["kind"], header["seed"], header["replica_index"])
