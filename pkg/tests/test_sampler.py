import math

import numpy as np
import pytest

from bmlab.covariance import CovarianceModel, discrete_green, periodized_covariance
from bmlab.errors import EmbeddingError, WindowError
from bmlab.sampler import (FieldSample, Window, box_green_column, box_green_diagonal, box_green_solve,
                           default_torus_size, dump_sample, extract_window, extract_windows, gradient_field,
                           lattice_points, load_sample, sample_gff, sample_gff_batch, sample_stationary,
                           sample_stationary_batch)


def laplacian_zero_boundary(x):
    """``(-Delta x)`` on the interior array with zero boundary values."""
    out = 2 * x.ndim * x
    for a in range(x.ndim):
        pad = [(0, 0)] * x.ndim
        pad[a] = (1, 1)
        p = np.pad(x, pad)
        lo = [slice(None)] * x.ndim
        hi = [slice(None)] * x.ndim
        lo[a] = slice(0, -2)
        hi[a] = slice(2, None)
        out = out - p[tuple(lo)] - p[tuple(hi)]
    return out


# stationary ------------------------------------------------------------------------

def test_delta_field_variance():
    s = sample_stationary(CovarianceModel.delta(2), 1000, seed=1, replica_index=0)
    assert s.values.shape == (1000, 1000)
    assert abs(s.values.var() - 1.0) < 0.01


def test_lag_covariance_d2():
    m = CovarianceModel.finite_support(2, {(0, 0): 1.0, (1, 0): 0.3})
    vals = sample_stationary_batch(m, 64, 7, range(200))
    prod = (vals * np.roll(vals, -1, axis=1)).mean(axis=(1, 2))
    se = prod.std(ddof=1) / math.sqrt(len(prod))
    assert abs(prod.mean() - 0.3) < 3 * se
    # the orthogonal lag is uncorrelated
    orth = (vals * np.roll(vals, -1, axis=2)).mean(axis=(1, 2))
    assert abs(orth.mean()) < 4 * orth.std(ddof=1) / math.sqrt(len(orth))


def test_determinism():
    m = CovarianceModel.nearest_neighbour(2, 0.2)
    a = sample_stationary(m, 16, 99, 3).values
    b = sample_stationary(m, 16, 99, 3).values
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_stationary(m, 16, 99, 4).values)
    assert not np.array_equal(a, sample_stationary(m, 16, 98, 3).values)


def test_batch_matches_single():
    m = CovarianceModel.separable_tent(2, 3)
    batch = sample_stationary_batch(m, 12, 5, [4, 0, 9])
    for row, r in zip(batch, [4, 0, 9]):
        np.testing.assert_array_equal(row, sample_stationary(m, 12, 5, r).values)


def test_embedding_failure_propagates():
    with pytest.raises(EmbeddingError):
        sample_stationary(CovarianceModel.finite_support(1, {0: 1.0, 1: 0.6}), 8, 0, 0)


@pytest.mark.slow
def test_circulant_covariance_exact():
    m = CovarianceModel.finite_support(1, {0: 1.0, 1: 0.35, 2: -0.1, 3: 0.05})
    R, M = 50_000, 16
    vals = sample_stationary_batch(m, M, 2024, range(R))
    prods = vals[:, :, None] * vals[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(R)
    c = periodized_covariance(m, M)
    target = np.array([[c[(j - i) % M] for j in range(M)] for i in range(M)])
    assert np.all(np.abs(emp - target) < 4 * se)


def test_replica_independence():
    m = CovarianceModel.delta(2)
    a = sample_stationary(m, 128, 3, 0).values.ravel()
    b = sample_stationary(m, 128, 3, 1).values.ravel()
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / math.sqrt(a.size)
    vals = sample_stationary_batch(CovarianceModel.nearest_neighbour(1, 0.4), 8, 3, range(4000))
    x, y = vals[0::2, 0], vals[1::2, 0]
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(len(x))


def test_default_torus_size():
    assert default_torus_size(CovarianceModel.delta(2), 9) == 18
    assert default_torus_size(CovarianceModel.separable_tent(1, 12), 3) == 24  # support radius 11
    assert default_torus_size(CovarianceModel.power_law(3, 1.0, 1.0), 7) == 16


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        FieldSample(1, 4, np.array([0.0, np.nan, 0.0, 0.0]), "torus", 0, 0)


# GFF ----------------------------------------------------------------------------------

def test_gff_centre_variance_matches_eigen_sum():
    d, M, R = 3, 32, 500
    vals = sample_gff_batch(d, M, 11, range(R))
    c = (M // 2 - 1,) * d
    x2 = vals[(slice(None),) + c] ** 2
    exact = box_green_diagonal(d, M, c)
    assert abs(x2.mean() - exact) < 3 * x2.std(ddof=1) / math.sqrt(R)


def test_gff_eigen_sum_matches_direct_solve():
    c = (7, 7, 7)
    assert box_green_diagonal(3, 16, c) == pytest.approx(box_green_column(3, 16, c)[c], rel=1e-12)


def test_gff_centre_variance_approaches_infinite_volume():
    g = discrete_green(3, (0, 0, 0))
    gaps = [g - box_green_diagonal(3, M, (M // 2 - 1,) * 3) for M in (16, 32, 64)]
    assert all(x > 0 for x in gaps)
    assert gaps[0] > gaps[1] > gaps[2]
    # the deficit is a harmonic correction of order 1/M
    assert gaps[1] / gaps[2] == pytest.approx(2.0, rel=0.1)


def test_gff_mean_zero():
    vals = sample_gff_batch(3, 16, 4, range(400))
    centre = vals[:, 7, 7, 7]
    assert abs(centre.mean()) < 3 * centre.std(ddof=1) / math.sqrt(len(centre))


def test_gff_green_identity():
    # Cov(X, -Delta X) is the identity, so E[X_j (-Delta X)_j] = 1 at every interior node
    R = 600
    vals = sample_gff_batch(3, 16, 8, range(R))
    j = (5, 7, 9)
    prod = np.array([v[j] * laplacian_zero_boundary(v)[j] for v in vals])
    assert abs(prod.mean() - 1.0) < 3 * prod.std(ddof=1) / math.sqrt(R)


def test_box_green_solve_inverts_laplacian():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(9, 9, 9))
    np.testing.assert_allclose(laplacian_zero_boundary(box_green_solve(f)), f, atol=1e-10)


def test_gff_determinism_and_shape():
    a = sample_gff(3, 10, 1, 2)
    assert a.values.shape == (9, 9, 9) and a.kind == "zero_boundary_box"
    np.testing.assert_array_equal(a.values, sample_gff(3, 10, 1, 2).values)


def test_gff_preconditions():
    with pytest.raises(ValueError):
        sample_gff(2, 16, 0, 0)
    with pytest.raises(ValueError):
        sample_gff(3, 6, 0, 0)


# gradients ------------------------------------------------------------------------------

def test_gradient_of_constant_is_zero():
    s = FieldSample(2, 8, np.full((8, 8), 3.5), "torus", 0, 0)
    assert np.all(gradient_field(s, 1).values == 0)


def test_gradient_linear():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 8, 8, 8))
    sa, sb = (FieldSample(3, 9, v, "zero_boundary_box", 0, 0) for v in (a, b))
    sc = FieldSample(3, 9, 2 * a - 3 * b, "zero_boundary_box", 0, 0)
    np.testing.assert_allclose(gradient_field(sc, 2).values,
                               2 * gradient_field(sa, 2).values - 3 * gradient_field(sb, 2).values)


def test_gradient_forward_difference():
    s = FieldSample(1, 4, np.array([1.0, 4.0, 9.0, 16.0]), "torus", 0, 0)
    np.testing.assert_array_equal(gradient_field(s, 0).values, [3.0, 5.0, 7.0, -15.0])
    with pytest.raises(ValueError):
        gradient_field(s, 1)


def test_gff_gradient_variance():
    d, M, R = 3, 64, 300
    c = (M // 2 - 1,) * d
    e = (c[0] + 1,) + c[1:]
    col = box_green_column(d, M, c)
    exact = col[c] + box_green_diagonal(d, M, e) - 2 * col[e]
    g = np.array([gradient_field(sample_gff(d, M, 21, r), 0).values[c] for r in range(R)])
    assert abs((g**2).mean() - exact) < 3 * (g**2).std(ddof=1) / math.sqrt(R)


# windows ----------------------------------------------------------------------------------

def test_window_sizes():
    s1 = sample_stationary(CovarianceModel.delta(1), 10, 0, 0)
    assert extract_window(s1, Window(5)).size == 5
    s2 = sample_stationary(CovarianceModel.delta(2), 10, 0, 0)
    assert extract_window(s2, Window(4)).shape == (5, 5)
    assert Window(4).size(2) == 25 and Window(5).size(1) == 5


def test_window_contents_centred():
    s = FieldSample(1, 8, np.arange(8.0), "torus", 0, 0)
    np.testing.assert_array_equal(extract_window(s, Window(3)), [3.0, 4.0, 5.0])


def test_window_without_margin_fails():
    s = sample_stationary(CovarianceModel.delta(1), 8, 0, 0)
    with pytest.raises(WindowError):
        extract_window(s, Window(7))
    g = sample_gff(3, 16, 0, 0)
    extract_window(g, Window(8))
    with pytest.raises(WindowError):
        extract_window(g, Window(10))
    with pytest.raises(WindowError):
        extract_window(g, Window(3, center=(1, 7, 7)))


def test_batched_windows():
    m = CovarianceModel.delta(2)
    vals = sample_stationary_batch(m, 12, 0, [0, 1])
    w = extract_windows(vals, "torus", 2, 12, Window(5))
    np.testing.assert_array_equal(w[1], extract_window(sample_stationary(m, 12, 0, 1), Window(5)))


def test_lattice_points_order():
    pts = lattice_points(3, 2)
    assert pts.shape == (9, 2)
    assert pts[0].tolist() == [-1, -1] and pts[1].tolist() == [-1, 0]


# dumps ----------------------------------------------------------------------------------------

def test_dump_round_trip(tmp_path):
    for s in (sample_stationary(CovarianceModel.nearest_neighbour(2, 0.1), 8, 3, 1), sample_gff(3, 8, 3, 1)):
        p = tmp_path / f"{s.kind}.bin"
        dump_sample(s, p)
        back = load_sample(p)
        assert back.values.tobytes() == s.values.tobytes()
        assert (back.d, back.M, back.kind, back.seed, back.replica_index) == (s.d, s.M, s.kind, s.seed, 1)
        raw = p.read_bytes()
        header, _, body = raw.partition(b"\n")
        assert len(body) == 8 * s.values.size
        assert np.frombuffer(body, "<f8")[0] == s.values.ravel()[0]
