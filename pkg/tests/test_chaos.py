import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmlab.chaos import (Normalization, TestFunction, chaos_component, contraction_norm_sq, exact_covariance,
                         exact_variance, fourth_moment_gap, functional, functional_values, limit_variance)
from bmlab.covariance import CovarianceModel
from bmlab.errors import DivergenceError, FeasibilityError
from bmlab.hermite import eval_hermite, expand_polynomial, expand_power, from_hermite_coeffs
from bmlab.sampler import lattice_points, sample_stationary_batch

ONE1 = TestFunction.constant_one(1)
HALF = CovarianceModel.finite_support(1, {0: 1.0, 1: 0.5})


def double_loop_variance(q, c, model, f, N):
    pts = lattice_points(N, model.d)
    fv = f(pts / N)
    total = 0.0
    for a, j in enumerate(pts):
        for b, k in enumerate(pts):
            total += model.rho((j - k)[None])[0] ** q * fv[a] * fv[b]
    return math.factorial(q) * c * c * N ** (-model.d) * total


def quadruple_loop_contraction(q, r, c, model, f, N):
    pts = lattice_points(N, model.d)
    fv = f(pts / N)
    rho = lambda u: model.rho(np.asarray(u)[None])[0]
    total = 0.0
    for i1, i2, i3, i4 in itertools.product(range(len(pts)), repeat=4):
        j1, j2, j3, j4 = pts[i1], pts[i2], pts[i3], pts[i4]
        total += (fv[i1] * fv[i2] * fv[i3] * fv[i4] * rho(j1 - j2) ** r * rho(j3 - j4) ** r
                  * rho(j1 - j3) ** (q - r) * rho(j2 - j4) ** (q - r))
    return c**4 * N ** (-2 * model.d) * total


# test functions ------------------------------------------------------------------

def test_normalised_box_has_unit_l2_norm():
    f = TestFunction.box_indicator([-0.5, 0.0], [0.0, 0.25])
    assert f.l2_norm_sq() == pytest.approx(1.0)
    assert f.sup_bound == pytest.approx(8 ** 0.5)
    assert TestFunction.box_indicator([-0.5, 0.0], [0.0, 0.25], normalized=False).l2_norm_sq() == pytest.approx(1 / 8)


def test_inner_products_closed_form_vs_quadrature():
    fs = [TestFunction.constant_one(2), TestFunction.eigenfunction((1, 2)), TestFunction.eigenfunction((3, 1)),
          TestFunction.box_indicator([-0.3, -0.5], [0.2, 0.1])]
    for f, g in itertools.product(fs, repeat=2):
        cf = TestFunction.custom(2, f, f.sup_bound)
        if f.kind == "box_indicator" or g.kind == "box_indicator":
            continue  # discontinuous: quadrature is not accurate
        assert f.inner(g) == pytest.approx(cf.inner(g, nodes=80), abs=1e-10)


def test_box_on_lattice_counts_points():
    N = 9
    f = TestFunction.lattice_box(N, [-4, 1], [-1, 4], normalized=False)
    assert f.on_lattice(N).sum() == 16
    assert f.volume * N**2 == pytest.approx(16)


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction.box_indicator([0.1], [0.0])
    with pytest.raises(ValueError):
        TestFunction.box_indicator([-0.6], [0.0])
    with pytest.raises(ValueError):
        TestFunction.eigenfunction((0, 1))
    with pytest.raises(ValueError):
        TestFunction.custom(1, np.cos, math.inf)


def test_test_function_dict_round_trip():
    for f in (TestFunction.constant_one(2), TestFunction.eigenfunction((2, 1)),
              TestFunction.box_indicator([-0.5, -0.5], [0.0, 0.5], name="left")):
        assert TestFunction.from_dict(f.to_dict(), f.d) == f


# functional and components ----------------------------------------------------------

def test_functional_examples():
    assert functional(np.ones(5), from_hermite_coeffs({1: 1.0}), ONE1, 5).value == 1.0
    assert functional(np.zeros(5), expand_power(2), ONE1, 5).value == -1.0
    assert functional(np.zeros((7, 7)), expand_power(2), TestFunction.constant_one(2), 7).value == pytest.approx(-1.0, abs=1e-14)


def test_functional_against_direct_sum():
    rng = np.random.default_rng(0)
    N = 11
    x = rng.normal(size=N)
    f = TestFunction.eigenfunction((1,))
    got = functional(x, from_hermite_coeffs({2: 1.0}), f, N).value
    direct = sum((x[i] ** 2 - 1) * math.sqrt(2) * math.sin(math.pi * ((i - 5) / N + 0.5)) for i in range(N)) / N
    assert got == pytest.approx(direct, abs=1e-13)


def test_functional_normalisations():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(9, 9))
    f = TestFunction.constant_one(2)
    e = expand_power(3)
    raw = functional(x, e, f, 9).value
    assert functional(x, e, f, 9, "centered").value == pytest.approx(raw * 9)
    assert functional(x, e, f, 9, Normalization.CLT, C=15.0).value == pytest.approx(raw * 9 / math.sqrt(15))
    with pytest.raises(ValueError):
        functional(x, e, f, 9, "clt_scaled")
    with pytest.raises(ValueError):
        functional(x, e, f, 9, "clt_scaled", C=0.0)


def test_size_mismatch():
    with pytest.raises(ValueError):
        functional(np.ones(6), expand_power(2), ONE1, 5)
    with pytest.raises(ValueError):
        chaos_component(np.ones(4), 1, 1.0, ONE1, 5)


def test_chaos_component_examples():
    assert chaos_component(np.ones(5), 1, 1.0, ONE1, 5).value == pytest.approx(math.sqrt(5))
    assert chaos_component(np.zeros(5), 2, 0.7, ONE1, 5).value == pytest.approx(-math.sqrt(5) * 0.7)


def test_chaos_component_against_direct_sum():
    rng = np.random.default_rng(2)
    N, g = 5, 1.7
    x = rng.normal(size=(5, 5)) * math.sqrt(g)
    f = TestFunction.eigenfunction((2, 1))
    got = chaos_component(x, 3, 0.4, f, N, variance_base=g).value
    pts = lattice_points(N, 2)
    direct = 0.0
    for p in pts:
        j = tuple(p + 2)
        direct += eval_hermite(3, x[j], g) * f((p / N)[None])[0]
    assert got == pytest.approx(0.4 * direct / N, abs=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0.3, 2.5), st.integers(0, 2**31))
def test_decomposition_identity(coeffs, g, seed):
    e = expand_polynomial(coeffs, g)
    N = 7
    x = np.random.default_rng(seed).normal(size=(N, N)) * math.sqrt(g)
    f = TestFunction.eigenfunction((1, 2))
    whole = functional(x, e, f, N, "centered").value
    parts = sum(chaos_component(x, q, c, f, N, g).value for q, c in e.coeffs.items())
    assert whole == pytest.approx(parts, abs=1e-10 * (1 + sum(abs(c) for c in coeffs)) * N)


def test_functional_values_batch():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 5, 5))
    f = TestFunction.constant_one(2)
    batch = functional_values(x, expand_power(2), f, 5, 2)
    for v, w in zip(batch, x):
        assert v == pytest.approx(functional(w, expand_power(2), f, 5).value, abs=1e-14)


# exact variance --------------------------------------------------------------------

def test_exact_variance_examples():
    assert exact_variance(1, 1.0, CovarianceModel.delta(1), ONE1, 5) == pytest.approx(1.0)
    for d in (1, 2, 3):
        assert exact_variance(2, 1.0, CovarianceModel.delta(d), TestFunction.constant_one(d), 5) == pytest.approx(2.0)
    assert exact_variance(1, 1.0, HALF, ONE1, 3) == pytest.approx(5 / 3, abs=1e-14)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8, 9])
@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_exact_variance_matches_double_loop(N, q):
    m = CovarianceModel.finite_support(1, {0: 1.0, 1: 0.4, 2: -0.2, 3: 0.1})
    for f in (ONE1, TestFunction.eigenfunction((2,)), TestFunction.box_indicator([-0.5], [0.1])):
        assert exact_variance(q, 0.8, m, f, N) == pytest.approx(double_loop_variance(q, 0.8, m, f, N), abs=1e-12)


def test_exact_covariance_symmetric_and_matches_loop():
    m = CovarianceModel.nearest_neighbour(2, 0.2)
    f, g = TestFunction.eigenfunction((1, 1)), TestFunction.constant_one(2)
    a = exact_covariance(2, 1.0, m, f, g, 5)
    assert a == pytest.approx(exact_covariance(2, 1.0, m, g, f, 5), abs=1e-14)
    pts = lattice_points(5, 2)
    fv, gv = f(pts / 5), g(pts / 5)
    loop = sum(m.rho((j - k)[None])[0] ** 2 * fv[a_] * gv[b_]
               for a_, j in enumerate(pts) for b_, k in enumerate(pts))
    assert a == pytest.approx(2 * loop / 25, abs=1e-12)


@given(st.floats(-0.24, 0.24), st.integers(1, 5), st.integers(1, 12), st.integers(1, 3))
def test_exact_variance_nonnegative(c, q, N, k):
    m = CovarianceModel.nearest_neighbour(2, c)
    assert exact_variance(q, 1.0, m, TestFunction.eigenfunction((k, 1)), N) >= 0.0


@pytest.mark.slow
def test_monte_carlo_variance_of_component():
    m = CovarianceModel.nearest_neighbour(2, 0.2)
    N, R, q = 9, 4000, 2
    vals = sample_stationary_batch(m, 18, 31, range(R))[:, 5:14, 5:14]
    f = TestFunction.eigenfunction((1, 1))
    s = np.array([chaos_component(v, q, 1.0, f, N).value for v in vals])
    v = exact_variance(q, 1.0, m, f, N)
    assert abs(s.var(ddof=1) - v) < 4 * v * math.sqrt(2 / (R - 1))


# limit variance ---------------------------------------------------------------------

def test_limit_variance_examples():
    d2 = TestFunction.constant_one(2)
    assert limit_variance(2, 1.0, CovarianceModel.delta(2), d2) == pytest.approx(2.0)
    box = TestFunction.box_indicator([-0.5, -0.2], [0.1, 0.5])
    assert limit_variance(2, 1.0, CovarianceModel.delta(2), box) == pytest.approx(2.0)
    m = CovarianceModel.nearest_neighbour(2, 0.2)
    assert limit_variance(1, 2.0, m, d2) == pytest.approx(4 * (1 + 4 * 0.2))


def test_limit_variance_divergence():
    with pytest.raises(DivergenceError):
        limit_variance(1, 1.0, CovarianceModel.power_law(3, 1.0, 1.0), TestFunction.constant_one(3))


def test_exact_approaches_limit_monotonically():
    m = CovarianceModel.nearest_neighbour(2, 0.2)
    f = TestFunction.constant_one(2)
    lim = limit_variance(2, 1.0, m, f)
    gaps = [abs(exact_variance(2, 1.0, m, f, N) - lim) for N in (9, 17, 33, 65)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.01


# contractions --------------------------------------------------------------------------

def test_contraction_delta_examples():
    d = CovarianceModel.delta(1)
    assert contraction_norm_sq(2, 1, 1.0, d, ONE1, 5) == pytest.approx(1 / 5)
    assert contraction_norm_sq(2, 1, 1.0, d, ONE1, 9) == pytest.approx(1 / 9)


def test_contraction_matches_quadruple_loop():
    for q, r in ((2, 1), (3, 1), (3, 2)):
        got = contraction_norm_sq(q, r, 1.0, HALF, ONE1, 3)
        assert got == pytest.approx(quadruple_loop_contraction(q, r, 1.0, HALF, ONE1, 3), abs=1e-12)
    m = CovarianceModel.finite_support(1, {0: 1.0, 1: -0.45})
    f = TestFunction.eigenfunction((2,))
    assert contraction_norm_sq(4, 3, 0.5, m, f, 4) == pytest.approx(
        quadruple_loop_contraction(4, 3, 0.5, m, f, 4), abs=1e-12)


def test_contraction_signed_below_absolute():
    m = CovarianceModel.finite_support(1, {0: 1.0, 1: -0.45, 2: 0.2})
    f = TestFunction.eigenfunction((2,))
    for q, r in ((2, 1), (3, 1), (3, 2), (4, 2)):
        assert contraction_norm_sq(q, r, 1.0, m, f, 7) <= contraction_norm_sq(q, r, 1.0, m, f, 7, absolute=True) + 1e-15


def test_contraction_guards():
    with pytest.raises(ValueError):
        contraction_norm_sq(2, 2, 1.0, HALF, ONE1, 5)
    with pytest.raises(ValueError):
        contraction_norm_sq(2, 0, 1.0, HALF, ONE1, 5)
    with pytest.raises(FeasibilityError, match="guard"):
        contraction_norm_sq(2, 1, 1.0, CovarianceModel.delta(3), TestFunction.constant_one(3), 21)


# fourth moment ---------------------------------------------------------------------------

def test_fourth_moment_normals():
    fm = fourth_moment_gap(np.random.default_rng(5).normal(size=100_000))
    assert abs(fm.gap) < 4 * fm.se


def test_fourth_moment_coin():
    fm = fourth_moment_gap(np.tile([1.0, -1.0], 500))
    assert fm.m4 == pytest.approx(1.0) and fm.gap == pytest.approx(-2.0)


def test_fourth_moment_needs_samples():
    with pytest.raises(ValueError):
        fourth_moment_gap(np.ones(99))


def test_fourth_moment_se_against_bootstrap():
    x = np.random.default_rng(6).standard_t(8, size=4000)
    fm = fourth_moment_gap(x)
    rng = np.random.default_rng(7)
    boot = [fourth_moment_gap(x[rng.integers(0, x.size, x.size)]).m4 for _ in range(300)]
    assert fm.se == pytest.approx(np.std(boot), rel=0.3)


def test_fourth_moment_gap_shrinks_with_N():
    # delta model, d=1: S_{N,2} is a normalised sum of |B_N| iid chi-square terms, excess kurtosis 12/|B_N|
    gaps = []
    for N in (9, 17, 33):
        x = np.random.default_rng(N).normal(size=(20_000, N))
        s = chaos_component(x[0], 2, 1.0, ONE1, N)  # shape check on one window
        assert np.isfinite(s.value)
        vals = ((x**2 - 1).sum(axis=1)) / math.sqrt(N)
        fm = fourth_moment_gap(vals)
        assert abs(fm.gap - 12 / N) < 4 * fm.se
        gaps.append(abs(fm.gap))
    assert gaps[0] > gaps[1] > gaps[2]
