import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from volterra_iter.errors import DomainError, UsageError
from volterra_iter.grid import (
    GridSpec,
    ScaledGridFunction,
    conv_power_numeric,
    convolve,
    discretize,
    restricted_l1,
)
from volterra_iter.kernels import PowerExpKernel, SmoothFactorKernel, conv_power_closed_form

ONE = PowerExpKernel(1, 0.0, 0.0, 0.0)


def cell_mean_oracle(func, grid, sub=64):
    """Cell means by composite Gauss-Legendre, independent of discretize()."""
    x, w = np.polynomial.legendre.leggauss(sub)
    h = grid.h
    pts = grid.edges[:-1, None] + (x[None, :] + 1) * h / 2
    return (func(pts) * w[None, :]).sum(axis=1) / 2


def sup_rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.mark.parametrize("m", [4, 12, 100, 7])
def test_grid_rejects(m):
    with pytest.raises(DomainError):
        GridSpec(m)


@pytest.mark.parametrize("m", [8, 64, 4096])
def test_grid_h_exact(m):
    g = GridSpec(m)
    assert g.h * g.m == 1.0
    assert g.nodes[0] == g.h / 2


def test_discretize_constant():
    f = discretize(ONE, GridSpec(8))
    assert np.all(f.values == f.values[0])
    np.testing.assert_array_equal(f.linear(), np.ones(8))


def test_discretize_singular_first_cell():
    g = GridSpec(8)
    f = discretize(PowerExpKernel(1, 0.0, -0.5, 0.0), g)
    assert f.linear()[0] == pytest.approx(2 / math.sqrt(g.h), rel=1e-14)
    oracle = cell_mean_oracle(lambda t: t**-0.5, g)
    np.testing.assert_allclose(f.linear()[1:], oracle[1:], rtol=1e-13)


def test_discretize_linear_kernel_is_midpoint():
    g = GridSpec(8)
    f = discretize(SmoothFactorKernel.from_poly(0, [0, 1]), g)
    np.testing.assert_allclose(f.linear(), g.nodes, rtol=1e-15)


def test_discretize_extreme_magnitudes_do_not_overflow():
    g = GridSpec(4096)
    k = PowerExpKernel(1, -900.0, 150.0, 40.0)
    f = discretize(k, g)
    assert np.all(np.isfinite(f.values))
    # the largest cell mean is the last one
    expected = -900 + 40 * (1 - g.h / 2) + math.log((1 - (1 - g.h) ** 151) / (151 * g.h))
    assert float(np.max(f.log_abs())) == pytest.approx(expected, rel=1e-12)


@given(
    st.floats(-0.95, 5),
    st.floats(-30, 30),
    st.floats(-500, 500),
    st.sampled_from([8, 64, 512]),
)
def test_normalisation_invariant(r, mu, log_c, m):
    f = discretize(PowerExpKernel(1, log_c, r, mu), GridSpec(m))
    assert 0.5 <= np.max(np.abs(f.values)) <= 2.0


def test_zero_function():
    z = ScaledGridFunction.from_array(GridSpec(8), np.zeros(8))
    assert z.is_zero and z.log_scale == -math.inf
    assert restricted_l1(z, 1.0) == -math.inf
    assert convolve(z, ScaledGridFunction.constant(GridSpec(8))).is_zero


def test_one_star_one_is_t():
    g = GridSpec(64)
    one = discretize(ONE, g)
    c = convolve(one, one)
    # exact cell means of t are the midpoints
    np.testing.assert_allclose(c.linear(), g.nodes, rtol=1e-14)


def test_approximate_identity():
    g = GridSpec(512)
    delta = ScaledGridFunction.from_array(g, np.r_[g.m, np.zeros(g.m - 1)])
    f = ScaledGridFunction.sample(g, lambda t: np.cos(3 * t) + t)
    c = convolve(delta, f)
    # the unit mass sits on cell 0, so the result is f delayed by h/2
    shifted = np.cos(3 * (g.nodes - g.h / 2)) + g.nodes - g.h / 2
    assert np.max(np.abs(c.linear()[1:] - shifted[1:])) < 10 * g.h**2
    assert c.linear()[0] == pytest.approx(f.linear()[0] / 2)
    assert g.h * np.sum(np.abs(c.linear() - f.linear())) <= 4 * g.h


def test_inverse_sqrt_squared_tends_to_pi():
    errs = []
    for m in (256, 1024, 4096):
        g = GridSpec(m)
        k = discretize(PowerExpKernel(1, 0.0, -0.5, 0.0), g)
        c = convolve(k, k).linear()
        interior = g.nodes >= 0.25
        assert np.max(np.abs(c[interior] / math.pi - 1)) < 2e-3
        errs.append(g.h * np.sum(np.abs(c - math.pi)) / math.pi)
    assert errs[0] > errs[1] > errs[2]


def test_power_one_unchanged():
    f = discretize(PowerExpKernel(1, 0.2, 0.5, -1), GridSpec(32))
    g = conv_power_numeric(f, 1)
    np.testing.assert_array_equal(g.values, f.values)
    assert g.log_scale == f.log_scale


def test_power_three_of_one():
    g = GridSpec(1024)
    c = conv_power_numeric(discretize(ONE, g), 3)
    oracle = cell_mean_oracle(lambda t: t**2 / 2, g)
    assert sup_rel(c.linear(), oracle) < 2 * g.h**2


def test_power_five_exponential_matches_closed_form():
    g = GridSpec(1024)
    k = PowerExpKernel(1, 0.0, 0.0, -1.0)
    c = conv_power_numeric(discretize(k, g), 5)
    exact = conv_power_closed_form(k, 5)
    oracle = cell_mean_oracle(exact, g)
    assert sup_rel(c.linear(), oracle) < 1e-6


def test_power_validates_n():
    f = ScaledGridFunction.constant(GridSpec(8))
    for bad in (0, -1, 2.0, True):
        with pytest.raises(UsageError):
            conv_power_numeric(f, bad)


def test_grid_mismatch():
    with pytest.raises(UsageError):
        convolve(ScaledGridFunction.constant(GridSpec(8)), ScaledGridFunction.constant(GridSpec(16)))


def test_restricted_l1_examples():
    g = GridSpec(256)
    one = discretize(ONE, g)
    assert restricted_l1(one, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert restricted_l1(one, 0.5) == pytest.approx(math.log(0.5), abs=1e-15)
    assert restricted_l1(one, 0.3) == pytest.approx(math.log(0.3), abs=1e-14)
    c = conv_power_numeric(one, 3)
    assert restricted_l1(c, 1.0) == pytest.approx(math.log(1 / 6), abs=1e-4)
    with pytest.raises(DomainError):
        restricted_l1(one, 0.0)


signed = arrays(np.float64, 64, elements=st.floats(-1, 1))
nonneg = arrays(np.float64, 64, elements=st.floats(0, 1))


def _f(v, s=0.0):
    return ScaledGridFunction.from_array(GridSpec(64), v, s)


@given(signed, signed, signed)
def test_associativity(a, b, c):
    fa, fb, fc = _f(a), _f(b), _f(c)
    left = convolve(convolve(fa, fb), fc).linear()
    right = convolve(fa, convolve(fb, fc)).linear()
    scale = GridSpec(64).h ** 2 * np.sum(np.abs(a)) * np.sum(np.abs(b)) * np.sum(np.abs(c)) + 1e-300
    assert np.max(np.abs(left - right)) <= 1e-12 * scale


@given(signed, signed)
def test_commutativity(a, b):
    np.testing.assert_allclose(convolve(_f(a), _f(b)).linear(), convolve(_f(b), _f(a)).linear(), rtol=0, atol=1e-15)


@given(nonneg, nonneg)
def test_positivity(a, b):
    assert np.all(convolve(_f(a), _f(b)).values >= 0)


@given(nonneg.filter(lambda v: v.any()), st.integers(1, 20), st.floats(-50, 50))
def test_scaling_covariance(v, n, log_a):
    f = _f(v)
    base = conv_power_numeric(f, n)
    scaled = conv_power_numeric(f.scaled(log_a), n)
    if base.is_zero:
        assert scaled.is_zero
        return
    np.testing.assert_array_equal(base.values, scaled.values)
    assert scaled.log_scale - base.log_scale == pytest.approx(n * log_a, abs=1e-12 * (1 + abs(n * log_a) + abs(base.log_scale)))


def test_truncation_consistency():
    # a kernel defined on (0, inf) and its cut-off at 1 give the same grid powers
    g = GridSpec(256)
    k = PowerExpKernel(1, 0.0, 0.0, -1.0)
    cut = SmoothFactorKernel(r=0.0, f0=1.0, f1=-1.0, f_eval=lambda t: np.where(t <= 1, np.exp(-t), 0.0))
    a = conv_power_numeric(discretize(k, g), 7)
    b = conv_power_numeric(discretize(cut, g), 7)
    np.testing.assert_allclose(a.log_abs(), b.log_abs(), rtol=0, atol=1e-12)


def test_refinement_smooth_is_second_order():
    k = PowerExpKernel(1, 0.0, 0.0, -1.0)
    exact = conv_power_closed_form(k, 5)
    errs = []
    for m in (512, 1024, 2048, 4096):
        g = GridSpec(m)
        num = conv_power_numeric(discretize(k, g), 5).linear()
        errs.append(sup_rel(num, cell_mean_oracle(exact, g)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 < r < 4.5 for r in ratios), ratios


@pytest.mark.parametrize("r", [-0.9, -0.5, -0.2])
def test_refinement_singular_is_monotone(r):
    k = PowerExpKernel(1, 0.0, r, 0.5)
    exact = conv_power_closed_form(k, 3)
    errs = []
    for m in (128, 256, 512, 1024, 2048):
        g = GridSpec(m)
        num = conv_power_numeric(discretize(k, g), 3).linear()
        oracle = cell_mean_oracle(exact, g) if 3 * (r + 1) - 1 >= 0 else discretize(exact, g).linear()
        errs.append(np.sum(np.abs(num - oracle)) / np.sum(np.abs(oracle)))
    assert all(a > b for a, b in zip(errs, errs[1:])), errs


@given(signed, signed)
def test_fft_path_matches_direct(a, b):
    fa, fb = _f(a), _f(b)
    d = convolve(fa, fb).linear()
    f = convolve(fa, fb, method="fft").linear()
    # relative to the Young-type bound h‖a‖_1‖b‖_∞, which is what the FFT error scales with
    scale = GridSpec(64).h * np.sum(np.abs(fa.linear())) * np.max(np.abs(fb.linear()))
    assert np.max(np.abs(d - f)) <= 1e-10 * scale


def test_fft_power_matches_direct():
    g = GridSpec(2048)
    k = discretize(PowerExpKernel(1, 0.0, -0.3, 1.0), g)
    d = conv_power_numeric(k, 13).linear()
    f = conv_power_numeric(k, 13, method="fft").linear()
    assert sup_rel(f, d) < 1e-10


def test_power_is_deterministic():
    g = GridSpec(1024)
    k = discretize(SmoothFactorKernel.from_poly(-0.4, [1, 2, -0.5]), g)
    a, b = conv_power_numeric(k, 37), conv_power_numeric(k, 37)
    assert a.values.tobytes() == b.values.tobytes() and a.log_scale == b.log_scale


def test_large_power_keeps_scale():
    # ∫ k^{*150} = 1/150! ~ e^{-605}, far below the double range; error grows like n^3 h^2
    errs = []
    for m in (2048, 4096):
        c = conv_power_numeric(discretize(ONE, GridSpec(m)), 150)
        errs.append(restricted_l1(c, 1.0) + math.lgamma(151))
    assert 0 < errs[1] < 150**3 / 4096**2 / 6
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_csv_roundtrip():
    g = GridSpec(16)
    f = discretize(PowerExpKernel(-1, -400.0, 0.5, 2.0), g)
    text = f.to_csv()
    assert text.splitlines()[1] == "t,mantissa,log_scale"
    back = ScaledGridFunction.from_csv(text)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.log_scale == f.log_scale
    z = ScaledGridFunction.from_csv(ScaledGridFunction.zero(g).to_csv())
    assert z.is_zero
