import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

import corpus
from polyblur.imgcore import GaussianParams, convolve, make_gaussian_kernel
from polyblur.polyfilter import (
    PolyParams,
    apply_poly_fourier,
    apply_poly_spatial,
    eval_poly,
    response_curve,
    response_curve_csv,
    solve_general,
    solve_p3,
)


def fd_derivative(coeffs, order, x0, h=0.125):
    """Finite-difference derivative oracle, exact for degree <= 6.

    Differentiates the interpolant through 7 equispaced samples; for
    polynomials up to degree 6 the interpolant is the polynomial itself.
    """
    nodes = np.arange(-3, 4) * h
    vand = np.vander(nodes, 7, increasing=True).T  # row j: nodes**j
    rhs = np.zeros(7)
    rhs[order] = math.factorial(order)
    w = np.linalg.solve(vand, rhs)
    return sum(wk * eval_poly(coeffs, x0 + nk) for wk, nk in zip(w, nodes))


# ---------------------------------------------------------------------------
# Coefficient solving


def test_p3_neumann_reference():
    np.testing.assert_array_equal(solve_p3(2.0, 4.0), [4.0, -6.0, 4.0, -1.0])


def test_p3_neumann_series_expansion():
    # oracle: expand sum_{i=0..3} (1-x)^i and compare coefficient-wise
    series = np.zeros(4)
    for i in range(4):
        term = np.array([1.0])
        for _ in range(i):
            term = np.polynomial.polynomial.polymul(term, [1.0, -1.0])
        series[:len(term)] += term
    np.testing.assert_allclose(solve_p3(2.0, 4.0), series, atol=1e-12)
    np.testing.assert_allclose(solve_general(PolyParams(3, 2.0, 4.0)), series,
                               atol=1e-12)


@settings(deadline=None, max_examples=50)
@given(alpha=st.floats(-10, 20), b=st.floats(0, 6))
def test_p3_constraints(alpha, b):
    coeffs = solve_p3(alpha, b)
    assert coeffs.sum() == pytest.approx(1.0, abs=1e-10)          # p(1) = 1
    assert coeffs[0] == pytest.approx(b, abs=1e-12)               # p(0) = b
    deriv1 = sum(i * c for i, c in enumerate(coeffs))
    assert deriv1 == pytest.approx(-1.0, abs=1e-10)               # p'(1) = -1


@settings(deadline=None, max_examples=40)
@given(d=st.integers(2, 6), alpha=st.floats(-10, 20), b=st.floats(0, 6))
def test_general_constraint_suite(d, alpha, b):
    coeffs = solve_general(PolyParams(d, alpha, b))
    assert len(coeffs) == d + 1
    assert eval_poly(coeffs, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert eval_poly(coeffs, 0.0) == pytest.approx(b, abs=1e-8)
    for i in range(1, d - 1):
        want = (-1.0) ** i * math.factorial(i)
        assert fd_derivative(coeffs, i, 1.0) == pytest.approx(want, abs=1e-8)
    assert fd_derivative(coeffs, d - 1, 1.0) == pytest.approx(alpha, abs=1e-8)


def test_general_matches_p3():
    for alpha, b in [(6.0, 1.0), (2.0, 4.0), (-3.0, 0.5)]:
        np.testing.assert_allclose(solve_general(PolyParams(3, alpha, b)),
                                   solve_p3(alpha, b), atol=1e-12)


def test_poly_params_validation():
    with pytest.raises(ValueError):
        PolyParams(1, 2.0, 3.0)
    with pytest.raises(ValueError):
        PolyParams(3, math.inf, 1.0)


# ---------------------------------------------------------------------------
# Evaluation and response export


def test_eval_poly_values():
    coeffs = solve_p3(2.0, 4.0)
    assert eval_poly(coeffs, 1.0) == pytest.approx(1.0)
    assert eval_poly(coeffs, 0.0) == pytest.approx(4.0)
    assert eval_poly(coeffs, 0.5) == pytest.approx(1.875)


def test_response_curve_shape():
    coeffs = solve_p3(6.0, 1.0)
    curve = response_curve(coeffs)
    assert curve.shape == (257, 3)
    assert curve[0, 0] == 0.0 and curve[-1, 0] == 1.0
    np.testing.assert_allclose(curve[:, 2], curve[:, 1] * curve[:, 0])
    csv = response_curve_csv(coeffs)
    assert csv.splitlines()[0] == "x,p,px"
    assert len(csv.splitlines()) == 258


# ---------------------------------------------------------------------------
# Spatial application


def test_apply_degree0_identity():
    img = np.random.default_rng(0).random((40, 40))
    out = apply_poly_spatial(img, GaussianParams(1.0, 1.0, 0.0), np.array([1.0]))
    np.testing.assert_array_equal(out, img)


def test_apply_near_delta_kernel():
    img = corpus.natural_gray()
    out = apply_poly_spatial(img, GaussianParams(0.3, 1.0, 0.0), solve_p3(6.0, 1.0))
    m = 4
    assert np.abs((out - img)[m:-m, m:-m]).max() <= 2e-2


def explicit_poly_kernel(kernel, coeffs):
    """Reference: build sum a_i k^(*i) by repeated self-convolution."""
    d = len(coeffs) - 1
    side = kernel.shape[0]
    big = d * (side // 2) * 2 + 1
    out = np.zeros((big, big))
    out[big // 2, big // 2] = coeffs[0]
    cur = np.zeros((big, big))
    cur[big // 2, big // 2] = 1.0
    for i in range(1, d + 1):
        cur = signal.convolve2d(cur, kernel, mode="same")
        out += coeffs[i] * cur
    return out


@pytest.mark.parametrize("params", [
    GaussianParams(1.5, 0.6, 1.0),   # rotated: direct 2-D path
    GaussianParams(2.0, 0.5, 0.0),   # axis-aligned: separable path
    GaussianParams(1.0, 1.0, 0.0),   # isotropic
])
def test_horner_matches_explicit_kernel(params):
    img = corpus.natural_gray()
    coeffs = solve_p3(6.0, 1.0)
    kernel = make_gaussian_kernel(params)
    horner = apply_poly_spatial(img, params, coeffs)
    explicit = convolve(img, explicit_poly_kernel(kernel, coeffs))
    m = explicit_poly_kernel(kernel, coeffs).shape[0] // 2
    np.testing.assert_allclose(horner[m:-m, m:-m], explicit[m:-m, m:-m],
                               atol=1e-4)


def test_apply_preserves_mean():
    img = corpus.natural_gray()
    out = apply_poly_spatial(img, GaussianParams(1.5, 1.0, 0.0), solve_p3(6.0, 1.0))
    assert abs(out.mean() - img.mean()) <= 1e-3


def test_inversion_quality_suite():
    # non-blind: blur with known params, apply p(K) with the same params
    coeffs = solve_p3(6.0, 1.0)
    rng = np.random.default_rng(8)
    gains = []
    for i, img in enumerate(corpus.bench_images().values()):
        sharp = img if img.ndim == 2 else img.mean(axis=2)
        params = GaussianParams(float(rng.uniform(0.5, 2.0)), 1.0, 0.0)
        blurry = convolve(sharp, make_gaussian_kernel(params))
        restored = apply_poly_spatial(blurry, params, coeffs)
        mse_b = np.mean((blurry - sharp) ** 2)
        mse_r = np.mean((restored - sharp) ** 2)
        gains.append(10 * np.log10(mse_b / mse_r))
    gains = np.array(gains)
    assert len(gains) >= 10
    assert np.all(gains > 0)
    assert gains.mean() >= 1.0


def test_noise_amplification_bound():
    coeffs = solve_p3(6.0, 1.0)
    x = np.linspace(0, 1, 2001)
    max_gain = np.abs(eval_poly(coeffs, x)).max()
    rng = np.random.default_rng(9)
    sigma_noise = 0.01
    img = 0.5 + rng.normal(0.0, sigma_noise, (256, 256))
    out = apply_poly_spatial(img, GaussianParams(2.0, 1.0, 0.0), coeffs)
    out_std = out[10:-10, 10:-10].std()
    assert out_std <= max_gain * sigma_noise * 1.1


# ---------------------------------------------------------------------------
# Fourier application


def test_fourier_matches_spatial():
    img = corpus.natural_gray()
    coeffs = solve_p3(6.0, 1.0)
    params = GaussianParams(1.5, 0.6, 1.0)
    kernel = make_gaussian_kernel(params)
    a = apply_poly_spatial(img, params, coeffs)
    b = apply_poly_fourier(img, kernel, coeffs, correction="none")
    m = kernel.shape[0]
    np.testing.assert_allclose(a[m:-m, m:-m], b[m:-m, m:-m], atol=1e-3)


def motion_kernel_9px():
    k = np.zeros((9, 9))
    k[4, :] = 1.0 / 9.0
    # shift by one pixel to break central symmetry
    k = np.roll(k, 1, axis=1)
    return k


def test_phase_correction_spectrum_nonnegative():
    from polyblur.imgcore import kernel_transfer
    k = motion_kernel_9px()
    khat = kernel_transfer(k, (64, 64))
    phase_base = np.abs(khat)
    assert phase_base.min() >= 0.0
    assert np.isrealobj(phase_base)


def test_flip_attenuates_more_than_phase():
    from polyblur.imgcore import kernel_transfer
    khat = kernel_transfer(motion_kernel_9px(), (64, 64))
    flip_base = np.abs(khat) ** 2
    phase_base = np.abs(khat)
    assert np.all(flip_base <= phase_base + 1e-12)


def test_corrections_run_on_asymmetric_kernel():
    img = corpus.natural_gray()
    k = motion_kernel_9px()
    blurry = convolve(img, k)
    coeffs = solve_p3(6.0, 1.0)
    sharp_err = {}
    for correction in ("flip", "phase"):
        out = apply_poly_fourier(blurry, k, coeffs, correction=correction)
        assert np.all(np.isfinite(out))
        m = 18
        sharp_err[correction] = np.mean((out - img)[m:-m, m:-m] ** 2)
    # phase correction attenuates less, so it restores more detail
    assert sharp_err["phase"] < sharp_err["flip"]


def test_fourier_rejects_zero_kernel():
    with pytest.raises(ValueError):
        apply_poly_fourier(np.zeros((32, 32)), np.zeros((3, 3)),
                           solve_p3(6.0, 1.0))


def test_fourier_rejects_unknown_correction():
    with pytest.raises(ValueError):
        apply_poly_fourier(np.zeros((32, 32)), motion_kernel_9px(),
                           solve_p3(6.0, 1.0), correction="bogus")


def test_fourier_color_matches_per_channel():
    rng = np.random.default_rng(10)
    img = rng.random((48, 48, 3))
    k = make_gaussian_kernel(GaussianParams(1.0, 1.0, 0.0))
    coeffs = solve_p3(6.0, 1.0)
    out = apply_poly_fourier(img, k, coeffs)
    for c in range(3):
        np.testing.assert_allclose(
            out[:, :, c], apply_poly_fourier(img[:, :, c], k, coeffs),
            atol=1e-12)
