"""Deblurring polynomial filters.

A mild blur operator K is close to the identity, so its inverse is well
approximated by a low-degree polynomial p(K). The family used here fixes
p(1) = 1 (no luminosity change) and the derivatives of 1/x at x = 1 up to
order d-2, leaving two design knobs: alpha = p^(d-1)(1), which sets how
hard mid frequencies are amplified, and b = p(0), the gain at frequencies
the blur has fully erased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import (
    GaussianParams,
    convolve,
    kernel_transfer,
    make_gaussian_kernel,
    separable_gaussian,
)

DEFAULT_ALPHA = 6.0
DEFAULT_B = 1.0
PHASE_EPS = 1e-8


@dataclass(frozen=True)
class PolyParams:
    """Design triple (degree, alpha, b) for the deblurring polynomial."""

    degree: int
    alpha: float
    b: float

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError(f"degree must be >= 2, got {self.degree}")
        if not (np.isfinite(self.alpha) and np.isfinite(self.b)):
            raise ValueError("alpha and b must be finite")


def solve_p3(alpha: float, b: float) -> np.ndarray:
    """Closed-form degree-3 coefficients, ascending powers."""
    return np.array([
        b,
        5.0 - 3.0 * b + alpha / 2.0,
        3.0 * b - alpha - 6.0,
        alpha / 2.0 - b + 2.0,
    ])


def solve_general(params: PolyParams) -> np.ndarray:
    """Coefficients (ascending powers) for any degree d >= 2.

    The constraints are diagonal in the basis shifted to (x - 1): with
    p(x) = sum_j c_j (x-1)^j, the derivative conditions pin c_0 .. c_{d-1}
    directly and p(0) = b fixes c_d. The shifted coefficients are then
    expanded back to the monomial basis.
    """
    d = params.degree
    c = np.zeros(d + 1)
    c[0] = 1.0
    for i in range(1, d - 1):
        c[i] = (-1.0) ** i
    c[d - 1] = params.alpha / math.factorial(d - 1)
    # p(0) = sum_j c_j (-1)^j = b  ->  solve for c_d
    partial = sum(c[j] * (-1.0) ** j for j in range(d))
    c[d] = (params.b - partial) * (-1.0) ** d

    coeffs = np.zeros(d + 1)
    shifted = np.array([1.0])  # (x-1)^j, ascending
    for j in range(d + 1):
        coeffs[:j + 1] += c[j] * shifted
        shifted = np.polynomial.polynomial.polymul(shifted, [-1.0, 1.0])
    return coeffs


def eval_poly(coeffs: np.ndarray, x):
    """Horner evaluation of ascending-power coefficients at scalar or array x."""
    xs = np.asarray(x, dtype=np.result_type(x, np.float64))
    acc = np.zeros_like(xs)
    for a in reversed(coeffs):
        acc = acc * xs + a
    return acc if acc.ndim else acc.item()


def response_curve(coeffs: np.ndarray, steps: int = 256) -> np.ndarray:
    """Rows of (x, p(x), p(x)*x) on [0, 1] in 1/steps increments."""
    x = np.arange(steps + 1) / steps
    p = eval_poly(coeffs, x)
    return np.column_stack([x, p, p * x])


def response_curve_csv(coeffs: np.ndarray, steps: int = 256) -> str:
    rows = ["x,p,px"]
    for x, p, px in response_curve(coeffs, steps):
        rows.append(f"{x:.10g},{p:.10g},{px:.10g}")
    return "\n".join(rows) + "\n"


def apply_poly_spatial(image: np.ndarray, params: GaussianParams,
                       coeffs: np.ndarray) -> np.ndarray:
    """Apply p(K) for a Gaussian K by accumulating repeated blurs.

    Uses the recurrence v_0 = a_d v, v_i = k * v_{i-1} + a_{d-i} v, which
    costs exactly d convolutions. Each blur runs through the separable
    fast path when the parameters allow it, otherwise through the direct
    2-D engine.
    """
    d = len(coeffs) - 1
    img = image.astype(np.float64, copy=False)
    if d == 0:
        return coeffs[0] * img
    if params.is_axis_aligned():
        blur = lambda v: separable_gaussian(v, params)
    else:
        kernel = make_gaussian_kernel(params)
        blur = lambda v: convolve(v, kernel, engine="spatial")
    out = coeffs[d] * img
    for i in range(1, d + 1):
        out = blur(out) + coeffs[d - i] * img
    return out


def apply_poly_fourier(image: np.ndarray, kernel: np.ndarray,
                       coeffs: np.ndarray, correction: str = "none",
                       eps: float = PHASE_EPS) -> np.ndarray:
    """Apply p(K) in the Fourier domain for an arbitrary blur kernel.

    correction="none" uses the raw transfer function and is only sound for
    kernels whose spectrum is real and non-negative (e.g. Gaussians).
    correction="flip" pre-filters with the flipped kernel so the effective
    spectrum is |k^|^2; correction="phase" removes the phase only, leaving
    the less attenuated |k^|.
    """
    if correction not in ("none", "flip", "phase"):
        raise ValueError(f"unknown correction: {correction}")
    if not np.any(kernel):
        raise ValueError("kernel is all zeros")
    side = kernel.shape[0]
    img = image.astype(np.float64, copy=False)
    planes = img[:, :, np.newaxis] if img.ndim == 2 else img
    padded_shape = (planes.shape[0] + 2 * side, planes.shape[1] + 2 * side)
    khat = kernel_transfer(kernel, padded_shape)
    if correction == "none":
        base = khat
        pre = None
    elif correction == "flip":
        base = np.abs(khat) ** 2
        pre = np.conj(khat)
    else:
        mag = np.abs(khat)
        base = mag
        pre = np.conj(khat) / np.maximum(mag, eps)
    gain = eval_poly(coeffs, base)

    out = np.empty_like(planes)
    for ch in range(planes.shape[2]):
        padded = np.pad(planes[:, :, ch], side, mode="edge")
        spec = np.fft.rfft2(padded)
        if pre is not None:
            spec = spec * pre
        res = np.fft.irfft2(spec * gain, s=padded_shape)
        out[:, :, ch] = res[side:-side, side:-side]
    return out[:, :, 0] if img.ndim == 2 else out
