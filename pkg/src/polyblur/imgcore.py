"""Core image machinery: I/O, normalization, gradients, Gaussian kernels,
and the convolution engines everything else is built on.

Images are numpy float arrays in [0, 1], shaped (H, W) for grayscale or
(H, W, 3) for RGB, rows increasing downward. Kernels are odd-sided 2-D
float arrays whose taps sum to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

REC709_LUMA = (0.2126, 0.7152, 0.0722)

DEFAULT_TRUNCATION = 4.0


class ImageIOError(OSError):
    """Raised when an image file cannot be read or written."""


class DegenerateImageError(ValueError):
    """Raised when an image carries no usable signal (e.g. constant)."""


# ---------------------------------------------------------------------------
# I/O


def read_image(path: str) -> np.ndarray:
    """Read an 8- or 16-bit PNG as a float32 array scaled to [0, 1].

    Grayscale files come back as (H, W), color as (H, W, 3) RGB. An alpha
    channel, if present, is dropped.
    """
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageIOError(f"unsupported sample type {raw.dtype} in {path}")
    img = raw.astype(np.float32) / scale
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        if img.shape[2] != 3:
            raise ImageIOError(f"unsupported channel count {img.shape[2]} in {path}")
        img = img[:, :, ::-1].copy()  # BGR -> RGB
    return img


def write_image(image: np.ndarray, path: str, bit_depth: int = 8) -> None:
    """Write an image as PNG, clamping to [0, 1] and quantizing."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    peak = 255 if bit_depth == 8 else 65535
    quant = np.rint(arr * peak).astype(np.uint8 if bit_depth == 8 else np.uint16)
    if quant.ndim == 3:
        quant = quant[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(str(path), quant):
        raise ImageIOError(f"cannot write image: {path}")


def luminance(image: np.ndarray) -> np.ndarray:
    """Reduce an image to one channel using Rec. 709 weights."""
    if image.ndim == 2:
        return image
    r, g, b = REC709_LUMA
    return r * image[:, :, 0] + g * image[:, :, 1] + b * image[:, :, 2]


# ---------------------------------------------------------------------------
# Normalization and gradients


def quantile_normalize(image: np.ndarray, q: float) -> tuple[np.ndarray, float, float]:
    """Stretch an image so its q and 1-q quantiles map to 0 and 1.

    Returns (normalized, lo, hi) where lo and hi are the sample quantiles
    used, so callers can invert the mapping. Values outside the quantile
    range are clamped.
    """
    if not 0.0 <= q < 0.5:
        raise ValueError(f"q must be in [0, 0.5), got {q}")
    lo, hi = np.quantile(image, [q, 1.0 - q])
    if hi <= lo:
        raise DegenerateImageError("image is constant within the quantile range")
    out = np.clip((image - lo) / (hi - lo), 0.0, 1.0)
    return out, float(lo), float(hi)


@dataclass(frozen=True)
class GradientField:
    """Per-pixel horizontal (gx) and vertical (gy) derivatives of one channel."""

    gx: np.ndarray
    gy: np.ndarray


def gradient(image: np.ndarray) -> GradientField:
    """Finite-difference gradient of a single-channel image.

    Central differences in the interior, one-sided at the borders. gx is
    the derivative along columns (x), gy along rows (y).
    """
    if image.ndim != 2:
        raise ValueError("gradient expects a single-channel image")
    gy, gx = np.gradient(image.astype(np.float64, copy=False))
    return GradientField(gx=gx, gy=gy)


def directional_derivative_max(grad: GradientField, psi: float) -> float:
    """Largest magnitude of the directional derivative along angle psi."""
    d = grad.gx * math.cos(psi) + grad.gy * math.sin(psi)
    return float(np.max(np.abs(d)))


# ---------------------------------------------------------------------------
# Gaussian kernels


@dataclass(frozen=True)
class GaussianParams:
    """Anisotropic Gaussian blur: major-axis std, axis ratio, orientation.

    sigma0 is the standard deviation along the major axis (pixels), rho
    the minor/major ratio in (0, 1], and theta the major-axis angle in
    [0, pi), measured counterclockwise from horizontal on screen (the y
    axis of the quadratic form points up; rows index down).
    """

    sigma0: float
    rho: float
    theta: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        object.__setattr__(self, "theta", float(self.theta) % math.pi)

    @property
    def sigma1(self) -> float:
        return self.rho * self.sigma0

    def quad_coefficients(self) -> tuple[float, float, float]:
        """Coefficients (a, b, c) of the exponent a*x^2 + 2b*x*y + c*y^2."""
        s0sq = 2.0 * self.sigma0 ** 2
        cos2 = math.cos(self.theta) ** 2
        sin2 = math.sin(self.theta) ** 2
        inv_rho2 = 1.0 / self.rho ** 2
        a = cos2 / s0sq + sin2 * inv_rho2 / s0sq
        b = math.sin(2.0 * self.theta) / (2.0 * s0sq) * (inv_rho2 - 1.0)
        c = sin2 / s0sq + cos2 * inv_rho2 / s0sq
        return a, b, c

    def is_axis_aligned(self, tol: float = 1e-6) -> bool:
        """True when the kernel separates into row and column passes."""
        if self.rho >= 1.0 - 1e-12:
            return True
        t = self.theta
        return min(t, abs(t - math.pi / 2), abs(t - math.pi)) <= tol

    def axis_sigmas(self) -> tuple[float, float]:
        """(sigma_x, sigma_y) for axis-aligned or isotropic parameters."""
        if self.rho >= 1.0 - 1e-12:
            return self.sigma0, self.sigma0
        if abs(self.theta - math.pi / 2) < math.pi / 4:
            return self.sigma1, self.sigma0  # major axis vertical
        return self.sigma0, self.sigma1


def make_gaussian_kernel(params: GaussianParams,
                         truncation: float = DEFAULT_TRUNCATION) -> np.ndarray:
    """Sample an anisotropic Gaussian kernel, truncated and normalized.

    The side is 2*ceil(truncation*sigma0) + 1 and the taps sum to 1.
    """
    if truncation < 3:
        raise ValueError(f"truncation must be >= 3, got {truncation}")
    a, b, c = params.quad_coefficients()
    radius = math.ceil(truncation * params.sigma0)
    off = np.arange(-radius, radius + 1, dtype=np.float64)
    xx = off[np.newaxis, :]
    yy = -off[:, np.newaxis]  # rows run downward; quadratic form wants y up
    taps = np.exp(-(a * xx ** 2 + 2.0 * b * xx * yy + c * yy ** 2))
    return taps / taps.sum()


def gaussian_taps_1d(sigma: float, radius: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps on [-radius, radius]."""
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    t = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return t / t.sum()


def kernel_to_text(kernel: np.ndarray) -> str:
    """Serialize a kernel as plain text: side on one line, then tap rows."""
    lines = [str(kernel.shape[0])]
    for row in kernel:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def kernel_from_text(text: str) -> np.ndarray:
    """Parse the plain-text grid format written by kernel_to_text."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    side = int(lines[0])
    rows = [np.array([float(v) for v in ln.split()]) for ln in lines[1:side + 1]]
    taps = np.vstack(rows)
    if taps.shape != (side, side):
        raise ValueError(f"malformed kernel text: expected {side}x{side} taps")
    return taps


# ---------------------------------------------------------------------------
# Convolution engines


def _check_kernel_fits(image: np.ndarray, kernel: np.ndarray) -> None:
    side = kernel.shape[0]
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or side % 2 == 0:
        raise ValueError("kernel must be square with odd side")
    if side > min(image.shape[0], image.shape[1]):
        raise ValueError(
            f"kernel side {side} exceeds image extent "
            f"{image.shape[0]}x{image.shape[1]}")


def _convolve_spatial_2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.convolve(plane, kernel, mode="nearest")


def _convolve_fourier_2d(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    side = kernel.shape[0]
    padded = np.pad(plane, side, mode="edge")
    khat = kernel_transfer(kernel, padded.shape)
    spec = np.fft.rfft2(padded) * khat
    out = np.fft.irfft2(spec, s=padded.shape)
    return out[side:-side, side:-side]


def kernel_transfer(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Transfer function of a centered kernel on a periodic grid of `shape`.

    Returned on the half-spectrum grid of numpy's rfft2. Real for centrally
    symmetric kernels, complex otherwise.
    """
    side = kernel.shape[0]
    radius = side // 2
    embed = np.zeros(shape, dtype=np.float64)
    embed[:side, :side] = kernel
    embed = np.roll(embed, (-radius, -radius), axis=(0, 1))
    return np.fft.rfft2(embed)


def convolve(image: np.ndarray, kernel: np.ndarray,
             engine: str = "spatial", boundary: str = "replicate") -> np.ndarray:
    """Convolve an image with a 2-D kernel, preserving size.

    engine="spatial" runs a direct convolution with edge replication.
    engine="fourier" pads with edge replication, multiplies spectra on the
    periodic extension, and crops back; with padding at least the kernel
    radius the two engines coincide up to floating-point error.
    """
    if boundary != "replicate":
        raise ValueError(f"unsupported boundary mode: {boundary}")
    if engine not in ("spatial", "fourier"):
        raise ValueError(f"unknown engine: {engine}")
    _check_kernel_fits(image, kernel)
    conv = _convolve_spatial_2d if engine == "spatial" else _convolve_fourier_2d
    img = image.astype(np.float64, copy=False)
    if img.ndim == 2:
        return conv(img, kernel)
    return np.dstack([conv(img[:, :, c], kernel) for c in range(img.shape[2])])


def separable_gaussian(image: np.ndarray, params: GaussianParams,
                       truncation: float = DEFAULT_TRUNCATION) -> np.ndarray:
    """Apply an axis-aligned or isotropic Gaussian as two 1-D passes.

    Matches `convolve` with the full 2-D kernel on interior pixels. Raises
    ValueError for rotated anisotropic parameters; callers fall back to
    `convolve` in that case.
    """
    if not params.is_axis_aligned():
        raise ValueError(
            "separable path needs theta in {0, pi/2} or rho == 1; "
            "fall back to convolve")
    radius = math.ceil(truncation * params.sigma0)
    sigma_x, sigma_y = params.axis_sigmas()
    img = image.astype(np.float64, copy=False)
    out = ndimage.correlate1d(img, gaussian_taps_1d(sigma_y, radius),
                              axis=0, mode="nearest")
    out = ndimage.correlate1d(out, gaussian_taps_1d(sigma_x, radius),
                              axis=1, mode="nearest")
    return out
