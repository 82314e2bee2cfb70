"""Single-image estimation of anisotropic Gaussian blur parameters.

The estimator scans the maximum directional-derivative magnitude over a
handful of angles, locates its minimum with a periodic cubic interpolant
(the blur's major axis suppresses gradients the most), and converts the
feature values at the minimum and at the orthogonal angle into standard
deviations through a calibrated linear model corrected for the intrinsic
blur of the gradient operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .imgcore import (
    DegenerateImageError,
    GaussianParams,
    GradientField,
    directional_derivative_max,
    gradient,
    luminance,
    quantile_normalize,
)

SIGMA_MIN = 0.3
SIGMA_MAX = 4.0

DEFAULT_M_ANGLES = 6
DEFAULT_QUANTILE = 0.0001

# Pixels skipped on each border before taking gradient maxima; one-sided
# differences there would bias the features.
BORDER_SKIP = 2

REFINE_GRID_DEG = 1


@dataclass(frozen=True)
class CalibrationParams:
    """Fitted constants of the feature-to-sigma model.

    c_slope scales the inverse gradient feature into a total blur level;
    sigma_b is the intrinsic blur the gradient pipeline itself adds, removed
    in quadrature.
    """

    c_slope: float
    sigma_b: float

    def __post_init__(self):
        if not self.c_slope > 0:
            raise ValueError(f"c_slope must be > 0, got {self.c_slope}")
        if self.sigma_b < 0:
            raise ValueError(f"sigma_b must be >= 0, got {self.sigma_b}")


# Fitted by the packaged calibrate command (K=1000, seed=7, 1% noise) on five
# sharp scikit-image sample photos; regenerate with
# scripts/fit_default_calibration.py.
DEFAULT_CALIBRATION = CalibrationParams(c_slope=0.391250, sigma_b=0.888750)


@dataclass(frozen=True)
class DirectionalFeatures:
    """Max directional-derivative magnitude at m angles spanning [0, pi)."""

    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.angles) < 3 or len(self.angles) != len(self.values):
            raise ValueError("need >= 3 angle/value pairs of equal length")
        spacing = math.pi / len(self.angles)
        if not np.allclose(np.diff(self.angles), spacing, atol=1e-9):
            raise ValueError("angles must be uniform with spacing pi/m")
        if np.any(self.values < 0):
            raise ValueError("feature values must be >= 0")


@dataclass(frozen=True)
class BlurEstimate:
    """Estimated blur parameters plus the features they came from."""

    params: GaussianParams
    f_theta: float
    f_theta_perp: float
    clamped_sigma0: bool
    clamped_sigma1: bool

    def to_record(self) -> dict:
        return {
            "sigma0": self.params.sigma0,
            "sigma1": self.params.sigma1,
            "theta_degrees": math.degrees(self.params.theta),
            "f_theta": self.f_theta,
            "clamped_sigma0": self.clamped_sigma0,
            "clamped_sigma1": self.clamped_sigma1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def compute_features(image: np.ndarray, m: int = DEFAULT_M_ANGLES) -> DirectionalFeatures:
    """Directional-derivative maxima at m uniform angles over [0, pi)."""
    if m < 3:
        raise ValueError(f"need at least 3 angles, got {m}")
    if image.ndim != 2:
        raise ValueError("compute_features expects a single-channel image")
    grad = gradient(image)
    k = BORDER_SKIP
    if image.shape[0] > 2 * k and image.shape[1] > 2 * k:
        grad = GradientField(gx=grad.gx[k:-k, k:-k], gy=grad.gy[k:-k, k:-k])
    angles = np.arange(m) * math.pi / m
    values = np.array([directional_derivative_max(grad, a) for a in angles])
    if not np.any(values > 0):
        raise DegenerateImageError("constant image: all directional features are zero")
    return DirectionalFeatures(angles=angles, values=values)


def refine_extremum(features: DirectionalFeatures) -> tuple[float, float, float]:
    """Locate the feature minimum between sample angles.

    Fits a pi-periodic cubic through the samples, evaluates it on a 1-degree
    grid, and returns (theta, f_theta, f_theta_perp). Ties resolve to the
    smallest angle.
    """
    if len(features.angles) < 4:
        raise ValueError("refinement needs at least 4 sampled angles")
    ang = np.append(features.angles, math.pi)
    val = np.append(features.values, features.values[0])
    spline = CubicSpline(ang, val, bc_type="periodic")
    grid = np.deg2rad(np.arange(0, 180, REFINE_GRID_DEG, dtype=np.float64))
    theta = float(grid[np.argmin(spline(grid))])
    f_theta = float(spline(theta))
    f_perp = float(spline((theta + math.pi / 2) % math.pi))
    return theta, f_theta, f_perp


def features_to_sigmas(f_theta: float, f_theta_perp: float,
                       calib: CalibrationParams) -> tuple[float, float, bool, bool]:
    """Invert the calibrated feature model into (sigma0, sigma1).

    The total blur seen by the feature is sqrt(sigma^2 + sigma_b^2), so the
    image blur is recovered in quadrature and clamped to the calibrated
    range [SIGMA_MIN, SIGMA_MAX].
    """
    sigmas = []
    flags = []
    for f in (f_theta, f_theta_perp):
        if f <= 0:
            raise ValueError(f"feature value must be > 0, got {f}")
        radicand = (calib.c_slope / f) ** 2 - calib.sigma_b ** 2
        raw = math.sqrt(max(radicand, SIGMA_MIN ** 2))
        clamped = radicand < SIGMA_MIN ** 2 or raw > SIGMA_MAX
        sigmas.append(min(max(raw, SIGMA_MIN), SIGMA_MAX))
        flags.append(clamped)
    return sigmas[0], sigmas[1], flags[0], flags[1]


def estimate_blur(image: np.ndarray,
                  calib: CalibrationParams = DEFAULT_CALIBRATION,
                  m: int = DEFAULT_M_ANGLES,
                  q: float = DEFAULT_QUANTILE) -> BlurEstimate:
    """Estimate the blur of an image: luminance, normalize, scan, refine."""
    if image.shape[0] < 32 or image.shape[1] < 32:
        raise ValueError("image must be at least 32x32")
    luma = luminance(image)
    normalized, _, _ = quantile_normalize(luma, q)
    features = compute_features(normalized, m=m)
    theta, f_theta, f_perp = refine_extremum(features)
    sigma0, sigma1, clamp0, clamp1 = features_to_sigmas(f_theta, f_perp, calib)
    if sigma1 > sigma0:
        sigma0, sigma1 = sigma1, sigma0
        clamp0, clamp1 = clamp1, clamp0
        f_theta, f_perp = f_perp, f_theta
        theta = (theta + math.pi / 2) % math.pi
    params = GaussianParams(sigma0=sigma0, rho=sigma1 / sigma0, theta=theta)
    return BlurEstimate(params=params, f_theta=f_theta, f_theta_perp=f_perp,
                        clamped_sigma0=clamp0, clamped_sigma1=clamp1)
