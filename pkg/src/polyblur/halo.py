"""Halo detection and removal.

Deblurring overshoots show up as gradient reversal: pixels where the
restored image slopes against the input. The reversal map is positive
exactly there, and blending the input back in with the smallest weight
that cancels the reversal removes the halo while keeping the rest of the
sharpening.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imgcore import gradient

DENOM_EPS = 1e-12


def _channel_planes(image: np.ndarray) -> list[np.ndarray]:
    if image.ndim == 2:
        return [image]
    return [image[:, :, c] for c in range(image.shape[2])]


def reversal_map(v: np.ndarray, vbar: np.ndarray) -> np.ndarray:
    """Gradient-reversal strength M = -grad(v) . grad(vbar), per pixel.

    Channels are reduced by summing the per-channel dot products, so one
    map drives all channels. Positive values mark reversal.
    """
    if v.shape != vbar.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {vbar.shape}")
    m = np.zeros(v.shape[:2])
    for pv, pb in zip(_channel_planes(v), _channel_planes(vbar)):
        gv = gradient(pv)
        gb = gradient(pb)
        m -= gv.gx * gb.gx + gv.gy * gb.gy
    return m


def blend_weights(grad_sq: np.ndarray, reversal: np.ndarray) -> np.ndarray:
    """Smallest input weight that cancels reversal: max(M/(|grad v|^2+M), 0).

    The denominator is floored so flat regions (zero input gradient) with
    positive reversal resolve to full input weight.
    """
    return np.where(reversal > 0,
                    reversal / np.maximum(grad_sq + reversal, DENOM_EPS), 0.0)


def blend(v: np.ndarray, vbar: np.ndarray,
          smooth_mask_sigma: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Convex-combine input and deblurred images to cancel halos.

    Uses the smallest weight that removes the reversal where M > 0 and
    keeps the deblurred image elsewhere. Returns (blended, z).
    smooth_mask_sigma > 0 applies a Gaussian to z first, matching the
    slowly-varying-z assumption behind the weight formula.
    """
    if v.shape != vbar.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {vbar.shape}")
    grad_sq = np.zeros(v.shape[:2])
    m = np.zeros(v.shape[:2])
    for pv, pb in zip(_channel_planes(v), _channel_planes(vbar)):
        gv = gradient(pv)
        gb = gradient(pb)
        grad_sq += gv.gx ** 2 + gv.gy ** 2
        m -= gv.gx * gb.gx + gv.gy * gb.gy
    z = blend_weights(grad_sq, m)
    if smooth_mask_sigma > 0:
        z = ndimage.gaussian_filter(z, smooth_mask_sigma, mode="nearest")
        z = np.clip(z, 0.0, 1.0)
    zc = z if v.ndim == 2 else z[:, :, np.newaxis]
    return zc * v + (1.0 - zc) * vbar, z
