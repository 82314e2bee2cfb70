"""Shared test corpora built from scikit-image's bundled sample photos.

The calibration corpus and the benchmark corpus are disjoint at the source
level: calibration constants must never be fitted on images (or crops of
images) that the benchmark scores.
"""

import numpy as np
from skimage import data

from polyblur import write_image

CALIBRATION_NAMES = ["text", "coins", "camera", "gravel", "hubble_deep_field"]


def load(name):
    raw = getattr(data, name)()
    img = np.asarray(raw, dtype=np.float64)
    if raw.dtype == np.uint8:
        img /= 255.0
    elif raw.dtype == bool:
        img = img.astype(np.float64)
    if img.ndim == 3 and img.shape[2] == 4:
        img = img[:, :, :3]
    return img


def calibration_images():
    return [load(n) for n in CALIBRATION_NAMES]


def bench_images():
    """Eleven sharp members crops/photos, pixel-disjoint, non-calibration sources."""
    astro = load("astronaut")
    coffee = load("coffee")
    grass = load("grass")
    rocket = load("rocket")
    return {
        "astro_ul": astro[0:256, 0:256],
        "astro_ll": astro[256:512, 0:256],
        "astro_lr": astro[256:512, 256:512],
        "grass_ul": grass[0:256, 0:256],
        "grass_ll": grass[256:512, 0:256],
        "grass_lr": grass[256:512, 256:512],
        "coffee_l": coffee[:, 0:300],
        "coffee_r": coffee[:, 300:600],
        "page": load("page"),
        "horse": load("horse"),
        "rocket_body": rocket[0:256, 180:480],
    }


def sharp_images():
    """Five sharp whole photos used by the sharp-input safety checks."""
    return {n: load(n) for n in ["astronaut", "coffee", "page", "grass", "horse"]}


def write_corpus(dirpath, images):
    for name, img in sorted(images.items()):
        write_image(img, str(dirpath / f"{name}.png"))


def natural_gray(step=4):
    """Small grayscale natural test image (camera, downsampled)."""
    return load("camera")[::step, ::step]
