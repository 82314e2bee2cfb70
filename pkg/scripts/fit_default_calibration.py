#!/usr/bin/env python3
"""Regenerate the default calibration constants shipped in estimate.py.

Runs the packaged calibration on five sharp scikit-image sample photos
(K=1000 simulated blurry images, seed 7, 1% noise) and prints the fitted
constants. Requires scikit-image. The corpus here must stay disjoint from
the benchmark corpus used by the test suite (tests/corpus.py).
"""

import numpy as np
from skimage import data

import polyblur

CORPUS = ["text", "coins", "camera", "gravel", "hubble_deep_field"]


def main():
    images = [np.asarray(getattr(data, name)(), dtype=np.float64) / 255.0
              for name in CORPUS]
    calib, report = polyblur.calibrate(images, K=1000, seed=7)
    print(report.to_json())
    print(f"DEFAULT_CALIBRATION = CalibrationParams("
          f"c_slope={calib.c_slope:.6f}, sigma_b={calib.sigma_b:.6f})")


if __name__ == "__main__":
    main()
