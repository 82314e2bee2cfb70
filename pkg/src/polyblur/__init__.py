"""Blind removal of mild blur by polynomial reblurring."""

from .imgcore import (
    DegenerateImageError,
    GaussianParams,
    GradientField,
    ImageIOError,
    convolve,
    directional_derivative_max,
    gradient,
    kernel_from_text,
    kernel_to_text,
    luminance,
    make_gaussian_kernel,
    quantile_normalize,
    read_image,
    separable_gaussian,
    write_image,
)
from .estimate import (
    DEFAULT_CALIBRATION,
    SIGMA_MAX,
    SIGMA_MIN,
    BlurEstimate,
    CalibrationParams,
    DirectionalFeatures,
    compute_features,
    estimate_blur,
    features_to_sigmas,
    refine_extremum,
)
from .polyfilter import (
    PolyParams,
    apply_poly_fourier,
    apply_poly_spatial,
    eval_poly,
    response_curve,
    response_curve_csv,
    solve_general,
    solve_p3,
)
from .halo import blend, reversal_map
from .pipeline import (
    PolyblurConfig,
    RunReport,
    make_edge_smoother,
    polyblur,
    polyblur_once,
    polyblur_with_prefilter,
)
from .bench import (
    BenchRecord,
    BlurSample,
    CalibrationReport,
    calibrate,
    psnr,
    run_benchmark,
    ssim,
    synthesize_blurry,
)

__version__ = "0.1.0"
