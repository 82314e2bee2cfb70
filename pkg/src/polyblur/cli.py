"""Command-line front end: estimate, deblur, calibrate, bench, synth, curves.

Exit codes: 0 success, 1 usage error, 2 degenerate input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import bench as bench_mod
from .estimate import DEFAULT_CALIBRATION, CalibrationParams, estimate_blur
from .imgcore import (
    DegenerateImageError,
    GaussianParams,
    ImageIOError,
    read_image,
    write_image,
)
from .pipeline import PolyblurConfig, make_edge_smoother, polyblur, \
    polyblur_with_prefilter
from .polyfilter import PolyParams, response_curve_csv, solve_general, solve_p3

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for bad inputs."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_calibration_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-slope", type=float, default=None,
                   help="override calibrated feature slope")
    p.add_argument("--sigma-b", type=float, default=None,
                   help="override calibrated intrinsic blur")


def _calibration_from(args) -> CalibrationParams:
    if args.c_slope is None and args.sigma_b is None:
        return DEFAULT_CALIBRATION
    if args.c_slope is None or args.sigma_b is None:
        raise DegenerateImageError("--c-slope and --sigma-b must be given together")
    return CalibrationParams(c_slope=args.c_slope, sigma_b=args.sigma_b)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=6.0,
                   help="mid-frequency amplification (default 6)")
    p.add_argument("--b", type=float, default=1.0,
                   help="gain at fully attenuated frequencies (default 1)")
    p.add_argument("--iterations", type=int, default=1, choices=range(1, 6),
                   help="number of estimate+deblur passes")
    p.add_argument("--no-halo", action="store_true", help="skip halo removal")
    p.add_argument("--prefilter", choices=("none", "smoother"), default="none",
                   help="separate noise before deblurring and add it back after")
    p.add_argument("--engine", choices=("auto", "spatial", "fourier"),
                   default="auto")
    p.add_argument("--m", type=int, default=6, help="number of feature angles")
    p.add_argument("--q", type=float, default=0.0001,
                   help="normalization quantile")
    _add_calibration_flags(p)


def _config_from(args) -> PolyblurConfig:
    return PolyblurConfig(
        alpha=args.alpha, b=args.b, iterations=args.iterations,
        halo_removal=not args.no_halo, prefilter=args.prefilter,
        m_angles=args.m, q=args.q, calibration=_calibration_from(args),
        engine=args.engine)


def cmd_estimate(args) -> int:
    image = read_image(args.input)
    est = estimate_blur(image, calib=_calibration_from(args), m=args.m, q=args.q)
    print(est.to_json())
    return EXIT_OK


def cmd_deblur(args) -> int:
    cfg = _config_from(args)
    if cfg.prefilter == "smoother" and (args.report or args.mask_dump):
        print("polyblur: --report/--mask-dump are unavailable with --prefilter",
              file=sys.stderr)
        return EXIT_USAGE
    if args.mask_dump and not cfg.halo_removal:
        print("polyblur: --mask-dump needs halo removal enabled",
              file=sys.stderr)
        return EXIT_USAGE
    image = read_image(args.input)
    masks: list = []
    if cfg.prefilter == "smoother":
        out = polyblur_with_prefilter(image, cfg, make_edge_smoother())
    else:
        out, report = polyblur(image, cfg, mask_out=masks)
        if args.report:
            with open(args.report, "w") as fh:
                fh.write(report.to_json() + "\n")
    write_image(out, args.output)
    if args.mask_dump:
        write_image(masks[-1], args.mask_dump)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    paths = bench_mod.list_sharp_images(args.sharp_dir)
    images = [read_image(str(p)) for p in paths]
    calib, report = bench_mod.calibrate(images, K=args.k, seed=args.seed,
                                        noise_sigma=args.noise)
    print(report.to_json())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config_from(args)
    _, csv_text = bench_mod.run_benchmark(
        args.sharp_dir, cfg, n_images=args.n, seed=args.seed,
        noise_sigma=args.noise, include_times=not args.no_times)
    with open(args.output, "w") as fh:
        fh.write(csv_text)
    return EXIT_OK


def cmd_synth(args) -> int:
    sharp = read_image(args.input)
    params = GaussianParams(sigma0=args.sigma0, rho=args.rho,
                            theta=math.radians(args.theta))
    sample = bench_mod.BlurSample(params, noise_sigma=args.noise, seed=args.seed)
    write_image(bench_mod.synthesize_blurry(sharp, sample), args.output)
    record = {"sigma0": args.sigma0, "rho": args.rho, "theta_degrees": args.theta,
              "noise_sigma": args.noise, "seed": args.seed}
    with open(args.output + ".json", "w") as fh:
        fh.write(json.dumps(record) + "\n")
    return EXIT_OK


def cmd_curves(args) -> int:
    if args.degree == 3:
        coeffs = solve_p3(args.alpha, args.b)
    else:
        coeffs = solve_general(PolyParams(args.degree, args.alpha, args.b))
    with open(args.output, "w") as fh:
        fh.write(response_curve_csv(coeffs))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="polyblur",
                     description="Blind removal of mild Gaussian blur by "
                                 "polynomial reblurring.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate blur parameters of an image")
    p.add_argument("input")
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--q", type=float, default=0.0001)
    _add_calibration_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("deblur", help="deblur an image")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.add_argument("--report", help="write per-iteration JSON report here")
    p.add_argument("--mask-dump", help="write the final halo mask as PNG here")
    p.set_defaults(func=cmd_deblur)

    p = sub.add_parser("calibrate",
                       help="fit feature-model constants from sharp images")
    p.add_argument("sharp_dir")
    p.add_argument("--k", type=int, default=1000,
                   help="number of simulated blurry images")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--out", help="also write the fit record here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="run the synthetic mild-blur benchmark")
    p.add_argument("sharp_dir")
    p.add_argument("output", help="CSV output path")
    p.add_argument("--n", type=int, default=None, help="limit image count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--no-times", action="store_true",
                   help="omit timing columns for byte-reproducible output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="synthesize a seeded blurry image")
    p.add_argument("input", help="sharp source PNG")
    p.add_argument("output", help="blurry PNG; truth record goes to OUTPUT.json")
    p.add_argument("--sigma0", type=float, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0, help="degrees")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("curves", help="export the filter response curve as CSV")
    p.add_argument("output")
    p.add_argument("--alpha", type=float, default=6.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=3)
    p.set_defaults(func=cmd_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateImageError as exc:
        print(f"polyblur: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"polyblur: invalid input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ImageIOError, OSError) as exc:
        print(f"polyblur: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
