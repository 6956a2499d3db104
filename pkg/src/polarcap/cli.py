"""Command-line front-end.

Subcommands: kernel (print one W table), optimize (single-point joint
optimization), sweep (CSV over an SNR grid), ktc (re-check a solution file),
mc (Monte-Carlo verification of a solution file), miso (beamforming
reduction).  Data goes to stdout or --out; logs go to stderr.

Exit codes: 0 ok, 2 usage or malformed input file, 3 quadrature failure,
4 KTC verdict fail, 5 unwritable output path.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import kernel
from .capacity import (capacity_formula, awgn_unquantized_capacity,
                       ktc_certificate, miso_capacity, mutual_information)
from .mc_oracle import plugin_mi, simulate_joint
from .model import ApskInput, ChannelParams
from .optimizer import SolverOptions, alternating_optimize, sweep
from .quantizer import PolarQuantizerConfig

EXIT_USAGE = 2
EXIT_QUADRATURE = 3
EXIT_KTC_FAIL = 4
EXIT_OUTPUT = 5

SWEEP_COLUMNS = ("snr_db", "capacity_bits", "unquantized_bits", "ratio",
                 "class", "beta0", "rho0", "rho1", "beta1", "q1",
                 "ktc_min_lhs", "iters")


def _fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _parse_complex(s: str) -> complex:
    if ":" in s:
        re, im = s.split(":")
        return complex(float(re), float(im))
    return complex(s.replace(" ", ""))


def _parse_thresholds(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",")) if s else ()


def _channel(args) -> ChannelParams:
    return ChannelParams.from_snr_db(args.snr_db, args.power, args.g_los)


def _solver_opts(args) -> SolverOptions:
    kw = {}
    if getattr(args, "opts", None):
        with open(args.opts) as fh:
            kw = json.load(fh)
    if getattr(args, "skip_ktc", False):
        kw["skip_ktc"] = True
    for key in ("q1_starts", "q1_start_factors"):
        if key in kw and kw[key] is not None:
            kw[key] = tuple(kw[key])
    return SolverOptions(**kw)


def _write_text(path, text) -> None:
    try:
        if path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_OUTPUT)


def _load_solution(path):
    """Read a solution JSON produced by `optimize` / `miso`."""
    try:
        with open(path) as fh:
            d = json.load(fh)
        inp = ApskInput.from_dict(d["input"])
        channel = ChannelParams.from_dict(d["channel"])
        cfg = PolarQuantizerConfig.from_dict(d["quantizer"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        print(f"malformed solution file {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return inp, channel, cfg, d


def cmd_kernel(args) -> int:
    g = kernel.scaled_thresholds(_parse_thresholds(args.thresholds), 1.0)
    if g.size - 1 != 2 ** args.b2:
        print(f"expected {2 ** args.b2 - 1} thresholds for b2={args.b2}",
              file=sys.stderr)
        return EXIT_USAGE
    row = kernel.w_row(args.nu, args.theta, g, args.b1)
    for y1 in range(row.shape[0]):
        cells = "  ".join(f"{v:.9f}" for v in row[y1])
        print(f"y1={y1}:  {cells}  | row sum {row[y1].sum():.9f}")
    col = "  ".join(f"{v:.9f}" for v in row.sum(axis=0))
    print(f"column sums:  {col}")
    print(f"total: {row.sum():.9f}")
    return 0


def cmd_optimize(args) -> int:
    channel = _channel(args)
    opts = _solver_opts(args)
    record = alternating_optimize(channel, args.b1, args.b2, opts)
    cfg = PolarQuantizerConfig(args.b1, args.b2, record.thresholds)
    text = json.dumps(record.to_dict(channel, cfg), indent=2) + "\n"
    _write_text(args.out, text)
    if args.out not in (None, "-"):
        sys.stdout.write(text)
    if record.ktc is not None and not record.ktc.verdict:
        print("KTC certificate failed", file=sys.stderr)
        return EXIT_KTC_FAIL
    return 0


def _sweep_row(rec, channel) -> list:
    rings = sorted(rec.input.rings)
    rho0, b0r = rings[0]
    rho1, beta1 = rings[1] if len(rings) > 1 else ("", "")
    return [
        _fmt(rec.snr_db),
        _fmt(rec.capacity),
        _fmt(awgn_unquantized_capacity(channel.snr)),
        _fmt(rec.capacity / max(awgn_unquantized_capacity(channel.snr), 1e-300)),
        rec.constellation_class,
        _fmt(rec.input.beta0),
        _fmt(rho0),
        _fmt(rho1),
        _fmt(beta1),
        _fmt(rec.thresholds[0]) if rec.thresholds else "",
        _fmt(rec.ktc.min_lhs) if rec.ktc else "",
        _fmt(rec.iters),
    ]


def cmd_sweep(args) -> int:
    n = int(round((args.snr_to - args.snr_from) / args.snr_step)) + 1
    grid = [args.snr_from + i * args.snr_step for i in range(n)]
    opts = _solver_opts(args)
    records = sweep(grid, args.b1, args.b2, opts, args.power, args.g_los,
                    jobs=args.jobs)
    lines = [",".join(SWEEP_COLUMNS)]
    for s, rec in zip(grid, records):
        channel = ChannelParams.from_snr_db(s, args.power, args.g_los)
        lines.append(",".join(str(v) for v in _sweep_row(rec, channel)))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_ktc(args) -> int:
    inp, channel, cfg, _ = _load_solution(args.solution)
    report = ktc_certificate(inp, channel, cfg, alpha_max=args.alpha_max,
                             n_grid=args.n_grid, tol=args.tol)
    _write_text(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    return 0 if report.verdict else EXIT_KTC_FAIL


def cmd_mc(args) -> int:
    inp, channel, cfg, _ = _load_solution(args.solution)
    result = simulate_joint(inp, channel, cfg, args.n, args.seed,
                            jobs=args.jobs)
    if args.out not in (None, "-"):
        try:
            result.to_csv(args.out)
        except OSError as exc:
            print(f"cannot write output: {exc}", file=sys.stderr)
            return EXIT_OUTPUT
    mi_hat, bias = plugin_mi(result)
    mi = mutual_information(inp, channel, cfg)
    # per-symbol deviation of empirical cell frequencies from the kernel
    from .model import support_points
    g = kernel.scaled_thresholds(cfg.thresholds, math.sqrt(channel.sigma2))
    max_z = 0.0
    for s, pt in enumerate(support_points(inp, channel)):
        counts = result.joint_counts[s]
        m = counts.sum()
        if m == 0:
            continue
        nu = channel.gain2 * pt.amplitude ** 2 / channel.sigma2
        theta = pt.angle + math.atan2(channel.g_los.imag, channel.g_los.real)
        row = kernel.w_row(nu, theta, g, cfg.b1)
        freqs = counts / m
        stderr = np.sqrt(np.maximum(freqs * (1 - freqs), row * (1 - row)) / m)
        z = np.abs(freqs - row) / np.maximum(stderr, 1e-300)
        max_z = max(max_z, float(z[(freqs > 0) | (row > 1e-12)].max()))
    print(f"n={result.n} seed={result.seed} "
          f"plugin_mi={_fmt(mi_hat)} analytic_mi={_fmt(mi)} "
          f"bias_scale={_fmt(bias)} max_cell_z={_fmt(max_z)} "
          f"{'OK' if max_z < 4.0 else 'DEVIATES'} (threshold 4 stderr)")
    return 0


def cmd_miso(args) -> int:
    g_vec = [_parse_complex(s) for s in args.g_vec.split(",")]
    cfg = PolarQuantizerConfig(args.b1, args.b2,
                               _parse_thresholds(args.thresholds)
                               if args.thresholds else
                               tuple(1.0 + i for i in range(2 ** args.b2 - 1)))
    opts = _solver_opts(args)
    norm = float(np.linalg.norm(np.asarray(g_vec, dtype=complex)))
    sigma2 = args.sigma2
    if sigma2 is None:
        sigma2 = norm ** 2 * args.power / 10.0 ** (args.snr_db / 10.0)
    out = miso_capacity(g_vec, sigma2, args.power, cfg, opts)
    rec = out["record"]
    channel = ChannelParams(complex(norm), sigma2, args.power)
    d = rec.to_dict(channel, PolarQuantizerConfig(args.b1, args.b2,
                                                  rec.thresholds))
    d["beamformer"] = [{"re": v.real, "im": v.imag} for v in out["beamformer"]]
    text = json.dumps(d, indent=2) + "\n"
    _write_text(args.out, text)
    if args.out not in (None, "-"):
        sys.stdout.write(text)
    if rec.ktc is not None and not rec.ktc.verdict:
        print("KTC certificate failed", file=sys.stderr)
        return EXIT_KTC_FAIL
    return 0


def _add_channel_flags(p) -> None:
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--g-los", type=_parse_complex, default=1.0 + 0.0j,
                   help="complex LoS gain, 're:im' or a Python literal")


def _add_solver_flags(p) -> None:
    p.add_argument("--opts", help="SolverOptions overrides, JSON file")
    p.add_argument("--skip-ktc", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarcap")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="print one quantization-probability table")
    p.add_argument("--b1", type=int, required=True)
    p.add_argument("--b2", type=int, required=True)
    p.add_argument("--thresholds", default="",
                   help="noise-scaled magnitude thresholds, comma-separated")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.0)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("optimize", help="joint input/threshold optimization")
    p.add_argument("--b1", type=int, required=True)
    p.add_argument("--b2", type=int, required=True)
    _add_channel_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", help="solution JSON path (default stdout)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="optimize over an SNR grid, emit CSV")
    p.add_argument("--snr-from", type=float, required=True)
    p.add_argument("--snr-to", type=float, required=True)
    p.add_argument("--snr-step", type=float, required=True)
    p.add_argument("--b1", type=int, required=True)
    p.add_argument("--b2", type=int, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--g-los", type=_parse_complex, default=1.0 + 0.0j)
    _add_solver_flags(p)
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("POLARCAP_JOBS", "1")))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ktc", help="re-check a solution's optimality certificate")
    p.add_argument("--solution", required=True)
    p.add_argument("--alpha-max", type=float, default=None)
    p.add_argument("--n-grid", type=int, default=400)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ktc)

    p = sub.add_parser("mc", help="Monte-Carlo verification of a solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("POLARCAP_JOBS", "1")))
    p.add_argument("--out", help="counts CSV path")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("miso", help="beamforming reduction to a scalar channel")
    p.add_argument("--g-vec", required=True,
                   help="comma-separated complex gains, 're:im' each")
    p.add_argument("--b1", type=int, required=True)
    p.add_argument("--b2", type=int, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--snr-db", type=float, default=0.0,
                   help="used to derive sigma2 when --sigma2 is absent")
    p.add_argument("--thresholds", default=None,
                   help="ignored by the optimizer; placeholder geometry only")
    _add_solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_miso)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except kernel.QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE


if __name__ == "__main__":
    sys.exit(main())
