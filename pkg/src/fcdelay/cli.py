"""
Command-line front end.

``fcdelay synth``  writes example responses as CSV.
``fcdelay check``  reports the continuation error per M and a verdict.
``fcdelay delay``  estimates the delay and writes report.json plus curves.

Exit status is 0 on success, 1 on bad input and 2 when every M failed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .continuation import ContinuationConfig, SvdError, build_continuation, \
    reconstruction_error
from .delay import AllFailed, WindowPolicy, estimate_delay
from .ingest import Report, load_response, write_csv, write_outputs
from .spectrum import rescale_and_symmetrize
from .synth import NoiseSpec, add_sine_noise, sample

DEFAULT_M = (200, 400, 600, 800)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def default_xi():
    raw = os.environ.get("FCDELAY_XI")
    if raw is None:
        return 1e-13
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"FCDELAY_XI is not a number: {raw!r}") from None


def _m_list(text):
    try:
        vals = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad M list {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("M values must be positive")
    return vals


def _element(text):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"element must look like i,j: {text!r}") from None
    return i, j


def _narrow(text):
    if text == "auto":
        return "auto"
    f = float(text)
    if not 0 <= f <= 1:
        raise argparse.ArgumentTypeError("narrow must be auto or in [0, 1]")
    return f or None


def build_parser():
    p = _Parser(prog="fcdelay", description=__doc__.split("\n")[1])
    p.add_argument("--version", action="version",
                   version=f"fcdelay {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write an example response as CSV")
    s.add_argument("example", choices=["four-pole", "tline", "dawson"])
    s.add_argument("--n", type=int, default=800, help="number of samples")
    s.add_argument("--t0", type=float, help="delay in seconds")
    s.add_argument("--wmax", type=float, help="max angular frequency")
    s.add_argument("--out", help="output path (default stdout)")

    def common(q):
        q.add_argument("file", help="CSV or Touchstone .sNp file")
        q.add_argument("--element", type=_element, action="append",
                       help="matrix element i,j (repeatable, default 1,1)")
        q.add_argument("--m", type=_m_list, default=list(DEFAULT_M),
                       help="comma separated coefficient counts")
        q.add_argument("--b", type=float, default=2.0, help="period")
        q.add_argument("--xi", type=float, help="singular value cutoff")
        q.add_argument("--noise-amp", type=float, default=0.0,
                       help="add a*sin(10 pi x) to Re H")
        q.add_argument("--out", default=".", help="output directory")

    c = sub.add_parser("check", help="causality check")
    common(c)
    c.add_argument("--tol", type=float, default=1e-8,
                   help="error level, relative to max|H|, deemed causal")

    d = sub.add_parser("delay", help="delay estimation")
    common(d)
    d.add_argument("--strategy", choices=["critical", "extrapolate"],
                   default="extrapolate")
    d.add_argument("--tgrid", type=int, default=120,
                   help="points of the base sweep on [0, 4 pi]")
    d.add_argument("--narrow", type=_narrow, default="auto",
                   help="central window fraction, 0 to disable, or auto")
    d.add_argument("--parallel", type=int, default=1)
    d.add_argument("--plot", action="store_true",
                   help="also render delay.png next to the CSV files")
    return p


def _synth(args, out):
    resp = sample(args.example, args.n, args.t0, args.wmax)
    text = write_csv(resp)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def _responses(args):
    elems = args.element or [(1, 1)]
    return [(e, load_response(args.file, e)) for e in elems]


def _check(args, out):
    xi = args.xi if args.xi is not None else default_xi()
    noise = NoiseSpec(args.noise_amp) if args.noise_amp else None
    out.write("element,M,err_re_inf,err_im_inf,discarded,verdict\n")
    for (i, j), resp in _responses(args):
        grid = rescale_and_symmetrize(resp)
        if noise:
            grid = add_sine_noise(grid, noise)
        scale = float(np.abs(resp.values).max()) or 1.0
        levels = []
        for M in args.m:
            if M > resp.n:
                raise UsageError(f"M={M} exceeds the {resp.n} samples")
            cfg = ContinuationConfig(M, args.b, xi)
            cont, info = build_continuation(grid, cfg, constants=False)
            err = reconstruction_error(grid, cont)
            level = max(err.err_re_inf, err.err_im_inf)
            levels.append(level)
            verdict = "causal" if level <= args.tol * scale else "non-causal"
            out.write(f"S{i}{j},{M},{err.err_re_inf:.6e},{err.err_im_inf:.6e},"
                      f"{info.K},{verdict}\n")
        best = min(levels)
        if best <= args.tol * scale:
            out.write(f"# S{i}{j}: causal (error {best:.1e})\n")
        else:
            out.write(f"# S{i}{j}: non-causal at level ~{best:.1e}\n")
    return 0


def _fit_dict(f):
    return {"a0": f.a0, "a1": f.a1, "a2": f.a2, "t_range": list(f.t_range),
            "e_range": list(f.e_range), "rms_residual": f.rms_residual,
            "n_points": f.n_points}


def _delay(args, out):
    xi = args.xi if args.xi is not None else default_xi()
    noise = NoiseSpec(args.noise_amp) if args.noise_amp else None
    policy = WindowPolicy(narrow=args.narrow)
    config = {"m": list(args.m), "b": args.b, "xi": xi,
              "strategy": args.strategy, "tgrid": args.tgrid,
              "narrow": args.narrow, "noise_amp": args.noise_amp}
    report = Report(input=os.path.basename(args.file), config=config,
                    tool=f"fcdelay {__version__}")
    resps = _responses(args)
    out.write("element,M,t_scaled,t_seconds,plateau,included,flags\n")
    failed_all = True
    for (i, j), resp in resps:
        tag = f"S{i}{j}"
        prefix = "" if len(resps) == 1 else f"{tag}_"
        for M in args.m:
            if M > resp.n:
                raise UsageError(f"M={M} exceeds the {resp.n} samples")
        try:
            est = estimate_delay(resp, args.m, b=args.b, xi=xi,
                                 strategy=args.strategy, policy=policy,
                                 n_grid=args.tgrid, noise=noise,
                                 parallel=args.parallel)
        except AllFailed as exc:
            report.elements.append({"element": tag, "error": str(exc)})
            out.write(f"# {tag}: all M failed: {exc}\n")
            continue
        failed_all = False
        rows = []
        for e in est.per_m:
            rows.append({"M": e.M, "t_scaled": e.t_scaled,
                         "t_seconds": e.seconds, "strategy": e.strategy,
                         "plateau": e.plateau, "narrowed": e.narrowed,
                         "included": e.included, "flags": list(e.flags),
                         "fit": _fit_dict(e.fit)})
            out.write(f"{tag},{e.M},{e.t_scaled:.6g},{e.seconds:.6e},"
                      f"{e.plateau:.2e},{int(e.included)},"
                      f"{';'.join(e.flags)}\n")
        plateau = min(e.plateau for e in est.per_m)
        scale = float(np.abs(resp.values).max()) or 1.0
        report.elements.append({
            "element": tag, "estimates": rows, "averaged_s": est.averaged,
            "plateau": plateau,
            "verdict": "causal" if plateau <= 1e-8 * scale else "non-causal",
            "failures": {str(k): v for k, v in est.failures.items()}})
        out.write(f"# {tag}: averaged delay {est.averaged:.6e} s\n")
        write_outputs(report, [e.curve for e in est.per_m], args.out,
                      [(e.M, e.fit, e.curve.scale_a) for e in est.per_m],
                      xi, prefix)
        if args.plot:
            from .plotting import plot_estimate
            path = os.path.join(args.out, f"{prefix}delay.png")
            plot_estimate(est, path, xi, title=tag)
    write_outputs(report, (), args.out)
    return 2 if failed_all else 0


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _synth(args, out)
        if args.command == "check":
            return _check(args, out)
        return _delay(args, out)
    except (UsageError, ValueError, OSError) as exc:
        print(f"fcdelay: error: {exc}", file=sys.stderr)
        return 1
    except SvdError as exc:
        print(f"fcdelay: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
