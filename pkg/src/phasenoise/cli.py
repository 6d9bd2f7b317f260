"""Command-line entry point: ``phasenoise {model,sim,psd,fit}``.

Every numeric option is validated (by building the model objects) before
any computation starts.  The default seed comes from ``PHASENOISE_SEED``
(0 when unset).  Exit status: 0 on success, 1 on an operation error (one
diagnostic line on stderr), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from ._validation import check_positive
from .fit import FitConfig, SegmentSpec, fit_pipeline
from .model import (
    OscillatorSpec,
    PllSpec,
    SpectrumModelParams,
    extended_psd,
    lorentzian_psd,
    pll_psd_series,
    simplified_psd,
)
from .spectral import PsdTrace, log_resample, welch_psd
from .timegen import alpha_to_baseband, pll_alpha_ensemble, wiener_alpha_ensemble

__all__ = ["cli_dispatch", "main", "build_parser"]

SEED_ENV = "PHASENOISE_SEED"
EXAMPLES = {"ubx": "ubx_synthetic.csv", "cbx": "cbx_synthetic.csv"}


class _UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise ValueError(f"{SEED_ENV} must be >= 0, got {seed}")
    return seed


def _add_oscillator_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("vco", "pll"), default="vco", help="source process")
    p.add_argument("--c", type=float, help="oscillator constant of a free-running oscillator [s]")
    p.add_argument("--c-ref", type=float, help="REF oscillator constant [s]")
    p.add_argument("--c-vco", type=float, help="VCO oscillator constant [s]")
    p.add_argument("--f-pll", type=float, help="PLL loop bandwidth [Hz]")
    p.add_argument("--scheme", choices=("euler", "exact"), default="euler")
    p.add_argument("--fs", type=float, required=True, help="sample rate [Hz]")
    p.add_argument("--n", type=_positive_int, required=True, help="samples per realization")
    p.add_argument("--seed", type=_non_negative_int, help=f"RNG seed (default ${SEED_ENV} or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasenoise", description="Oscillator and PLL phase-noise toolkit."
    )
    sub = parser.add_subparsers(dest="command", metavar="{model,sim,psd,fit}")

    m = sub.add_parser("model", help="evaluate a closed-form spectrum on a log grid")
    m.add_argument(
        "--kind", choices=("lorentzian", "pll-series", "simplified", "extended"), required=True
    )
    m.add_argument("--f0", type=float, help="carrier frequency [Hz]")
    m.add_argument("--c", type=float, help="oscillator constant [s] (lorentzian)")
    m.add_argument("--c-ref", type=float, help="REF oscillator constant [s] (pll-series)")
    m.add_argument("--c-vco", type=float, help="VCO oscillator constant [s] (pll-series)")
    m.add_argument("--f-pll", type=float, help="loop bandwidth [Hz]")
    m.add_argument("--f3db-ref", type=float, help="REF cut-off [Hz] (simplified, extended)")
    m.add_argument("--f-tr", type=float, help="transition frequency [Hz]")
    m.add_argument("--f-nf", type=float, help="noise-floor corner [Hz] (extended)")
    m.add_argument("--k-ref", type=float, default=3.0)
    m.add_argument("--k-vco", type=float, default=3.0)
    m.add_argument("--fmin", type=float, default=1.0)
    m.add_argument("--fmax", type=float, default=1e7)
    m.add_argument("--ppd", type=_positive_int, default=100, help="points per decade")
    m.add_argument("-o", "--output", help="output CSV (default stdout)")

    s = sub.add_parser("sim", help="generate time-shift paths alpha(t)")
    _add_oscillator_options(s)
    s.add_argument("--realizations", type=_positive_int, default=1)
    s.add_argument("--format", choices=("csv", "bin"), default="csv")
    s.add_argument(
        "-o",
        "--output",
        required=True,
        help="output path; with several realizations '_r<i>' is appended to the stem",
    )

    p = sub.add_parser("psd", help="Welch phase-noise spectrum of simulated or loaded paths")
    p.add_argument("--input", help="time series file (.csv or .bin) instead of simulating")
    p.add_argument("--f0", type=float, required=True, help="carrier frequency [Hz]")
    p.add_argument("--kind", choices=("vco", "pll"), default="vco")
    p.add_argument("--c", type=float)
    p.add_argument("--c-ref", type=float)
    p.add_argument("--c-vco", type=float)
    p.add_argument("--f-pll", type=float)
    p.add_argument("--scheme", choices=("euler", "exact"), default="euler")
    p.add_argument("--fs", type=float, help="sample rate [Hz] (simulation)")
    p.add_argument("--n", type=_positive_int, help="samples per realization (simulation)")
    p.add_argument("--seed", type=_non_negative_int)
    p.add_argument("--averages", type=_positive_int, default=1, help="realizations to average")
    p.add_argument("--window", choices=("hann", "rect"), default="hann")
    p.add_argument("--segment-len", type=_positive_int, help="Welch segment length (default n/8)")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--ppd", type=_positive_int, help="log-resample to this many points per decade")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")

    f = sub.add_parser("fit", help="fit the spectrum model to a CSV trace")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("input", nargs="?", help="PSD CSV (offset_hz,psd_dbc_hz)")
    src.add_argument("--example", choices=sorted(EXAMPLES), help="use a bundled synthetic trace")
    f.add_argument("--f0", type=float, default=2e9, help="carrier frequency [Hz]")
    f.add_argument("--k-ref", type=float, default=3.0)
    f.add_argument("--k-vco", type=float, default=3.0)
    for region in ("ref", "transition", "vco", "noise-floor"):
        f.add_argument(
            f"--{region}", nargs=2, type=float, metavar=("LO", "HI"), help=f"{region} bounds [Hz]"
        )
    f.add_argument("--no-outlier-mask", action="store_true")
    f.add_argument("-o", "--output", help="output JSON (default stdout)")
    return parser


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise _UsageError(
            f"{args.command} --kind {args.kind} requires "
            + ", ".join("--" + n.replace("_", "-") for n in missing)
        )


def _emit(data: bytes, output) -> None:
    if output is None or output == "-":
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()
    else:
        io.atomic_write(output, data)


def _csv_bytes(trace: PsdTrace) -> bytes:
    rows = [io.PSD_HEADER]
    rows.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(trace.freqs, trace.levels))
    return ("\n".join(rows) + "\n").encode("utf-8")


def _log_grid(fmin: float, fmax: float, ppd: int) -> np.ndarray:
    if not (np.isfinite(fmin) and np.isfinite(fmax)) or not 0 < fmin < fmax:
        raise ValueError(f"need 0 < fmin < fmax, got {fmin}, {fmax}")
    decades = np.log10(fmax / fmin)
    count = max(int(round(decades * ppd)), 1) + 1
    return np.logspace(np.log10(fmin), np.log10(fmax), count)


def _cmd_model(args) -> None:
    if args.kind == "lorentzian":
        _require(args, "f0", "c")
        spec = OscillatorSpec(args.f0, args.c)
        grid = _log_grid(args.fmin, args.fmax, args.ppd)
        levels = lorentzian_psd(spec, grid)
    elif args.kind == "pll-series":
        _require(args, "f0", "c_ref", "c_vco", "f_pll")
        pll = PllSpec.from_constants(args.c_ref, args.c_vco, args.f_pll, f0=args.f0)
        grid = _log_grid(args.fmin, args.fmax, args.ppd)
        levels = pll_psd_series(pll, grid)
    else:
        needed = ["f3db_ref", "f_tr", "f_pll"] + (["f_nf"] if args.kind == "extended" else [])
        _require(args, *needed)
        f_nf = args.f_nf if args.kind == "extended" else None
        params = SpectrumModelParams(
            args.f3db_ref, args.f_tr, args.f_pll, f_nf, k_ref=args.k_ref, k_vco=args.k_vco
        )
        grid = _log_grid(args.fmin, args.fmax, args.ppd)
        levels = (extended_psd if f_nf is not None else simplified_psd)(params, grid)
    _emit(_csv_bytes(PsdTrace(grid, levels)), args.output)


def _source(args):
    """Validate the oscillator options and return a sampler ``(realizations) -> (R, n) alpha``."""
    fs = check_positive(args.fs, "fs")
    seed = args.seed if args.seed is not None else _default_seed()
    if args.kind == "vco":
        _require(args, "c")
        spec = OscillatorSpec(1.0, args.c)
        return lambda r: wiener_alpha_ensemble(spec, fs, args.n, r, seed)
    _require(args, "c_ref", "c_vco", "f_pll")
    pll = PllSpec.from_constants(args.c_ref, args.c_vco, args.f_pll)
    if args.scheme == "euler" and pll.loop_rate / fs >= 2.0:
        raise ValueError(f"explicit Euler step unstable: 2*pi*f_pll/fs = {pll.loop_rate / fs:.4g} >= 2")
    return lambda r: pll_alpha_ensemble(pll, fs, args.n, r, seed, scheme=args.scheme)[0]


def _cmd_sim(args) -> None:
    sample = _source(args)
    out = Path(args.output)
    if args.realizations > 1 and out.parent and not out.parent.exists():
        raise OSError(f"cannot write {out}: directory does not exist")
    paths = sample(args.realizations)
    dt = 1.0 / args.fs
    for r, alpha in enumerate(paths):
        target = out if args.realizations == 1 else out.with_name(f"{out.stem}_r{r}{out.suffix}")
        if args.format == "csv":
            io.write_series_csv(dt, alpha, target)
        else:
            io.write_series_binary(dt, alpha, target)


def _cmd_psd(args) -> None:
    f0 = check_positive(args.f0, "f0")
    if not 0.0 <= args.overlap <= 0.9:
        raise ValueError(f"overlap must be in [0, 0.9], got {args.overlap}")
    if args.input is not None:
        reader = io.read_series_binary if args.input.endswith(".bin") else io.read_series_csv
        dt, alpha = reader(args.input)
        fs = 1.0 / dt
        alpha = alpha[np.newaxis, :]
    else:
        if args.fs is None or args.n is None:
            raise _UsageError("psd without --input requires --fs and --n")
        sample = _source(args)
        fs = args.fs
        alpha = sample(args.averages)
    trace = welch_psd(
        alpha_to_baseband(alpha, f0),
        fs,
        segment_len=args.segment_len,
        overlap=args.overlap,
        window=args.window,
    )
    finite = np.isfinite(trace.levels)
    if not finite.all():
        trace = PsdTrace(trace.freqs[finite], trace.levels[finite], trace.meta)
    if args.ppd is not None:
        trace = log_resample(trace, args.ppd)
    _emit(_csv_bytes(trace), args.output)


def _cmd_fit(args) -> None:
    bounds = {
        "ref": args.ref,
        "transition": args.transition,
        "vco": args.vco,
        "noise_floor": args.noise_floor,
    }
    given = [k for k, v in bounds.items() if v is not None]
    if given and len(given) != 4:
        raise _UsageError("manual region bounds need all of --ref --transition --vco --noise-floor")
    segments = SegmentSpec(**{k: tuple(v) for k, v in bounds.items()}) if given else None
    config = FitConfig(
        k_ref=args.k_ref,
        k_vco=args.k_vco,
        segments=segments,
        outlier_db=None if args.no_outlier_mask else 10.0,
    )
    if args.example is not None:
        ref = resources.files("phasenoise").joinpath("data", EXAMPLES[args.example])
        with resources.as_file(ref) as path:
            trace = io.parse_psd_csv(path)
    else:
        trace = io.parse_psd_csv(args.input)
    report = fit_pipeline(trace, args.f0, config)
    if args.output is None or args.output == "-":
        sys.stdout.write(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n")
    else:
        io.write_fit_report_json(report, args.output)


_COMMANDS = {"model": _cmd_model, "sim": _cmd_sim, "psd": _cmd_psd, "fit": _cmd_fit}


def cli_dispatch(argv=None) -> int:
    """Run one command; returns the process exit status."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"phasenoise {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError, ArithmeticError) as exc:
        message = " ".join(str(exc).split())
        print(f"phasenoise {args.command}: error: {message}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_dispatch())
