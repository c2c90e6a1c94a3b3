"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import benchmark, io
from .config import RunConfig
from .errors import AJDCError, NumericalError, ValidationError, stage
from .evaluation import align_components, performance_index, system_matrix
from .pipeline import bss_filter, extract_sources, recording_stacks, separate
from .sim import mix

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


def _parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--band expects f_min:f_max, got {text!r}") from None


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--epoch-length", type=int)
    p.add_argument("--overlap", type=float)
    p.add_argument("--window", choices=("rectangular", "hann"))
    p.add_argument("--band", type=_parse_band, metavar="F_MIN:F_MAX")
    p.add_argument("--intervals", type=int, help="split the recording into this many equal intervals")
    p.add_argument("--conditions", type=_parse_int_list, metavar="K1,K2,...",
                   help="condition label per interval")
    p.add_argument("--no-condition-average", action="store_true",
                   help="keep intervals separate instead of averaging within conditions")
    p.add_argument("--components", type=int, metavar="M")
    p.add_argument("--solver", choices=("orthogonal", "nonorthogonal", "gevd2"))
    p.add_argument("--weighting", choices=("uniform", "nondiag"))
    p.add_argument("--cutoff", type=float, metavar="HZ")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--seed", type=int)


def run_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "epoch_length": args.epoch_length, "overlap": args.overlap, "window": args.window,
        "intervals": args.intervals, "condition_labels": args.conditions,
        "n_components": args.components, "solver": args.solver,
        "weighting": args.weighting, "cutoff": args.cutoff, "tolerance": args.tolerance,
        "max_iterations": args.max_iterations, "seed": args.seed,
    }
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    if args.band is not None:
        cfg.f_min, cfg.f_max = args.band
    if args.no_condition_average:
        cfg.average_conditions = False
    return cfg.validate()


def cmd_simulate(args) -> int:
    n = args.sensors
    m = 2 if args.kind == "condition" else (args.sources or n)
    if m > n:
        raise ValidationError(f"--sources M={m} exceeds --sensors N={n}; need M <= N")
    if args.kind == "ar":
        truth = benchmark.coloration_truth(args.seed, m, args.length, args.sampling_rate,
                                           n_sensors=n, noise_sd=args.noise_sd)
    elif args.kind == "envelope":
        truth = benchmark.nonstationarity_truth(args.seed, m, args.intervals, args.length,
                                                args.sampling_rate, n_sensors=n)
    else:
        truth = benchmark.condition_truth(args.seed, args.length, args.sampling_rate,
                                          max(1, args.intervals // 2), n_sensors=n)
    if args.kind != "ar" and args.noise_sd:
        truth = type(truth)(truth.mixing, truth.sources, args.noise_sd, truth.noise_seed,
                            truth.interval_boundaries, truth.condition_labels, truth.meta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec = mix(truth)
    name = "recording.bin" if args.binary else "recording.csv"
    io.write_recording(rec, out / name, binary=args.binary)
    io.write_truth(truth, out)
    print(f"wrote {out / name} ({rec.n_channels} channels x {rec.n_samples} samples) "
          f"and ground truth to {out / 'truth.json'}")
    return EXIT_OK


def cmd_cospectra(args) -> int:
    cfg = run_config(args)
    rec = io.read_recording(args.recording)
    cfg.validate(rec.n_channels, rec.n_samples, rec.sampling_rate)
    with stage("cospectra"):
        stacks = recording_stacks(rec, cfg)
    out = Path(args.out)
    for s in stacks:
        tag = f"cond{s.condition}" if s.interval is None else f"int{s.interval}_cond{s.condition}"
        io.write_stack(s, out / f"stack_{tag}")
    print(f"wrote {len(stacks)} cospectra stacks to {out}")
    return EXIT_OK


def cmd_separate(args) -> int:
    cfg = run_config(args)
    rec = io.read_recording(args.recording)
    res = separate(rec, cfg)
    model = res.model
    model.provenance["set_sha256"] = io.set_digest(res.dset)
    model.provenance["config"] = cfg.to_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_model(model, out / "model.json")
    comps = extract_sources(model, rec)
    t = np.arange(rec.n_samples) / rec.sampling_rate
    io.write_table(out / "components.csv",
                   ["t"] + [f"c{i + 1}" for i in range(model.n_components)], [t, *comps])
    spectra = np.einsum("mi,fij,mj->fm", model.B, res.pooled.matrices, model.B)
    io.write_table(out / "spectra.csv",
                   ["f_hz"] + [f"c{i + 1}" for i in range(model.n_components)],
                   [res.pooled.grid.frequencies, *spectra.T])
    io.write_set(res.dset, out / "set")
    io.write_trace(res.diagonalizer.criterion_trace, out / "trace.csv")
    print(f"separated {model.n_components} components with {cfg.solver} "
          f"({res.diagonalizer.sweeps} iterations); outputs in {out}")
    for w in res.diagonalizer.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not res.diagonalizer.converged:
        raise NumericalError(
            f"[solver] {cfg.solver} did not converge within {cfg.max_iterations} iterations "
            f"(outputs were written for inspection)")
    return EXIT_OK


def cmd_apply(args) -> int:
    model = io.read_model(args.model)
    rec = io.read_recording(args.recording)
    if args.keep is not None:
        keep = np.asarray(args.keep, dtype=bool)
    else:
        keep = np.ones(model.n_components, dtype=bool)
        for i in args.drop or []:
            if not 0 <= i < model.n_components:
                raise ValidationError(f"--drop index {i} outside 0..{model.n_components - 1}")
            keep[i] = False
    filtered = bss_filter(model, rec, keep)
    io.write_recording(filtered, args.out, binary=args.binary)
    print(f"wrote filtered recording ({int(keep.sum())}/{keep.size} components kept) to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = io.read_model(args.model)
    truth = io.read_truth(args.truth)
    G = system_matrix(model.B, truth.mixing)
    pi = performance_index(G)
    if args.recording is not None:
        estimated = extract_sources(model, io.read_recording(args.recording))
    else:
        estimated = G @ truth.source_matrix
    alignment = align_components(estimated, truth.source_matrix)
    report = {"performance_index": pi, **alignment.as_dict(),
              "system_matrix": G.tolist(), "solver": model.provenance}
    if args.out:
        io.write_report(report, args.out)
    print(f"performance index {pi:.6g}; min |correlation| {alignment.correlations.min():.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ajdc", description="Blind source separation by joint diagonalization of cospectra")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic mixture and its ground truth")
    p.add_argument("--kind", choices=("ar", "envelope", "condition"), default="ar")
    p.add_argument("--sensors", type=int, default=8, metavar="N")
    p.add_argument("--sources", type=int, metavar="M", help="defaults to N")
    p.add_argument("--length", type=int, default=2 ** 13, metavar="T")
    p.add_argument("--sampling-rate", type=float, default=128.0)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--intervals", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="raw float64 instead of CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cospectra", help="estimate Welch cospectra per interval/condition")
    p.add_argument("recording", type=Path)
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cospectra)

    p = sub.add_parser("separate", help="estimate a separating model and its components")
    p.add_argument("recording", type=Path)
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("apply", help="BSS filtering: keep a subset of components")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--recording", type=Path, required=True)
    mask = p.add_mutually_exclusive_group()
    mask.add_argument("--keep", type=_parse_int_list, metavar="0/1,...")
    mask.add_argument("--drop", type=_parse_int_list, metavar="I,J,...")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("evaluate", help="score a model against ground truth")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--recording", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (AJDCError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
