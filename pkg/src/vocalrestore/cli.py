"""Command-line surface: restore, degrade, eval, rank, bench.

All commands write outputs atomically (temp file + rename) and exit nonzero
on error: 2 missing input, 3 sample-rate mismatch, 4 length mismatch,
5 disconnected comparison graph, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import degrade as degrade_mod
from . import losses as losses_mod
from . import ranking as ranking_mod
from .audio_io import Waveform, read_wav, write_wav
from .errors import (
    ConnectivityError,
    LengthMismatchError,
    SampleRateError,
    VocalRestoreError,
)
from .generator import ModelConfig, load_weights, restore_chunked
from .spectral import StftParams, stft

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_FILE = 2
EXIT_SAMPLE_RATE = 3
EXIT_LENGTH = 4
EXIT_DISCONNECTED = 5


def _atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_wav(wave: Waveform, path: str, encoding: str = "float32") -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        write_wav(wave, tmp, encoding)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(path: str) -> str:
    if not os.path.exists(path):
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_MISSING_FILE)
    return path


def _load_model(args):
    weights = load_weights(_require(args.weights))
    with open(_require(args.config)) as fh:
        config = ModelConfig.from_text(fh.read())
    return weights, config


@dataclass
class BenchReport:
    runs: int
    median_s: float
    p90_s: float
    mean_s: float
    audio_s: float
    rtf: float
    threads: int

    def to_json(self) -> str:
        d = {
            "runs": self.runs,
            "median_s": self.median_s,
            "p90_s": self.p90_s,
            "mean_s": self.mean_s,
            "audio_s": self.audio_s,
            "rtf": self.rtf,
            "threads": self.threads,
        }
        return json.dumps(d, sort_keys=True)


def run_bench(
    weights, config: ModelConfig, seconds: float, runs: int, warmup: int,
    seed: int = 0, threads: int = 0,
) -> BenchReport:
    """Time repeated restore() calls on a seeded noise input."""
    n = int(seconds * config.sample_rate)
    rng = np.random.Generator(np.random.Philox(seed))
    wave = Waveform(0.1 * rng.standard_normal(n), config.sample_rate)

    ctx = None
    if threads > 0:
        try:
            from threadpoolctl import threadpool_limits
            # Oversubscribing physical cores thrashes BLAS; cap at what exists.
            ctx = threadpool_limits(limits=min(threads, os.cpu_count() or 1))
        except ImportError:
            pass

    try:
        from .generator import restore

        for _ in range(warmup):
            restore(wave, weights, config)
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            restore(wave, weights, config)
            times.append(time.perf_counter() - t0)
    finally:
        if ctx is not None:
            ctx.unregister()

    times = np.asarray(times)
    median = float(np.median(times))
    return BenchReport(
        runs=runs,
        median_s=median,
        p90_s=float(np.percentile(times, 90)),
        mean_s=float(np.mean(times)),
        audio_s=seconds,
        rtf=seconds / median,
        threads=threads,
    )


def cmd_restore(args) -> int:
    weights, config = _load_model(args)
    wave = read_wav(_require(args.infile))
    try:
        t0 = time.perf_counter()
        out = restore_chunked(wave, weights, config)
        elapsed = time.perf_counter() - t0
    except SampleRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLE_RATE
    _atomic_write_wav(out, args.outfile)
    rtf = wave.duration / elapsed if elapsed > 0 else float("inf")
    print(f"restored {wave.duration:.2f}s in {elapsed:.3f}s (RTF {rtf:.2f})")
    return EXIT_OK


def cmd_degrade(args) -> int:
    wave = read_wav(_require(args.infile))
    if args.spec:
        with open(_require(args.spec)) as fh:
            spec = degrade_mod.DegradationSpec.from_text(fh.read())
    else:
        spec = degrade_mod.DegradationSpec.default()
    if args.seed is not None:
        spec = degrade_mod.DegradationSpec(spec.stages, args.seed)
    degraded, trace = degrade_mod.apply_chain(wave, spec)
    _atomic_write_wav(degraded, args.outfile)
    trace_text = trace.to_json_lines()
    if args.trace_out:
        _atomic_write_text(args.trace_out, trace_text + "\n")
    else:
        print(trace_text)
    return EXIT_OK


def cmd_eval(args) -> int:
    ref = read_wav(_require(args.ref))
    est = read_wav(_require(args.est))
    try:
        params = StftParams(n_fft=args.n_fft, hop=args.hop)
        ref_spec = stft(ref, params)
        est_spec = stft(est, params)
        report = losses_mod.reconstruction_loss(est, ref, est_spec, ref_spec)
    except LengthMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LENGTH
    out = json.dumps(
        {
            "wav": report.wav,
            "spec": report.spec,
            "omni": report.omni,
            "recon": report.recon,
        },
        sort_keys=True,
    )
    if args.out:
        _atomic_write_text(args.out, out + "\n")
    else:
        print(out)
    return EXIT_OK


def cmd_rank(args) -> int:
    with open(_require(args.csv)) as fh:
        data = ranking_mod.ComparisonSet.from_csv(fh.read())
    if args.category:
        data = ranking_mod.category_split(data, args.category)
    try:
        report = ranking_mod.rank_report(data, categories=not args.category)
    except ConnectivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    out = ranking_mod.report_to_json(report)
    if args.out:
        _atomic_write_text(args.out, out + "\n")
    else:
        print(out)
    return EXIT_OK


def cmd_bench(args) -> int:
    weights, config = _load_model(args)
    report = run_bench(
        weights, config, args.seconds, args.runs, args.warmup,
        seed=args.seed, threads=args.threads,
    )
    out = report.to_json()
    if args.out:
        _atomic_write_text(args.out, out + "\n")
    else:
        print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocalrestore",
        description="Single-stage complex-STFT vocal restoration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("restore", help="restore a degraded WAV file")
    p.add_argument("--in", dest="infile", required=True, help="input WAV path")
    p.add_argument("--out", dest="outfile", required=True, help="output WAV path")
    p.add_argument("--weights", required=True, help="model weight file")
    p.add_argument("--config", required=True, help="model config text file")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("degrade", help="apply the stochastic corruption chain")
    p.add_argument("--in", dest="infile", required=True, help="input WAV path")
    p.add_argument("--out", dest="outfile", required=True, help="output WAV path")
    p.add_argument("--spec", default=None, help="degradation spec file (default: built-in)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--trace-out", default=None,
                   help="write the stage trace here (default: stdout)")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("eval", help="reconstruction losses between two WAVs")
    p.add_argument("--ref", required=True, help="reference (clean) WAV")
    p.add_argument("--est", required=True, help="estimate (restored) WAV")
    p.add_argument("--n-fft", type=int, default=4096, help="omni-term STFT window (default 4096)")
    p.add_argument("--hop", type=int, default=2048, help="omni-term STFT hop (default 2048)")
    p.add_argument("--out", default=None, help="write JSON report here (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="fit Bradley-Terry strengths from a comparison CSV")
    p.add_argument("--csv", required=True, help="comparisons: system_a,system_b,outcome[,category]")
    p.add_argument("--category", default=None, help="fit only this category")
    p.add_argument("--out", default=None, help="write JSON report here (default: stdout)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench", help="real-time-factor benchmark on seeded noise")
    p.add_argument("--weights", required=True, help="model weight file")
    p.add_argument("--config", required=True, help="model config text file")
    p.add_argument("--seconds", type=float, default=10.0, help="input duration (default 10)")
    p.add_argument("--runs", type=int, default=30, help="timed runs (default 30)")
    p.add_argument("--warmup", type=int, default=3, help="warmup runs (default 3)")
    p.add_argument("--seed", type=int, default=0, help="input noise seed (default 0)")
    p.add_argument("--threads", type=int, default=0,
                   help="BLAS thread cap, 0 = leave unchanged (default 0)")
    p.add_argument("--out", default=None, help="write JSON report here (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except SampleRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLE_RATE
    except LengthMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LENGTH
    except ConnectivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except (VocalRestoreError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
