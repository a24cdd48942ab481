"""Command-line front end: compress, decompress, verify, bench, gen.

Exit codes: 0 success (and bound met, where one applies), 1 bound
violated, 2 usage or parameter errors, 3 data or format errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

from .core import (
    ErrorBoundSpec,
    ErrorMode,
    Field,
    parse_archive,
    serialize_archive,
)
from .data import SyntheticSpec, generate, read_raw_f32, write_raw_f32
from .errors import BadParams, FZError
from .metrics import SpeedupInputs, overall_speedup, quality, rate, throughput
from .pipeline import (
    PRESET_NAMES,
    compress_via_graph,
    compress_with_timing,
    decompress_via_graph,
    decompress_with_timing,
    get_pipeline,
    load_pipeline_file,
    register_pipeline,
    registered_pipelines,
    resolve_bound,
)

CSV_COLUMNS = [
    "dataset", "pipeline", "eb_mode", "eb", "cr", "bitrate",
    "psnr_db", "max_err", "comp_gbps", "decomp_gbps", "speedup",
]


def parse_dims(text: str) -> tuple[int, ...]:
    """Dims like 512x512x512, slowest-varying first."""

    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise BadParams(f"bad dims '{text}', expected e.g. 512x512x512") from None
    if not 1 <= len(dims) <= 3 or any(d < 1 for d in dims):
        raise BadParams(f"dims must be 1 to 3 positive extents, got '{text}'")
    return dims


def _parse_mode(text: str) -> ErrorMode:
    if text == "abs":
        return ErrorMode.ABSOLUTE
    if text == "rel":
        return ErrorMode.VALUE_RANGE_RELATIVE
    raise BadParams(f"mode must be abs or rel, got '{text}'")


def _resolve_pipeline(ref: str):
    """Preset name, numeric id, or a pipeline-definition file path."""

    if ref in PRESET_NAMES:
        return get_pipeline(ref)
    if ref.isdigit():
        return get_pipeline(int(ref))
    spec = load_pipeline_file(ref)
    existing = registered_pipelines().get(spec.id)
    if existing is None:
        return register_pipeline(spec)
    if existing == spec:
        return existing
    raise BadParams(f"pipeline id {spec.id} already registered with a different definition")


def _parse_gen_spec(text: str, dims, seed: int) -> SyntheticSpec:
    """Compact generator spec: kind[,key=value,...]."""

    parts = text.split(",")
    params = {}
    for p in parts[1:]:
        if "=" not in p:
            raise BadParams(f"bad generator parameter '{p}', expected key=value")
        k, v = p.split("=", 1)
        params[k] = v
    return SyntheticSpec(parts[0], dims, seed, params)


def _eprint(*args):
    print(*args, file=sys.stderr)


def cmd_compress(args) -> int:
    field = read_raw_f32(args.input, parse_dims(args.dims))
    eb = ErrorBoundSpec(_parse_mode(args.mode), args.eb)
    spec = _resolve_pipeline(args.pipeline)
    t0 = time.perf_counter()
    if args.graph:
        archive = compress_via_graph(field, eb, spec)
    else:
        archive, _ = compress_with_timing(field, eb, spec)
    seconds = time.perf_counter() - t0
    blob = serialize_archive(archive)
    with open(args.output, "wb") as fh:
        fh.write(blob)
    r = rate(field.nbytes, len(blob), field.len)
    _eprint(f"cr={r.cr:.4f} bitrate={r.bitrate_bits_per_value:.4f} "
            f"seconds={seconds:.4f} gbps={throughput(field.nbytes, seconds):.4f}")
    return 0


def cmd_decompress(args) -> int:
    if args.pipeline is not None:
        _resolve_pipeline(args.pipeline)
    with open(args.input, "rb") as fh:
        blob = fh.read()
    archive = parse_archive(blob)
    t0 = time.perf_counter()
    if args.graph:
        field = decompress_via_graph(archive)
    else:
        field, _ = decompress_with_timing(archive)
    seconds = time.perf_counter() - t0
    write_raw_f32(field, args.output)
    _eprint(f"seconds={seconds:.4f} gbps={throughput(field.nbytes, seconds):.4f}")
    return 0


def cmd_verify(args) -> int:
    dims = parse_dims(args.dims)
    orig = read_raw_f32(args.a, dims)
    recon = read_raw_f32(args.b, dims)
    eb_abs = None
    if args.eb is not None:
        bound = resolve_bound(orig, ErrorBoundSpec(_parse_mode(args.mode), args.eb))
        eb_abs = bound.eb_abs
    q = quality(orig, recon, eb_abs)
    print(f"max_err={q.max_abs_err:.6g}")
    print(f"psnr_db={q.psnr_db:.4f}")
    print(f"nrmse={q.nrmse:.6g}")
    if eb_abs is not None:
        print(f"eb_abs={eb_abs:.6g} bound_satisfied={q.bound_satisfied}")
        return 0 if q.bound_satisfied else 1
    return 0


def _bench_field(args) -> tuple[Field, str]:
    dims = parse_dims(args.dims)
    if args.input is not None:
        return read_raw_f32(args.input, dims), os.path.basename(args.input)
    spec = _parse_gen_spec(args.gen, dims, args.seed)
    return generate(spec), spec.kind.value


def cmd_bench(args) -> int:
    field, dataset = _bench_field(args)
    pipelines = [p for p in args.pipelines.split(",") if p]
    ebs = [float(e) for e in args.eb_list.split(",") if e]
    mode = _parse_mode(args.mode)
    runs = max(1, args.runs)
    out = sys.stdout if args.csv == "-" else open(args.csv, "w", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        out.flush()
        for pname in pipelines:
            spec = _resolve_pipeline(pname)
            for eb in ebs:
                ebspec = ErrorBoundSpec(mode, eb)
                comp_times = []
                archive = None
                for _ in range(runs):
                    t0 = time.perf_counter()
                    if args.graph:
                        archive = compress_via_graph(field, ebspec, spec)
                    else:
                        archive = compress_with_timing(field, ebspec, spec)[0]
                    comp_times.append(time.perf_counter() - t0)
                blob = serialize_archive(archive)
                dec_times = []
                recon = None
                for _ in range(runs):
                    t0 = time.perf_counter()
                    if args.graph:
                        recon = decompress_via_graph(archive)
                    else:
                        recon = decompress_with_timing(archive)[0]
                    dec_times.append(time.perf_counter() - t0)
                eb_abs = archive.resolved_bound().eb_abs if len(archive.segments) else None
                q = quality(field, recon, eb_abs)
                r = rate(field.nbytes, len(blob), field.len)
                comp_gbps = throughput(field.nbytes, float(sorted(comp_times)[len(comp_times) // 2]))
                dec_gbps = throughput(field.nbytes, float(sorted(dec_times)[len(dec_times) // 2]))
                sp = overall_speedup(SpeedupInputs(args.bw, comp_gbps, r.cr))
                writer.writerow([
                    dataset, pname, args.mode, repr(eb),
                    f"{r.cr:.6g}", f"{r.bitrate_bits_per_value:.6g}",
                    f"{q.psnr_db:.6g}", f"{q.max_abs_err:.6g}",
                    f"{comp_gbps:.6g}", f"{dec_gbps:.6g}", f"{sp:.6g}",
                ])
                out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_gen(args) -> int:
    spec = SyntheticSpec(args.kind, parse_dims(args.dims), args.seed,
                         dict(kv.split("=", 1) for kv in args.param))
    field = generate(spec)
    write_raw_f32(field, args.output)
    _eprint(f"wrote {field.nbytes} bytes ({'x'.join(map(str, field.dims))})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fzpipe", description="Error-bounded lossy compression for float32 fields.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress a raw f32 file into an archive")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("-d", "--dims", required=True, help="e.g. 512x512x512, slowest first")
    c.add_argument("--eb", type=float, required=True, help="error-bound magnitude")
    c.add_argument("--mode", default="rel", help="abs or rel (value-range relative)")
    c.add_argument("--pipeline", default="default",
                   help="default | speed | quality | id | pipeline-definition file")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--graph", action="store_true", help="run stages on the task-graph executor")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="decompress an archive to raw f32")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--pipeline", default=None, help="pipeline file for custom-pipeline archives")
    d.add_argument("--graph", action="store_true")
    d.set_defaults(func=cmd_decompress)

    v = sub.add_parser("verify", help="compare two raw files, optionally against a bound")
    v.add_argument("-a", required=True, help="original raw file")
    v.add_argument("-b", required=True, help="reconstructed raw file")
    v.add_argument("-d", "--dims", required=True)
    v.add_argument("--eb", type=float, default=None)
    v.add_argument("--mode", default="rel")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="rate-distortion and throughput sweep, CSV output")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", default=None, help="raw f32 file")
    src.add_argument("--gen", default=None, help="generator spec: kind[,key=value,...]")
    b.add_argument("-d", "--dims", required=True)
    b.add_argument("--seed", type=int, default=0, help="generator seed (with --gen)")
    b.add_argument("--pipelines", default="default,speed,quality")
    b.add_argument("--eb-list", default="1e-2,1e-4,1e-6")
    b.add_argument("--mode", default="rel")
    b.add_argument("--bw", type=float, default=100.0,
                   help="transfer-medium bandwidth GB/s for the speedup model")
    b.add_argument("--runs", type=int, default=5, help="timing runs per cell; median reported")
    b.add_argument("--csv", default="-", help="output path, - for stdout")
    b.add_argument("--graph", action="store_true")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="write a synthetic raw f32 corpus file")
    g.add_argument("--kind", required=True,
                   help="smooth_trig | filtered_noise | piecewise_constant | particle1d")
    g.add_argument("-d", "--dims", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", action="append", default=[], help="key=value, repeatable")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BadParams as e:
        _eprint(f"error: {e}")
        return 2
    except FZError as e:
        _eprint(f"error: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
