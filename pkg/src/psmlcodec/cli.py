"""Command-line front end: ``psml {encode,decode,psnr,sweep,synth,audit}``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import codec
from .audit import audit
from .pixel_grid import PgmError, load_pgm, psnr, save_pgm, synth_ridge

CSV_COLUMNS = ["image", "codec", "target_bpp", "lambda", "achieved_bpp", "compression_ratio",
               "psnr", "q", "encode_ms", "granularity_limited", "error"]


def _fmt_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def _gray_bits(text: str):
    if text == "auto":
        return "auto"
    q = int(text)
    if q not in codec.GRAY_BITS:
        raise argparse.ArgumentTypeError("gray bits must be 3..8 or auto")
    return q


def _float_list(text: str) -> list[float]:
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("expected a comma separated list of positive numbers")
    return values


def _codec_list(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in codec.CODECS]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"unknown codec(s): {bad}")
    return names


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PSML_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def _config(args, **rate) -> codec.EncoderConfig:
    return codec.EncoderConfig(codec=args.codec, max_depth=args.max_depth, gray_bits=args.gray_bits,
                               entropy=not args.no_entropy, **rate)


def cmd_encode(args) -> int:
    image = load_pgm(args.input)
    if args.lam is None and args.bpp is None:
        raise ValueError("one of --lambda or --bpp is required")
    rate = {"lam": args.lam} if args.lam is not None else {"target_bpp": args.bpp}
    enc = codec.encode(image, _config(args, **rate))
    Path(args.output).write_bytes(enc.stream)
    pt = enc.point
    print(f"bpp={pt.bpp:.6f} psnr={_fmt_db(pt.psnr)} q={pt.q} lambda={pt.lam:.6g} "
          f"bits={pt.total_bits} sse={pt.sse} granularity_limited={int(pt.granularity_limited)}")
    return 0


def cmd_decode(args) -> int:
    grid = codec.decode(Path(args.input).read_bytes())
    save_pgm(grid, args.output)
    print(f"width={grid.width} height={grid.height}")
    return 0


def cmd_psnr(args) -> int:
    print(f"psnr={_fmt_db(psnr(load_pgm(args.input), load_pgm(args.reference)))}")
    return 0


def cmd_synth(args) -> int:
    grid = synth_ridge(args.height, args.width, args.period, args.angle, args.contrast,
                       args.seed, noise=args.noise)
    save_pgm(grid, args.output)
    return 0


def _sweep_job(path: str, codec_name: str, args) -> list[dict]:
    rows = []
    points = [("bpp", v) for v in args.bpp] if args.bpp else [("lambda", v) for v in args.lam]
    try:
        image = load_pgm(path)
        t0 = time.perf_counter()
        base = codec.EncoderConfig(codec=codec_name, max_depth=args.max_depth, gray_bits=args.gray_bits,
                                   lam=0.0, entropy=not args.no_entropy)
        tree = codec.decompose(image, base)
        fit_ms = (time.perf_counter() - t0) * 1000.0
    except Exception as exc:  # noqa: BLE001 - every failure becomes a CSV row
        return [_error_row(path, codec_name, kind, value, exc) for kind, value in points]
    for kind, value in points:
        rate = {"target_bpp": value} if kind == "bpp" else {"lam": value}
        try:
            cfg = codec.EncoderConfig(codec=codec_name, max_depth=args.max_depth,
                                      gray_bits=args.gray_bits, entropy=not args.no_entropy, **rate)
            t0 = time.perf_counter()
            enc = codec.encode(image, cfg, tree)
            ms = fit_ms + (time.perf_counter() - t0) * 1000.0
        except Exception as exc:  # noqa: BLE001
            rows.append(_error_row(path, codec_name, kind, value, exc))
            continue
        pt = enc.point
        rows.append({
            "image": path, "codec": codec_name,
            "target_bpp": f"{value:g}" if kind == "bpp" else "",
            "lambda": f"{pt.lam:.6g}",
            "achieved_bpp": f"{pt.bpp:.6f}",
            "compression_ratio": f"{8.0 / pt.bpp:.4f}",
            "psnr": _fmt_db(pt.psnr), "q": pt.q, "encode_ms": f"{ms:.1f}",
            "granularity_limited": int(pt.granularity_limited), "error": "",
            "_key": pt.bpp,
        })
    return rows


def _error_row(path, codec_name, kind, value, exc) -> dict:
    return {"image": path, "codec": codec_name, "target_bpp": f"{value:g}" if kind == "bpp" else "",
            "lambda": f"{value:g}" if kind == "lambda" else "", "achieved_bpp": "",
            "compression_ratio": "", "psnr": "", "q": "", "encode_ms": "",
            "granularity_limited": "", "error": str(exc) or type(exc).__name__, "_key": value}


def run_sweep(inputs, codecs, args) -> list[dict]:
    jobs = [(path, name) for path in inputs for name in codecs]
    with ThreadPoolExecutor(max_workers=min(_threads(), len(jobs))) as pool:
        results = list(pool.map(lambda j: _sweep_job(j[0], j[1], args), jobs))
    rows = [r for chunk in results for r in chunk]
    rows.sort(key=lambda r: (r["image"], r["codec"], r["_key"]))
    return rows


def cmd_sweep(args) -> int:
    if bool(args.bpp) == bool(args.lam):
        raise ValueError("give exactly one of --bpp or --lambda lists")
    rows = run_sweep(args.input, args.codec, args)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.csv:
            out.close()
    return 0


def cmd_audit(args) -> int:
    for row in audit(args.size, args.trials, args.seed):
        print(row.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psml", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def coding_flags(sp, multi_codec=False):
        if multi_codec:
            sp.add_argument("--codec", type=_codec_list, default=["psml", "wedgelet"])
        else:
            sp.add_argument("--codec", choices=sorted(codec.CODECS), default="psml")
        sp.add_argument("--gray-bits", type=_gray_bits, default="auto")
        sp.add_argument("--max-depth", type=int, default=7)
        sp.add_argument("--no-entropy", action="store_true",
                        help="send gray codes raw instead of Rice coded")

    sp = sub.add_parser("encode", help="encode a PGM image")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    rate = sp.add_mutually_exclusive_group(required=True)
    rate.add_argument("--lambda", dest="lam", type=float)
    rate.add_argument("--bpp", type=float)
    coding_flags(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="decode a codestream to PGM")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("psnr", help="PSNR between two PGM images")
    sp.add_argument("--input", required=True)
    sp.add_argument("--reference", required=True)
    sp.set_defaults(func=cmd_psnr)

    sp = sub.add_parser("sweep", help="rate-distortion sweep to CSV")
    sp.add_argument("--input", nargs="+", required=True)
    sp.add_argument("--bpp", type=_float_list)
    sp.add_argument("--lambda", dest="lam", type=_float_list)
    sp.add_argument("--csv")
    coding_flags(sp, multi_codec=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth", help="write a synthetic ridge image")
    sp.add_argument("--output", required=True)
    sp.add_argument("--height", type=int, default=128)
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--period", type=float, default=8.0)
    sp.add_argument("--angle", type=float, default=0.6)
    sp.add_argument("--contrast", type=float, default=200.0)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("audit", help="fast fit versus exhaustive oracle")
    sp.add_argument("--size", type=int, default=6)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, PgmError) as exc:
        print(f"psml {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
