"""``srkit`` command line.

Failures exit with status 1 after printing a single JSON line to stderr,
``{"error": "<ExceptionType>", "message": "..."}``.  Bad arguments print the
same kind of line with ``"error": "UsageError"`` and exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import harness
from .image import load_image
from .metrics import benchmark_pair, write_reports


def _lambdas(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": f"{self.prog}: {message}"}), file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srkit", description="Super-resolution with a neighbor-difference Laplacian loss")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("degrade", help="write bicubic LR and LR-upsampled mirrors of an HR folder")
    d.add_argument("--in", dest="in_dir", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--scale", type=int, choices=(2, 3, 4), required=True)

    t = sub.add_parser("train", help="train a network from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--max-steps", type=int, default=None, help="stop after this many optimizer steps")

    e = sub.add_parser("eval", help="score a checkpoint on a folder of HR images")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--hr", required=True)
    e.add_argument("--scale", type=int, choices=(2, 3, 4), required=True)
    e.add_argument("--out", required=True, help="per-image CSV (dataset,image_id,scale,psnr_db,ssim)")

    a = sub.add_parser("ablate", help="train and score one model per lambda")
    a.add_argument("--config", required=True)
    a.add_argument("--lambdas", type=_lambdas, required=True, help="comma separated, e.g. 0,0.1,1,5,10,100")
    a.add_argument("--out", required=True)
    a.add_argument("--hr", default=None, help="held-out HR folder (default: the training folder)")
    a.add_argument("--max-steps", type=int, default=None)

    m = sub.add_parser("metric", help="PSNR or SSIM between two images (BT.601 luma, no border shave)")
    m.add_argument("kind", choices=("psnr", "ssim"))
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    return p


def run(args) -> None:
    if args.command == "degrade":
        print(harness.degrade_dir(args.in_dir, args.out, args.scale))
    elif args.command == "train":
        cfg = harness.load_config(args.config)
        result = harness.train(cfg, max_steps=args.max_steps)
        print(result.checkpoint)
    elif args.command == "eval":
        reports, summary = harness.evaluate(args.ckpt, args.hr, args.scale)
        write_reports(args.out, [*reports, summary])
        print(harness.format_summary(summary))
    elif args.command == "ablate":
        cfg = harness.load_config(args.config)
        rows = harness.ablate(cfg, args.lambdas, hr_dir=args.hr, out_csv=args.out, max_steps=args.max_steps)
        for r in rows:
            print(f"{r['lambda']:g}\t{r['psnr']:.2f}\t{r['ssim']:.4f}")
    elif args.command == "metric":
        report = benchmark_pair(load_image(args.a), load_image(args.b), scale=0)
        value = report.psnr_db if args.kind == "psnr" else report.ssim
        print("inf" if math.isinf(value) else repr(value))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one parseable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
