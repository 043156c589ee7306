"""samexport command line: one-shot checkpoint conversion."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import DEFAULT_OPSET, export
from .variants import DEFAULT_VARIANT, VARIANTS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samexport",
        description="Convert a promptable-segmentation checkpoint into the "
        "encoder.onnx / decoder.onnx pair plus manifest.json.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export one checkpoint")
    p.add_argument("--checkpoint", required=True, help="path to the .pth checkpoint")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--variant",
        default=DEFAULT_VARIANT,
        choices=sorted(VARIANTS),
        help=f"model variant (default {DEFAULT_VARIANT})",
    )
    p.add_argument(
        "--opset", type=int, default=DEFAULT_OPSET,
        help=f"graph opset version (default {DEFAULT_OPSET})",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export(args.checkpoint, args.out, args.variant, args.opset)
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 3
    print(
        f"exported {manifest.variant} (opset {manifest.opset}) to "
        f"{manifest.files['encoder.onnx']} and {manifest.files['decoder.onnx']}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
