"""Command-line driver: export graphs and emit reference tensors."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .exporters import ExportError, build_model, export_graph
from .reference import emit_reference_outputs


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bvqa-export",
        description="Convert ResNet-50 / VGG-16 weights into portable inference graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="write the ONNX graph and sidecar")
    p_export.add_argument("--model", required=True, choices=["resnet50", "vgg16"])
    p_export.add_argument("--out-dir", required=True)
    p_export.add_argument("--weights", help="local state-dict file (.pth); "
                          "omitted = seeded random initialization")
    p_export.add_argument("--seed", type=int, default=0)

    p_refs = sub.add_parser("emit-refs", help="write reference output tensors")
    p_refs.add_argument("--model", required=True, choices=["resnet50", "vgg16"])
    p_refs.add_argument("--images", required=True, nargs="+",
                        help=".npy files with HWC float images in [0, 1]")
    p_refs.add_argument("--out-dir", required=True)
    p_refs.add_argument("--weights")
    p_refs.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            sidecar = export_graph(args.model, args.out_dir, args.weights, args.seed)
            print(json.dumps({"graph": sidecar["graph_file"],
                              "checksum": sidecar["checksum"]}, indent=2))
        else:
            model = build_model(args.model, args.weights, args.seed)
            images = {Path(p).stem: np.load(p) for p in args.images}
            written = emit_reference_outputs(model, images, args.out_dir, args.model)
            print(f"{len(written)} tensor files written to {args.out_dir}")
    except (ExportError, OSError, ValueError) as exc:
        print(f"bvqa-export: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
