"""Command line wrapper: ``crem-export export --model ... --layer ...``."""

import argparse
import sys

from .errors import ExportError
from .export import ExportSpec, export_embeddings
from ._version import __version__


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crem-export",
        description="Export layer embeddings from a torch model as a CREM file.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    export = sub.add_parser("export", help="run a model and write one layer's embeddings")
    export.add_argument("--model", required=True,
                        help="checkpoint path, or a constructor name such as 'identity'")
    export.add_argument("--layer", required=True,
                        help="named module to tap ('' taps the model's own output)")
    export.add_argument("--inputs", required=True,
                        help=".npy file or directory of .npy files, row order preserved")
    export.add_argument("--out", required=True, help="destination CREM file")
    export.add_argument("--clip", type=float, default=None,
                        help="optional l2 clip radius applied before writing")
    export.add_argument("--batch", type=int, default=64, help="inference batch size")
    return parser


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        spec = ExportSpec(
            model=ns.model,
            layer=ns.layer,
            inputs=ns.inputs,
            out=ns.out,
            batch=ns.batch,
            clip=ns.clip,
        )
        report = export_embeddings(spec)
    except ExportError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    suffix = " (clipped)" if report.clipped else ""
    print(f"exported {report.n}x{report.d} embeddings{suffix} -> {report.path}")
    return 0
