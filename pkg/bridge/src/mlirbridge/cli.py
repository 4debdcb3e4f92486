"""Bridge CLI: export corpus vectors in the engine's binary formats."""

from __future__ import annotations

import argparse
import sys

from .encoders import EncoderError
from .export import ExportError, export
from .formats import FormatWriteError
from .recipe import RecipeError, load_recipe


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlirbridge",
        description="Export dense/token/sparse vectors for the evaluation engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="encode a corpus and write vector files")
    p.add_argument("--recipe", required=True, help="model recipe JSON")
    p.add_argument("--passages", required=True, help="passages JSONL")
    p.add_argument("--queries", required=True, help="queries JSONL")
    p.add_argument("--out", required=True,
                   help="output stem; extension is chosen by paradigm")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        recipe = load_recipe(args.recipe)
        result = export(recipe, args.passages, args.queries, args.out)
    except (RecipeError, ExportError, FormatWriteError, EncoderError) as exc:
        print(f"E_EXPORT: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 1
    dim_note = f", dim {result.dim}" if result.dim is not None else ""
    print(f"exported {result.count} records{dim_note} -> {result.vector_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
