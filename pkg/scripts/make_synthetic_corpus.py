#!/usr/bin/env python3
"""Generate a synthetic oriented-stripe corpus for pipeline experiments.

Each class is a distinct stripe orientation/frequency plus noise, laid
out as one directory per class, so the result drops straight into
`cxrpipe ingest`. Balanced by default; pass --counts for an imbalanced
variant, e.g. --counts 100,75,50,25.
"""

import argparse
import sys

from cxrpipe.dataset import ClassLabel
from cxrpipe.synthetic import balanced_counts, make_corpus


def parse_counts(text: str) -> dict[ClassLabel, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != len(ClassLabel):
        raise argparse.ArgumentTypeError(
            f"expected {len(ClassLabel)} comma-separated counts, got {text!r}"
        )
    return dict(zip(ClassLabel, parts))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus root to create")
    parser.add_argument("--total", type=int, default=400,
                        help="total images, split evenly (default 400)")
    parser.add_argument("--counts", type=parse_counts, default=None,
                        help="per-class counts in label order, overrides --total")
    parser.add_argument("--side", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    counts = args.counts if args.counts is not None else balanced_counts(args.total)
    root = make_corpus(args.out, counts, side=args.side, seed=args.seed)
    for label in ClassLabel:
        print(f"{label.name}: {counts.get(label, 0)}")
    print(f"wrote {sum(counts.values())} images under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
