"""Print the summary tables of a results directory as aligned text."""

import argparse
import csv
from pathlib import Path

SUMMARIES = ["ogl_summary", "togl_summary", "delta_togl_summary", "method_table",
             "phase_diagram"]


def show(path: Path):
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    cells = [[_short(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    print(f"== {path}")
    for r in cells:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    print()


def _short(cell: str) -> str:
    try:
        v = float(cell)
    except ValueError:
        return cell
    return cell if v.is_integer() and "e" not in cell else f"{v:.4g}"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("results", type=Path, nargs="?", default=Path("results"))
    args = ap.parse_args()
    for name in SUMMARIES:
        for path in sorted(args.results.rglob(f"{name}.csv")):
            show(path)


if __name__ == "__main__":
    main()
