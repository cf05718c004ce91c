#!/usr/bin/env python3
import argparse
import csv
import io
import logging
from typing import Optional

from igamg.cli import published_value, run_table, table_cells, table_names


def deviation(measured: int, published: Optional[float]) -> str:
    if published is None:
        return ""
    return "{:+d}".format(measured - int(published))


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("-table", type=str, default="t4", choices=table_names())
    parser.add_argument("-jobs", type=int, default=1, help="parallel cells")
    parser.add_argument("-max_iter", type=int, help="cap on cycles")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args()

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)

    cells = table_cells(args.table, args.max_iter)
    text = run_table(args.table, jobs=args.jobs, max_iter=args.max_iter)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == len(cells)

    print("{:>8} {:>3} {:>20} {:>6} {:>6} {:>5} {:>12}".format(
        "grid", "p", "method", "iter", "ref", "diff", "err_l2"))  # fmt: skip
    for cell, row in zip(cells, rows):
        published = published_value(args.table, cell)
        print(
            "{:>8} {:>3} {:>20} {:>6} {:>6} {:>5} {:>12}".format(
                row["grid"],
                row["p"],
                row["method"],
                row["iter"],
                "" if published is None else int(published),
                deviation(int(row["iter"]), published),
                row["err_l2"],
            )
        )
