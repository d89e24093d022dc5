#!/usr/bin/env python3
"""Convert the UCI Statlog German Credit raw file into the CSV + schema
pair the benchmark harness consumes.

The raw file (usually named german.data) has 20 space-separated attribute
columns plus a class column and no header. Columns whose values all parse
as numbers become continuous; the rest become nominal with their observed
codes as levels.

Usage:
    python3 scripts/prepare_german_credit.py german.data data/german.csv data/german.schema

Download the raw file from the UCI repository (dataset "Statlog (German
Credit Data)") before running this script.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from treeimpute.datamodel import (  # noqa: E402
    CONTINUOUS, Column, DataMatrix, NOMINAL, save_csv, save_schema,
)


def is_numeric(tokens):
    try:
        for t in tokens:
            float(t)
    except ValueError:
        return False
    return True


def convert(raw_path, csv_path, schema_path):
    rows = [line.split() for line in Path(raw_path).read_text().splitlines()
            if line.strip()]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise SystemExit(f"ragged raw file: row widths {sorted(widths)}")
    ncol = widths.pop()
    names = [f"a{j + 1}" for j in range(ncol - 1)] + ["class"]

    columns = []
    values = np.empty((len(rows), ncol))
    for j in range(ncol):
        tokens = [r[j] for r in rows]
        if j < ncol - 1 and is_numeric(tokens):
            columns.append(Column(names[j], CONTINUOUS))
            values[:, j] = [float(t) for t in tokens]
        else:
            levels = tuple(sorted(set(tokens)))
            columns.append(Column(names[j], NOMINAL, levels))
            index = {lvl: i for i, lvl in enumerate(levels)}
            values[:, j] = [index[t] for t in tokens]

    d = DataMatrix(tuple(columns), values)
    Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
    save_csv(d, csv_path)
    save_schema(d.schema, schema_path)
    kinds = [c.kind for c in columns]
    print(f"wrote {d.n} rows, {kinds.count(CONTINUOUS)} continuous and "
          f"{kinds.count(NOMINAL)} nominal columns -> {csv_path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw", help="path to the downloaded german.data file")
    ap.add_argument("csv_out")
    ap.add_argument("schema_out")
    args = ap.parse_args()
    convert(args.raw, args.csv_out, args.schema_out)


if __name__ == "__main__":
    main()
