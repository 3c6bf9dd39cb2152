#!/usr/bin/env python3
"""Rebuild LIBSVM-format copies of sonar, breast-cancer and diabetes offline.

The LIBSVM binary-classification files are derived from UCI sources. When the
LIBSVM site is unreachable, the same UCI tables can be taken from two Python
wheels that bundle them:

  keel-ds        keel_ds/data/balanced/raw/{sonar,pima}.dat
  rdatasets      rdatasets/_data/MASS/biopsy.pkl.compress   (or pydataset's biopsy.csv)

Usage:
  pip download --no-deps keel-ds pydataset
  python3 scripts/reconstruct_datasets.py --keel keel_ds-*.whl --biopsy biopsy.csv --out data/

Each dataset is written twice: the raw file and a `_scale` file that mirrors
`svm-scale -l -1 -u 1` (constant features dropped, zeros omitted, `%g` values).
"""
import argparse
import csv
import io
import zipfile
from pathlib import Path


def fmt_raw(v):
    return repr(float(v)) if float(v) != int(float(v)) else str(int(float(v)))


def write_libsvm(path, rows):
    with open(path, "w") as f:
        for label, feats in rows:
            toks = [str(label)] + [f"{i}:{v}" for i, v in feats]
            f.write(" ".join(toks) + "\n")


def raw_rows(labels, matrix):
    rows = []
    for y, x in zip(labels, matrix):
        rows.append((y, [(k + 1, fmt_raw(v)) for k, v in enumerate(x) if float(v) != 0.0]))
    return rows


def scaled_rows(labels, matrix):
    d = len(matrix[0])
    lo = [min(float(r[k]) for r in matrix) for k in range(d)]
    hi = [max(float(r[k]) for r in matrix) for k in range(d)]
    rows = []
    for y, x in zip(labels, matrix):
        feats = []
        for k, v in enumerate(x):
            v = float(v)
            if hi[k] == lo[k]:
                continue
            if v == lo[k]:
                s = -1.0
            elif v == hi[k]:
                s = 1.0
            else:
                s = -1.0 + 2.0 * (v - lo[k]) / (hi[k] - lo[k])
            if s != 0.0:
                feats.append((k + 1, "%g" % s))
        rows.append((y, feats))
    return rows


def keel_table(wheel, name):
    text = zipfile.ZipFile(wheel).read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    rows = [[t.strip() for t in line.split(",")] for line in text.splitlines() if line.strip()]
    return [r[-1] for r in rows], [r[:-1] for r in rows]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--keel", required=True)
    ap.add_argument("--biopsy", required=True, help="MASS biopsy table as CSV")
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    classes, x = keel_table(args.keel, "sonar")
    y = [1 if c == "R" else -1 for c in classes]
    write_libsvm(out / "sonar_scale", scaled_rows(y, x))

    classes, x = keel_table(args.keel, "pima")
    y = [-1 if c == "tested_positive" else 1 for c in classes]
    write_libsvm(out / "diabetes", raw_rows(y, x))
    write_libsvm(out / "diabetes_scale", scaled_rows(y, x))

    with open(args.biopsy) as f:
        table = list(csv.DictReader(f))
    feats = ["ID"] + [f"V{k}" for k in range(1, 10)]
    complete = [r for r in table if all(r[c] not in ("", "NA") for c in feats)]
    y = [2 if r["class"] == "benign" else 4 for r in complete]
    x = [[r[c] for c in feats] for r in complete]
    write_libsvm(out / "breast-cancer", raw_rows(y, x))
    write_libsvm(out / "breast-cancer_scale", scaled_rows(y, x))


if __name__ == "__main__":
    main()
