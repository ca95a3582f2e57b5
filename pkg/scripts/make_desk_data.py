#!/usr/bin/env python3
"""Regenerate the desk-scale CSV datasets committed under data/.

Five real datasets come from scikit-learn's bundled UCI copies (iris, wine,
breast cancer diagnostic, optical digits, diabetes).  balance_scale is fully
rule-defined, so it is generated exactly: four attributes in {1..5}, class L
if left_weight*left_distance exceeds right_weight*right_distance, R if
smaller, B if balanced.  friedman1 is a standard synthetic regression
benchmark with a fixed seed.

Run from the repo root:  python3 scripts/make_desk_data.py
"""

import csv
from pathlib import Path

import numpy as np
from sklearn import datasets as skd

OUT = Path(__file__).resolve().parent.parent / "data"


def write(name, header, rows):
    path = OUT / name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{path}: {len(rows)} rows, {len(header)} columns")


def fmt(v):
    return repr(float(v))


def sk_classification(name, bundle, label_names=None):
    X, y = bundle.data, bundle.target
    features = [n.replace(" ", "_") for n in bundle.feature_names]
    labels = label_names or [str(n) for n in bundle.target_names]
    rows = [[fmt(v) for v in X[i]] + [labels[y[i]]] for i in range(len(y))]
    write(name, features + ["target"], rows)


def main():
    OUT.mkdir(exist_ok=True)

    sk_classification("iris.csv", skd.load_iris())
    sk_classification("wine.csv", skd.load_wine())
    sk_classification("breast_cancer_wdbc.csv", skd.load_breast_cancer())

    digits = skd.load_digits()
    header = [f"p{i}" for i in range(64)] + ["target"]
    rows = [[fmt(v) for v in digits.data[i]] + [str(digits.target[i])] for i in range(len(digits.target))]
    write("digits.csv", header, rows)

    diabetes = skd.load_diabetes()
    header = [n.replace(" ", "_") for n in diabetes.feature_names] + ["target"]
    rows = [
        [fmt(v) for v in diabetes.data[i]] + [fmt(diabetes.target[i])]
        for i in range(len(diabetes.target))
    ]
    write("diabetes.csv", header, rows)

    rows = []
    for lw in range(1, 6):
        for ld in range(1, 6):
            for rw in range(1, 6):
                for rd in range(1, 6):
                    left, right = lw * ld, rw * rd
                    cls = "L" if left > right else ("R" if right > left else "B")
                    rows.append([cls, lw, ld, rw, rd])
    write(
        "balance_scale.csv",
        ["class", "left_weight", "left_distance", "right_weight", "right_distance"],
        rows,
    )

    X, y = skd.make_friedman1(n_samples=500, n_features=10, noise=1.0, random_state=601)
    header = [f"x{i}" for i in range(10)] + ["target"]
    rows = [[fmt(v) for v in X[i]] + [fmt(y[i])] for i in range(len(y))]
    write("friedman1.csv", header, rows)


if __name__ == "__main__":
    main()
