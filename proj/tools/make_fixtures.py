#!/usr/bin/env python3
"""Regenerate the miniature dataset fixtures under tests/fixtures/.

Each tree mimics one public benchmark layout with three tiny series so the
adapter tests can run against real on-disk shapes. Deterministic: rerunning
produces byte-identical trees.
"""

import csv
import os
import shutil

import numpy as np

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "tests", "fixtures")


def reset(name):
    path = os.path.join(ROOT, name)
    shutil.rmtree(path, ignore_errors=True)
    os.makedirs(path)
    return path


def walk(rng, n, channels=1, scale=1.0):
    steps = rng.normal(0.0, scale, size=(n, channels))
    return np.cumsum(steps, axis=0)


def make_nasa():
    base = reset("nasa")
    rng = np.random.default_rng(101)
    rows = []
    for sub in ("train", "test"):
        os.makedirs(os.path.join(base, sub))

    # A-1: two channels, one anomalous stretch in test.
    train = walk(rng, 30, channels=2)
    test = walk(rng, 25, channels=2)
    test[10:15] += 6.0
    np.save(os.path.join(base, "train", "A-1.npy"), train, allow_pickle=False)
    np.save(os.path.join(base, "test", "A-1.npy"), test, allow_pickle=False)
    rows.append(["A-1", "SMAP", "[[10, 14]]", "point", str(len(test))])

    # B-9: univariate, stored rank-1, two anomalous stretches.
    train = walk(rng, 28).ravel()
    test = walk(rng, 26).ravel()
    test[5:8] -= 4.0
    test[20:23] += 4.0
    np.save(os.path.join(base, "train", "B-9.npy"), train, allow_pickle=False)
    np.save(os.path.join(base, "test", "B-9.npy"), test, allow_pickle=False)
    rows.append(["B-9", "MSL", "[[5, 7], [20, 22]]", "contextual", str(len(test))])

    # C-2: univariate float32 files, nothing anomalous.
    train = walk(rng, 20).astype(np.float32)
    test = walk(rng, 18).astype(np.float32)
    np.save(os.path.join(base, "train", "C-2.npy"), train, allow_pickle=False)
    np.save(os.path.join(base, "test", "C-2.npy"), test, allow_pickle=False)
    rows.append(["C-2", "SMAP", "[]", "point", str(len(test))])

    with open(os.path.join(base, "labeled_anomalies.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["chan_id", "spacecraft", "anomaly_sequences", "class", "num_values"])
        writer.writerows(rows)


def write_matrix(path, matrix):
    with open(path, "w") as f:
        for row in matrix:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def make_smd():
    base = reset("smd")
    rng = np.random.default_rng(202)
    for sub in ("train", "test", "test_label"):
        os.makedirs(os.path.join(base, sub))
    for name, anomalous in [("machine-1-1", [(8, 12)]), ("machine-1-2", [(3, 5), (20, 24)]),
                            ("machine-2-1", [])]:
        train = walk(rng, 40, channels=3, scale=0.5)
        test = walk(rng, 30, channels=3, scale=0.5)
        labels = np.zeros(len(test), dtype=int)
        for lo, hi in anomalous:
            test[lo:hi + 1] += 3.0
            labels[lo:hi + 1] = 1
        write_matrix(os.path.join(base, "train", name + ".txt"), train)
        write_matrix(os.path.join(base, "test", name + ".txt"), test)
        with open(os.path.join(base, "test_label", name + ".txt"), "w") as f:
            f.write("".join(f"{v}\n" for v in labels))


def make_yahoo():
    base = reset("yahoo")
    rng = np.random.default_rng(303)
    os.makedirs(os.path.join(base, "A1Benchmark"))
    os.makedirs(os.path.join(base, "A2Benchmark"))

    for name, spikes in [("real_1", [7, 19]), ("real_2", [13])]:
        n = 24
        values = np.sin(np.arange(n) / 3.0) + rng.normal(0.0, 0.05, n)
        flags = np.zeros(n, dtype=int)
        for at in spikes:
            values[at] += 5.0
            flags[at] = 1
        with open(os.path.join(base, "A1Benchmark", name + ".csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["timestamp", "value", "is_anomaly"])
            for t in range(n):
                writer.writerow([t + 1, repr(float(values[t])), flags[t]])

    # A2 synthetic files carry the generator's component columns.
    n = 20
    trend = 0.1 * np.arange(n)
    noise = rng.normal(0.0, 0.05, n)
    season = np.sin(np.arange(n) / 2.0)
    values = trend + noise + season
    flags = np.zeros(n, dtype=int)
    values[9] += 4.0
    flags[9] = 1
    with open(os.path.join(base, "A2Benchmark", "synthetic_1.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamps", "value", "anomaly", "changepoint", "trend", "noise",
                         "seasonality1", "seasonality2", "seasonality3"])
        for t in range(n):
            writer.writerow([t + 1, repr(float(values[t])), flags[t], 0,
                             repr(float(trend[t])), repr(float(noise[t])),
                             repr(float(season[t])), 0.0, 0.0])


def make_kpi():
    base = reset("kpi")
    rng = np.random.default_rng(404)
    kpis = []
    for kpi_id, spikes in [("da403e4e", [11]), ("02e99bd4", [4, 17]), ("a07ac296", [])]:
        n = 22
        values = np.cos(np.arange(n) / 4.0) + rng.normal(0.0, 0.02, n)
        labels = np.zeros(n, dtype=int)
        for at in spikes:
            values[at] -= 3.0
            labels[at] = 1
        kpis.append((kpi_id, values, labels))

    with open(os.path.join(base, "phase2_train.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamp", "value", "label", "KPI ID"])
        # Interleave blocks so grouping by first appearance is exercised.
        for start in range(0, 22, 11):
            for kpi_id, values, labels in kpis:
                for t in range(start, start + 11):
                    writer.writerow([1476460800 + 60 * t, repr(float(values[t])),
                                     labels[t], kpi_id])


def main():
    make_nasa()
    make_smd()
    make_yahoo()
    make_kpi()
    print(f"fixtures written under {os.path.normpath(ROOT)}")


if __name__ == "__main__":
    main()
