#!/usr/bin/env python3
"""Build LIBSVM-format proxy datasets from the KEEL copies shipped in the keel-ds wheel.

The proxies are not the LIBSVM train/test splits: KEEL stores the UCI data in its
own order, so the splits here are seeded random partitions with the original sizes.
"""

import argparse
import pathlib
import random
import subprocess
import sys
import tempfile
import zipfile

SPLITS = {
    # name: (keel file, training size, output stem)
    "splice": ("splice", 1000, "splice"),
    "pendigits": ("penbased", 7494, "pendigits"),
    "satimage": ("satimage", 4435, "satimage.scale"),
}

NUCLEOTIDE = {"A": 1.0, "C": 2.0, "G": 3.0, "T": 4.0}


def find_wheel(explicit):
    if explicit:
        return pathlib.Path(explicit)
    target = pathlib.Path(tempfile.mkdtemp(prefix="keel-ds-"))
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "keel-ds==0.2.5", "-d", str(target)],
        check=True,
    )
    return next(target.glob("keel_ds-*.whl"))


def read_keel(wheel, name):
    with zipfile.ZipFile(wheel) as archive:
        text = archive.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    return [[c.strip() for c in line.split(",")] for line in text.splitlines() if line and not line.startswith("@")]


def splice_rows(rows):
    out = []
    for row in rows:
        bases, label = row[:-1], row[-1]
        if any(b not in NUCLEOTIDE for b in bases):
            continue  # ambiguous bases; the DELVE version drops these 15 rows
        out.append((1.0 if label in ("EI", "IE") else -1.0, [NUCLEOTIDE[b] for b in bases]))
    return out


def numeric_rows(rows):
    return [(float(row[-1]), [float(v) for v in row[:-1]]) for row in rows]


def min_max(train, test, lower, upper):
    dim = len(train[0][1])
    lo = [min(r[1][d] for r in train) for d in range(dim)]
    hi = [max(r[1][d] for r in train) for d in range(dim)]

    def scale(rows):
        result = []
        for label, x in rows:
            z = []
            for d, v in enumerate(x):
                span = hi[d] - lo[d]
                z.append(lower if span == 0 else lower + (upper - lower) * (v - lo[d]) / span)
            result.append((label, z))
        return result

    return scale(train), scale(test)


def write_libsvm(path, rows):
    with open(path, "w", encoding="utf-8") as out:
        for label, x in rows:
            feats = " ".join(f"{d + 1}:{v!r}" for d, v in enumerate(x) if v != 0)
            out.write(f"{label:g} {feats}".rstrip() + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--wheel", help="path to keel_ds-0.2.5-py3-none-any.whl; downloaded when omitted")
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "proxy"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lower", type=float, default=0.0)
    parser.add_argument("--upper", type=float, default=1.0)
    args = parser.parse_args()

    wheel = find_wheel(args.wheel)
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (keel_name, n_train, stem) in SPLITS.items():
        raw = read_keel(wheel, keel_name)
        rows = splice_rows(raw) if name == "splice" else numeric_rows(raw)
        order = list(range(len(rows)))
        random.Random(args.seed).shuffle(order)
        train = [rows[i] for i in sorted(order[:n_train])]
        test = [rows[i] for i in sorted(order[n_train:])]
        train, test = min_max(train, test, args.lower, args.upper)
        write_libsvm(out_dir / stem, train)
        write_libsvm(out_dir / f"{stem}.t", test)
        print(f"{name}: {len(train)} train / {len(test)} test -> {out_dir / stem}")


if __name__ == "__main__":
    main()
