#!/usr/bin/env python3
"""Materialize MovieLens-100k in its classic ``u.data``/``u.user``/``u.item`` layout.

GroupLens is not always reachable, but the RecBole wheel on PyPI bundles a
complete copy of ML-100k as tab-separated "atomic" files. This script pulls
that wheel (or uses one given with ``--wheel``) and rewrites the three files
the loader expects.

``u.data`` and ``u.user`` are reproduced field for field. ``u.item`` is
rebuilt from the genre tokens: ids, titles and the 19 genre flags are exact,
but release/video dates and IMDb URLs are not in the source and are written
as empty fields (the loader ignores them).
"""
import argparse
import glob
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k"
WHEEL_SPEC = "recbole==1.2.1"


def _rows(zf, ext):
    text = zf.read(f"{PREFIX}.{ext}").decode("latin-1")
    lines = text.splitlines()
    return [line.split("\t") for line in lines[1:] if line]


def convert(wheel, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as zf:
        inter = _rows(zf, "inter")
        users = _rows(zf, "user")
        items = _rows(zf, "item")

    with open(out_dir / "u.data", "w", encoding="latin-1", newline="\n") as fh:
        for user, item, rating, ts in inter:
            fh.write(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}\n")

    with open(out_dir / "u.user", "w", encoding="latin-1", newline="\n") as fh:
        for row in users:
            fh.write("|".join(row) + "\n")

    with open(out_dir / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        for item, title, year, classes in items:
            tokens = set(classes.split(" ")) if classes else set()
            unknown = tokens - set(GENRES)
            if unknown:
                raise ValueError(f"item {item}: unrecognised genres {sorted(unknown)}")
            full_title = f"{title} ({year})" if year else title
            flags = ["1" if g in tokens else "0" for g in GENRES]
            fh.write("|".join([item, full_title, "", "", ""] + flags) + "\n")

    with open(out_dir / "u.genre", "w", encoding="latin-1", newline="\n") as fh:
        for i, g in enumerate(GENRES):
            fh.write(f"{g}|{i}\n")
    return len(inter), len(users), len(items)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "ml-100k"))
    parser.add_argument("--wheel", help="path to a RecBole wheel; downloaded from PyPI if omitted")
    args = parser.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", WHEEL_SPEC, "--no-deps", "-q", "-d", tmp],
                check=True,
            )
            wheel = glob.glob(f"{tmp}/recbole-*.whl")[0]
        n_inter, n_users, n_items = convert(wheel, args.out)
    print(f"wrote {args.out}: {n_inter} ratings, {n_users} users, {n_items} items")


if __name__ == "__main__":
    main()
