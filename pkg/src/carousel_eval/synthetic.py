"""Seeded synthetic movie-style dataset in MovieLens file layouts.

Users prefer one or two latent genres; item popularity is Zipf-skewed.
Files written: ``ratings.dat`` (user::item::rating::timestamp),
``movies.dat`` (item::title (year)::genres), ``tags.dat`` and
``users.csv`` (user,feature).

    python -m carousel_eval.synthetic OUT_DIR [--users 2000] [--items 500] [--seed 7]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

GENRES = ["Action", "Adventure", "Animation", "Comedy", "Crime", "Documentary", "Drama", "Fantasy", "Horror",
          "Romance", "Sci-Fi", "Thriller"]
TAGS = ["classic", "twist ending", "slow", "funny", "dark", "visually stunning", "based on a book", "cult",
        "feel-good", "violent", "quirky", "atmospheric"]


def generate(out_dir, n_users: int = 2000, n_items: int = 500, seed: int = 7,
             mean_ratings: float = 40.0) -> dict[str, Path]:
    rng = np.random.Generator(np.random.PCG64(seed))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_genres = len(GENRES)

    main_genre = rng.integers(n_genres, size=n_items)
    second_genre = np.where(rng.random(n_items) < 0.4, rng.integers(n_genres, size=n_items), -1)
    popularity = 1.0 / np.arange(1, n_items + 1) ** 0.8
    popularity = popularity[rng.permutation(n_items)]
    quality = rng.normal(0.0, 0.6, size=n_items)
    year = rng.integers(1950, 2020, size=n_items)

    favourite = rng.integers(n_genres, size=n_users)
    second_fav = np.where(rng.random(n_users) < 0.5, rng.integers(n_genres, size=n_users), favourite)
    activity = np.maximum(5, rng.poisson(mean_ratings, size=n_users))

    lines = []
    t0 = 1_100_000_000
    for u in range(n_users):
        liked = (main_genre == favourite[u]) | (main_genre == second_fav[u]) | (second_genre == favourite[u])
        weight = popularity * np.where(liked, 6.0, 1.0)
        k = min(int(activity[u]), n_items)
        items = rng.choice(n_items, size=k, replace=False, p=weight / weight.sum())
        base = 3.0 + quality[items] + np.where(liked[items], 1.0, -0.6) + rng.normal(0, 0.7, size=k)
        ratings = np.clip(np.round(base * 2) / 2, 0.5, 5.0)
        times = t0 + np.sort(rng.integers(0, 300_000_000, size=k))
        for i, r, t in zip(items.tolist(), ratings.tolist(), times.tolist()):
            lines.append(f"{u + 1}::{i + 1}::{r:g}::{t}\n")
    paths = {"ratings": out / "ratings.dat", "movies": out / "movies.dat", "tags": out / "tags.dat",
             "users": out / "users.csv"}
    paths["ratings"].write_text("".join(lines), encoding="utf-8")

    with open(paths["movies"], "w", encoding="utf-8") as f:
        for i in range(n_items):
            g = [GENRES[main_genre[i]]]
            if second_genre[i] >= 0 and second_genre[i] != main_genre[i]:
                g.append(GENRES[second_genre[i]])
            f.write(f"{i + 1}::Movie {i + 1} ({year[i]})::{'|'.join(g)}\n")

    with open(paths["tags"], "w", encoding="utf-8") as f:
        for i in range(n_items):
            for tag in rng.choice(len(TAGS), size=int(rng.integers(0, 3)), replace=False).tolist():
                # tag vocabulary leans on the main genre so tags carry signal
                name = TAGS[(tag + main_genre[i]) % len(TAGS)]
                f.write(f"{int(rng.integers(1, n_users + 1))}::{i + 1}::{name.title() if tag % 2 else name}::{t0}\n")

    with open(paths["users"], "w", encoding="utf-8") as f:
        f.write("user,feature\n")
        for u in range(n_users):
            f.write(f"{u + 1},likes:{GENRES[favourite[u]]}\n")
            f.write(f"{u + 1},age:{int(rng.integers(1, 7)) * 10}\n")
    return paths


def main(argv=None):
    ap = argparse.ArgumentParser(description="Write a synthetic carousel-evaluation dataset.")
    ap.add_argument("out_dir")
    ap.add_argument("--users", type=int, default=2000)
    ap.add_argument("--items", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    for name, path in generate(args.out_dir, args.users, args.items, args.seed).items():
        print(f"{name:8s} {path}")


if __name__ == "__main__":
    main()
