"""Dataset parsing, implicitization, splitting and on-disk formats."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (PLACEHOLDER, Carousel, CarouselPage, DatasetSplit, DiscountWeights, FeatureMatrix,
                   InteractionMatrix)

log = logging.getLogger(__name__)

FORMATS = ("double-colon", "csv", "tsv")
GRID_VERSION = 1

_USER_COLS = ("user", "userid", "user_id", "uid")
_ITEM_COLS = ("item", "itemid", "item_id", "movieid", "movie_id", "iid")
_RATING_COLS = ("rating", "score", "value")
_TIME_COLS = ("timestamp", "time", "ts")


class DataFormatError(ValueError):
    """Malformed input, with the offending file and line when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class IdMap:
    """Bijection between external ids (strings) and dense indices, in first-seen order."""

    def __init__(self, ids: Iterable[str] = ()):
        self._ids: list[str] = []
        self._index: dict[str, int] = {}
        for x in ids:
            self.add(x)

    def add(self, ext: str) -> int:
        idx = self._index.get(ext)
        if idx is None:
            idx = len(self._ids)
            self._index[ext] = idx
            self._ids.append(ext)
        return idx

    def index(self, ext: str) -> int | None:
        return self._index.get(ext)

    def external(self, idx: int) -> str:
        return self._ids[idx]

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, ext) -> bool:
        return ext in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, IdMap) and self._ids == other._ids


@dataclass
class RawInteractions:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray | None
    user_map: IdMap
    item_map: IdMap
    malformed: int = 0
    malformed_lines: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.users)

    @property
    def num_users(self) -> int:
        return len(self.user_map)

    @property
    def num_items(self) -> int:
        return len(self.item_map)


def _header_columns(header: Sequence[str]) -> tuple[int, int, int, int | None]:
    names = [h.strip().lower() for h in header]

    def find(candidates, default):
        for i, n in enumerate(names):
            if n in candidates:
                return i
        return default

    u, i, r = find(_USER_COLS, 0), find(_ITEM_COLS, 1), find(_RATING_COLS, 2)
    t = find(_TIME_COLS, 3 if len(names) > 3 else None)
    return u, i, r, t


def _split_lines(path: Path, fmt: str):
    """Yield (line_number, fields) for data lines; header handled by caller."""
    with open(path, newline="", encoding="utf-8") as f:
        if fmt == "double-colon":
            for n, line in enumerate(f, start=1):
                line = line.rstrip("\r\n")
                if line:
                    yield n, line.split("::")
        else:
            reader = csv.reader(f, delimiter="," if fmt == "csv" else "\t")
            for fields_ in reader:
                if fields_:
                    yield reader.line_num, fields_


def parse_interactions(path, fmt: str = "double-colon", strict: bool = True) -> RawInteractions:
    """Read (user, item, rating[, timestamp]) records.

    ``double-colon`` is the MovieLens ``ratings.dat`` layout without header;
    ``csv``/``tsv`` need a header row naming the columns (common aliases such
    as ``userId``/``movieId`` are recognized; unknown headers fall back to
    positional user, item, rating, timestamp). In non-strict mode malformed
    lines are skipped and counted.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise DataFormatError("no such file", path)

    rows = _split_lines(path, fmt)
    cols = (0, 1, 2, 3)
    if fmt != "double-colon":
        try:
            _, header = next(rows)
        except StopIteration:
            raise DataFormatError("empty file", path) from None
        cols = _header_columns(header)
    ucol, icol, rcol, tcol = cols

    user_map, item_map = IdMap(), IdMap()
    users, items, ratings, times = [], [], [], []
    bad: list[int] = []
    for n, parts in rows:
        try:
            u, i = parts[ucol].strip(), parts[icol].strip()
            if not u or not i:
                raise ValueError("empty id")
            r = float(parts[rcol])
            if not math.isfinite(r):
                raise ValueError("non-finite rating")
            t = int(parts[tcol]) if tcol is not None and tcol < len(parts) and parts[tcol].strip() else None
            if fmt == "double-colon" and len(parts) not in (3, 4):
                raise ValueError(f"expected 3 or 4 fields, got {len(parts)}")
        except (IndexError, ValueError) as exc:
            if strict:
                raise DataFormatError(f"malformed record ({exc})", path, n) from None
            bad.append(n)
            continue
        users.append(user_map.add(u))
        items.append(item_map.add(i))
        ratings.append(r)
        times.append(t)
    if bad:
        log.warning("%s: skipped %d malformed lines", path, len(bad))
    if not users:
        raise DataFormatError("no interactions parsed", path)
    ts = None
    if any(t is not None for t in times):
        ts = np.array([-1 if t is None else t for t in times], dtype=np.int64)
    return RawInteractions(np.array(users, dtype=np.int64), np.array(items, dtype=np.int64),
                           np.array(ratings, dtype=np.float64), ts, user_map, item_map,
                           malformed=len(bad), malformed_lines=bad)


def _fmt_rating(r: float) -> str:
    return str(int(r)) if float(r).is_integer() else repr(float(r))


def write_interactions(raw: RawInteractions, path, fmt: str = "double-colon") -> None:
    """Inverse of :func:`parse_interactions` (ids written back as external ids)."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    lines = []
    for k in range(len(raw)):
        rec = [raw.user_map.external(raw.users[k]), raw.item_map.external(raw.items[k]), _fmt_rating(raw.ratings[k])]
        if raw.timestamps is not None:
            rec.append(str(raw.timestamps[k]))
        lines.append(rec)
    with open(path, "w", newline="", encoding="utf-8") as f:
        if fmt == "double-colon":
            for rec in lines:
                f.write("::".join(rec) + "\n")
        else:
            w = csv.writer(f, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
            w.writerow(["user", "item", "rating"] + (["timestamp"] if raw.timestamps is not None else []))
            w.writerows(lines)


_YEAR = re.compile(r"\((\d{4})\)\s*$")


def parse_item_features(item_map: IdMap, movies_path=None, tags_path=None) -> tuple[FeatureMatrix, int]:
    """Binary item x feature incidence from MovieLens ``movies.dat``/``tags.dat``.

    Features are ``genre:<name>``, ``decade:<yyyy>`` (release year floored to
    the decade) and ``tag:<lower-cased tag>``. Rows of items never seen in
    the interactions are dropped; the second value is how many were.
    """
    pairs: set[tuple[int, str]] = set()
    dropped: set[str] = set()

    def add(ext_item: str, feature: str):
        idx = item_map.index(ext_item)
        if idx is None:
            dropped.add(ext_item)
        else:
            pairs.add((idx, feature))

    if movies_path is not None:
        for n, parts in _split_lines(Path(movies_path), "double-colon"):
            if len(parts) != 3:
                raise DataFormatError("expected MovieID::Title::Genres", movies_path, n)
            item, title, genres = (p.strip() for p in parts)
            for g in genres.split("|"):
                if g and g != "(no genres listed)":
                    add(item, f"genre:{g}")
            m = _YEAR.search(title)
            if m:
                add(item, f"decade:{int(m.group(1)) // 10 * 10}")
    if tags_path is not None:
        for n, parts in _split_lines(Path(tags_path), "double-colon"):
            if len(parts) < 3:
                raise DataFormatError("expected UserID::MovieID::Tag[::Timestamp]", tags_path, n)
            tag = parts[2].strip().lower()
            if tag:
                add(parts[1].strip(), f"tag:{tag}")
    if dropped:
        log.warning("dropped features of %d items absent from the interactions", len(dropped))
    labels = sorted({f for _, f in pairs})
    col = {f: k for k, f in enumerate(labels)}
    ordered = sorted(pairs)
    fm = FeatureMatrix.from_triples([i for i, _ in ordered], [col[f] for _, f in ordered],
                                    np.ones(len(ordered)), len(item_map), len(labels), labels)
    return fm, len(dropped)


def parse_entity_features(path, id_map: IdMap) -> tuple[FeatureMatrix, int]:
    """Generic ``entity,feature[,weight]`` CSV with header, e.g. user demographics."""
    path = Path(path)
    weights: dict[tuple[int, str], float] = {}
    dropped: set[str] = set()
    rows = _split_lines(path, "csv")
    next(rows, None)
    for n, parts in rows:
        if len(parts) < 2:
            raise DataFormatError("expected entity,feature[,weight]", path, n)
        idx = id_map.index(parts[0].strip())
        if idx is None:
            dropped.add(parts[0].strip())
            continue
        try:
            w = float(parts[2]) if len(parts) > 2 and parts[2].strip() else 1.0
        except ValueError:
            raise DataFormatError(f"bad weight {parts[2]!r}", path, n) from None
        weights[(idx, parts[1].strip())] = w
    if dropped:
        log.warning("%s: dropped features of %d unknown entities", path, len(dropped))
    labels = sorted({f for _, f in weights})
    col = {f: k for k, f in enumerate(labels)}
    keys = sorted(weights)
    fm = FeatureMatrix.from_triples([e for e, _ in keys], [col[f] for _, f in keys], [weights[k] for k in keys],
                                    len(id_map), len(labels), labels)
    return fm, len(dropped)


def implicitize(raw: RawInteractions, threshold: float, keep_ratings: bool = False,
                compact: bool = False) -> InteractionMatrix:
    """Keep records with ``rating >= threshold``.

    Stored values are 1.0, or the rating itself with ``keep_ratings`` (graded
    relevance). Repeated (user, item) records keep the highest rating.
    ``compact`` drops users and items left without interactions; it is off by
    default so indices stay aligned with feature files and id maps.
    """
    keep = raw.ratings >= threshold
    if not keep.any():
        raise ValueError(f"no rating >= {threshold}; implicit matrix would be empty")
    users, items, ratings = raw.users[keep], raw.items[keep], raw.ratings[keep]
    n_users, n_items = raw.num_users, raw.num_items
    key = users * n_items + items
    order = np.lexsort((-ratings, key))
    first = np.ones(order.size, dtype=bool)
    first[1:] = key[order][1:] != key[order][:-1]
    sel = order[first]
    users, items, ratings = users[sel], items[sel], ratings[sel]
    if compact:
        _, users = np.unique(users, return_inverse=True)
        _, items = np.unique(items, return_inverse=True)
        n_users, n_items = int(users.max()) + 1, int(items.max()) + 1
    values = ratings if keep_ratings else np.ones(len(users))
    return InteractionMatrix.from_triples(users, items, values, n_users, n_items)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 42
    implicit_threshold: float = 3.5

    def __post_init__(self):
        fr = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if not all(0 < x < 1 for x in fr):
            raise ValueError(f"split fractions must lie in (0, 1), got {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fr)!r}")


def split_holdout(matrix: InteractionMatrix, cfg: SplitConfig) -> DatasetSplit:
    """Global random holdout over interactions.

    Interactions are taken in row-major order and shuffled by a PCG64
    generator seeded with ``cfg.seed``; validation and test sizes are
    floored and the remainder goes to train.
    """
    n = matrix.nnz
    if n == 0:
        raise ValueError("cannot split an empty matrix")
    n_val = int(math.floor(cfg.validation_fraction * n + 1e-9))
    n_test = int(math.floor(cfg.test_fraction * n + 1e-9))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} interactions leaves an empty part ({n_train}/{n_val}/{n_test})")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    perm = rng.permutation(n)
    users, items, values = matrix.triples()

    def part(idx):
        idx = np.sort(idx)
        return InteractionMatrix.from_triples(users[idx], items[idx], values[idx], matrix.num_users, matrix.num_items)

    return DatasetSplit(part(perm[:n_train]), part(perm[n_train:n_train + n_val]), part(perm[n_train + n_val:]),
                        cfg.seed)


def subsample_users(matrix: InteractionMatrix, fraction: float, seed: int) -> InteractionMatrix:
    """Keep a seeded random ``fraction`` of users (rows of the others emptied)."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_keep = max(1, int(round(fraction * matrix.num_users)))
    chosen = np.zeros(matrix.num_users, dtype=bool)
    chosen[rng.choice(matrix.num_users, size=n_keep, replace=False)] = True
    users, items, values = matrix.triples()
    sel = chosen[users]
    return InteractionMatrix.from_triples(users[sel], items[sel], values[sel], matrix.num_users, matrix.num_items)


def dataset_stats(matrix: InteractionMatrix) -> dict[str, float]:
    active_users = int(np.count_nonzero(np.diff(matrix.matrix.indptr)))
    active_items = int(np.unique(matrix.matrix.indices).size)
    return {
        "users": matrix.num_users,
        "items": matrix.num_items,
        "active_users": active_users,
        "active_items": active_items,
        "interactions": matrix.nnz,
        "density": matrix.nnz / (matrix.num_users * matrix.num_items),
    }


# -- persisted split ---------------------------------------------------------

def _write_triples(path: Path, m: InteractionMatrix) -> None:
    users, items, values = m.triples()
    with open(path, "w", encoding="utf-8") as f:
        f.write("user,item,value\n")
        for u, i, v in zip(users.tolist(), items.tolist(), values.tolist()):
            f.write(f"{u},{i},{v!r}\n")


def _read_triples(path: Path, shape: tuple[int, int]) -> InteractionMatrix:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataFormatError(str(exc), path) from None
    if data.size == 0:
        return InteractionMatrix.from_triples([], [], [], *shape)
    return InteractionMatrix.from_triples(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2],
                                          *shape)


def _write_features(path: Path, fm: FeatureMatrix) -> None:
    coo = fm.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as f:
        f.write("entity,feature,weight\n")
        for k in order:
            f.write(f"{int(coo.row[k])},{int(coo.col[k])},{float(coo.data[k])!r}\n")


def _read_features(path: Path, n_entities: int, labels: list[str]) -> FeatureMatrix:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataFormatError(str(exc), path) from None
    if data.size == 0:
        return FeatureMatrix.from_triples([], [], [], n_entities, len(labels), labels)
    return FeatureMatrix.from_triples(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2],
                                      n_entities, len(labels), labels)


@dataclass
class PreparedData:
    split: DatasetSplit
    user_map: IdMap
    item_map: IdMap
    item_features: FeatureMatrix | None = None
    user_features: FeatureMatrix | None = None
    graded: bool = False


def save_split(prepared: PreparedData, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    s = prepared.split
    for name, part in s.parts().items():
        _write_triples(d / f"{name}.csv", part)
    meta = {
        "version": 1,
        "seed": s.seed,
        "num_users": s.num_users,
        "num_items": s.num_items,
        "graded": prepared.graded,
        "user_ids": prepared.user_map.ids,
        "item_ids": prepared.item_map.ids,
    }
    for kind, fm in (("item", prepared.item_features), ("user", prepared.user_features)):
        if fm is not None:
            _write_features(d / f"{kind}_features.csv", fm)
            meta[f"{kind}_feature_labels"] = list(fm.labels)
    (d / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_split(directory) -> PreparedData:
    d = Path(directory)
    meta_path = d / "meta.json"
    if not meta_path.is_file():
        raise DataFormatError("prepared split not found (run 'prepare' first)", meta_path)
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("version") != 1:
        raise DataFormatError(f"unsupported split version {meta.get('version')!r}", meta_path)
    shape = (meta["num_users"], meta["num_items"])
    parts = {name: _read_triples(d / f"{name}.csv", shape) for name in ("train", "validation", "test")}
    feats = {}
    for kind, n in (("item", shape[1]), ("user", shape[0])):
        p = d / f"{kind}_features.csv"
        feats[kind] = _read_features(p, n, meta[f"{kind}_feature_labels"]) if p.is_file() else None
    return PreparedData(DatasetSplit(seed=meta["seed"], **parts), IdMap(meta["user_ids"]), IdMap(meta["item_ids"]),
                        feats["item"], feats["user"], bool(meta.get("graded", False)))


# -- recommendation grids ------------------------------------------------------

def save_grid(pages: Mapping[int, CarouselPage], path, weights: DiscountWeights | None = None,
              cutoffs: Sequence[int] = ()) -> None:
    """Write pages as ``user<TAB>row<TAB>rank<TAB>item<TAB>provider`` records.

    Rows and ranks are 1-based; a placeholder cell is written as ``-``.
    The header carries the format version, weights, cutoffs and record count.
    """
    weights = weights or DiscountWeights()
    records = []
    for u in sorted(pages):
        for r, row in enumerate(pages[u].rows, start=1):
            for k, item in enumerate(row.items, start=1):
                name = row.provider_name.replace("\t", " ").replace("\n", " ")
                records.append(f"{u}\t{r}\t{k}\t{'-' if item == PLACEHOLDER else item}\t{name}\n")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# carousel-grid v{GRID_VERSION}\n")
        f.write(f"# alpha={weights.alpha!r} beta={weights.beta!r} "
                f"cutoffs={','.join(str(c) for c in cutoffs)} records={len(records)}\n")
        f.write("user\trow\trank\titem\tprovider\n")
        f.writelines(records)


def load_grid(path) -> tuple[dict[int, CarouselPage], dict[str, object]]:
    """Inverse of :func:`save_grid`; returns (pages, header fields)."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3:
        raise DataFormatError("truncated grid header", path)
    m = re.fullmatch(r"# carousel-grid v(\d+)", lines[0])
    if not m:
        raise DataFormatError("not a carousel grid file", path, 1)
    if int(m.group(1)) != GRID_VERSION:
        raise DataFormatError(f"grid version {m.group(1)} != supported {GRID_VERSION}", path, 1)
    header = {}
    for tok in lines[1].lstrip("# ").split():
        k, _, v = tok.partition("=")
        header[k] = v
    try:
        info = {
            "alpha": float(header["alpha"]),
            "beta": float(header["beta"]),
            "cutoffs": [int(c) for c in header["cutoffs"].split(",") if c],
            "records": int(header["records"]),
        }
    except (KeyError, ValueError):
        raise DataFormatError("malformed grid header", path, 2) from None
    if lines[2] != "user\trow\trank\titem\tprovider":
        raise DataFormatError("missing column header", path, 3)
    body = lines[3:]
    if len(body) != info["records"]:
        raise DataFormatError(f"expected {info['records']} records, found {len(body)} (truncated file?)", path)

    cells: dict[int, dict[int, list[int]]] = {}
    names: dict[tuple[int, int], str] = {}
    for n, line in enumerate(body, start=4):
        parts = line.split("\t")
        try:
            if len(parts) != 5:
                raise ValueError
            u, r, k = int(parts[0]), int(parts[1]), int(parts[2])
            item = PLACEHOLDER if parts[3] == "-" else int(parts[3])
            if r < 1 or k < 1 or item < PLACEHOLDER:
                raise ValueError
        except ValueError:
            raise DataFormatError(f"corrupted record {line!r}", path, n) from None
        row = cells.setdefault(u, {}).setdefault(r, [])
        if k != len(row) + 1:
            raise DataFormatError(f"rank {k} out of sequence for user {u} row {r}", path, n)
        row.append(item)
        names[(u, r)] = parts[4]
    pages = {}
    for u, rows in cells.items():
        if sorted(rows) != list(range(1, len(rows) + 1)):
            raise DataFormatError(f"user {u} has non-contiguous rows", path)
        pages[u] = CarouselPage(tuple(Carousel(tuple(rows[r]), names[(u, r)]) for r in sorted(rows)))
    return pages, info
