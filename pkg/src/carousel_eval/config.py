"""Run configuration: loading, defaults and up-front validation.

A config is a YAML (or JSON) mapping::

    dataset:
      ratings: ratings.dat        # required
      format: double-colon        # double-colon | csv | tsv
      strict: true
      movies: movies.dat          # optional, genres and release year
      tags: tags.dat              # optional
      user_features: users.csv    # optional, entity,feature[,weight]
      user_sample: 1.0
    preprocessing: {implicit_threshold: 3.5, relevance: binary, compact: false}
    split: {train: 0.8, validation: 0.1, test: 0.1, seed: 42}
    evaluation: {cutoff: 10, alpha: 1.0, beta: 1.0, fixed: [toppop], exclude_seen: true}
    tuning: {budget: 50, seed: 0}
    algorithms:
      - tag: itemknn_cf
        params: {k: 100, shrink: 10}
        search: true              # or a mapping of ranges; omit to use params as-is
    output: out
    threads: 1

Relative dataset paths resolve against ``$CAROUSEL_EVAL_DATA`` when set,
otherwise against the config file's directory.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .data_io import FORMATS
from .recommenders import ALGORITHMS, needs_features

DATA_DIR_ENV = "CAROUSEL_EVAL_DATA"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "dataset": {"format": "double-colon", "strict": True, "movies": None, "tags": None, "user_features": None,
                "user_sample": 1.0},
    "preprocessing": {"implicit_threshold": 3.5, "relevance": "binary", "compact": False},
    "split": {"train": 0.8, "validation": 0.1, "test": 0.1, "seed": 42},
    "evaluation": {"cutoff": 10, "alpha": 1.0, "beta": 1.0, "fixed": ["toppop"], "exclude_seen": True},
    "tuning": {"budget": 50, "seed": 0},
    "output": "out",
    "threads": 1,
}
_TOP_KEYS = set(DEFAULTS) | {"algorithms"}
_DATASET_KEYS = set(DEFAULTS["dataset"]) | {"ratings"}
_ALGO_KEYS = {"tag", "params", "search", "label"}


@dataclass(frozen=True)
class AlgorithmSpec:
    tag: str
    params: dict[str, Any] = field(default_factory=dict)
    search: dict[str, Any] | None = None  # None: no tuning; {}: default space


@dataclass(frozen=True)
class FixedSpec:
    tag: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    grid: Path | None = None

    @property
    def name(self) -> str:
        return f"grid:{self.grid}" if self.grid else self.tag


@dataclass
class RunConfig:
    ratings: Path
    format: str
    strict: bool
    movies: Path | None
    tags: Path | None
    user_features: Path | None
    user_sample: float
    implicit_threshold: float
    relevance: str
    compact: bool
    train_fraction: float
    validation_fraction: float
    test_fraction: float
    seed: int
    cutoff: int
    alpha: float
    beta: float
    fixed: list[FixedSpec]
    exclude_seen: bool
    budget: int
    tuning_seed: int
    algorithms: list[AlgorithmSpec]
    output: Path
    threads: int
    source: Path | None = None

    @property
    def graded(self) -> bool:
        return self.relevance == "graded"

    def describe(self) -> list[str]:
        """Human-readable execution plan (``--dry-run``)."""
        lines = [
            f"dataset      {self.ratings} ({self.format}, strict={self.strict})",
            f"features     movies={self.movies} tags={self.tags} users={self.user_features}",
            f"preprocess   threshold={self.implicit_threshold} relevance={self.relevance} compact={self.compact}"
            f" user_sample={self.user_sample}",
            f"split        {self.train_fraction}/{self.validation_fraction}/{self.test_fraction} seed={self.seed}",
            f"evaluation   cutoff={self.cutoff} alpha={self.alpha} beta={self.beta}"
            f" fixed={[f.name for f in self.fixed]}",
            f"tuning       budget={self.budget} seed={self.tuning_seed}",
        ]
        for a in self.algorithms:
            mode = "tuned" if a.search is not None else "fixed params"
            lines.append(f"algorithm    {a.tag:14s} {mode} {a.params or ''}")
        lines.append(f"output       {self.output} threads={self.threads}")
        return lines


def _reject_unknown(section: str, got: Mapping, allowed: set) -> None:
    extra = sorted(set(got) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(map(str, extra))}")


def _mapping(section: str, value) -> dict:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{section} must be a mapping")
    return dict(value)


def _num(section: str, key: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _flag(section: str, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{section}.{key} must be true or false")
    return value


def _resolve(path, base: Path) -> Path | None:
    if path is None:
        return None
    p = Path(os.path.expanduser(str(path)))
    if p.is_absolute():
        return p
    env = os.environ.get(DATA_DIR_ENV)
    return (Path(env) if env else base) / p


def from_mapping(raw: Mapping[str, Any], base_dir: Path | None = None) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a mapping")
    _reject_unknown("config", raw, _TOP_KEYS)
    base_dir = Path(base_dir or ".")
    cfg = copy.deepcopy(DEFAULTS)
    for section in ("dataset", "preprocessing", "split", "evaluation", "tuning"):
        given = _mapping(section, raw.get(section))
        allowed = _DATASET_KEYS if section == "dataset" else set(DEFAULTS[section])
        _reject_unknown(section, given, allowed)
        cfg[section].update(given)
    for key in ("output", "threads"):
        if key in raw:
            cfg[key] = raw[key]

    ds = cfg["dataset"]
    if not ds.get("ratings"):
        raise ConfigError("dataset.ratings is required")
    if ds["format"] not in FORMATS:
        raise ConfigError(f"dataset.format must be one of {FORMATS}")
    user_sample = _num("dataset", "user_sample", ds["user_sample"])
    if not 0 < user_sample <= 1:
        raise ConfigError("dataset.user_sample must lie in (0, 1]")

    pre = cfg["preprocessing"]
    if pre["relevance"] not in ("binary", "graded"):
        raise ConfigError("preprocessing.relevance must be 'binary' or 'graded'")

    sp_ = cfg["split"]
    fr = [_num("split", k, sp_[k]) for k in ("train", "validation", "test")]
    if not all(0 < x < 1 for x in fr) or abs(sum(fr) - 1) > 1e-9:
        raise ConfigError(f"split fractions must lie in (0, 1) and sum to 1, got {fr}")

    ev = cfg["evaluation"]
    cutoff = _num("evaluation", "cutoff", ev["cutoff"], int)
    alpha, beta = _num("evaluation", "alpha", ev["alpha"]), _num("evaluation", "beta", ev["beta"])
    if cutoff < 1:
        raise ConfigError("evaluation.cutoff must be >= 1")
    if alpha < 1 or beta < 1:
        raise ConfigError("evaluation.alpha and evaluation.beta must be >= 1")

    algorithms = []
    algo_raw = raw.get("algorithms") or []
    if not isinstance(algo_raw, list) or not algo_raw:
        raise ConfigError("algorithms must be a non-empty list")
    seen = set()
    for k, entry in enumerate(algo_raw):
        if isinstance(entry, str):
            entry = {"tag": entry}
        entry = _mapping(f"algorithms[{k}]", entry)
        _reject_unknown(f"algorithms[{k}]", entry, _ALGO_KEYS)
        tag = entry.get("tag")
        if tag not in ALGORITHMS:
            raise ConfigError(f"algorithms[{k}]: unknown tag {tag!r}; known: {', '.join(ALGORITHMS)}")
        if tag in seen:
            raise ConfigError(f"algorithms[{k}]: {tag} listed twice")
        seen.add(tag)
        search = entry.get("search")
        if search is True:
            search = {}
        elif search in (None, False):
            search = None
        else:
            search = _mapping(f"algorithms[{k}].search", search)
        params = _mapping(f"algorithms[{k}].params", entry.get("params"))
        _reject_unknown(f"algorithms[{k}].params", params, ALGORITHMS[tag].param_names())
        if search:
            _reject_unknown(f"algorithms[{k}].search", search, ALGORITHMS[tag].param_names())
        algorithms.append(AlgorithmSpec(tag, params, search))

    fixed = []
    fixed_raw = ev["fixed"]
    if isinstance(fixed_raw, (str, Mapping)):
        fixed_raw = [fixed_raw]
    if not fixed_raw:
        raise ConfigError("evaluation.fixed needs at least one provider")
    for k, f in enumerate(fixed_raw):
        fixed.append(parse_fixed(f, base_dir, {a.tag: a.params for a in algorithms}, f"evaluation.fixed[{k}]"))

    tu = cfg["tuning"]
    budget = _num("tuning", "budget", tu["budget"], int)
    if budget < 1:
        raise ConfigError("tuning.budget must be >= 1")
    threads = _num("config", "threads", cfg["threads"], int)
    if threads < 1:
        raise ConfigError("threads must be >= 1")

    has_item_features = bool(ds.get("movies") or ds.get("tags"))
    used = [a.tag for a in algorithms] + [f.tag for f in fixed if f.tag]
    for tag in used:
        kind = needs_features(tag)
        if kind == "item" and not has_item_features:
            raise ConfigError(f"{tag} needs item features (dataset.movies or dataset.tags)")
        if kind == "user" and not ds.get("user_features"):
            raise ConfigError(f"{tag} needs dataset.user_features")

    return RunConfig(
        ratings=_resolve(ds["ratings"], base_dir), format=ds["format"], strict=_flag("dataset", "strict", ds["strict"]),
        movies=_resolve(ds["movies"], base_dir), tags=_resolve(ds["tags"], base_dir),
        user_features=_resolve(ds["user_features"], base_dir), user_sample=user_sample,
        implicit_threshold=_num("preprocessing", "implicit_threshold", pre["implicit_threshold"]),
        relevance=pre["relevance"], compact=_flag("preprocessing", "compact", pre["compact"]),
        train_fraction=fr[0], validation_fraction=fr[1], test_fraction=fr[2],
        seed=_num("split", "seed", sp_["seed"], int),
        cutoff=cutoff, alpha=alpha, beta=beta, fixed=fixed,
        exclude_seen=_flag("evaluation", "exclude_seen", ev["exclude_seen"]),
        budget=budget, tuning_seed=_num("tuning", "seed", tu["seed"], int),
        algorithms=algorithms, output=Path(cfg["output"]) if Path(cfg["output"]).is_absolute()
        else base_dir / cfg["output"], threads=threads,
    )


def parse_fixed(spec, base_dir: Path, known_params: Mapping[str, dict] | None = None,
                where: str = "--fixed") -> FixedSpec:
    """``toppop`` | ``grid:<path>`` | ``{tag: ..., params: {...}}``."""
    known_params = known_params or {}
    if isinstance(spec, str):
        if spec.startswith("grid:"):
            return FixedSpec(grid=_resolve(spec[len("grid:"):], base_dir))
        spec = {"tag": spec}
    spec = _mapping(where, spec)
    _reject_unknown(where, spec, {"tag", "params", "grid"})
    if spec.get("grid"):
        return FixedSpec(grid=_resolve(spec["grid"], base_dir))
    tag = spec.get("tag")
    if tag not in ALGORITHMS:
        raise ConfigError(f"{where}: unknown fixed provider {tag!r}")
    params = spec.get("params")
    if params is not None:
        _reject_unknown(f"{where}.params", _mapping(f"{where}.params", params), ALGORITHMS[tag].param_names())
    return FixedSpec(tag, dict(params if params is not None else known_params.get(tag, {})))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML/JSON: {exc}") from None
    cfg = from_mapping(raw or {}, path.parent)
    cfg.source = path
    return cfg
