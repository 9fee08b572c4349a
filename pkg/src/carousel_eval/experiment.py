"""Individual and carousel evaluation protocols, rank tables and tuning."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import kendalltau

from .core import (PLACEHOLDER, Carousel, CarouselPage, DiscountWeights, FeatureMatrix, InteractionMatrix,
                   ground_truth_from_matrix)
from .metrics import PageMetrics, evaluate_page_set
from .recommenders import Recommender, make_model, recommend_batch

log = logging.getLogger(__name__)

# A row provider is a trained model or precomputed rows per user.
Provider = Union[Recommender, Mapping[int, Sequence[Carousel]]]


class TuningError(RuntimeError):
    pass


def _rows_for(provider: Provider, users: Sequence[int], cutoff: int, exclude_seen: bool | None,
              train: InteractionMatrix | None) -> dict[int, list[Carousel]]:
    if isinstance(provider, Recommender):
        recs = recommend_batch(provider, users, cutoff, exclude_seen, train)
        return {u: [recs[u]] for u in users}
    out = {}
    for u in users:
        if u not in provider:
            raise KeyError(f"precomputed provider has no rows for user {u}")
        rows = provider[u]
        out[u] = list(rows.rows) if isinstance(rows, CarouselPage) else list(rows)
    return out


def evaluate_individual(model: Provider, test: Mapping[int, Mapping[int, float]], cutoff: int = 10,
                        exclude_seen: bool | None = None, train: InteractionMatrix | None = None) -> PageMetrics:
    """Classic single-list evaluation: one carousel per user with non-empty ground truth.

    With a single row, NDCG2D is reported equal to NDCG.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    users = sorted(u for u, g in test.items() if g)
    rows = _rows_for(model, users, cutoff, exclude_seen, train)
    pages = {u: CarouselPage((rows[u][0],)) for u in users}
    m = evaluate_page_set(pages, test, DiscountWeights())
    return replace(m, ndcg2d=m.ndcg)


def improvement(value: float, baseline: float) -> float:
    """Relative change of ``value`` over ``baseline`` in percent."""
    if not baseline > 0:
        raise ValueError(f"baseline must be > 0, got {baseline!r}")
    return (value - baseline) / baseline * 100.0


@dataclass
class CarouselScenario:
    """Fixed rows shown above the candidate row, plus page geometry.

    ``fixed`` providers fill rows 1..m in order; the candidate fills row
    m + 1 with ``cutoff`` items.
    """

    fixed: Sequence[Provider]
    cutoff: int = 10
    weights: DiscountWeights = field(default_factory=DiscountWeights)
    train: InteractionMatrix | None = None
    exclude_seen: bool | None = None
    _rows: dict[int, list[Carousel]] = field(default_factory=dict, init=False, repr=False)
    _baseline: dict[tuple[int, ...], PageMetrics] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if not self.fixed:
            raise ValueError("carousel evaluation needs at least one fixed provider")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")

    def fixed_rows(self, users: Sequence[int]) -> dict[int, list[Carousel]]:
        missing = [u for u in users if u not in self._rows]
        if missing:
            per_provider = [_rows_for(p, missing, self.cutoff, self.exclude_seen, self.train) for p in self.fixed]
            for u in missing:
                self._rows[u] = [c for rows in per_provider for c in rows[u]]
        return {u: self._rows[u] for u in users}

    def baseline(self, test: Mapping[int, Mapping[int, float]]) -> PageMetrics:
        """Fixed rows plus an all-placeholder candidate row of full length."""
        users = tuple(sorted(u for u, g in test.items() if g))
        if users not in self._baseline:
            empty = Carousel((PLACEHOLDER,) * self.cutoff, "placeholder")
            fixed = self.fixed_rows(users)
            pages = {u: CarouselPage(tuple(fixed[u]) + (empty,)) for u in users}
            self._baseline[users] = evaluate_page_set(pages, test, self.weights)
        return self._baseline[users]


@dataclass(frozen=True)
class CarouselResult:
    page: PageMetrics
    baseline: PageMetrics
    improvement: float


def carousel_pages(scenario: CarouselScenario, candidate: Provider, users: Sequence[int],
                   exclude_seen: bool | None = None) -> dict[int, CarouselPage]:
    fixed = scenario.fixed_rows(users)
    cand = _rows_for(candidate, users, scenario.cutoff, exclude_seen, scenario.train)
    return {u: CarouselPage(tuple(fixed[u]) + (cand[u][0],)) for u in users}


def evaluate_carousel(scenario: CarouselScenario, candidate: Provider, test: Mapping[int, Mapping[int, float]],
                      exclude_seen: bool | None = None) -> CarouselResult:
    """Page metrics with the candidate below the fixed rows, and its MAP improvement."""
    users = sorted(u for u, g in test.items() if g)
    pages = carousel_pages(scenario, candidate, users, exclude_seen)
    page = evaluate_page_set(pages, test, scenario.weights)
    base = scenario.baseline(test)
    return CarouselResult(page, base, improvement(page.average_precision, base.average_precision))


# -- rank table ----------------------------------------------------------------

@dataclass
class ResultRow:
    algorithm: str
    individual: PageMetrics | None = None
    carousel: PageMetrics | None = None
    baseline_map: float | None = None
    improvement_individual: float | None = None
    improvement_carousel: float | None = None
    rank_individual: int | None = None
    rank_carousel: int | None = None
    delta_rank: int | None = None
    tag: str = ""
    role: str = "candidate"
    error: str | None = None


def _ranks(values: Sequence[tuple[str, float]]) -> dict[str, int]:
    # highest value first, ties by label
    order = sorted(values, key=lambda lv: (-lv[1], lv[0]))
    return {label: k for k, (label, _) in enumerate(order, start=1)}


def rank_table(rows: Sequence[tuple[str, float, float]]) -> list[ResultRow]:
    """Rank algorithms by individual and by carousel MAP.

    ``delta_rank = rank_individual - rank_carousel``: positive when the
    algorithm climbs under carousel evaluation.
    """
    if not rows:
        raise ValueError("rank_table needs at least one row")
    labels = [r[0] for r in rows]
    if len(set(labels)) != len(labels):
        raise ValueError("algorithm labels must be unique")
    for label, a, b in rows:
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"non-finite MAP for {label}")
    ri = _ranks([(r[0], r[1]) for r in rows])
    rc = _ranks([(r[0], r[2]) for r in rows])
    return [ResultRow(label, rank_individual=ri[label], rank_carousel=rc[label], delta_rank=ri[label] - rc[label])
            for label, _, _ in rows]


def assemble_results(fixed_rows: Sequence[ResultRow], candidates: Sequence[ResultRow],
                     reference_map: float | None) -> list[ResultRow]:
    """Fill improvements and ranks of candidate rows; failed rows stay gaps."""
    ok = [r for r in candidates if r.error is None and r.individual is not None and r.carousel is not None]
    if ok:
        ranked = {r.algorithm: r for r in rank_table([(r.algorithm, r.individual.average_precision,
                                                       r.carousel.average_precision) for r in ok])}
        for r in ok:
            k = ranked[r.algorithm]
            r.rank_individual, r.rank_carousel, r.delta_rank = k.rank_individual, k.rank_carousel, k.delta_rank
            if reference_map is not None and reference_map > 0:
                r.improvement_individual = improvement(r.individual.average_precision, reference_map)
    return list(fixed_rows) + list(candidates)


def ranking_kendall_tau(rows: Sequence[ResultRow]) -> float | None:
    ranked = [r for r in rows if r.rank_individual is not None]
    if len(ranked) < 2:
        return None
    tau = kendalltau([r.rank_individual for r in ranked], [r.rank_carousel for r in ranked]).statistic
    return None if tau is None or math.isnan(tau) else float(tau)


# -- random search -------------------------------------------------------------

# Spaces: name -> fixed value | {"low", "high", "type": "int"|"float", "log": bool} | {"choices": [...]}
DEFAULT_SPACES: dict[str, dict[str, Any]] = {
    "toppop": {},
    "itemknn_cf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000}},
    "userknn_cf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000}},
    "itemknn_cbf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000}},
    "userknn_cbf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000}},
    "itemknn_cfcbf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000},
                      "content_weight": {"low": 0.01, "high": 10.0, "log": True}},
    "userknn_cfcbf": {"k": {"low": 5, "high": 800, "type": "int"}, "shrink": {"low": 0, "high": 1000},
                      "content_weight": {"low": 0.01, "high": 10.0, "log": True}},
    "p3alpha": {"k": {"low": 5, "high": 800, "type": "int"}, "alpha": {"low": 0.0, "high": 2.0}},
    "rp3beta": {"k": {"low": 5, "high": 800, "type": "int"}, "alpha": {"low": 0.0, "high": 2.0},
                "beta": {"low": 0.0, "high": 2.0}},
    "easer": {"lam": {"low": 1.0, "high": 1e7}},
    "puresvd": {"factors": {"low": 1, "high": 350, "type": "int"}},
}

# sampled log-uniformly unless the range says otherwise
_LOG_BY_DEFAULT = {"shrink", "lam"}


def _sample_one(name: str, spec: Any, rng: np.random.Generator):
    if not isinstance(spec, Mapping):
        return spec
    if "choices" in spec:
        choices = list(spec["choices"])
        if not choices:
            raise ValueError(f"{name}: empty choices")
        return choices[int(rng.integers(len(choices)))]
    low, high = float(spec["low"]), float(spec["high"])
    if high < low:
        raise ValueError(f"{name}: high < low")
    is_int = spec.get("type", "float") == "int"
    use_log = bool(spec.get("log", name in _LOG_BY_DEFAULT))
    if low == high:
        value = low
    elif use_log:
        # log1p scale keeps a lower bound of 0 admissible
        shift = 1.0 if low <= 0 else 0.0
        lo, hi = math.log(low + shift), math.log(high + shift + (1.0 if is_int else 0.0))
        value = math.exp(rng.uniform(lo, hi)) - shift
    elif is_int:
        value = float(rng.integers(int(low), int(high) + 1))
    else:
        value = rng.uniform(low, high)
    if is_int:
        return int(min(max(math.floor(value), low), high))
    return float(min(max(value, low), high))


def sample_params(space: Mapping[str, Any], rng: np.random.Generator) -> dict[str, Any]:
    return {name: _sample_one(name, space[name], rng) for name in sorted(space)}


@dataclass
class Trial:
    index: int
    params: dict[str, Any]
    score: float | None
    error: str | None = None


@dataclass
class TuneResult:
    family: str
    best_params: dict[str, Any]
    best_score: float
    trials: list[Trial]

    def log_rows(self) -> list[dict[str, Any]]:
        return [{"trial": t.index, "params": json.dumps(t.params, sort_keys=True),
                 "map": "" if t.score is None else repr(t.score), "status": "ok" if t.error is None else "failed",
                 "error": t.error or ""} for t in self.trials]


def tune_random_search(family: str, space: Mapping[str, Any] | None, budget: int, seed: int,
                       train: InteractionMatrix, validation: InteractionMatrix, cutoff: int = 10,
                       item_features: FeatureMatrix | None = None, user_features: FeatureMatrix | None = None,
                       threads: int = 1,
                       factory: Callable[[str, dict], Recommender] | None = None) -> TuneResult:
    """Seeded random search maximizing validation MAP@cutoff.

    All configurations are drawn up front, so the outcome does not depend
    on ``threads``. Ties keep the earliest trial.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    space = DEFAULT_SPACES.get(family, {}) if space is None else space
    rng = np.random.Generator(np.random.PCG64(seed))
    configs = [sample_params(space, rng) for _ in range(budget)]
    gt = ground_truth_from_matrix(validation)
    if factory is None:
        def factory(tag, params):
            return make_model(tag, params, item_features, user_features)

    def run(k: int) -> Trial:
        params = configs[k]
        try:
            model = factory(family, params).fit(train)
            score = evaluate_individual(model, gt, cutoff, train=train).average_precision
            return Trial(k, params, score)
        except Exception as exc:  # a failed trial must not end the search
            log.warning("%s trial %d failed: %s", family, k, exc)
            return Trial(k, params, None, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run, range(budget)))
    else:
        trials = [run(k) for k in range(budget)]
    good = [t for t in trials if t.score is not None]
    if not good:
        raise TuningError(f"all {budget} trials of {family} failed")
    best = max(good, key=lambda t: (t.score, -t.index))
    return TuneResult(family, best.params, best.score, trials)
