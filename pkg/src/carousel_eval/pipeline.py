"""prepare -> tune -> run orchestration shared by the CLI and tests."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

from .config import RunConfig
from .core import CarouselPage, DiscountWeights, ground_truth_from_matrix
from .data_io import (PreparedData, SplitConfig, dataset_stats, implicitize, load_grid, load_split,
                      parse_entity_features, parse_interactions, parse_item_features, save_grid, save_split,
                      split_holdout, subsample_users)
from .experiment import (DEFAULT_SPACES, CarouselScenario, ResultRow, assemble_results, evaluate_carousel,
                         evaluate_individual, ranking_kendall_tau, tune_random_search)
from .metrics import PageMetrics
from .recommenders import ALGORITHMS, make_model
from .report import write_results, write_trials

log = logging.getLogger(__name__)


def split_dir(cfg: RunConfig) -> Path:
    return cfg.output / "split"


def prepare(cfg: RunConfig) -> tuple[PreparedData, dict[str, float]]:
    raw = parse_interactions(cfg.ratings, cfg.format, strict=cfg.strict)
    matrix = implicitize(raw, cfg.implicit_threshold, keep_ratings=cfg.graded, compact=cfg.compact)
    if cfg.compact and (cfg.movies or cfg.tags or cfg.user_features):
        raise ValueError("compact index spaces cannot be combined with feature files")
    if cfg.user_sample < 1:
        matrix = subsample_users(matrix, cfg.user_sample, cfg.seed)
    split = split_holdout(matrix, SplitConfig(cfg.train_fraction, cfg.validation_fraction, cfg.test_fraction,
                                              cfg.seed, cfg.implicit_threshold))
    item_features = user_features = None
    if cfg.movies or cfg.tags:
        item_features, _ = parse_item_features(raw.item_map, cfg.movies, cfg.tags)
    if cfg.user_features:
        user_features, _ = parse_entity_features(cfg.user_features, raw.user_map)
    prepared = PreparedData(split, raw.user_map, raw.item_map, item_features, user_features, cfg.graded)
    save_split(prepared, split_dir(cfg))
    stats = dataset_stats(matrix)
    stats.update({"ratings": len(raw), "raw_users": raw.num_users, "raw_items": raw.num_items,
                  "malformed": raw.malformed, "train": split.train.nnz, "validation": split.validation.nnz,
                  "test": split.test.nnz})
    return prepared, stats


def tune(cfg: RunConfig, prepared: PreparedData) -> dict[str, Any]:
    out = cfg.output / "tuning"
    out.mkdir(parents=True, exist_ok=True)
    best: dict[str, Any] = {}
    s = prepared.split
    for spec in cfg.algorithms:
        if spec.search is None:
            continue
        space = dict(spec.params)
        space.update(spec.search or DEFAULT_SPACES.get(spec.tag, {}))
        result = tune_random_search(spec.tag, space, cfg.budget, cfg.tuning_seed, s.train, s.validation,
                                    cfg.cutoff, prepared.item_features, prepared.user_features, cfg.threads)
        write_trials(result.log_rows(), out / f"{spec.tag}_trials.csv")
        best[spec.tag] = {"params": result.best_params, "validation_map": result.best_score}
        log.info("tuned %s: MAP@%d=%.4f %s", spec.tag, cfg.cutoff, result.best_score, result.best_params)
    (out / "best_params.json").write_text(json.dumps(best, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return best


def _tuned_params(cfg: RunConfig) -> dict[str, dict]:
    p = cfg.output / "tuning" / "best_params.json"
    if not p.is_file():
        return {}
    return {tag: v["params"] for tag, v in json.loads(p.read_text(encoding="utf-8")).items()}


def _individual_row(label: str, tag: str, metrics: PageMetrics, role: str) -> ResultRow:
    return ResultRow(label, individual=metrics, tag=tag, role=role)


def run(cfg: RunConfig, prepared: PreparedData) -> dict[str, Any]:
    s = prepared.split
    test = ground_truth_from_matrix(s.test, graded=prepared.graded)
    tuned = _tuned_params(cfg)
    exclude = None if cfg.exclude_seen else False
    weights = DiscountWeights(cfg.alpha, cfg.beta)

    def build(tag: str, params: dict):
        return make_model(tag, params, prepared.item_features, prepared.user_features).fit(s.train)

    fixed_providers, fixed_rows = [], []
    for f in cfg.fixed:
        if f.grid is not None:
            pages, _ = load_grid(f.grid)
            fixed_providers.append(pages)
            first_rows = {u: [p.rows[0]] for u, p in pages.items()}
            m = evaluate_individual(first_rows, test, cfg.cutoff)
            fixed_rows.append(_individual_row(f.name, "grid", m, "fixed"))
        else:
            params = tuned.get(f.tag, f.params)
            model = build(f.tag, params)
            fixed_providers.append(model)
            m = evaluate_individual(model, test, cfg.cutoff, exclude)
            fixed_rows.append(_individual_row(ALGORITHMS[f.tag].label, f.tag, m, "fixed"))
    scenario = CarouselScenario(fixed_providers, cfg.cutoff, weights, s.train, exclude)
    users = sorted(u for u, g in test.items() if g)
    fixed_pages = {u: CarouselPage(tuple(rows)) for u, rows in scenario.fixed_rows(users).items()}
    baseline = scenario.baseline(test)
    n_fixed = fixed_pages[users[0]].n_rows
    save_grid(fixed_pages, cfg.output / "fixed_grid.tsv", weights, [cfg.cutoff] * n_fixed)

    def evaluate(spec) -> ResultRow:
        label = ALGORITHMS[spec.tag].label
        params = tuned.get(spec.tag, spec.params)
        try:
            model = build(spec.tag, params)
            ind = evaluate_individual(model, test, cfg.cutoff, exclude)
            car = evaluate_carousel(scenario, model, test, exclude)
            return ResultRow(label, ind, car.page, car.baseline.average_precision,
                             improvement_carousel=car.improvement, tag=spec.tag)
        except Exception as exc:  # isolate per-algorithm failures
            log.error("%s failed: %s", label, exc)
            return ResultRow(label, tag=spec.tag, error=f"{type(exc).__name__}: {exc}")

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            candidates = list(pool.map(evaluate, cfg.algorithms))
    else:
        candidates = [evaluate(spec) for spec in cfg.algorithms]

    reference = fixed_rows[0].individual.average_precision
    rows = assemble_results(fixed_rows, candidates, reference)
    tau = ranking_kendall_tau(rows)
    title = (f"Individual vs carousel evaluation (fixed: {', '.join(r.algorithm for r in fixed_rows)}), "
             f"cutoff {cfg.cutoff}, alpha={cfg.alpha:g}, beta={cfg.beta:g}")
    csv_path, md_path = write_results(rows, cfg.output, title)
    summary = {
        "title": title,
        "fixed": [f.name for f in cfg.fixed],
        "cutoff": cfg.cutoff,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "users_evaluated": baseline.users,
        "baseline_map": baseline.average_precision,
        "kendall_tau_individual_vs_carousel": tau,
        "failed": [r.algorithm for r in rows if r.error],
        "params": {spec.tag: tuned.get(spec.tag, spec.params) for spec in cfg.algorithms},
    }
    (cfg.output / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    log.info("kendall tau between individual and carousel MAP ranks: %s", tau)
    return {"rows": rows, "summary": summary, "csv": csv_path, "markdown": md_path}


def load_prepared(cfg: RunConfig) -> PreparedData:
    return load_split(split_dir(cfg))
