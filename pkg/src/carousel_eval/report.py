"""CSV and Markdown result tables laid out like the carousel comparison table.

The CSV keeps full float precision (``repr``) so derived quantities can be
recomputed exactly; Markdown shows metrics to 4 decimals and improvements
to 1 decimal.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .experiment import ResultRow

CSV_COLUMNS = [
    "algorithm", "tag", "role",
    "individual_prec", "individual_map", "individual_ndcg",
    "carousel_prec", "carousel_map", "carousel_ndcg", "carousel_ndcg2d",
    "baseline_map", "improvement_individual", "improvement_carousel",
    "rank_individual", "rank_carousel", "delta_rank", "error",
]

_METRIC_COLUMNS = {
    "individual_prec", "individual_map", "individual_ndcg", "carousel_prec", "carousel_map", "carousel_ndcg",
    "carousel_ndcg2d", "baseline_map",
}
_IMPROVEMENT_COLUMNS = {"improvement_individual", "improvement_carousel"}
_RANK_COLUMNS = {"rank_individual", "rank_carousel", "delta_rank"}

MD_HEADER = ["", "Ind. PREC", "Ind. MAP", "Ind. NDCG", "Car. PREC", "Car. MAP", "Car. NDCG", "Car. NDCG 2D",
             "Impr. Individual", "Impr. Carousel", "Rank Individual", "Rank Carousel", "Δ rank"]
MD_KEYS = ["algorithm", "individual_prec", "individual_map", "individual_ndcg", "carousel_prec", "carousel_map",
           "carousel_ndcg", "carousel_ndcg2d", "improvement_individual", "improvement_carousel",
           "rank_individual", "rank_carousel", "delta_rank"]


def row_record(r: ResultRow) -> dict[str, object]:
    ind, car = r.individual, r.carousel
    return {
        "algorithm": r.algorithm, "tag": r.tag, "role": r.role,
        "individual_prec": ind.precision if ind else None,
        "individual_map": ind.average_precision if ind else None,
        "individual_ndcg": ind.ndcg if ind else None,
        "carousel_prec": car.precision if car else None,
        "carousel_map": car.average_precision if car else None,
        "carousel_ndcg": car.ndcg if car else None,
        "carousel_ndcg2d": car.ndcg2d if car else None,
        "baseline_map": r.baseline_map,
        "improvement_individual": r.improvement_individual,
        "improvement_carousel": r.improvement_carousel,
        "rank_individual": r.rank_individual, "rank_carousel": r.rank_carousel, "delta_rank": r.delta_rank,
        "error": r.error,
    }


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        rec = row_record(r)
        w.writerow([_csv_cell(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_results_csv(path) -> list[dict[str, object]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for raw in reader:
            rec: dict[str, object] = {}
            for k, v in raw.items():
                if v == "":
                    rec[k] = None
                elif k in _METRIC_COLUMNS or k in _IMPROVEMENT_COLUMNS:
                    rec[k] = float(v)
                elif k in _RANK_COLUMNS:
                    rec[k] = int(v)
                else:
                    rec[k] = v
            out.append(rec)
        return out


def _md_cell(key: str, v) -> str:
    if v is None:
        return "--"
    if key in _METRIC_COLUMNS:
        return f"{v:.4f}"
    if key in _IMPROVEMENT_COLUMNS:
        return f"{v:+.1f}%"
    if key == "delta_rank":
        return f"{v:+d}" if v else "0"
    return str(v).replace("|", "\\|")


def results_markdown(records: Sequence[dict[str, object]], title: str = "") -> str:
    lines = []
    if title:
        lines += [f"## {title}", ""]
    lines.append("| " + " | ".join(MD_HEADER) + " |")
    lines.append("|" + "|".join([":---"] + ["---:"] * (len(MD_HEADER) - 1)) + "|")
    for rec in records:
        cells = [_md_cell(k, rec.get(k)) for k in MD_KEYS]
        if rec.get("role") == "fixed":
            cells[0] += " (fixed)"
        elif rec.get("error"):
            cells[0] += " (failed)"
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_markdown_table(text: str) -> list[list[str]]:
    """Cell strings of each body row (header and rule skipped)."""
    rows = [ln for ln in text.splitlines() if ln.startswith("|")]
    return [[c.strip() for c in ln.strip("|").split(" | ")] for ln in rows[2:]]


def write_results(rows: Sequence[ResultRow], out_dir, title: str = "") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, md_path = out / "results.csv", out / "results.md"
    csv_path.write_text(results_csv(rows), encoding="utf-8")
    md_path.write_text(results_markdown(read_results_csv(csv_path), title), encoding="utf-8")
    return csv_path, md_path


def write_trials(rows: Sequence[dict[str, object]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=["trial", "params", "map", "status", "error"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
