"""Threshold sweeps and baseline comparisons over sets of (original, updated, truth) pairs."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Protocol

from .adjprop import propagate
from .brep import KINDS, BRepGraph
from .exact import coincidence_match
from .greedy import DEFAULT_THRESHOLD, match, truncate
from .matching import Matching
from .metrics import CATEGORIES, EvalReport, evaluate
from .overlap import overlap_match
from .scorer import ModelParams

SWEEP_COLUMNS = ("threshold", "kind", "count", *CATEGORIES, "correct_label_pct", "incorrect_label_pct")
METHODS = ("coincidence", "overlap", "adjprop", "learned")


class PairLike(Protocol):
    orig: BRepGraph
    upd: BRepGraph
    truth: Matching


def sweep(pairs: Iterable[PairLike], params: ModelParams | None, thresholds: list[float]) -> list[tuple[float, EvalReport]]:
    """One aggregate report per threshold, reusing a single trace per pair."""
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    if not thresholds:
        return []
    per_t: list[list[EvalReport]] = [[] for _ in thresholds]
    for s in pairs:
        boot = coincidence_match(s.orig, s.upd)
        _, trace = match(s.orig, s.upd, params, thresholds[0])
        for k, t in enumerate(thresholds):
            per_t[k].append(evaluate(truncate(boot, trace, t), s.truth, s.upd))
    return [(t, EvalReport.merge(reps)) for t, reps in zip(thresholds, per_t)]


def sweep_rows(table: list[tuple[float, EvalReport]]) -> list[dict]:
    rows = []
    for t, rep in table:
        for kind in KINDS:
            c = rep[kind]
            rows.append({
                "threshold": t,
                "kind": kind.label,
                "count": c.total,
                **{cat: getattr(c, cat) for cat in CATEGORIES},
                "correct_label_pct": c.pct(c.correct_label),
                "incorrect_label_pct": c.pct(c.incorrect_label),
            })
    return rows


def sweep_csv(table) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(sweep_rows(table))
    return buf.getvalue()


def write_sweep(table, csv_path: str | Path, json_path: str | Path | None = None) -> None:
    Path(csv_path).write_text(sweep_csv(table), encoding="utf-8")
    if json_path is not None:
        doc = [{"threshold": t, "report": rep.to_dict()} for t, rep in table]
        Path(json_path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def run_method(method: str, s: PairLike, params: ModelParams | None, threshold: float = DEFAULT_THRESHOLD) -> Matching:
    if method == "coincidence":
        return coincidence_match(s.orig, s.upd)
    if method == "overlap":
        return overlap_match(s.orig, s.upd, coincidence_match(s.orig, s.upd))
    if method == "adjprop":
        return propagate(s.orig, s.upd, overlap_match(s.orig, s.upd, coincidence_match(s.orig, s.upd)))
    if method == "learned":
        return match(s.orig, s.upd, params, threshold)[0]
    raise ValueError(f"unknown method {method!r}")


def compare_baselines(
    pairs: Iterable[PairLike], params: ModelParams | None, threshold: float = DEFAULT_THRESHOLD, methods=METHODS
) -> dict[str, EvalReport]:
    reports: dict[str, list[EvalReport]] = {m: [] for m in methods}
    for s in pairs:
        for method in methods:
            reports[method].append(evaluate(run_method(method, s, params, threshold), s.truth, s.upd))
    return {m: EvalReport.merge(r) for m, r in reports.items()}


def comparison_rows(table: dict[str, EvalReport]) -> list[dict]:
    rows = []
    for method, rep in table.items():
        for kind in KINDS:
            c = rep[kind]
            rows.append({
                "method": method,
                "kind": kind.label,
                "count": c.total,
                **{cat: getattr(c, cat) for cat in CATEGORIES},
                "correct_label_pct": c.pct(c.correct_label),
                "incorrect_label_pct": c.pct(c.incorrect_label),
            })
    return rows
