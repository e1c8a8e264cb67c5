"""Five-way outcome accounting of a predicted matching against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

from .brep import KINDS, BRepGraph, EntityRef, Kind
from .errors import ModelMismatch
from .matching import Matching

CATEGORIES = ("true_positive", "true_negative", "missed", "incorrect", "false_positive")


@dataclass
class KindCounts:
    true_positive: int = 0
    true_negative: int = 0
    missed: int = 0
    incorrect: int = 0
    false_positive: int = 0
    by_provenance: dict[str, int] = field(default_factory=dict)   # true positives per provenance

    @property
    def total(self) -> int:
        return sum(getattr(self, c) for c in CATEGORIES)

    @property
    def correct_label(self) -> int:
        return self.true_positive + self.true_negative

    @property
    def incorrect_label(self) -> int:
        return self.incorrect + self.false_positive

    def pct(self, value: int) -> float:
        return 100.0 * value / self.total if self.total else 0.0

    def percentages(self) -> dict[str, float]:
        return {c: self.pct(getattr(self, c)) for c in CATEGORIES}

    def add(self, other: "KindCounts") -> None:
        for c in CATEGORIES:
            setattr(self, c, getattr(self, c) + getattr(other, c))
        for k, v in other.by_provenance.items():
            self.by_provenance[k] = self.by_provenance.get(k, 0) + v


@dataclass
class EvalReport:
    kinds: dict[Kind, KindCounts] = field(default_factory=lambda: {k: KindCounts() for k in KINDS})

    def __getitem__(self, kind: Kind) -> KindCounts:
        return self.kinds[kind]

    def overall(self) -> KindCounts:
        out = KindCounts()
        for k in KINDS:
            out.add(self.kinds[k])
        return out

    def partition_ok(self, bu_counts: dict[Kind, int] | None = None) -> bool:
        for k in KINDS:
            c = self.kinds[k]
            if bu_counts is not None and c.total != bu_counts[k]:
                return False
            if c.total and abs(sum(c.percentages().values()) - 100.0) > 1e-9:
                return False
        return True

    @classmethod
    def merge(cls, reports) -> "EvalReport":
        out = cls()
        for r in reports:
            for k in KINDS:
                out.kinds[k].add(r.kinds[k])
        return out

    def to_dict(self) -> dict:
        doc = {}
        for k in KINDS:
            c = self.kinds[k]
            doc[k.label] = {
                "count": c.total,
                **{cat: getattr(c, cat) for cat in CATEGORIES},
                "percent": c.percentages(),
                "correct_label": c.correct_label,
                "incorrect_label": c.incorrect_label,
                "correct_label_pct": c.pct(c.correct_label),
                "incorrect_label_pct": c.pct(c.incorrect_label),
                "true_positive_by_provenance": dict(sorted(c.by_provenance.items())),
            }
        return doc


def evaluate(predicted: Matching, truth: Matching, bu: BRepGraph) -> EvalReport:
    """Classify every entity of ``bu`` into one of the five outcome categories."""
    for name, m in (("predicted", predicted), ("truth", truth)):
        for p in m:
            if not 0 <= p.upd.index < bu.count(p.upd.kind):
                raise ModelMismatch(f"{name} matching references {p.upd} beyond {bu.model_id}")
    rep = EvalReport()
    pred_prov = {p.upd: p.provenance.value for p in predicted}
    for kind in KINDS:
        c = rep.kinds[kind]
        for j in range(bu.count(kind)):
            u = EntityRef(kind, j)
            t, p = truth.partner_of_upd(u), predicted.partner_of_upd(u)
            if t is None and p is None:
                c.true_negative += 1
            elif t is None:
                c.false_positive += 1
            elif p is None:
                c.missed += 1
            elif p == t:
                c.true_positive += 1
                prov = pred_prov[u]
                c.by_provenance[prov] = c.by_provenance.get(prov, 0) + 1
            else:
                c.incorrect += 1
    return rep
