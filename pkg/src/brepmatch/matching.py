"""One-to-one, kind-consistent entity matchings and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .brep import EntityRef, Kind
from .errors import ParseError, SchemaError


class Provenance(str, Enum):
    EXACT = "exact"
    OVERLAP = "overlap"
    PROPAGATED = "propagated"
    LEARNED = "learned"
    GROUND_TRUTH = "ground_truth"


@dataclass(frozen=True)
class MatchPair:
    orig: EntityRef
    upd: EntityRef
    provenance: Provenance
    score: float | None
    order: int


class MatchingError(ValueError):
    pass


class Matching:
    """Insertion-ordered set of pairs; each side is used at most once."""

    def __init__(self, pairs: Iterable[tuple] = ()):
        self._pairs: list[MatchPair] = []
        self._by_orig: dict[EntityRef, MatchPair] = {}
        self._by_upd: dict[EntityRef, MatchPair] = {}
        for p in pairs:
            self.add(*p)

    def add(self, orig: EntityRef, upd: EntityRef, provenance: Provenance = Provenance.EXACT, score: float | None = None) -> MatchPair:
        if orig.kind != upd.kind:
            raise MatchingError(f"kind mismatch: {orig!r} vs {upd!r}")
        if orig in self._by_orig:
            raise MatchingError(f"{orig!r} already matched")
        if upd in self._by_upd:
            raise MatchingError(f"{upd!r} already matched")
        if provenance == Provenance.LEARNED and not (score is not None and 0.0 < score <= 1.0):
            raise MatchingError(f"learned score must lie in (0, 1], got {score}")
        pair = MatchPair(orig, upd, Provenance(provenance), score, len(self._pairs))
        self._pairs.append(pair)
        self._by_orig[orig] = pair
        self._by_upd[upd] = pair
        return pair

    def copy(self) -> "Matching":
        out = Matching()
        for p in self._pairs:
            out.add(p.orig, p.upd, p.provenance, p.score)
        return out

    def __iter__(self) -> Iterator[MatchPair]:
        return iter(self._pairs)

    def __len__(self) -> int:
        return len(self._pairs)

    def __contains__(self, pair) -> bool:
        orig, upd = pair
        p = self._by_orig.get(orig)
        return p is not None and p.upd == upd

    def pair_set(self) -> set[tuple[EntityRef, EntityRef]]:
        return {(p.orig, p.upd) for p in self._pairs}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matching):
            return NotImplemented
        return [(p.orig, p.upd, p.provenance, p.score) for p in self] == [(p.orig, p.upd, p.provenance, p.score) for p in other]

    def partner_of_orig(self, ref: EntityRef) -> EntityRef | None:
        p = self._by_orig.get(ref)
        return p.upd if p else None

    def partner_of_upd(self, ref: EntityRef) -> EntityRef | None:
        p = self._by_upd.get(ref)
        return p.orig if p else None

    def orig_matched(self, ref: EntityRef) -> bool:
        return ref in self._by_orig

    def upd_matched(self, ref: EntityRef) -> bool:
        return ref in self._by_upd

    def of_kind(self, kind: Kind) -> list[MatchPair]:
        return [p for p in self._pairs if p.orig.kind == kind]

    def sorted_pairs(self) -> list[MatchPair]:
        return sorted(self._pairs, key=lambda p: (p.orig, p.upd))

    def check(self) -> list[str]:
        """Invariant violations (empty for any Matching built through ``add``)."""
        out = []
        seen_o, seen_u = set(), set()
        for p in self._pairs:
            if p.orig.kind != p.upd.kind:
                out.append(f"kind mismatch in {p}")
            if p.orig in seen_o or p.upd in seen_u:
                out.append(f"not one-to-one at {p}")
            seen_o.add(p.orig)
            seen_u.add(p.upd)
            if p.provenance == Provenance.LEARNED and not (0.0 < (p.score or 0.0) <= 1.0):
                out.append(f"learned score out of range at {p}")
        return out


# -- JSON --------------------------------------------------------------------


def match_to_dict(m: Matching, orig_model: str, upd_model: str, threshold: float | None = None, trace=None) -> dict:
    pairs = []
    for p in m:
        row = {"kind": p.orig.kind.label, "orig": p.orig.index, "upd": p.upd.index, "provenance": p.provenance.value, "order": p.order}
        if p.score is not None:
            row["score"] = p.score
        pairs.append(row)
    return {
        "orig_model": orig_model,
        "upd_model": upd_model,
        "threshold": threshold,
        "pairs": pairs,
        "trace": [dict(t) for t in (trace or [])],
    }


def match_from_dict(doc) -> tuple[Matching, dict]:
    if not isinstance(doc, dict):
        raise SchemaError("match document must be an object")
    missing = {"orig_model", "upd_model", "pairs"} - doc.keys()
    if missing:
        raise SchemaError(f"match document missing {sorted(missing)}")
    m = Matching()
    rows = sorted(doc["pairs"], key=lambda r: r.get("order", 0))
    try:
        for r in rows:
            kind = Kind.parse(r["kind"])
            m.add(EntityRef(kind, int(r["orig"])), EntityRef(kind, int(r["upd"])), Provenance(r["provenance"]), r.get("score"))
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"bad match pair: {exc}") from None
    meta = {k: doc.get(k) for k in ("orig_model", "upd_model", "threshold", "trace")}
    return m, meta


def write_match(path: str | Path, m: Matching, orig_model: str, upd_model: str, threshold=None, trace=None) -> None:
    Path(path).write_text(json.dumps(match_to_dict(m, orig_model, upd_model, threshold, trace), separators=(",", ":")), encoding="utf-8")


def read_match(path: str | Path) -> tuple[Matching, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return match_from_dict(doc)
