"""Base models, tracked variants and on-disk datasets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..brep import BRepGraph, read_brep, write_brep
from ..errors import EmptyDataset, NoEligibleTarget, RejectedEdit, SchemaError
from ..matching import Matching, Provenance, read_match, write_match
from .edits import apply_constructive, apply_deformation, name_correspondence
from .part import BLOCK_FACES, Pad, Part, SynthModel, build_part, check_part, in_plane, parse_block_face

MIXES = ("complete", "deform", "construct")
_MIX_ALIASES = {"deformations_only": "deform", "constructive_only": "construct"}
_VARIANT_TRIES = 12
_OP_TRIES = 6


def _base_part(rng: np.random.Generator) -> Part:
    ext = rng.uniform(0.5, 2.0, 3)
    lo = rng.uniform(-1.0, 1.0, 3)
    part = Part(tuple(map(float, lo)), tuple(map(float, lo + ext)))
    n_pads = int(rng.integers(0, 4))
    if n_pads >= 2 and rng.random() < 0.5:
        patterned = _pattern(rng, part, n_pads)
        if patterned is not None:
            return patterned
    for _ in range(n_pads):
        for _try in range(10):
            cand = replace(part, pads=part.pads + (_random_pad(rng, part),), next_id=part.next_id + 1)
            if not check_part(cand):
                part = cand
                break
    return part


def _random_pad(rng, part: Part) -> Pad:
    host = BLOCK_FACES[int(rng.integers(6))]
    a, _ = parse_block_face(host)
    p, q = in_plane(a)
    w = float(min(part.extent[p], part.extent[q]))
    height = float(rng.uniform(0.05, 0.3)) * part.diagonal
    if rng.random() < 0.5:
        half = (float(rng.uniform(0.05, 0.25)) * w, float(rng.uniform(0.05, 0.25)) * w)
        center = (float(rng.uniform(part.lo[p] + half[0], part.hi[p] - half[0])),
                  float(rng.uniform(part.lo[q] + half[1], part.hi[q] - half[1])))
        return Pad(part.next_id, host, "rect", center, half=half, height=height)
    r = float(rng.uniform(0.05, 0.2)) * w
    center = (float(rng.uniform(part.lo[p] + r, part.hi[p] - r)), float(rng.uniform(part.lo[q] + r, part.hi[q] - r)))
    return Pad(part.next_id, host, "circ", center, radius=r, height=height)


def _pattern(rng, part: Part, count: int) -> Part | None:
    """``count`` identical pads evenly spaced along one in-plane axis of a face."""
    host = BLOCK_FACES[int(rng.integers(6))]
    a, _ = parse_block_face(host)
    p, q = in_plane(a)
    along = int(rng.integers(2))
    ax, other = (p, q) if along == 0 else (q, p)
    length, width = float(part.extent[ax]), float(part.extent[other])
    pitch = length / count
    size = float(rng.uniform(0.15, 0.3)) * min(pitch, width)
    height = float(rng.uniform(0.05, 0.2)) * part.diagonal
    circ = rng.random() < 0.5
    mid = 0.5 * (part.lo[other] + part.hi[other])
    pads = []
    for k in range(count):
        c_along = part.lo[ax] + (k + 0.5) * pitch
        center = (c_along, mid) if along == 0 else (mid, c_along)
        if circ:
            pads.append(Pad(k, host, "circ", center, radius=size, height=height))
        else:
            pads.append(Pad(k, host, "rect", center, half=(size, size), height=height))
    cand = replace(part, pads=tuple(pads), next_id=count)
    return None if check_part(cand) else cand


def generate_base_part(seed: int, model_id: str | None = None) -> SynthModel:
    rng = np.random.default_rng(seed)
    return build_part(_base_part(rng), model_id or f"base{seed}")


def generate_base_model(seed: int) -> BRepGraph:
    """A random block with up to three pads; deterministic in ``seed``."""
    return generate_base_part(seed).brep


# -- variants ------------------------------------------------------------------------


@dataclass
class Sample:
    model_id: str
    variant: int
    orig: BRepGraph
    upd: BRepGraph
    truth: Matching
    edits: list[str] = field(default_factory=list)
    orig_model: SynthModel | None = field(default=None, repr=False)
    upd_model: SynthModel | None = field(default=None, repr=False)

    @property
    def pair_id(self) -> str:
        return f"{self.model_id}_{self.variant}"


def truth_matching(before: SynthModel, after: SynthModel) -> Matching:
    ident = name_correspondence(before, after)
    m = Matching()
    for post, pre in sorted(ident.items(), key=lambda kv: (kv[1], kv[0])):
        m.add(pre, post, Provenance.GROUND_TRUTH)
    return m


def _edit_plan(rng, mix: str) -> list[str]:
    if mix == "deform":
        return ["deform"] * int(rng.integers(1, 3))
    if mix == "construct":
        return ["construct"] * int(rng.integers(1, 4))
    n_def, n_con = int(rng.integers(0, 3)), int(rng.integers(0, 4))
    if n_def + n_con == 0:
        n_con = 1
    return ["deform"] * n_def + ["construct"] * n_con


def make_variant(base: SynthModel, rng: np.random.Generator, mix: str) -> tuple[SynthModel, list[str]] | None:
    """Apply a random edit chain; None when every retry was rejected."""
    for _ in range(_VARIANT_TRIES):
        model, names = base, []
        for step in _edit_plan(rng, mix):
            for _try in range(_OP_TRIES):
                seed = int(rng.integers(2**31))
                try:
                    if step == "deform":
                        model, edit = apply_deformation(model, seed)
                    else:
                        model, edit = apply_constructive(model, seed)
                except (NoEligibleTarget, RejectedEdit):
                    continue
                names.append(edit.kind)
                break
            else:
                break
        else:
            return model, names
    return None


def _mix_name(mix: str) -> str:
    mix = _MIX_ALIASES.get(mix, mix)
    if mix not in MIXES:
        raise ValueError(f"mix must be one of {MIXES}, got {mix!r}")
    return mix


@dataclass
class Dataset:
    samples: list[Sample]
    split: dict[str, list[str]]

    def subset(self, name: str) -> list[Sample]:
        ids = set(self.split[name])
        return [s for s in self.samples if s.model_id in ids]


def split_models(ids: list[str], seed: int) -> dict[str, list[str]]:
    """80/10/10 split by original model, deterministic in ``seed``."""
    order = np.random.default_rng([seed, 0x5EED]).permutation(len(ids))
    n = len(ids)
    # val and test never empty once there are three models
    n_val = max(1, int(round(0.1 * n))) if n >= 3 else 0
    n_train = n - 2 * n_val
    picked = [ids[k] for k in order]
    return {
        "train": sorted(picked[:n_train]),
        "val": sorted(picked[n_train:n_train + n_val]),
        "test": sorted(picked[n_train + n_val:]),
    }


def generate_dataset(n_models: int, variants: int, mix: str = "complete", seed: int = 0) -> Dataset:
    mix = _mix_name(mix)
    if n_models < 1 or variants < 1:
        raise ValueError("need at least one model and one variant per model")
    samples: list[Sample] = []
    ids = []
    for i in range(n_models):
        rng = np.random.default_rng([seed, i])
        mid = f"m{i:04d}"
        ids.append(mid)
        base = build_part(_base_part(rng), mid)
        for k in range(1, variants + 1):
            made = make_variant(base, rng, mix)
            if made is None:
                continue
            var, names = made
            vid = f"{mid}_{k}"
            var = SynthModel(var.part, replace(var.brep, model_id=vid), var.info)
            samples.append(Sample(mid, k, base.brep, var.brep, truth_matching(base, var), names, base, var))
    return Dataset(samples, split_models(ids, seed))


# -- files -------------------------------------------------------------------------


def write_dataset(ds: Dataset, out: str | Path) -> None:
    out = Path(out)
    for sub in ("originals", "variants", "matches"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    written = set()
    for s in ds.samples:
        if s.model_id not in written:
            write_brep(s.orig, out / "originals" / f"{s.model_id}.json")
            written.add(s.model_id)
        write_brep(s.upd, out / "variants" / f"{s.pair_id}.json")
        write_match(out / "matches" / f"{s.pair_id}.json", s.truth, s.orig.model_id, s.upd.model_id)
    (out / "split.json").write_text(json.dumps(ds.split, indent=1, sort_keys=True), encoding="utf-8")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    split_file = path / "split.json"
    if not split_file.exists():
        raise EmptyDataset(f"{path}: no split.json")
    split = json.loads(split_file.read_text(encoding="utf-8"))
    if set(split) != {"train", "val", "test"}:
        raise SchemaError("split.json must have exactly train, val and test")
    samples = []
    originals: dict[str, BRepGraph] = {}
    for mpath in sorted((path / "matches").glob("*.json")):
        pair_id = mpath.stem
        mid, _, k = pair_id.rpartition("_")
        if mid not in originals:
            originals[mid] = read_brep(path / "originals" / f"{mid}.json")
        upd = read_brep(path / "variants" / f"{pair_id}.json")
        truth, _ = read_match(mpath)
        samples.append(Sample(mid, int(k), originals[mid], upd, truth))
    if not samples:
        raise EmptyDataset(f"{path}: no samples")
    return Dataset(samples, split)
