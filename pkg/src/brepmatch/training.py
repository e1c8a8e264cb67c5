"""Training loop for the pair scorer: random half-truth priors, weighted BCE, Adam."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .brep import BRepGraph
from .errors import DomainError, EmptyDataset, NonFiniteLoss
from .features import FeatureTable, Frame, extract_features
from .matching import Matching
from .scorer import (
    DTYPE,
    P_MIN,
    ModelConfig,
    ModelParams,
    PairProblem,
    encode_many,
    open_candidates,
    score_problems,
    topology,
    weighted_bce,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    w: float = 2.0
    epochs: int = 200
    partial_fraction: float = 0.5
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    negative_cap: int | None = None
    batch_size: int = 16

    def to_dict(self) -> dict:
        return asdict(self)


def loss(p_hat: float, label: int, w: float) -> float:
    """Weighted binary cross-entropy of one prediction."""
    if not (math.isfinite(p_hat) and 0.0 <= p_hat <= 1.0):
        raise DomainError(f"p_hat must lie in [0, 1], got {p_hat}")
    if label not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {label}")
    p = min(max(p_hat, P_MIN), 1.0 - P_MIN)
    return -(label * math.log(p) + w * (1 - label) * math.log(1.0 - p))


@dataclass
class TrainItem:
    """A ground-truth pair with cached features (updated side uses the original's frame)."""

    orig: BRepGraph
    upd: BRepGraph
    truth: Matching
    feat_o: FeatureTable
    feat_u: FeatureTable

    @classmethod
    def of(cls, orig: BRepGraph, upd: BRepGraph, truth: Matching) -> "TrainItem":
        frame = Frame.of(orig)
        return cls(orig, upd, truth, extract_features(orig, frame), extract_features(upd, frame))


def partial_prior(truth: Matching, rng: np.random.Generator, fraction: float) -> Matching:
    pairs = list(truth)
    keep = int(round(fraction * len(pairs)))
    chosen = sorted(rng.permutation(len(pairs))[:keep].tolist())
    out = Matching()
    for k in chosen:
        out.add(pairs[k].orig, pairs[k].upd, pairs[k].provenance, pairs[k].score)
    return out


def build_problem(item: TrainItem, prior: Matching, rng: np.random.Generator | None, cap: int | None):
    cands = open_candidates(item.orig, item.upd, prior)
    truth = item.truth.pair_set()
    labels = [1.0 if c in truth else 0.0 for c in cands]
    if cap is not None and rng is not None:
        pos = [k for k, y in enumerate(labels) if y]
        neg = [k for k, y in enumerate(labels) if not y]
        if len(neg) > cap:
            neg = sorted(rng.choice(neg, size=cap, replace=False).tolist())
            keep = sorted(pos + neg)
            cands = [cands[k] for k in keep]
            labels = [labels[k] for k in keep]
    pp = PairProblem(topology(item.orig), topology(item.upd), [(p.orig, p.upd) for p in prior], cands)
    return pp, torch.tensor(labels, dtype=DTYPE)


def batch_loss(params: ModelParams, items: list[TrainItem], problems, w: float) -> torch.Tensor:
    """Mean over samples of the per-sample mean candidate loss."""
    graphs, feats, slots = [], [], {}
    for it in items:
        for b, ft in ((it.orig, it.feat_o), (it.upd, it.feat_u)):
            if id(b) not in slots:
                slots[id(b)] = len(graphs)
                graphs.append(b)
                feats.append(ft)
    emb = encode_many(graphs, feats, params)
    pairs = [(emb[slots[id(it.orig)]], emb[slots[id(it.upd)]]) for it in items]
    probs = score_problems(params, pairs, [pp for pp, _ in problems])
    terms = []
    for p, (_, y) in zip(probs, problems):
        if len(y):
            terms.append(weighted_bce(p, y, w).mean())
    if not terms:
        return torch.zeros((), dtype=DTYPE)
    return torch.stack(terms).mean()


class Adam:
    """Adam over a name -> tensor table (update order fixed by name order)."""

    def __init__(self, tensors: dict[str, torch.Tensor], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {n: torch.zeros_like(t) for n, t in tensors.items()}
        self.v = {n: torch.zeros_like(t) for n, t in tensors.items()}
        self.t = 0

    @torch.no_grad()
    def step(self, tensors: dict[str, torch.Tensor], grads: dict[str, torch.Tensor]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for n, t in tensors.items():
            g = grads[n]
            self.m[n].mul_(self.b1).add_(g, alpha=1.0 - self.b1)
            self.v[n].mul_(self.b2).addcmul_(g, g, value=1.0 - self.b2)
            t.sub_(self.lr * (self.m[n] / c1) / ((self.v[n] / c2).sqrt() + self.eps))


def evaluate_loss(params: ModelParams, items: list[TrainItem], problems, w: float, batch_size: int) -> float:
    total, n = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(items), batch_size):
            chunk = items[start:start + batch_size]
            probs = problems[start:start + batch_size]
            total += float(batch_loss(params, chunk, probs, w)) * len(chunk)
            n += len(chunk)
    return total / max(n, 1)


def train(
    train_items: list[TrainItem],
    val_items: list[TrainItem],
    cfg: TrainConfig,
    model_cfg: ModelConfig | None = None,
    init: ModelParams | None = None,
    history: list | None = None,
) -> ModelParams:
    """Return the parameters with the lowest validation loss over ``cfg.epochs`` epochs."""
    if not train_items:
        raise EmptyDataset("no training samples")
    params = init.copy() if init is not None else ModelParams.init(model_cfg, cfg.seed)
    params.seed = cfg.seed
    rng = np.random.default_rng([cfg.seed, 1])
    val_rng = np.random.default_rng([cfg.seed, 2])
    val_problems = [build_problem(it, partial_prior(it.truth, val_rng, cfg.partial_fraction), val_rng, cfg.negative_cap)
                    for it in val_items]
    opt = Adam(params.tensors, cfg.learning_rate, (cfg.beta1, cfg.beta2), cfg.eps)
    best = params.copy()
    best_loss = math.inf
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_items))
        train_total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [train_items[k] for k in order[start:start + cfg.batch_size]]
            problems = [build_problem(it, partial_prior(it.truth, rng, cfg.partial_fraction), rng, cfg.negative_cap)
                        for it in chunk]
            for t in params.tensors.values():
                t.requires_grad_(True)
                t.grad = None
            value = batch_loss(params, chunk, problems, cfg.w)
            if not torch.isfinite(value):
                raise NonFiniteLoss(f"loss became {float(value)} at epoch {epoch}, batch starting {start}")
            value.backward()
            grads = {n: t.grad for n, t in params.tensors.items()}
            for t in params.tensors.values():
                t.requires_grad_(False)
            opt.step(params.tensors, grads)
            train_total += value.item() * len(chunk)
        val_loss = evaluate_loss(params, val_items, val_problems, cfg.w, cfg.batch_size) if val_items else train_total
        if history is not None:
            history.append({"epoch": epoch, "train": train_total / len(train_items), "val": val_loss})
        log.info("epoch %d train %.6f val %.6f", epoch, train_total / len(train_items), val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best = params.copy()
    for t in params.tensors.values():
        t.requires_grad_(False)
    best.meta = {"train_config": cfg.to_dict(), "best_val_loss": best_loss}
    return best


def total_loss(params: ModelParams, item: TrainItem, prior: Matching, w: float) -> torch.Tensor:
    pp, y = build_problem(item, prior, None, None)
    return batch_loss(params, [item], [(pp, y)], w)

