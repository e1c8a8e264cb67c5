"""Learned pair scorer: hierarchical encoder, joint-graph attention, pair MLP.

All arithmetic is float64 torch. Parameters live in ``ModelParams`` as an
ordered name -> tensor table so they can be checkpointed and perturbed by
name.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .brep import KINDS, BRepGraph, EntityRef, Kind
from .errors import InvalidCandidate, ShapeError
from .features import FEATURE_WIDTH, LOOP_FEATURE_WIDTH, FeatureTable
from .matching import Matching

DTYPE = torch.float64
P_MIN = 1e-12

# joint-graph edge types
VERTEX_EDGE, EDGE_LOOP, LOOP_FACE, FACE_FACE, PRIOR_MATCH = range(5)
N_EDGE_TYPES = 5

_ENC_KINDS = ("v", "e", "l", "f")


@dataclass(frozen=True)
class ModelConfig:
    feature_width: int = FEATURE_WIDTH
    loop_width: int = LOOP_FEATURE_WIDTH
    hidden: int = 64
    encoder_layers: int = 6
    gat_layers: int = 4
    heads: int = 8
    mlp_hidden: int = 64

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every tensor name and shape, in canonical (serialization) order."""
    h = cfg.hidden
    shapes: dict[str, tuple[int, ...]] = {}
    for layer in range(cfg.encoder_layers):
        first = layer == 0
        own = {"v": cfg.feature_width, "e": cfg.feature_width, "l": cfg.loop_width, "f": cfg.feature_width}
        up_in = {
            "v": own["v"] if first else h,
            "e": (own["e"] if first else h) + h,
            "l": (own["l"] if first else h) + h,
            "f": (own["f"] if first else h) + h,
        }
        for k in _ENC_KINDS:
            shapes[f"enc.{layer}.up.{k}.W"] = (h, up_in[k])
            shapes[f"enc.{layer}.up.{k}.b"] = (h,)
        for k in _ENC_KINDS[::-1]:
            shapes[f"enc.{layer}.down.{k}.W"] = (h, 2 * h)
            shapes[f"enc.{layer}.down.{k}.b"] = (h,)
    for layer in range(cfg.gat_layers):
        for m in ("q", "k", "v"):
            shapes[f"gat.{layer}.{m}"] = (h, h)
        shapes[f"gat.{layer}.att"] = (cfg.heads, cfg.head_dim)
        shapes[f"gat.{layer}.type"] = (N_EDGE_TYPES, h)
        shapes[f"gat.{layer}.out.W"] = (h, h)
        shapes[f"gat.{layer}.out.b"] = (h,)
    shapes["mlp.0.W"] = (cfg.mlp_hidden, 2 * h)
    shapes["mlp.0.b"] = (cfg.mlp_hidden,)
    shapes["mlp.1.W"] = (1, cfg.mlp_hidden)
    shapes["mlp.1.b"] = (1,)
    return shapes


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, torch.Tensor]
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig | None = None, seed: int = 0) -> "ModelParams":
        """Glorot-uniform weights, zero biases, small edge-type table; numpy-seeded."""
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in param_shapes(config).items():
            if name.endswith(".b"):
                arr = np.zeros(shape)
            elif name.endswith(".type"):
                arr = rng.normal(0.0, 0.1, shape)
            else:
                fan_out, fan_in = (shape[0], shape[1])
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                arr = rng.uniform(-bound, bound, shape)
            tensors[name] = torch.tensor(arr, dtype=DTYPE)
        return cls(config, tensors, seed)

    @classmethod
    def zeros(cls, config: ModelConfig | None = None) -> "ModelParams":
        config = config or ModelConfig()
        return cls(config, {n: torch.zeros(s, dtype=DTYPE) for n, s in param_shapes(config).items()})

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {n: t.detach().clone() for n, t in self.tensors.items()}, self.seed, dict(self.meta))

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.tensors[name]

    def size(self) -> int:
        return sum(t.numel() for t in self.tensors.values())

    def bitwise_equal(self, other: "ModelParams") -> bool:
        if self.config != other.config or self.tensors.keys() != other.tensors.keys():
            return False
        return all(
            self.tensors[n].numpy().tobytes() == other.tensors[n].numpy().tobytes() for n in self.tensors
        )


# -- topology -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Topology:
    """Index tensors of one B-rep in local node order: faces, edges, vertices, loops."""

    n_faces: int
    n_edges: int
    n_vertices: int
    n_loops: int
    ev: torch.Tensor          # (2, m) edge, vertex
    le: torch.Tensor          # (2, m) loop, edge
    fl: torch.Tensor          # (2, m) face, loop
    ff: torch.Tensor          # (2, m) face, face (both directions)
    gat_edges: torch.Tensor   # (3, m) src node, dst node, type

    @property
    def n_nodes(self) -> int:
        return self.n_faces + self.n_edges + self.n_vertices + self.n_loops

    def offset(self, kind: Kind) -> int:
        return {Kind.FACE: 0, Kind.EDGE: self.n_faces, Kind.VERTEX: self.n_faces + self.n_edges}[kind]

    def node(self, ref: EntityRef) -> int:
        return self.offset(ref.kind) + ref.index


_TOPO_CACHE: "weakref.WeakKeyDictionary[BRepGraph, Topology]" = weakref.WeakKeyDictionary()


def _pairs(rows) -> torch.Tensor:
    if not rows:
        return torch.zeros((2, 0), dtype=torch.long)
    return torch.tensor(rows, dtype=torch.long).T.contiguous()


def topology(b: BRepGraph) -> Topology:
    hit = _TOPO_CACHE.get(b)
    if hit is not None:
        return hit
    nf, ne, nv, nl = b.counts
    ev = sorted({(ei, vi) for ei, e in enumerate(b.edges) for vi in e.vertices})
    le = sorted({(li, ei) for li, lp in enumerate(b.loops) for ei, _ in lp.edges})
    fl = sorted((fi, li) for fi, f in enumerate(b.faces) for li in f.loops)
    ff = sorted((a, c) for a, nbrs in enumerate(b.face_neighbors) for c in nbrs)
    eo, vo, lo = nf, nf + ne, nf + ne + nv
    gat = []
    for ei, vi in ev:
        gat += [(vo + vi, eo + ei, VERTEX_EDGE), (eo + ei, vo + vi, VERTEX_EDGE)]
    for li, ei in le:
        gat += [(eo + ei, lo + li, EDGE_LOOP), (lo + li, eo + ei, EDGE_LOOP)]
    for fi, li in fl:
        gat += [(lo + li, fi, LOOP_FACE), (fi, lo + li, LOOP_FACE)]
    for a, c in ff:
        gat.append((c, a, FACE_FACE))
    gat_edges = torch.tensor(gat, dtype=torch.long).T.contiguous() if gat else torch.zeros((3, 0), dtype=torch.long)
    topo = Topology(nf, ne, nv, nl, _pairs(ev), _pairs(le), _pairs(fl), _pairs(ff), gat_edges)
    _TOPO_CACHE[b] = topo
    return topo


# -- encoder ------------------------------------------------------------------------


def _lin(P: ModelParams, name: str, x: torch.Tensor) -> torch.Tensor:
    return x @ P[name + ".W"].T + P[name + ".b"]


def _mean(src: torch.Tensor, dst_index: torch.Tensor, src_index: torch.Tensor, n_dst: int) -> torch.Tensor:
    out = torch.zeros((n_dst, src.shape[1]), dtype=src.dtype).index_add_(0, dst_index, src[src_index])
    cnt = torch.zeros(n_dst, dtype=src.dtype).index_add_(0, dst_index, torch.ones(len(dst_index), dtype=src.dtype))
    return out / cnt.clamp(min=1.0)[:, None]


@dataclass
class _Merged:
    feats: dict[str, torch.Tensor]
    n: dict[str, int]
    ev: torch.Tensor
    le: torch.Tensor
    fl: torch.Tensor
    ff: torch.Tensor
    loop_face: torch.Tensor
    offsets: list[dict[str, int]]
    sizes: list[dict[str, int]]


def _merge(items: list[tuple[Topology, FeatureTable]], cfg: ModelConfig) -> _Merged:
    feats = {"f": [], "e": [], "v": [], "l": []}
    off = {"f": 0, "e": 0, "v": 0, "l": 0}
    ev, le, fl, ff = [], [], [], []
    offsets, sizes = [], []
    for topo, ft in items:
        for k, arr, width in (("f", ft.faces, cfg.feature_width), ("e", ft.edges, cfg.feature_width),
                              ("v", ft.vertices, cfg.feature_width), ("l", ft.loops, cfg.loop_width)):
            if arr.ndim != 2 or arr.shape[1] != width:
                raise ShapeError(f"{k} features have width {arr.shape[-1]}, model expects {width}")
            feats[k].append(torch.as_tensor(arr, dtype=DTYPE))
        offsets.append(dict(off))
        sizes.append({"f": topo.n_faces, "e": topo.n_edges, "v": topo.n_vertices, "l": topo.n_loops})
        shift = lambda t, a, b: t + torch.tensor([[off[a]], [off[b]]])
        ev.append(shift(topo.ev, "e", "v"))
        le.append(shift(topo.le, "l", "e"))
        fl.append(shift(topo.fl, "f", "l"))
        ff.append(shift(topo.ff, "f", "f"))
        off["f"] += topo.n_faces
        off["e"] += topo.n_edges
        off["v"] += topo.n_vertices
        off["l"] += topo.n_loops
    fl_all = torch.cat(fl, dim=1)
    loop_face = torch.zeros(off["l"], dtype=torch.long)
    loop_face[fl_all[1]] = fl_all[0]
    return _Merged(
        {k: torch.cat(v) for k, v in feats.items()}, dict(off),
        torch.cat(ev, dim=1), torch.cat(le, dim=1), fl_all, torch.cat(ff, dim=1), loop_face, offsets, sizes,
    )


def _encoder_layer(P: ModelParams, layer: int, h: dict, g: _Merged) -> dict:
    act = torch.nn.functional.silu
    pre = f"enc.{layer}"
    v1 = act(_lin(P, f"{pre}.up.v", h["v"]))
    e1 = act(_lin(P, f"{pre}.up.e", torch.cat([h["e"], _mean(v1, g.ev[0], g.ev[1], g.n["e"])], dim=1)))
    l1 = act(_lin(P, f"{pre}.up.l", torch.cat([h["l"], _mean(e1, g.le[0], g.le[1], g.n["l"])], dim=1)))
    f1 = act(_lin(P, f"{pre}.up.f", torch.cat([h["f"], _mean(l1, g.fl[0], g.fl[1], g.n["f"])], dim=1)))
    f2 = act(_lin(P, f"{pre}.down.f", torch.cat([f1, _mean(f1, g.ff[0], g.ff[1], g.n["f"])], dim=1)))
    l2 = act(_lin(P, f"{pre}.down.l", torch.cat([l1, f2[g.loop_face]], dim=1)))
    e2 = act(_lin(P, f"{pre}.down.e", torch.cat([e1, _mean(l2, g.le[1], g.le[0], g.n["e"])], dim=1)))
    v2 = act(_lin(P, f"{pre}.down.v", torch.cat([v1, _mean(e2, g.ev[1], g.ev[0], g.n["v"])], dim=1)))
    out = {"v": v2, "e": e2, "l": l2, "f": f2}
    if layer > 0:
        out = {k: h[k] + out[k] for k in out}
    return out


def encode_many(graphs: list[BRepGraph], features: list[FeatureTable], params: ModelParams) -> list[torch.Tensor]:
    """Node embeddings (faces, edges, vertices, loops stacked) for each graph."""
    if not graphs:
        return []
    g = _merge([(topology(b), ft) for b, ft in zip(graphs, features)], params.config)
    h = dict(g.feats)
    for layer in range(params.config.encoder_layers):
        h = _encoder_layer(params, layer, h, g)
    out = []
    for off, size in zip(g.offsets, g.sizes):
        out.append(torch.cat([h[k][off[k]:off[k] + size[k]] for k in ("f", "e", "v", "l")]))
    return out


def encode(b: BRepGraph, features: FeatureTable, params: ModelParams) -> torch.Tensor:
    return encode_many([b], [features], params)[0]


# -- joint graph attention + scoring -----------------------------------------------------


def smooth_leaky(x: torch.Tensor) -> torch.Tensor:
    """Leaky rectifier with slopes 0.2 / 1.0, smoothed so it is differentiable at 0; fixes 0."""
    return 0.2 * x + 0.8 * (torch.nn.functional.softplus(x) - math.log(2.0))


def _gat_layer(P: ModelParams, layer: int, x: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
    cfg = P.config
    H, D = cfg.heads, cfg.head_dim
    n = x.shape[0]
    pre = f"gat.{layer}"
    q = (x @ P[f"{pre}.q"].T).view(n, H, D)
    k = (x @ P[f"{pre}.k"].T).view(n, H, D)
    v = (x @ P[f"{pre}.v"].T).view(n, H, D)
    t = P[f"{pre}.type"].view(N_EDGE_TYPES, H, D)
    att = P[f"{pre}.att"]
    src, dst, typ = edges
    # the rectifier acts before the attention vector, so the target's query
    # does not cancel out of the softmax over its neighbours
    logits = (smooth_leaky(q[dst] + k[src] + t[typ]) * att).sum(-1)
    peak = torch.full((n, H), -torch.inf, dtype=DTYPE).scatter_reduce(0, dst[:, None].expand(-1, H), logits.detach(), "amax")
    ex = torch.exp(logits - peak[dst])
    den = torch.zeros((n, H), dtype=DTYPE).index_add_(0, dst, ex)
    alpha = ex / den[dst]
    msg = alpha[..., None] * (v[src] + t[typ])
    agg = torch.zeros((n, H, D), dtype=DTYPE).index_add_(0, dst, msg).view(n, H * D)
    return x + torch.nn.functional.silu(_lin(P, f"{pre}.out", agg))


@dataclass
class PairProblem:
    """One (original, updated) pair conditioned on a prior matching."""

    topo_o: Topology
    topo_u: Topology
    prior: list[tuple[EntityRef, EntityRef]]
    candidates: list[tuple[EntityRef, EntityRef]]


def _joint_edges(pp: PairProblem) -> torch.Tensor:
    shift = pp.topo_o.n_nodes
    eu = pp.topo_u.gat_edges.clone()
    eu[:2] += shift
    parts = [pp.topo_o.gat_edges, eu]
    if pp.prior:
        a = torch.tensor([pp.topo_o.node(o) for o, _ in pp.prior], dtype=torch.long)
        b = torch.tensor([shift + pp.topo_u.node(u) for _, u in pp.prior], dtype=torch.long)
        typ = torch.full((2 * len(a),), PRIOR_MATCH, dtype=torch.long)
        parts.append(torch.stack([torch.cat([a, b]), torch.cat([b, a]), typ]))
    return torch.cat(parts, dim=1)


def score_problems(
    params: ModelParams, emb_pairs: list[tuple[torch.Tensor, torch.Tensor]], problems: list[PairProblem]
) -> list[torch.Tensor]:
    """Probabilities (clamped) for every candidate of every problem; differentiable."""
    cfg = params.config
    xs, edges, cand_o, cand_u, counts = [], [], [], [], []
    base = 0
    for (eo, eu), pp in zip(emb_pairs, problems):
        x = torch.cat([eo, eu])
        if x.shape[1] != cfg.hidden:
            raise ShapeError(f"embeddings have width {x.shape[1]}, model expects {cfg.hidden}")
        e = _joint_edges(pp)
        e[:2] += base
        xs.append(x)
        edges.append(e)
        shift = pp.topo_o.n_nodes
        cand_o.extend(base + pp.topo_o.node(o) for o, _ in pp.candidates)
        cand_u.extend(base + shift + pp.topo_u.node(u) for _, u in pp.candidates)
        counts.append(len(pp.candidates))
        base += x.shape[0]
    if not xs:
        return []
    x = torch.cat(xs)
    e = torch.cat(edges, dim=1)
    for layer in range(cfg.gat_layers):
        x = _gat_layer(params, layer, x, e)
    io = torch.tensor(cand_o, dtype=torch.long)
    iu = torch.tensor(cand_u, dtype=torch.long)
    w0 = params["mlp.0.W"]
    h = cfg.hidden
    a = x @ w0[:, :h].T
    b = x @ w0[:, h:].T
    hidden = torch.nn.functional.silu(a[io] + b[iu] + params["mlp.0.b"])
    logit = (hidden @ params["mlp.1.W"].T).squeeze(1) + params["mlp.1.b"]
    p = torch.sigmoid(logit).clamp(P_MIN, 1.0 - P_MIN)
    return list(torch.split(p, counts))


def check_candidates(bo: BRepGraph, bu: BRepGraph, prior: Matching, candidates) -> None:
    for o, u in candidates:
        if o.kind != u.kind:
            raise InvalidCandidate(f"kind mismatch: {o} vs {u}")
        if not (0 <= o.index < bo.count(o.kind) and 0 <= u.index < bu.count(u.kind)):
            raise InvalidCandidate(f"candidate ({o}, {u}) out of range")
        if prior.orig_matched(o) or prior.upd_matched(u):
            raise InvalidCandidate(f"candidate ({o}, {u}) is already matched")


def score_all(
    bo: BRepGraph,
    bu: BRepGraph,
    emb_o: torch.Tensor,
    emb_u: torch.Tensor,
    prior: Matching,
    candidates: list[tuple[EntityRef, EntityRef]],
    params: ModelParams,
) -> np.ndarray:
    """Match probability for each candidate pair, conditioned on ``prior``."""
    candidates = list(candidates)
    check_candidates(bo, bu, prior, candidates)
    if not candidates:
        return np.zeros(0)
    pp = PairProblem(topology(bo), topology(bu), [(p.orig, p.upd) for p in prior], candidates)
    with torch.no_grad():
        (p,) = score_problems(params, [(emb_o, emb_u)], [pp])
    return p.numpy().copy()


def open_candidates(bo: BRepGraph, bu: BRepGraph, prior) -> list[tuple[EntityRef, EntityRef]]:
    """All same-kind pairs with both sides unmatched, ordered by (kind, orig, upd)."""
    out = []
    for kind in KINDS:
        free_o = [i for i in range(bo.count(kind)) if not prior.orig_matched(EntityRef(kind, i))]
        free_u = [j for j in range(bu.count(kind)) if not prior.upd_matched(EntityRef(kind, j))]
        out.extend((EntityRef(kind, i), EntityRef(kind, j)) for i in free_o for j in free_u)
    return out


def weighted_bce(p: torch.Tensor, label: torch.Tensor, w: float) -> torch.Tensor:
    """Elementwise -[y ln p + w (1-y) ln(1-p)] with p clamped away from 0 and 1."""
    p = p.clamp(P_MIN, 1.0 - P_MIN)
    return -(label * torch.log(p) + w * (1.0 - label) * torch.log(1.0 - p))
