"""Plain-numpy re-implementation of the scorer's forward pass and loss.

Independent of the torch code path (adjacency is rebuilt from the B-rep, and
aggregation uses ``np.add.at``). It runs in any float dtype; long double is
used for finite differences, where float64 round-off in the loss would
swamp gradients below ~1e-8.
"""

from __future__ import annotations

import numpy as np

from .brep import KINDS, BRepGraph, EntityRef, Kind
from .features import FeatureTable
from .scorer import ModelParams


def params_as(params: ModelParams, dtype=np.longdouble) -> dict[str, np.ndarray]:
    return {n: t.detach().numpy().astype(dtype) for n, t in params.tensors.items()}


def _silu(x):
    return x / (1 + np.exp(-x))


def _leaky(x):
    return 0.2 * x + 0.8 * (np.logaddexp(np.zeros_like(x), x) - np.log(x.dtype.type(2)))


def _seg_mean(values, dst, n_dst):
    out = np.zeros((n_dst, values.shape[1]), dtype=values.dtype)
    cnt = np.zeros(n_dst, dtype=values.dtype)
    np.add.at(out, dst, values)
    np.add.at(cnt, dst, 1)
    cnt[cnt == 0] = 1
    return out / cnt[:, None]


class _Adj:
    def __init__(self, b: BRepGraph):
        self.nf, self.ne, self.nv, self.nl = b.counts
        ev = sorted({(ei, vi) for ei, e in enumerate(b.edges) for vi in e.vertices})
        le = sorted({(li, ei) for li, lp in enumerate(b.loops) for ei, _ in lp.edges})
        self.ev = np.array(ev, dtype=np.int64).reshape(-1, 2)
        self.le = np.array(le, dtype=np.int64).reshape(-1, 2)
        self.loop_face = np.array(b.loop_face, dtype=np.int64)
        self.fl = np.stack([self.loop_face, np.arange(self.nl)], axis=1) if self.nl else np.zeros((0, 2), np.int64)
        pairs = set()
        for faces in b.edge_faces:
            for a in faces:
                for c in faces:
                    if a != c:
                        pairs.add((a, c))
        self.ff = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        # joint-graph edges in local node numbering (faces, edges, vertices, loops)
        eo, vo, lo = self.nf, self.nf + self.ne, self.nf + self.ne + self.nv
        rows = []
        for ei, vi in ev:
            rows += [(vo + vi, eo + ei, 0), (eo + ei, vo + vi, 0)]
        for li, ei in le:
            rows += [(eo + ei, lo + li, 1), (lo + li, eo + ei, 1)]
        for li, fi in enumerate(b.loop_face):
            rows += [(lo + li, fi, 2), (fi, lo + li, 2)]
        for a, c in self.ff:
            rows.append((c, a, 3))
        self.edges = np.array(rows, dtype=np.int64).reshape(-1, 3)
        self.offset = {Kind.FACE: 0, Kind.EDGE: eo, Kind.VERTEX: vo}

    @property
    def n_nodes(self) -> int:
        return self.nf + self.ne + self.nv + self.nl


def ref_encode(b: BRepGraph, feats: FeatureTable, P: dict, layers: int, dtype=np.longdouble) -> np.ndarray:
    adj = _Adj(b)
    lin = lambda name, x: x @ P[name + ".W"].T + P[name + ".b"]
    h = {
        "v": feats.vertices.astype(dtype), "e": feats.edges.astype(dtype),
        "l": feats.loops.astype(dtype), "f": feats.faces.astype(dtype),
    }
    for layer in range(layers):
        pre = f"enc.{layer}"
        v1 = _silu(lin(f"{pre}.up.v", h["v"]))
        e1 = _silu(lin(f"{pre}.up.e", np.concatenate([h["e"], _seg_mean(v1[adj.ev[:, 1]], adj.ev[:, 0], adj.ne)], 1)))
        l1 = _silu(lin(f"{pre}.up.l", np.concatenate([h["l"], _seg_mean(e1[adj.le[:, 1]], adj.le[:, 0], adj.nl)], 1)))
        f1 = _silu(lin(f"{pre}.up.f", np.concatenate([h["f"], _seg_mean(l1[adj.fl[:, 1]], adj.fl[:, 0], adj.nf)], 1)))
        f2 = _silu(lin(f"{pre}.down.f", np.concatenate([f1, _seg_mean(f1[adj.ff[:, 1]], adj.ff[:, 0], adj.nf)], 1)))
        l2 = _silu(lin(f"{pre}.down.l", np.concatenate([l1, f2[adj.loop_face]], 1)))
        e2 = _silu(lin(f"{pre}.down.e", np.concatenate([e1, _seg_mean(l2[adj.le[:, 0]], adj.le[:, 1], adj.ne)], 1)))
        v2 = _silu(lin(f"{pre}.down.v", np.concatenate([v1, _seg_mean(e2[adj.ev[:, 0]], adj.ev[:, 1], adj.nv)], 1)))
        new = {"v": v2, "e": e2, "l": l2, "f": f2}
        h = new if layer == 0 else {k: h[k] + new[k] for k in h}
    return np.concatenate([h["f"], h["e"], h["v"], h["l"]])


def ref_scores(
    bo: BRepGraph, bu: BRepGraph, emb_o: np.ndarray, emb_u: np.ndarray, prior, candidates, P: dict, gat_layers: int, heads: int
) -> np.ndarray:
    ao, au = _Adj(bo), _Adj(bu)
    shift = ao.n_nodes
    eu = au.edges.copy()
    eu[:, :2] += shift
    prior_rows = []
    for o, u in prior:
        a, c = ao.offset[o.kind] + o.index, shift + au.offset[u.kind] + u.index
        prior_rows += [(a, c, 4), (c, a, 4)]
    edges = np.concatenate([ao.edges, eu, np.array(prior_rows, dtype=np.int64).reshape(-1, 3)])
    x = np.concatenate([emb_o, emb_u])
    n, hid = x.shape
    d = hid // heads
    src, dst, typ = edges[:, 0], edges[:, 1], edges[:, 2]
    for layer in range(gat_layers):
        pre = f"gat.{layer}"
        q = (x @ P[f"{pre}.q"].T).reshape(n, heads, d)
        k = (x @ P[f"{pre}.k"].T).reshape(n, heads, d)
        v = (x @ P[f"{pre}.v"].T).reshape(n, heads, d)
        t = P[f"{pre}.type"].reshape(-1, heads, d)
        logits = (_leaky(q[dst] + k[src] + t[typ]) * P[f"{pre}.att"]).sum(-1)
        peak = np.full((n, heads), -np.inf, dtype=x.dtype)
        np.maximum.at(peak, dst, logits)
        z = np.exp(logits - peak[dst])
        den = np.zeros((n, heads), dtype=x.dtype)
        np.add.at(den, dst, z)
        agg = np.zeros((n, heads, d), dtype=x.dtype)
        np.add.at(agg, dst, (z / den[dst])[..., None] * (v[src] + t[typ]))
        x = x + _silu(agg.reshape(n, hid) @ P[f"{pre}.out.W"].T + P[f"{pre}.out.b"])
    io = np.array([ao.offset[o.kind] + o.index for o, _ in candidates], dtype=np.int64)
    iu = np.array([shift + au.offset[u.kind] + u.index for _, u in candidates], dtype=np.int64)
    pair = np.concatenate([x[io], x[iu]], axis=1)
    hidden = _silu(pair @ P["mlp.0.W"].T + P["mlp.0.b"])
    logit = (hidden @ P["mlp.1.W"].T)[:, 0] + P["mlp.1.b"][0]
    p = 1 / (1 + np.exp(-logit))
    lo = x.dtype.type(1e-12)
    return np.clip(p, lo, 1 - lo)


def ref_loss(params: ModelParams, item, prior, w: float, P: dict | None = None, dtype=np.longdouble):
    """Mean weighted BCE over all open candidates, computed in ``dtype``."""
    cfg = params.config
    P = P if P is not None else params_as(params, dtype)
    eo = ref_encode(item.orig, item.feat_o, P, cfg.encoder_layers, dtype)
    eu = ref_encode(item.upd, item.feat_u, P, cfg.encoder_layers, dtype)
    pairs = [(p.orig, p.upd) for p in prior]
    po = {o for o, _ in pairs}
    pu = {u for _, u in pairs}
    cands = []
    for kind in KINDS:
        fo = [EntityRef(kind, i) for i in range(item.orig.count(kind)) if EntityRef(kind, i) not in po]
        fu = [EntityRef(kind, j) for j in range(item.upd.count(kind)) if EntityRef(kind, j) not in pu]
        cands += [(o, u) for o in fo for u in fu]
    if not cands:
        return dtype(0)
    truth = item.truth.pair_set()
    y = np.array([1 if c in truth else 0 for c in cands], dtype=dtype)
    p = ref_scores(item.orig, item.upd, eo, eu, pairs, cands, P, cfg.gat_layers, cfg.heads)
    return -(y * np.log(p) + dtype(w) * (1 - y) * np.log(1 - p)).mean()
