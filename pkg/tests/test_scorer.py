import json
import math

import numpy as np
import pytest
import torch

from brepmatch.brep import EntityRef, Kind, load_brep, to_dict
from brepmatch.errors import InvalidCandidate, ShapeError
from brepmatch.features import FeatureTable, Frame, extract_features
from brepmatch.matching import Matching
from brepmatch.reference import params_as, ref_encode, ref_scores
from brepmatch.scorer import (
    ModelConfig,
    ModelParams,
    encode,
    encode_many,
    open_candidates,
    param_shapes,
    score_all,
    smooth_leaky,
)
from brepmatch.synth.dataset import generate_base_model
from brepmatch.synth.edits import apply_constructive


@pytest.fixture(scope="module")
def params():
    return ModelParams.init(seed=3)


def _embed(b, params, frame=None):
    return encode(b, extract_features(b, frame or Frame.of(b)), params)


def permute_brep(b, rng):
    """Reindex faces, edges, vertices and loops by random permutations; returns the new graph and the maps old -> new."""
    doc = to_dict(b)
    perm = {k: rng.permutation(len(doc[k])) for k in ("faces", "edges", "vertices", "loops")}
    new_of = {k: np.argsort(p) for k, p in perm.items()}  # new_of[k][old] = new
    for e in doc["edges"]:
        e["vertices"] = [int(new_of["vertices"][v]) for v in e["vertices"]]
    for lp in doc["loops"]:
        for ref in lp["edges"]:
            ref["edge"] = int(new_of["edges"][ref["edge"]])
    for f in doc["faces"]:
        f["loops"] = [int(new_of["loops"][li]) for li in f["loops"]]
    for k, p in perm.items():
        doc[k] = [doc[k][i] for i in p]
    return load_brep(json.dumps(doc)), new_of


def test_param_shapes_follow_the_config():
    shapes = param_shapes(ModelConfig())
    assert shapes["gat.0.type"] == (5, 64)
    assert shapes["gat.3.att"] == (8, 8)
    assert shapes["mlp.0.W"] == (64, 128) and shapes["mlp.1.W"] == (1, 64)
    assert shapes["enc.0.up.f.W"] == (64, 41 + 64) and shapes["enc.5.down.v.W"] == (64, 128)
    assert not any(k.startswith("enc.6") or k.startswith("gat.4") for k in shapes)


def test_zero_params_give_zero_embeddings(cube):
    z = _embed(cube, ModelParams.zeros())
    assert z.shape == (sum(cube.counts), 64)
    assert torch.count_nonzero(z) == 0


def test_smooth_leaky_fixes_zero_and_has_the_slopes():
    x = torch.tensor([0.0, -60.0, 60.0], dtype=torch.float64)
    y = smooth_leaky(x)
    assert y[0] == 0.0
    assert y[1] == pytest.approx(-60 * 0.2 - 0.8 * math.log(2), rel=1e-12)
    assert y[2] == pytest.approx(60 - 0.8 * math.log(2), rel=1e-12)


def test_encoder_matches_the_numpy_oracle(cube, params):
    feats = extract_features(cube, Frame.of(cube))
    got = encode(cube, feats, params).numpy()
    want = ref_encode(cube, feats, params_as(params, np.float64), params.config.encoder_layers, np.float64)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_scores_match_the_numpy_oracle(cube_model, params):
    variant, _ = apply_constructive(cube_model, 3, "HolePunch")
    bo, bu = cube_model.brep, variant.brep
    frame = Frame.of(bo)
    fo, fu = extract_features(bo, frame), extract_features(bu, frame)
    eo, eu = encode_many([bo, bu], [fo, fu], params)
    prior = Matching([(EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 0)), (EntityRef(Kind.EDGE, 1), EntityRef(Kind.EDGE, 1))])
    cands = open_candidates(bo, bu, prior)
    got = score_all(bo, bu, eo, eu, prior, cands, params)
    P = params_as(params, np.float64)
    want = ref_scores(bo, bu, eo.numpy(), eu.numpy(), [(p.orig, p.upd) for p in prior], cands, P,
                      params.config.gat_layers, params.config.heads)
    assert np.max(np.abs(got - want)) <= 1e-10
    assert np.all((got > 0) & (got < 1))


def test_encoder_is_permutation_equivariant(params):
    b = generate_base_model(12)
    moved, new_of = permute_brep(b, np.random.default_rng(0))
    frame = Frame.of(b)
    e0 = encode(b, extract_features(b, frame), params).numpy()
    e1 = encode(moved, extract_features(moved, frame), params).numpy()
    nf, ne, nv, nl = b.counts
    blocks = (("faces", 0, nf), ("edges", nf, ne), ("vertices", nf + ne, nv), ("loops", nf + ne + nv, nl))
    for key, off, n in blocks:
        assert np.max(np.abs(e0[off:off + n] - e1[off + new_of[key]])) <= 1e-9


def test_scores_are_permutation_equivariant(params):
    # equivariance needs no tracking, so two unrelated models will do
    bo, bu = generate_base_model(4), generate_base_model(5)
    moved, new_of = permute_brep(bu, np.random.default_rng(1))
    key = {Kind.FACE: "faces", Kind.EDGE: "edges", Kind.VERTEX: "vertices"}
    remap = lambda r: EntityRef(r.kind, int(new_of[key[r.kind]][r.index]))
    frame = Frame.of(bo)
    fo = extract_features(bo, frame)
    prior = Matching([(EntityRef(Kind.FACE, 1), EntityRef(Kind.FACE, 2)), (EntityRef(Kind.VERTEX, 0), EntityRef(Kind.VERTEX, 3))])
    prior_moved = Matching([(p.orig, remap(p.upd)) for p in prior])
    cands = open_candidates(bo, bu, prior)[::7]
    eo, eu = encode_many([bo, bu], [fo, extract_features(bu, frame)], params)
    mo, mu = encode_many([bo, moved], [fo, extract_features(moved, frame)], params)
    a = score_all(bo, bu, eo, eu, prior, cands, params)
    b = score_all(bo, moved, mo, mu, prior_moved, [(o, remap(u)) for o, u in cands], params)
    assert np.max(np.abs(a - b)) <= 1e-9


def test_empty_and_duplicate_candidates(cube, params):
    e = _embed(cube, params)
    assert len(score_all(cube, cube, e, e, Matching(), [], params)) == 0
    c = (EntityRef(Kind.EDGE, 2), EntityRef(Kind.EDGE, 5))
    p = score_all(cube, cube, e, e, Matching(), [c, (EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 1)), c], params)
    assert p[0] == p[2]


def test_invalid_candidates(cube, params):
    e = _embed(cube, params)
    with pytest.raises(InvalidCandidate):
        score_all(cube, cube, e, e, Matching(), [(EntityRef(Kind.FACE, 0), EntityRef(Kind.EDGE, 0))], params)
    with pytest.raises(InvalidCandidate):
        score_all(cube, cube, e, e, Matching(), [(EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 6))], params)
    prior = Matching([(EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 0))])
    with pytest.raises(InvalidCandidate):
        score_all(cube, cube, e, e, prior, [(EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 1))], params)


def test_shape_errors(cube, params):
    ft = extract_features(cube, Frame.of(cube))
    narrow = FeatureTable(ft.faces[:, :40], ft.edges, ft.vertices, ft.loops)
    with pytest.raises(ShapeError):
        encode(cube, narrow, params)
    e = _embed(cube, params)
    with pytest.raises(ShapeError):
        score_all(cube, cube, e[:, :32], e[:, :32], Matching(), [(EntityRef(Kind.FACE, 0), EntityRef(Kind.FACE, 0))], params)


def test_init_is_seeded(params):
    assert ModelParams.init(seed=3).bitwise_equal(params)
    assert not ModelParams.init(seed=4).bitwise_equal(params)
    assert all(torch.isfinite(t).all() for t in params.tensors.values())
