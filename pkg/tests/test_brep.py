import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brepmatch.brep import (
    EDGE_SAMPLES,
    FACE_SAMPLES,
    EntityRef,
    Kind,
    Loop,
    dumps_brep,
    load_brep,
    structurally_equal,
    to_dict,
    validate,
)
from brepmatch.errors import DegenerateFrame, ParseError, SchemaError, ValidationError
from brepmatch.features import FEATURE_WIDTH, LOOP_FEATURE_WIDTH, Frame, extract_features
from brepmatch.synth.dataset import generate_base_model

from conftest import translate_brep


def cube_json(cube) -> str:
    return dumps_brep(cube)


def test_cube_loads_with_cube_counts(cube):
    b = load_brep(cube_json(cube).encode())
    assert b.counts == (6, 12, 8, 6)
    assert validate(b) == []


def test_dangling_loop_edge_is_named(cube):
    doc = to_dict(cube)
    doc["loops"][3]["edges"][0]["edge"] = 99
    with pytest.raises(ValidationError) as err:
        load_brep(json.dumps(doc))
    assert any(v.startswith("loops[3]") and "99" in v for v in err.value.violations)


def test_generated_model_round_trips():
    b = generate_base_model(7)
    again = load_brep(dumps_brep(b))
    assert structurally_equal(b, again)
    assert dumps_brep(again) == dumps_brep(b)


def test_malformed_json_is_parse_error():
    with pytest.raises(ParseError):
        load_brep(b"{not json")
    with pytest.raises(ParseError):
        load_brep(b"\xff\xfe")


def test_schema_errors(cube):
    doc = to_dict(cube)
    del doc["bbox"]
    with pytest.raises(SchemaError):
        load_brep(json.dumps(doc))
    doc = to_dict(cube)
    doc["faces"][0]["colour"] = "red"
    with pytest.raises(SchemaError, match="unknown field"):
        load_brep(json.dumps(doc))
    doc = to_dict(cube)
    doc["edges"][0]["samples"] = doc["edges"][0]["samples"][:-1]
    with pytest.raises(SchemaError):
        load_brep(json.dumps(doc))
    doc = to_dict(cube)
    doc["loops"][0]["outer"] = 1
    with pytest.raises(SchemaError):
        load_brep(json.dumps(doc))


def test_valid_cube_has_no_violations(cube):
    assert validate(cube) == []


def test_cleared_outer_flag(cube):
    li = cube.faces[2].loops[0]
    loops = list(cube.loops)
    loops[li] = Loop(False, loops[li].edges)
    bad = replace(cube, loops=tuple(loops))
    v = validate(bad)
    assert len(v) == 1 and "no outer loop" in v[0]


@given(seed=st.integers(0, 40), pick=st.integers(0, 10_000), drop=st.integers(0, 10_000))
def test_deleting_an_edge_from_a_loop_breaks_closure(seed, pick, drop):
    b = generate_base_model(seed)
    multi = [li for li, lp in enumerate(b.loops) if len(lp.edges) > 1]
    li = multi[pick % len(multi)]
    edges = list(b.loops[li].edges)
    del edges[drop % len(edges)]
    loops = list(b.loops)
    loops[li] = Loop(b.loops[li].outer, tuple(edges))
    v = validate(replace(b, loops=tuple(loops)))
    assert any(s.startswith(f"loops[{li}]") and "non-closed" in s for s in v)


def test_bbox_must_contain_samples(cube):
    bad = replace(cube, bbox=np.array([[0.0, 0.0, 0.0], [0.5, 1.0, 1.0]]))
    assert any("bbox" in v for v in validate(bad))


@given(seed=st.integers(0, 200))
def test_signature_invariants(seed):
    b = generate_base_model(seed)
    for kind in (Kind.FACE, Kind.EDGE):
        n = FACE_SAMPLES if kind == Kind.FACE else EDGE_SAMPLES
        for s in b.signatures[kind]:
            assert s.samples.shape == (n, 3)
            assert np.all(s.weights > 0)
            assert math.isclose(s.weights.sum(), s.measure, rel_tol=1e-12)
            mean = (s.weights[:, None] * s.samples).sum(0) / s.weights.sum()
            assert np.allclose(s.centroid, mean, atol=1e-9)
            if s.kind_tag in ("plane", "cylinder", "line", "circle"):
                assert abs(np.linalg.norm(s.params[3:6]) - 1.0) <= 1e-9


def test_cube_features(cube):
    frame = Frame.of(cube)
    ft = extract_features(cube, frame)
    d = math.sqrt(3.0)
    assert ft.faces.shape == (6, FEATURE_WIDTH) and ft.loops.shape == (6, LOOP_FEATURE_WIDTH)
    # centroid slots: one coordinate at +-0.5/d, the rest zero
    cent = ft.faces[:, 29:32]
    assert np.allclose(np.sort(np.abs(cent), axis=1), [[0, 0, 0.5 / d]] * 6, atol=1e-12)
    assert np.allclose(ft.faces[:, 38], math.log1p(1.0 / 3.0))
    assert np.all(ft.vertices[:, 38] == 0.0)
    assert np.all(ft.faces[:, 0] == 1) and np.all(ft.edges[:, 1] == 1) and np.all(ft.vertices[:, 2] == 1)


def test_features_deterministic_and_congruent(cube):
    f1 = extract_features(cube, Frame.of(cube))
    f2 = extract_features(load_brep(dumps_brep(cube)), Frame.of(cube))
    for a, b in ((f1.faces, f2.faces), (f1.edges, f2.edges), (f1.vertices, f2.vertices), (f1.loops, f2.loops)):
        assert a.tobytes() == b.tobytes()


def test_degenerate_frame(cube):
    with pytest.raises(DegenerateFrame):
        extract_features(cube, Frame(np.zeros(3), 0.0))


@given(seed=st.integers(0, 100), t=st.tuples(*[st.floats(-50, 50)] * 3))
def test_frame_invariance_under_translation(seed, t):
    b = generate_base_model(seed)
    moved = translate_brep(b, np.array(t))
    fa, fb = extract_features(b, Frame.of(b)), extract_features(moved, Frame.of(moved))
    for x, y in ((fa.faces, fb.faces), (fa.edges, fb.edges), (fa.vertices, fb.vertices), (fa.loops, fb.loops)):
        assert np.max(np.abs(x - y)) <= 1e-9


def test_neighbors_of_cube(cube):
    face = EntityRef(Kind.FACE, 0)
    edges = cube.neighbors(face)
    assert len(edges) == 4
    for e in edges:
        assert face in cube.neighbors(e)
    assert all(len(cube.neighbors(EntityRef(Kind.VERTEX, i))) == 3 for i in range(8))
