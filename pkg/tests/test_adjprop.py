import numpy as np
from hypothesis import given, strategies as st

from brepmatch.adjprop import _min_rotation, coaxial, propagate
from brepmatch.brep import N_PARAMS, EntityRef, GeometrySignature, Kind
from brepmatch.exact import coincidence_match
from brepmatch.matching import Matching, Provenance
from brepmatch.overlap import overlap_match
from brepmatch.synth.dataset import truth_matching
from brepmatch.synth.edits import apply_constructive


def test_cube_cascade_from_five_faces(cube):
    init = Matching()
    for i in range(5):
        init.add(EntityRef(Kind.FACE, i), EntityRef(Kind.FACE, i))
    m = propagate(cube, cube, init)
    assert len(m) == sum(cube.counts[:3])
    assert all(p.orig == p.upd for p in m)
    assert {p.provenance for p in m if p.orig.index >= 5 or p.orig.kind != Kind.FACE} == {Provenance.PROPAGATED}


def test_empty_init_on_symmetric_cube_matches_nothing(cube):
    assert len(propagate(cube, cube, Matching())) == 0


def test_fillet_variant_behaviour(cube_model):
    variant, edit = apply_constructive(cube_model, 2, "FilletLike")
    bo, bu = cube_model.brep, variant.brep
    truth = truth_matching(cube_model, variant)
    init = overlap_match(bo, bu, coincidence_match(bo, bu))
    m = propagate(bo, bu, init)
    # every propagated pair agrees with tracking, and the only unmatched
    # updated entities are those the bevel created
    assert m.pair_set() <= truth.pair_set()
    unmatched = {r for r in bu.refs() if not m.upd_matched(r)}
    assert unmatched == set(edit.created)


def test_output_contains_init_and_is_deterministic(small_dataset):
    for s in small_dataset.samples[:10]:
        init = overlap_match(s.orig, s.upd, coincidence_match(s.orig, s.upd))
        a = propagate(s.orig, s.upd, init)
        b = propagate(s.orig, s.upd, init)
        assert a == b
        assert init.pair_set() <= a.pair_set()
        assert a.check() == []


@given(seq=st.lists(st.integers(-1, 6), min_size=1, max_size=9), shift=st.integers(0, 20))
def test_min_rotation_is_rotation_invariant(seq, shift):
    seq = tuple(seq)
    k = shift % len(seq)
    assert _min_rotation(seq) == _min_rotation(seq[k:] + seq[:k])
    assert sorted(_min_rotation(seq)) == sorted(seq)


def _axial(kind, point, axis, radius=1.0):
    p = np.zeros(N_PARAMS)
    p[:3], p[3:6], p[6] = point, axis, radius
    return GeometrySignature(kind, p, np.zeros((1, 3)), np.ones(1), np.zeros(3), 1.0, np.zeros((2, 3)))


def test_coaxial():
    a = _axial("cylinder", [0, 0, 0], [0, 0, 1])
    shifted_along = _axial("cylinder", [0, 0, 5], [0, 0, -1], 2.0)
    off_axis = _axial("cylinder", [1, 0, 0], [0, 0, 1])
    assert coaxial(a, shifted_along, 1e-9)
    assert not coaxial(a, off_axis, 1e-9)
    assert not coaxial(_axial("plane", [0, 0, 0], [0, 0, 1]), a, 1e-9)
