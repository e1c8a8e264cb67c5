import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brepmatch.brep import N_PARAMS, EntityRef, GeometrySignature, Kind
from brepmatch.errors import FrameMismatch
from brepmatch.exact import coincidence_match, default_delta, geometry_coincident
from brepmatch.matching import Matching, Provenance
from brepmatch.overlap import estimate_overlap, overlap_match
from brepmatch.synth.edits import apply_constructive
from brepmatch.synth.dataset import truth_matching
from brepmatch.synth.part import Hole, Pad, Part, build_part
from brepmatch.synth.sampling import sample_region

from conftest import ref_index, translate_brep


def _plane_sig(outer, inners=(), z=0.0) -> GeometrySignature:
    pts2, w, _ = sample_region(outer, list(inners))
    pts = np.column_stack([pts2, np.full(len(pts2), z)])
    params = np.zeros(N_PARAMS)
    params[2], params[5] = z, 1.0
    return GeometrySignature.from_samples("plane", params, pts, w)


def _rect(x0, y0, x1, y1):
    return ("poly", np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def _cyl_sig(radius):
    from brepmatch.synth.sampling import sample_cylinder

    pts, w, _ = sample_cylinder(np.zeros(3), np.array([0.0, 0.0, 1.0]), radius, 0.0, 1.0)
    params = np.zeros(N_PARAMS)
    params[5], params[6] = 1.0, radius
    return GeometrySignature.from_samples("cylinder", params, pts, w)


# -- coincidence -------------------------------------------------------------


def test_identity_matches_everything(cube):
    m = coincidence_match(cube, cube)
    assert len(m) == sum(cube.counts[:3])
    assert all(p.orig == p.upd and p.provenance == Provenance.EXACT for p in m)


def test_translation_by_many_deltas_matches_nothing(cube):
    moved = translate_brep(cube, [1000 * default_delta(cube), 0.0, 0.0])
    assert len(coincidence_match(cube, moved)) == 0


def test_frame_mismatch(cube):
    from brepmatch.synth.part import Part, build_part

    huge = build_part(Part((0, 0, 0), (100.0, 100.0, 100.0)), "huge").brep
    with pytest.raises(FrameMismatch):
        coincidence_match(cube, huge)


def test_hole_punch_leaves_only_trimmed_faces_unmatched(cube_model):
    punched, edit = apply_constructive(cube_model, 3, "HolePunch")
    host = edit.params["host"]
    got = coincidence_match(cube_model.brep, punched.brep).pair_set()
    truth = truth_matching(cube_model, punched)
    # the host face (and for a through hole the exit face) is trimmed, every
    # other surviving entity keeps its geometry exactly
    trimmed = {EntityRef(Kind.FACE, ref_index(punched, host, Kind.FACE))}
    if edit.params["depth"] is None:
        opposite = host[0] + ("-" if host[1] == "+" else "+") + host[2]
        trimmed.add(EntityRef(Kind.FACE, ref_index(punched, opposite, Kind.FACE)))
    expect = {(p.orig, p.upd) for p in truth if p.upd not in trimmed}
    assert got == expect


def test_geometry_coincident_examples(cube):
    a = cube.signatures[Kind.FACE][0]
    assert geometry_coincident(a, a, 1e-9)
    flipped = GeometrySignature(a.kind_tag, a.params * np.r_[np.ones(3), -np.ones(3), np.ones(10)], a.samples,
                                a.weights, a.centroid, a.measure, a.local_bbox)
    assert geometry_coincident(a, flipped, 1e-9)
    c1, c2 = _cyl_sig(1.0), _cyl_sig(1.1)
    assert geometry_coincident(c1, c1, 1e-6)
    assert not geometry_coincident(c1, c2, 1e-6)
    assert not geometry_coincident(a, c1, 1.0)


@given(i=st.integers(0, 19), j=st.integers(0, 19), delta=st.floats(1e-9, 0.5))
def test_geometry_coincident_symmetric(i, j, delta):
    from brepmatch.synth.dataset import generate_base_model

    b = generate_base_model(11)
    sigs = b.signatures[Kind.FACE] + b.signatures[Kind.EDGE]
    a, c = sigs[i % len(sigs)], sigs[j % len(sigs)]
    assert geometry_coincident(a, c, delta) == geometry_coincident(c, a, delta)


def test_coincidence_is_conservative(small_dataset):
    for s in small_dataset.samples:
        m = coincidence_match(s.orig, s.upd)
        assert m.pair_set() <= s.truth.pair_set(), s.pair_id
        assert m.check() == []


def test_coincidence_deterministic(small_dataset):
    s = small_dataset.samples[3]
    assert coincidence_match(s.orig, s.upd) == coincidence_match(s.orig, s.upd)


# -- overlap ------------------------------------------------------------------


def _holed_block(ratio_removed: float) -> tuple:
    base = build_part(Part((0, 0, 0), (1.0, 1.0, 1.0)), "blk")
    r = math.sqrt(ratio_removed / math.pi)
    holed = build_part(Part((0, 0, 0), (1.0, 1.0, 1.0), holes=(Hole(0, "B+z", (0.5, 0.5), r, None),), next_id=1), "blk")
    return base, holed


def test_hole_removing_five_percent_is_overlap_matched():
    base, holed = _holed_block(0.05)
    fo, fu = ref_index(base, "B+z", Kind.FACE), ref_index(holed, "B+z", Kind.FACE)
    assert holed.info.face_area["B+z"] / base.info.face_area["B+z"] == pytest.approx(0.95)
    boot = coincidence_match(base.brep, holed.brep)
    assert not boot.upd_matched(EntityRef(Kind.FACE, fu))
    m = overlap_match(base.brep, holed.brep, boot)
    pair = [p for p in m if p.upd == EntityRef(Kind.FACE, fu)]
    assert pair and pair[0].orig == EntityRef(Kind.FACE, fo) and pair[0].provenance == Provenance.OVERLAP


def test_face_halved_by_boss_is_not_overlap_matched():
    base = build_part(Part((0, 0, 0), (1.0, 1.0, 1.0)), "blk")
    h = math.sqrt(0.5) / 2
    padded = build_part(
        Part((0, 0, 0), (1.0, 1.0, 1.0), pads=(Pad(0, "B+z", "rect", (0.5, 0.5), half=(h, h), height=0.2),), next_id=1), "blk"
    )
    assert padded.info.face_area["B+z"] / base.info.face_area["B+z"] == pytest.approx(0.5)
    fu = EntityRef(Kind.FACE, ref_index(padded, "B+z", Kind.FACE))
    m = overlap_match(base.brep, padded.brep, coincidence_match(base.brep, padded.brep))
    assert not m.upd_matched(fu)


def test_existing_pairs_untouched(cube):
    boot = coincidence_match(cube, cube)
    m = overlap_match(cube, cube, boot)
    assert m == boot


def test_estimate_overlap_examples():
    a = _plane_sig(_rect(0, 0, 2, 1))
    assert estimate_overlap(a, a) == 1.0
    far = _plane_sig(_rect(10, 10, 12, 11))
    assert estimate_overlap(a, far) == 0.0
    shifted = _plane_sig(_rect(1, 0, 3, 1))
    assert abs(estimate_overlap(a, shifted) - 0.5) <= 0.13


@given(keep=st.lists(st.booleans(), min_size=64, max_size=64), dx=st.floats(0.0, 1.5))
def test_overlap_monotone_under_sample_removal(keep, dx):
    small = _plane_sig(_rect(dx, 0, dx + 1.0, 1.0))
    large = _plane_sig(_rect(0, 0, 2, 1))
    keep = np.array(keep)
    if keep.sum() == 0:
        keep[0] = True
    thinned = GeometrySignature(large.kind_tag, large.params, large.samples[keep], large.weights[keep],
                                large.centroid, large.measure, large.local_bbox)
    tau = 0.2
    assert estimate_overlap(small, thinned, tau) <= estimate_overlap(small, large, tau)


def test_overlap_bounds_and_symmetry(construct_dataset):
    for s in construct_dataset.samples[:6]:
        for a in s.orig.signatures[Kind.FACE][:5]:
            for b in s.upd.signatures[Kind.FACE][:5]:
                v = estimate_overlap(a, b)
                assert 0.0 <= v <= 1.0
                assert v == estimate_overlap(b, a)


def test_overlap_match_keeps_invariants(small_dataset):
    for s in small_dataset.samples:
        boot = coincidence_match(s.orig, s.upd)
        m = overlap_match(s.orig, s.upd, boot)
        assert m.check() == []
        assert boot.pair_set() <= m.pair_set()
        assert all(p.orig.kind != Kind.VERTEX for p in m if p.provenance == Provenance.OVERLAP)


def test_bad_fraction(cube):
    with pytest.raises(ValueError):
        overlap_match(cube, cube, Matching(), frac_threshold=0.0)
