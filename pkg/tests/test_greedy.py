import numpy as np
import pytest

from brepmatch.exact import coincidence_match
from brepmatch.greedy import is_prefix, match, threshold_prefix, truncate
from brepmatch.matching import Provenance
from brepmatch.scorer import ModelConfig, ModelParams
from brepmatch.training import TrainConfig, TrainItem, train

SMALL = ModelConfig(hidden=16, encoder_layers=2, gat_layers=2, heads=2, mlp_hidden=16)


@pytest.fixture(scope="module")
def model(small_dataset):
    items = [TrainItem.of(s.orig, s.upd, s.truth) for s in small_dataset.subset("train")]
    val = [TrainItem.of(s.orig, s.upd, s.truth) for s in small_dataset.subset("val")]
    return train(items, val, TrainConfig(epochs=4, batch_size=4), SMALL)


@pytest.fixture(scope="module")
def pairs(small_dataset):
    return small_dataset.samples[:8]


def test_identical_models_need_no_learned_steps(cube, model):
    for t in (0.1, 0.7):
        m, trace = match(cube, cube, model, t)
        assert trace == [] and len(m) == sum(cube.counts[:3])


def test_threshold_one_is_the_bootstrap(pairs, model):
    for s in pairs:
        m, trace = match(s.orig, s.upd, model, 1.0)
        assert trace == [] and m == coincidence_match(s.orig, s.upd)


def test_learned_pairs_respect_threshold_and_invariants(pairs, model):
    added = 0
    for s in pairs:
        boot = coincidence_match(s.orig, s.upd)
        m, trace = match(s.orig, s.upd, model, 0.3)
        assert m.check() == []
        assert boot.pair_set() <= m.pair_set()
        learned = [p for p in m if p.provenance == Provenance.LEARNED]
        assert len(learned) == len(trace)
        assert all(p.score >= 0.3 for p in learned)
        assert [r["iter"] for r in trace] == list(range(len(trace)))
        added += len(trace)
    assert added > 0


def test_prefix_property(pairs, model):
    for s in pairs:
        assert threshold_prefix(s.orig, s.upd, model, 0.3, 0.6)
        assert threshold_prefix(s.orig, s.upd, model, 0.5, 0.5)


def test_truncation_reproduces_a_higher_threshold(pairs, model):
    s = pairs[1]
    boot = coincidence_match(s.orig, s.upd)
    _, low = match(s.orig, s.upd, model, 0.2)
    high_m, high = match(s.orig, s.upd, model, 0.5)
    assert is_prefix(high, low)
    assert truncate(boot, low, 0.5) == high_m


def test_deterministic(pairs, model):
    s = pairs[2]
    assert match(s.orig, s.upd, model, 0.4) == match(s.orig, s.upd, model, 0.4)


def test_without_params_only_the_bootstrap(pairs):
    s = pairs[0]
    m, trace = match(s.orig, s.upd, None)
    assert trace == [] and m == coincidence_match(s.orig, s.upd)


def test_batched_additions_stay_one_to_one(pairs, model):
    for s in pairs[:3]:
        m, trace = match(s.orig, s.upd, model, 0.3, batch_k=5)
        assert m.check() == [] and all(r["score"] >= 0.3 for r in trace)


def test_bad_threshold(cube):
    for t in (0.0, 1.5, -1.0):
        with pytest.raises(ValueError):
            match(cube, cube, None, t)
    with pytest.raises(ValueError):
        threshold_prefix(cube, cube, None, 0.9, 0.5)
