import numpy as np
import pytest

from brepmatch.gradcheck import grad_check, loss_and_grads, pick_coordinates
from brepmatch.scorer import ModelConfig, ModelParams, open_candidates
from brepmatch.synth.edits import apply_constructive
from brepmatch.synth.dataset import truth_matching
from brepmatch.training import TrainItem, partial_prior

SMALL = ModelConfig(hidden=16, encoder_layers=2, gat_layers=2, heads=2, mlp_hidden=16)


@pytest.fixture(scope="module")
def item(cube_model):
    variant, _ = apply_constructive(cube_model, 3, "HolePunch")
    return TrainItem.of(cube_model.brep, variant.brep, truth_matching(cube_model, variant))


@pytest.fixture(scope="module")
def prior(item):
    return partial_prior(item.truth, np.random.default_rng(0), 0.5)


def test_zero_parameters_only_move_the_output_bias(item, prior):
    value, grads = loss_and_grads(ModelParams.zeros(SMALL), item, prior, 2.0)
    for name, g in grads.items():
        if name != "mlp.1.b":
            assert not g.any(), name
    # every probability is 1/2, so d loss / d logit is -1/2 for positives and w/2 for negatives
    truth = item.truth.pair_set()
    cands = open_candidates(item.orig, item.upd, prior)
    y = np.array([c in truth for c in cands], dtype=float)
    assert float(grads["mlp.1.b"][0]) == pytest.approx(np.mean(-0.5 * y + 1.0 * (1 - y)), rel=1e-12)
    assert value == pytest.approx(np.mean(y * np.log(2) + 2 * (1 - y) * np.log(2)), rel=1e-12)


def test_gradients_agree_with_finite_differences(item, prior):
    params = ModelParams.init(SMALL, seed=1)
    details = []
    err = grad_check(params, item, prior, epsilon=1e-5, n_coords=60, details=details)
    assert err < 1e-4
    assert len(details) == 60
    err2 = grad_check(params, item, prior, epsilon=2e-5, n_coords=60)
    assert err2 < 1e-3


def test_pick_coordinates_covers_every_tensor():
    params = ModelParams.init(SMALL)
    picked = pick_coordinates(params, 200, seed=4)
    assert len(picked) == 200
    assert {n for n, _ in picked} == set(params.tensors)
    assert all(0 <= i < params[n].numel() for n, i in picked)
    assert picked == pick_coordinates(params, 200, seed=4)
