import numpy as np
import pytest

import scoresync


def test_version():
    assert scoresync.__version__.count(".") == 2


def test_identical_features_align_on_the_diagonal():
    rng = np.random.default_rng(0)
    feats = rng.random((12, 12))
    cost = scoresync.cross_similarity(feats, feats)
    assert cost.shape == (12, 12)
    path = scoresync.dtw_align(cost)
    assert path["total_cost"] == 0.0
    np.testing.assert_array_equal(path["points"], np.stack([np.arange(12)] * 2, axis=1))
    assert not path["jump"].any()


def test_dtw_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        cost = rng.random((rng.integers(1, 7), rng.integers(1, 7)))
        assert scoresync.dtw_align(cost)["total_cost"] == scoresync.dtw_brute_force(cost)["total_cost"]


def test_jump_dtw_follows_a_perturbation():
    rng = np.random.default_rng(2)
    feats = rng.random((60, 12))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    p = scoresync.synth_perturb(feats, 0.05, 1, 7)
    cost = scoresync.cross_similarity(p["features"], feats)
    path = scoresync.jump_dtw_align(cost, p["inflections"])
    assert path["jump"].any()
    mapped = {int(a): int(b) for a, b in path["points"][::-1]}
    hits = sum(abs(mapped[i] - s) <= 2 for i, s in enumerate(p["score_frames"]))
    assert hits / len(p["score_frames"]) >= 0.95


def test_soft_dtw_divergence():
    y = np.array([0.0, 1.0, 2.0, 4.0])
    assert abs(scoresync.soft_dtw_divergence(y, y, 0.1)) <= 1e-9
    x = y + 0.5
    assert scoresync.soft_dtw_divergence(x, y, 0.1) > 0
    g = scoresync.soft_dtw_divergence_grad(x, y, 0.1)
    assert g.shape == x.shape


def test_metrics():
    assert scoresync.accuracy_at_margins(np.zeros(5)) == [100.0] * 4
    rng = np.random.default_rng(3)
    a = rng.normal(0.0, 0.1, 20)
    b = rng.normal(0.0, 0.2, 20)
    s_ab = scoresync.diebold_mariano(a, b)[0]
    s_ba = scoresync.diebold_mariano(b, a)[0]
    assert s_ab == pytest.approx(-s_ba)


def test_effective_kernel_size():
    assert scoresync.effective_kernel_size(3, 2) == 5


def test_gradient_suite_passes():
    cases = scoresync.gradient_suite(seed=0)
    assert cases and all(c["pass"] for c in cases)


def test_input_errors_map_to_value_error():
    with pytest.raises(ValueError):
        scoresync.dtw_align(np.zeros((0, 3)))
    with pytest.raises(scoresync.InputError):
        scoresync.soft_dtw_grad(np.ones(2), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        scoresync.dtw_align(np.zeros(3))


def test_train_toy_is_deterministic():
    a = scoresync.train_toy("path", 24, seed=3, epochs=1, grid=16, hidden=8)
    b = scoresync.train_toy("path", 24, seed=3, epochs=1, grid=16, hidden=8)
    assert a == b
    assert len(a["validation_loss"]) == 2
