import itertools

import numpy as np
import pytest

from pup.baselines import (
    VARIANTS,
    ItemPop,
    bprmf_fit,
    build_variant,
    fit_variant,
    fm_fit,
    itempop_fit,
    itempop_score,
    load_variant,
    save_variant,
)
from pup.evaluation import evaluate
from pup.synthetic import generate_synthetic_dataset
from pup.training import TrainConfig, build_lookup_model, compute_gradients

from conftest import make_dataset


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic_dataset(120, 300, 4, 8, seed=11)


def counts_dataset():
    train = [(u, 0) for u in range(5)] + [(u, 1) for u in range(3)] + [(u, 2) for u in range(7)]
    return make_dataset(7, [0, 0, 0, 0], [0, 0, 0, 0], train=train, levels=2)


class TestItemPop:
    def test_counts(self):
        m = itempop_fit(counts_dataset())
        assert [itempop_score(m, u, 0) for u in range(7)] == [5.0] * 7
        assert itempop_score(m, 3, 3) == 0.0

    def test_order(self):
        m = itempop_fit(counts_dataset())
        s = m.scores(range(7))
        assert np.all(np.argmax(s, axis=1) == 2)
        assert all(np.array_equal(s[0], row) for row in s)


class TestBprMf:
    def test_lr_zero_frozen(self, synth):
        cfg = TrainConfig(epochs=2, learning_rate=0.0, seed=4)
        init = build_variant("bprmf", synth, cfg)
        res = bprmf_fit(synth, cfg)
        assert np.array_equal(res.model.params[0], init.params[0])
        assert np.array_equal(res.model.scores([0, 1]), init.scores([0, 1]))

    def test_gradient_finite_differences(self):
        ds = make_dataset(3, [0, 0, 1], [0, 1, 1], train=[(0, 0), (1, 1), (2, 2)], levels=2)
        model = build_lookup_model(ds, TrainConfig(total_dim=2, dim_split=(1, 1)), "bprmf", ("item",))
        rng = np.random.default_rng(0)
        model.set_params([rng.uniform(-1, 1, size=model.params[0].shape)])
        batch = np.array([[0, 0, 1], [1, 1, 2], [2, 2, 0]])
        _, (G,) = compute_gradients(model, batch, 0.05)
        W = model.params[0]
        h = 1e-5
        for idx in np.ndindex(W.shape):
            p, m = W.copy(), W.copy()
            p[idx] += h
            m[idx] -= h
            num = (compute_gradients(model, batch, 0.05, params=[p])[0] - compute_gradients(model, batch, 0.05, params=[m])[0]) / (2 * h)
            assert abs(G[idx] - num) <= 1e-4 * max(abs(num), abs(G[idx]), 1e-6)

    def test_beats_itempop_on_planted_preferences(self, synth):
        cfg = TrainConfig(epochs=40, seed=2)
        mf = evaluate(bprmf_fit(synth, cfg).model, synth, (50,))
        pop = evaluate(itempop_fit(synth), synth, (50,))
        assert mf.recall[50] > pop.recall[50]


class TestFm:
    def test_zero(self, synth):
        model = build_variant("fm", synth, TrainConfig())
        model.set_params([np.zeros_like(model.params[0])])
        assert np.array_equal(model.scores([0, 5]), np.zeros((2, synth.num_items)))

    def test_identical_items(self):
        ds = make_dataset(2, [1, 1, 0], [2, 2, 0], levels=3, n_categories=2)
        model = build_variant("fm", ds, TrainConfig(seed=3))
        W = model.params[0]
        W[model.layout.item_offset + 1] = W[model.layout.item_offset]
        s = model.scores([0, 1])
        assert np.array_equal(s[:, 0], s[:, 1])

    def test_fast_vs_naive(self, synth):
        model = build_variant("fm", synth, TrainConfig(seed=3))
        W = model.params[0]
        lay = model.layout
        s = model.scores([7])[0]
        for i in (0, 17, 123):
            feats = [
                W[7],
                W[lay.item_offset + i],
                W[lay.category_offset + synth.item_category[i]],
                W[lay.price_offset + synth.item_price_level[i]],
            ]
            naive = sum(float(a @ b) for a, b in itertools.combinations(feats, 2))
            assert abs(s[i] - naive) <= 1e-9 * max(1.0, abs(naive))

    def test_reduces_to_mf_when_attributes_zero(self, synth):
        cfg = TrainConfig(seed=8)
        mf = build_variant("bprmf", synth, cfg)
        fm = build_variant("fm", synth, cfg)
        W = mf.params[0].copy()
        W[fm.layout.category_offset :] = 0.0
        mf.set_params([W])
        fm.set_params([W.copy()])
        assert np.allclose(fm.scores(range(10)), mf.scores(range(10)), rtol=0, atol=1e-15)

    def test_trains(self, synth):
        res = fm_fit(synth, TrainConfig(epochs=3, seed=1))
        assert res.history[-1][1] < res.history[0][1]


@pytest.mark.parametrize("variant", VARIANTS)
def test_checkpoint_round_trip(tmp_path, synth, variant):
    cfg = TrainConfig(epochs=1, seed=6, dim_split=(40, 24))
    model = fit_variant(variant, synth, cfg).model
    save_variant(tmp_path / "m.ckpt", model, cfg)
    loaded, header = load_variant(tmp_path / "m.ckpt", synth)
    assert header["variant"] == variant
    assert np.array_equal(loaded.scores([0, 3]), model.scores([0, 3]))


def test_unknown_variant(synth):
    with pytest.raises(ValueError, match="unknown variant"):
        fit_variant("deepfm", synth, TrainConfig())


def test_scores_are_finite(synth):
    for v in VARIANTS:
        m = build_variant(v, synth, TrainConfig(seed=1))
        assert np.all(np.isfinite(m.scores(range(synth.num_users))))
