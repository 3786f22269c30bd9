import math

import numpy as np
import pytest
from scipy import stats

from krda.data import MoonsSpec, Standardizer, gen_moons
from krda.errors import DimensionMismatch
from krda.mixture import GaussianMixture1D, mixture_log_pdf
from krda.nade import (
    Backbone, DomainHead, KrdaModel, activations, conditional_mixture, dumps, forward_activations,
    from_dict, load_model, log_likelihood, log_likelihood_factors, log_likelihood_grad, sample, save_model,
    to_dict,
)
from krda.trainer import TrainConfig, fit_joint
from helpers import fd_check, random_model, safe_for_fd


def zero_head_model(d=2, H=4, N=3, seed=0):
    rng = np.random.default_rng(seed)
    bb = Backbone(rng.normal(size=H), rng.normal(size=(H, d)))
    return KrdaModel(d, H, N, bb, DomainHead.zeros(d, H, N), DomainHead.zeros(d, H, N),
                     Standardizer(np.zeros(d), np.ones(d)))


def test_activations_zero_W():
    m = KrdaModel.init(3, H=5, N=2, seed=1)
    m.backbone.W[:] = 0.0
    acts = forward_activations(m, np.array([0.3, -1.0, 2.0]))
    assert all(np.array_equal(a, m.backbone.c) for a in acts)


def test_activations_recurrence_unrolled():
    m = KrdaModel.init(3, H=5, N=2, seed=2)
    x = np.array([0.7, -1.2, 0.4])
    acts = forward_activations(m, x)
    c, W = m.backbone.c, m.backbone.W
    assert np.array_equal(acts[0], c)
    assert np.allclose(acts[1], c + x[0] * W[:, 0], atol=1e-15)
    assert np.allclose(acts[2], c + x[0] * W[:, 0] + x[1] * W[:, 1], atol=1e-15)


def test_triangularity_bitwise():
    rng = np.random.default_rng(3)
    m = random_model(rng, d=4, H=6, N=3)
    x = rng.normal(size=4)
    for i in range(1, 5):
        ref = conditional_mixture(m, "source", x, i)
        y = x.copy()
        y[i - 1:] = rng.normal(size=4 - (i - 1)) * 10
        got = conditional_mixture(m, "source", y, i)
        for f in ("weights", "means", "stds"):
            assert np.array_equal(getattr(ref, f), getattr(got, f))


def test_zero_heads_give_standard_normal_factors():
    m = zero_head_model(d=2, N=3)
    cm = conditional_mixture(m, "target", np.array([1.5, -0.2]), 2)
    assert np.allclose(cm.weights, 1 / 3, atol=1e-15)
    assert np.all(cm.means == 0.0) and np.all(cm.stds == 1.0)
    assert log_likelihood(m, "source", np.zeros(2)) == pytest.approx(2 * -0.918938533204673, abs=1e-12)


def test_bad_index_and_dimension():
    m = zero_head_model(d=2)
    with pytest.raises(IndexError):
        conditional_mixture(m, "source", np.zeros(2), 3)
    with pytest.raises(DimensionMismatch):
        log_likelihood(m, "source", np.zeros(3))
    with pytest.raises(ValueError):
        m.head("other")


def test_chain_rule_consistency():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = random_model(rng, d=3, H=5, N=3)
        x = rng.normal(size=3)
        total = sum(mixture_log_pdf(conditional_mixture(m, "target", x, i), x[i - 1]) for i in range(1, 4))
        assert abs(log_likelihood(m, "target", x) - total) <= 1e-12


def test_batch_rows_match_single_rows():
    rng = np.random.default_rng(5)
    m = random_model(rng, d=3, H=5, N=2)
    X = rng.normal(size=(17, 3))
    batch = log_likelihood(m, "source", X)
    assert all(batch[k] == log_likelihood(m, "source", X[k]) for k in range(17))


def test_gradient_finite_differences():
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 20:
        d, H, N = int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(1, 4))
        m = random_model(rng, d=d, H=H, N=N)
        batch = rng.normal(size=(int(rng.integers(1, 6)), d))
        which = ("source", "target")[checked % 2]
        if not safe_for_fd(m, which, batch):
            continue
        assert fd_check(m, which, batch) <= 1e-4
        checked += 1


def test_head_isolation():
    rng = np.random.default_rng(7)
    m = random_model(rng, d=3, H=4, N=2)
    batch = rng.normal(size=(8, 3))
    g = log_likelihood_grad(m, "target", batch)
    assert all(np.all(a == 0.0) for a in g.source_head.arrays().values())
    assert any(np.any(a != 0.0) for a in g.target_head.arrays().values())
    g = log_likelihood_grad(m, "source", batch)
    assert all(np.all(a == 0.0) for a in g.target_head.arrays().values())


def test_mean_bias_gradient_zero_model():
    d, H, N = 3, 4, 2
    m = KrdaModel(d, H, N, Backbone(np.zeros(H), np.zeros((H, d))), DomainHead.zeros(d, H, N),
                  DomainHead.zeros(d, H, N), None)
    X = np.random.default_rng(8).normal(size=(10, d))
    g = log_likelihood_grad(m, "source", X)
    # d/dmu of log N(x; mu, 1) at mu=0 is x; responsibilities are 1/N per component,
    # and every factor shares the same bias, so the sum over factors appears
    expected = X.sum(axis=1).mean() / N
    assert np.allclose(g.source_head.mu_bias, expected, atol=1e-15)


def test_mean_bias_gradient_symmetric_batch():
    m = zero_head_model(d=2, H=4, N=3, seed=9)
    x = np.random.default_rng(9).normal(size=(6, 2))
    m.backbone.W[:] = 0.0
    g = log_likelihood_grad(m, "source", np.vstack([x, -x]))
    assert np.allclose(g.source_head.mu_bias, 0.0, atol=1e-15)


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    m = random_model(rng, d=3, H=5, N=2)
    m.standardizer = Standardizer(rng.normal(size=3), rng.uniform(0.5, 2, 3))
    X = rng.normal(size=(20, 3))
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert np.array_equal(log_likelihood(back, "source", X), log_likelihood(m, "source", X))
    assert np.array_equal(log_likelihood(back, "target", X), log_likelihood(m, "target", X))
    assert dumps(back) == dumps(m)
    assert np.array_equal(back.standardizer.mean, m.standardizer.mean)
    doc = to_dict(m)
    assert doc["format_version"] == 1
    assert from_dict(doc).d == 3


def test_sample_zero_heads_standard_normal():
    m = zero_head_model(d=3, H=4, N=2, seed=11)
    x = sample(m, "source", np.random.default_rng(11), n=10_000)
    assert np.all(np.abs(x.mean(axis=0)) <= 0.04)
    assert np.all(np.abs(x.std(axis=0) - 1.0) <= 0.04)
    assert sample(m, "source", np.random.default_rng(0)).shape == (3,)


def test_sample_floored_sigma():
    m = zero_head_model(d=2, H=4, N=1, seed=12)
    for head in (m.source_head,):
        head.logvar_bias[:] = -200.0
        head.mu_bias[:] = 0.75
    x = sample(m, "source", np.random.default_rng(12), n=50)
    assert np.allclose(x, 0.75, atol=1e-5)


def test_sample_reproducible():
    m = KrdaModel.init(2, H=6, N=2, seed=13)
    a = sample(m, "target", np.random.default_rng(1), n=30)
    b = sample(m, "target", np.random.default_rng(1), n=30)
    assert np.array_equal(a, b)


@pytest.mark.slow
def test_trained_moons_sample_cloud():
    # 2000 training rows, so the fit's own sampling error sits well below the threshold
    src = gen_moons(MoonsSpec(2000, 0.1, 0.0, 21))
    tgt = gen_moons(MoonsSpec(2000, 0.1, 0.0, 22))
    model = fit_joint(src, tgt, cfg=TrainConfig(epochs=300, seed=23))
    held = gen_moons(MoonsSpec(5000, 0.1, 0.0, 99))
    z = sample(model, "source", np.random.default_rng(14), n=5000)
    x = model.standardizer.invert(z)
    for j in range(2):
        assert stats.ks_2samp(x[:, j], held.features[:, j]).statistic <= 0.05
