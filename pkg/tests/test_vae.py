import json

import numpy as np
import pytest

from contourvae.errors import CheckpointError, NumericalError
from contourvae.ingest import NormalizationParams, from_features, synth_ensemble, to_features
from contourvae.metrics import reconstruction_error
from contourvae.neural import Layer, MlpParams
from contourvae.vae import (
    TrainConfig,
    _kl,
    build_model,
    decode,
    decode_array,
    elbo_loss,
    encode,
    load_model,
    loss_and_grads,
    model_from_json,
    model_to_json,
    reparameterize,
    save_model,
    train,
)

SMALL = TrainConfig(epochs=60, k=3, s=8, hidden=(10, 6), seed=11)


def small_model(seed=0, cfg=SMALL):
    m = build_model(cfg, rng=np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1000)
    arrays = [a + 0.2 * rng.standard_normal(a.shape) for a in m.encoder.arrays() + m.decoder.arrays()]
    ne = len(m.encoder.layers) * 2
    return type(m)(m.encoder.with_arrays(arrays[:ne]), m.decoder.with_arrays(arrays[ne:]),
                   m.k, m.s, m.m, m.norm, m.closed, m.seed, m.beta)


def zero_heads(model):
    last = model.encoder.layers[-1]
    layers = model.encoder.layers[:-1] + (
        Layer(np.zeros_like(last.weight), np.zeros_like(last.bias), last.activation),)
    return type(model)(MlpParams(layers), model.decoder, model.k, model.s, model.m,
                       model.norm, model.closed, model.seed, model.beta)


class TestEncodeDecode:
    def test_zero_heads_give_standard_posterior(self, rng):
        m = zero_heads(small_model())
        mu, lv = encode(m, rng.standard_normal(16))
        np.testing.assert_array_equal(mu, np.zeros(3))
        np.testing.assert_array_equal(lv, np.zeros(3))

    def test_deterministic(self, rng):
        m = small_model()
        x = rng.standard_normal(16)
        a, b = encode(m, x), encode(m, x)
        assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
        z = rng.standard_normal(3)
        assert decode_array(m, z).tobytes() == decode_array(m, z).tobytes()

    def test_decode_shapes(self, rng):
        m = small_model()
        assert decode(m, np.zeros(3)).values.shape == (16,)
        assert len(decode(m, rng.standard_normal((4, 3)))) == 4

    def test_wrong_dims(self):
        m = small_model()
        with pytest.raises(ValueError):
            encode(m, np.zeros(15))
        with pytest.raises(ValueError):
            decode(m, np.zeros(4))


class TestReparameterize:
    def test_zero_noise_gives_mean(self):
        np.testing.assert_array_equal(reparameterize([1.0, -2.0], [0.3, 5.0], [0.0, 0.0]), [1.0, -2.0])

    def test_unit_posterior_gives_noise(self):
        np.testing.assert_array_equal(reparameterize([0.0, 0.0], [0.0, 0.0], [0.7, -1.3]), [0.7, -1.3])

    def test_monte_carlo_moments(self, rng):
        mu = np.array([0.5, -1.0, 2.0])
        lv = np.array([0.0, np.log(4.0), np.log(0.25)])
        z = reparameterize(np.tile(mu, (100_000, 1)), np.tile(lv, (100_000, 1)),
                           rng.standard_normal((100_000, 3)))
        np.testing.assert_allclose(np.cov(z.T), np.diag(np.exp(lv)), atol=0.03 * np.exp(lv).max())
        np.testing.assert_allclose(np.var(z, axis=0), np.exp(lv), rtol=0.03)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            reparameterize(np.zeros(2), np.zeros(3), np.zeros(2))


class TestKl:
    def test_standard_posterior_is_zero(self):
        assert _kl(np.zeros(5), np.zeros(5)) == 0.0

    def test_unit_mean_shift(self):
        assert _kl(np.array([1.0]), np.array([0.0])) == 0.5

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            k = int(rng.integers(1, 10))
            assert _kl(rng.normal(0, 3, k), rng.normal(0, 3, k)) >= 0

    def test_monte_carlo(self):
        # E_q[log q - log p] estimated by sampling
        rng = np.random.default_rng(1)
        for _ in range(10):
            k = int(rng.integers(1, 9))
            mu, lv = rng.normal(0, 1, k), rng.normal(0, 0.7, k)
            z = mu + np.exp(0.5 * lv) * rng.standard_normal((400_000, k))
            logq = -0.5 * np.sum((z - mu) ** 2 / np.exp(lv) + lv, axis=1)
            logp = -0.5 * np.sum(z * z, axis=1)
            mc = float(np.mean(logq - logp))
            assert abs(mc - _kl(mu, lv)) <= 0.02 * _kl(mu, lv) + 5e-3


class TestLoss:
    def test_breakdown_consistent(self, rng):
        m = small_model()
        x, e = rng.standard_normal((5, 16)), rng.standard_normal((5, 3))
        lb = elbo_loss(m, x, e, beta=0.3)
        assert lb.total == pytest.approx(lb.reconstruction + 0.3 * lb.kl, rel=1e-12)

    def test_matches_loss_and_grads(self, rng):
        m = small_model()
        x, e = rng.standard_normal((5, 16)), rng.standard_normal((5, 3))
        assert loss_and_grads(m, x, e, 1.0)[0].total == pytest.approx(elbo_loss(m, x, e, 1.0).total)

    def test_non_finite_member_named(self, rng):
        x = rng.standard_normal((3, 16))
        x[2, 0] = np.inf
        with pytest.raises(NumericalError, match="member 2"):
            elbo_loss(small_model(), x, np.zeros((3, 3)))

    def test_gradient_finite_differences(self):
        for trial in range(10):
            rng = np.random.default_rng(trial)
            m = small_model(trial)
            x, e = rng.standard_normal((4, 16)), rng.standard_normal((4, 3))
            beta = float(rng.uniform(0, 2))
            _, genc, gdec = loss_and_grads(m, x, e, beta)
            arrays = m.encoder.arrays() + m.decoder.arrays()
            ne = len(genc)
            h = 1e-5
            for i, g in enumerate(genc + gdec):
                for _ in range(5):
                    idx = tuple(int(rng.integers(0, d)) for d in g.shape)
                    vals = []
                    for sgn in (1, -1):
                        b = [a.copy() for a in arrays]
                        b[i][idx] += sgn * h
                        mm = type(m)(m.encoder.with_arrays(b[:ne]), m.decoder.with_arrays(b[ne:]),
                                     m.k, m.s)
                        vals.append(elbo_loss(mm, x, e, beta).total)
                    fd = (vals[0] - vals[1]) / (2 * h)
                    rel = abs(g[idx] - fd) / max(abs(g[idx]), abs(fd), 1e-6)
                    assert rel < 1e-4, (trial, i, idx, g[idx], fd)


class TestTraining:
    def test_bit_identical(self, rng):
        x = rng.standard_normal((6, 16))
        a, ha = train(x, SMALL)
        b, hb = train(x, SMALL)
        assert model_to_json(a) == model_to_json(b)
        assert [h.total for h in ha] == [h.total for h in hb]

    def test_seed_changes_result(self, rng):
        x = rng.standard_normal((6, 16))
        a, _ = train(x, SMALL)
        b, _ = train(x, TrainConfig(epochs=60, k=3, s=8, hidden=(10, 6), seed=12))
        assert model_to_json(a) != model_to_json(b)

    def test_warmup_schedule(self):
        cfg = TrainConfig(epochs=100, beta=2.0, warmup=0.1)
        assert cfg.beta_at(0) == 0.0
        assert cfg.beta_at(5) == pytest.approx(1.0)
        assert cfg.beta_at(10) == 2.0 and cfg.beta_at(99) == 2.0
        assert TrainConfig(warmup=0.0, beta=0.5).beta_at(0) == 0.5

    def test_invalid_config(self):
        for kw in ({"k": 0}, {"epochs": 0}, {"lr": 0.0}, {"beta": -1.0}, {"warmup": 1.5}):
            with pytest.raises(ValueError):
                TrainConfig(**kw)

    def test_feature_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            train(rng.standard_normal((5, 14)), SMALL)

    def test_divergence_reports_epoch(self, rng):
        x = rng.standard_normal((4, 16)) * 1e200
        with pytest.raises(NumericalError) as info:
            train(x, SMALL)
        assert info.value.epoch == 0

    def test_loss_decreases(self, circle_model):
        _, history, _ = circle_model
        tail = history[-len(history) // 10:]
        assert np.mean([h.total for h in tail]) < history[0].total


class TestCheckpoint:
    def test_round_trip_bytes(self, tiny_model, tmp_path):
        model, _ = tiny_model
        save_model(model, tmp_path / "a.json")
        save_model(load_model(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_decode_identical_after_reload(self, tiny_model, rng):
        model, _ = tiny_model
        back = model_from_json(model_to_json(model))
        z = rng.standard_normal((5, model.k))
        assert decode_array(model, z).tobytes() == decode_array(back, z).tobytes()
        assert back.norm == model.norm and back.closed == model.closed

    def test_truncated(self, tiny_model):
        text = model_to_json(tiny_model[0])
        with pytest.raises(CheckpointError):
            model_from_json(text[: len(text) // 2])

    def test_version_mismatch(self, tiny_model):
        doc = json.loads(model_to_json(tiny_model[0]))
        doc["version"] = 99
        with pytest.raises(CheckpointError, match="version"):
            model_from_json(json.dumps(doc))

    def test_missing_field(self, tiny_model):
        doc = json.loads(model_to_json(tiny_model[0]))
        del doc["decoder"]
        with pytest.raises(CheckpointError):
            model_from_json(json.dumps(doc))

    def test_foreign_json(self):
        with pytest.raises(CheckpointError):
            model_from_json('{"hello": 1}')


class TestTrainedCircles:
    def test_reconstruction_within_five_percent(self, circle_model, circles):
        model = circle_model[0]
        err = reconstruction_error(model, circles)
        assert err / circles.diagonal < 0.05

    def test_pooled_mean_near_origin(self, circle_model):
        model, _, feats = circle_model
        mu, _ = encode(model, feats)
        assert np.linalg.norm(mu.mean(axis=0)) < 0.5 * np.sqrt(model.k)

    def test_aggregate_posterior_scale(self, circle_model):
        # per-dimension variance of the aggregate posterior, var(mu) + E[sigma^2]
        model, _, feats = circle_model
        mu, lv = encode(model, feats)
        agg = mu.var(axis=0) + np.exp(lv).mean(axis=0)
        assert np.all((agg >= 0.1) & (agg <= 3.0)), agg

    def test_interpolation_continuous(self, circle_model):
        model, _, feats = circle_model
        mu, _ = encode(model, feats[:2])
        ts = np.linspace(0, 1, 201)
        dec = decode_array(model, (1 - ts)[:, None] * mu[0] + ts[:, None] * mu[1])
        steps = np.linalg.norm(np.diff(dec, axis=0), axis=1)
        assert steps.max() < 0.05 * np.linalg.norm(dec[0] - dec[-1]) + 1e-9

    def test_decoded_polylines_in_world_space(self, circle_model, circles):
        model = circle_model[0]
        poly = from_features(decode(model, np.zeros(model.k)), model.norm)
        x0, y0, x1, y1 = circles.domain_bounds
        assert np.all((poly.points >= [x0, y0]) & (poly.points <= [x1, y1]))


def test_normalization_carried(rng):
    ens = synth_ensemble("perturbed-circle", 6, 1, radius=3.0)
    feats, norm = to_features(ens, 8)
    model, _ = train(feats, SMALL, norm=norm)
    assert model.norm == norm and model.closed
    assert isinstance(norm, NormalizationParams)
