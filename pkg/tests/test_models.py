import math

import numpy as np
import pytest

from locfit.data import NormalizationSpec
from locfit.errors import ChecksumError, ConfigError, DomainError, SchemaError
from locfit.models import (LocModel, SimoConfig, SisoConfig,
                           build_simo, build_siso, load_model, predict_simo,
                           predict_siso, save_model, simo_loss)
from locfit.nn import forward
from locfit.sdae import PretrainedLayer, SdaeConfig


def fake_encoders(dims, n_ap, seed=0):
    """Untrained stand-ins with the right shapes for builder tests."""
    rng = np.random.default_rng(seed)
    layers = []
    prev = n_ap
    for d in dims:
        layers.append(PretrainedLayer(rng.normal(scale=0.1, size=(d, prev)),
                                      np.zeros(d), 1.0, 0.5))
        prev = d
    return layers


def default_norm():
    return NormalizationSpec(coord_center=np.array([10.0, 20.0]), coord_scale=5.0)


class TestBuildSimo:
    def test_paper_scale_chain(self):
        cfg = SimoConfig()
        model = build_simo(cfg, fake_encoders((1024, 1024, 1024), 992), seed=1)
        dims = [(ls.in_dim, ls.out_dim) for ls in model.net.all_layers]
        assert dims == [(992, 1024), (1024, 1024), (1024, 1024), (1024, 1024),
                        (1024, 256), (256, 5), (1024, 256), (256, 2)]
        assert model.net.heads[0][-1].out_dim == 5
        assert model.net.heads[1][-1].out_dim == 2

    def test_closed_form_param_count(self):
        cfg = SimoConfig()
        n_ap = 992
        model = build_simo(cfg, fake_encoders((1024, 1024, 1024), n_ap), seed=1)
        expected = ((n_ap + 1) * 1024            # encoder 1
                    + (1024 + 1) * 1024 * 2      # encoders 2, 3
                    + (1024 + 1) * 1024          # common hidden
                    + (1024 + 1) * 256 + (256 + 1) * 5    # floor branch
                    + (1024 + 1) * 256 + (256 + 1) * 2)   # coordinate branch
        assert model.params.n_params == expected

    def test_untrained_probs_sum_to_one(self):
        cfg = SimoConfig(sdae=SdaeConfig(hidden_dims=(8,)), common_hidden=8,
                         floor_branch_hidden=4, coord_branch_hidden=4)
        model = build_simo(cfg, fake_encoders((8,), 6), seed=2)
        outs, _ = forward(model.params, model.net,
                          np.random.default_rng(0).random((7, 6)))
        assert outs[0].sum(axis=1) == pytest.approx(np.ones(7))

    def test_activation_and_dropout_layout(self):
        cfg = SimoConfig(sdae=SdaeConfig(hidden_dims=(8, 8)), common_hidden=8,
                         floor_branch_hidden=4, coord_branch_hidden=4)
        model = build_simo(cfg, fake_encoders((8, 8), 6), seed=0)
        acts = [ls.activation for ls in model.net.all_layers]
        drops = [ls.dropout_rate for ls in model.net.all_layers]
        assert acts == ["sigmoid", "sigmoid", "relu", "relu", "softmax",
                        "relu", "linear"]
        assert drops == [0.0, 0.0, 0.25, 0.25, 0.0, 0.25, 0.0]

    def test_pretrained_weights_copied_not_shared(self):
        encs = fake_encoders((8,), 6)
        cfg = SimoConfig(sdae=SdaeConfig(hidden_dims=(8,)), common_hidden=8,
                         floor_branch_hidden=4, coord_branch_hidden=4)
        model = build_simo(cfg, encs, seed=0)
        assert np.array_equal(model.params.layers[0][0], encs[0].weight)
        model.params.layers[0][0][0, 0] += 1.0
        assert model.params.layers[0][0][0, 0] != encs[0].weight[0, 0]

    def test_encoder_shape_mismatch(self):
        cfg = SimoConfig(sdae=SdaeConfig(hidden_dims=(8, 8)))
        bad = fake_encoders((8,), 6) + fake_encoders((8,), 99)
        with pytest.raises(ConfigError):
            build_simo(cfg, bad, seed=0)

    def test_loss_weight_validation(self):
        with pytest.raises(ConfigError):
            SimoConfig(floor_loss_weight=-1.0)
        with pytest.raises(ConfigError):
            SimoConfig(floor_loss_weight=0.0, coord_loss_weight=0.0)


class TestBuildSiso:
    def test_output_width_three(self):
        model = build_siso(SisoConfig(), fake_encoders((1024, 1024, 1024), 992),
                           seed=1)
        assert model.net.heads[0][-1].out_dim == 3

    def test_paper_scale_chain(self):
        model = build_siso(SisoConfig(), fake_encoders((1024, 1024, 1024), 992),
                           seed=1)
        dims = [(ls.in_dim, ls.out_dim) for ls in model.net.all_layers]
        assert dims == [(992, 1024), (1024, 1024), (1024, 1024), (1024, 1024),
                        (1024, 3)]

    def test_untrained_output_finite(self):
        cfg = SisoConfig(sdae=SdaeConfig(hidden_dims=(8,)), hidden=8)
        model = build_siso(cfg, fake_encoders((8,), 6), seed=3)
        outs, _ = forward(model.params, model.net,
                          np.random.default_rng(1).random((4, 6)))
        assert np.all(np.isfinite(outs[0]))


class TestSimoLoss:
    def test_perfect_predictions(self):
        probs = np.array([[1.0, 0.0], [0.0, 1.0]])
        coords = np.array([[0.5, 0.5], [1.0, -1.0]])
        total, fp, cp = simo_loss(probs, probs, coords, coords, (1.0, 0.8))
        assert total == 0.0 and fp == 0.0 and cp == 0.0

    def test_zero_coord_weight_is_pure_cce(self):
        probs = np.array([[0.5, 0.5]])
        one_hot = np.array([[1.0, 0.0]])
        total, fp, _cp = simo_loss(probs, one_hot, np.zeros((1, 2)),
                                   np.ones((1, 2)), (1.0, 0.0))
        assert total == fp == pytest.approx(math.log(2.0))

    def test_weighted_combination(self):
        # CCE = ln 2, MSE = 1, weights (1.0, 0.8): total = 1.4931...
        probs = np.array([[0.5, 0.5]])
        one_hot = np.array([[1.0, 0.0]])
        total, _, _ = simo_loss(probs, one_hot, np.zeros((1, 2)),
                                np.ones((1, 2)), (1.0, 0.8))
        assert total == pytest.approx(math.log(2.0) + 0.8, abs=1e-4)
        assert total == pytest.approx(1.4931, abs=1e-4)

    def test_linear_in_each_weight(self):
        rng = np.random.default_rng(5)
        probs = np.array([[0.25, 0.75], [0.6, 0.4]])
        one_hot = np.array([[0.0, 1.0], [1.0, 0.0]])
        coords = rng.normal(size=(2, 2))
        targets = rng.normal(size=(2, 2))
        t1, _, _ = simo_loss(probs, one_hot, coords, targets, (1.0, 0.3))
        t2, _, _ = simo_loss(probs, one_hot, coords, targets, (1.0, 0.6))
        t3, _, _ = simo_loss(probs, one_hot, coords, targets, (1.0, 0.9))
        assert t3 - t2 == pytest.approx(t2 - t1)
        s1, _, _ = simo_loss(probs, one_hot, coords, targets, (0.5, 0.3))
        s2, _, _ = simo_loss(probs, one_hot, coords, targets, (1.0, 0.3))
        s3, _, _ = simo_loss(probs, one_hot, coords, targets, (1.5, 0.3))
        assert s3 - s2 == pytest.approx(s2 - s1)


def crafted_simo(probs, coords_normalized, n_floors=5):
    """Single-layer heads whose biases produce exact outputs on zero input."""
    from locfit.nn import LayerSpec, ModelParams, NetworkSpec

    logits = np.log(np.maximum(probs, 1e-300))
    net = NetworkSpec(trunk=(), heads=((LayerSpec(4, n_floors, "softmax"),),
                                       (LayerSpec(4, 2, "linear"),)))
    params = ModelParams([(np.zeros((n_floors, 4)), logits),
                          (np.zeros((2, 4)), np.asarray(coords_normalized))])
    return LocModel(kind="simo", net=net, params=params, n_floors=n_floors,
                    norm=default_norm())


def crafted_siso(xyz_normalized, n_floors=5):
    from locfit.nn import LayerSpec, ModelParams, NetworkSpec

    net = NetworkSpec(trunk=(), heads=((LayerSpec(4, 3, "linear"),),))
    params = ModelParams([(np.zeros((3, 4)), np.asarray(xyz_normalized))])
    return LocModel(kind="siso", net=net, params=params, n_floors=n_floors,
                    norm=default_norm())


class TestPredictSimo:
    def test_argmax_floor_and_z(self):
        model = crafted_simo([0.1, 0.6, 0.1, 0.1, 0.1], [0.0, 0.0])
        pred = predict_simo(model, np.zeros(4))
        assert pred.floor == 1
        assert pred.z == pytest.approx(3.7)

    def test_tie_goes_to_lowest_floor(self):
        model = crafted_simo([0.5, 0.5, 0.0, 0.0, 0.0], [0.0, 0.0])
        pred = predict_simo(model, np.zeros(4))
        assert pred.floor == 0

    def test_zero_output_decodes_to_center(self):
        model = crafted_simo([0.2] * 5, [0.0, 0.0])
        pred = predict_simo(model, np.zeros(4))
        assert (pred.x, pred.y) == pytest.approx((10.0, 20.0))

    def test_z_always_on_floor_grid(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            probs = rng.dirichlet(np.ones(5))
            model = crafted_simo(probs, rng.normal(size=2))
            pred = predict_simo(model, np.zeros(4))
            assert min(abs(pred.z - v) for v in (0.0, 3.7, 7.4, 11.1, 14.8)) < 1e-12

    def test_argmax_invariant_under_logit_shift(self):
        probs = np.array([0.15, 0.5, 0.2, 0.1, 0.05])
        model = crafted_simo(probs, [0.0, 0.0])
        base = predict_simo(model, np.zeros(4)).floor
        # shifting all logits by a constant leaves the decoded floor alone
        model.params.layers[0] = (model.params.layers[0][0],
                                  model.params.layers[0][1] + 42.0)
        assert predict_simo(model, np.zeros(4)).floor == base

    def test_probs_sum_to_one(self):
        model = crafted_simo([0.3, 0.3, 0.2, 0.1, 0.1], [0.5, -0.5])
        pred = predict_simo(model, np.zeros(4))
        assert pred.floor_probs.sum() == pytest.approx(1.0)
        assert pred.floor == int(np.argmax(pred.floor_probs))


class TestPredictSiso:
    def test_floor_from_nearest_multiple(self):
        # z = 7.3 m: nearest floor multiple of 3.7 is floor 2
        model = crafted_siso([0.0, 0.0, 7.3 / 5.0])
        assert predict_siso(model, np.zeros(4)).floor == 2

    def test_zero_z(self):
        model = crafted_siso([0.0, 0.0, 0.0])
        assert predict_siso(model, np.zeros(4)).floor == 0

    def test_clamped_high_z(self):
        # round(16 / 3.7) = 4: top floor
        model = crafted_siso([0.0, 0.0, 16.0 / 5.0])
        pred = predict_siso(model, np.zeros(4))
        assert pred.floor == 4
        assert pred.z == pytest.approx(16.0)

    def test_position_denormalized(self):
        model = crafted_siso([1.0, -1.0, 0.0])
        pred = predict_siso(model, np.zeros(4))
        assert (pred.x, pred.y) == pytest.approx((15.0, 15.0))


class TestPersistence:
    def _small_model(self):
        cfg = SimoConfig(sdae=SdaeConfig(hidden_dims=(8,)), common_hidden=8,
                         floor_branch_hidden=4, coord_branch_hidden=4)
        model = build_simo(cfg, fake_encoders((8,), 6, seed=3), seed=7)
        model.norm = default_norm()
        return model

    def test_round_trip_outputs_within_1e6(self, tmp_path):
        model = self._small_model()
        save_model(model, tmp_path / "m")
        loaded = load_model(tmp_path / "m")
        x = np.random.default_rng(0).random((9, 6))
        orig, _ = forward(model.params, model.net, x)
        back, _ = forward(loaded.params, loaded.net, x)
        for a, b in zip(orig, back):
            assert np.allclose(a, b, atol=1e-6)
        assert loaded.kind == "simo"
        assert loaded.norm.coord_center == pytest.approx([10.0, 20.0])
        assert loaded.loss_weights == model.loss_weights

    def test_truncated_blob_fails_checksum(self, tmp_path):
        model = self._small_model()
        save_model(model, tmp_path / "m")
        blob_path = tmp_path / "m" / "weights.bin"
        blob_path.write_bytes(blob_path.read_bytes()[:-8])
        with pytest.raises(ChecksumError):
            load_model(tmp_path / "m")

    def test_manifest_layer_count_mismatch(self, tmp_path):
        import json
        model = self._small_model()
        save_model(model, tmp_path / "m")
        mpath = tmp_path / "m" / "manifest.json"
        manifest = json.loads(mpath.read_text())
        manifest["trunk_len"] += 1
        mpath.write_text(json.dumps(manifest))
        with pytest.raises(SchemaError):
            load_model(tmp_path / "m")

    def test_weights_are_float32_little_endian(self, tmp_path):
        model = self._small_model()
        save_model(model, tmp_path / "m")
        blob = (tmp_path / "m" / "weights.bin").read_bytes()
        n_params = model.params.n_params
        assert len(blob) == 4 * n_params
        w0 = model.params.layers[0][0]
        first = np.frombuffer(blob[:w0.size * 4], dtype="<f4")
        assert np.allclose(first, w0.ravel().astype(np.float32))

    def test_missing_norm_round_trips_as_none(self, tmp_path):
        model = self._small_model()
        model.norm = None
        save_model(model, tmp_path / "m")
        assert load_model(tmp_path / "m").norm is None

    def test_predict_requires_norm(self):
        model = self._small_model()
        model.norm = None
        with pytest.raises(DomainError):
            predict_simo(model, np.zeros(6))
