import numpy as np
import pytest

from seldkit.features import StftConfig
from seldkit.net.checkpoint import (
    KIND_ACCDOA,
    KIND_TWO_STAGE,
    load_checkpoint,
    load_model,
    save_checkpoint,
    save_model,
)
from seldkit.net.model import NetConfig, RD3NetLite, TwoStageNet
from seldkit.net.optim import Adam, TrainConfig, learning_rate

TINY = dict(f_bins=16, stem_channels=4, growth=3, layers_per_block=2,
            n_blocks=2, freq_pool=2, gru_hidden=4)


def tiny_config(n_classes=3):
    return NetConfig(n_classes=n_classes, **TINY)


class TestShapes:
    def test_output_shape_contract(self):
        model = RD3NetLite(tiny_config(3), seed=0)
        x = np.random.default_rng(0).standard_normal((2, 7, 64, 16)).astype(np.float32)
        assert model.forward(x).shape == (2, 64, 3, 3)

    def test_channel_mismatch_rejected(self):
        model = RD3NetLite(tiny_config(), seed=0)
        with pytest.raises(ValueError):
            model.forward(np.zeros((1, 6, 8, 16), dtype=np.float32))

    def test_bin_mismatch_rejected(self):
        model = RD3NetLite(tiny_config(), seed=0)
        with pytest.raises(ValueError):
            model.forward(np.zeros((1, 7, 8, 20), dtype=np.float32))

    def test_bins_trimmed_to_pool_multiple(self):
        cfg = NetConfig(n_classes=2, f_bins=257, stem_channels=4, growth=2,
                        layers_per_block=2, n_blocks=2, freq_pool=4, gru_hidden=4)
        assert cfg.f_trimmed == 256
        assert cfg.f_out == 16

    def test_dense_connectivity_audit(self):
        cfg = tiny_config()
        model = RD3NetLite(cfg, seed=0)
        trunk = model.branch.trunk
        for b in range(cfg.n_blocks):
            block = trunk._children[f"block{b}"]
            block_in = block.in_ch
            for l in range(cfg.layers_per_block):
                conv = block._children[f"layer{l}"].conv
                assert conv.in_ch == block_in + l * cfg.growth
                assert conv.out_ch == cfg.growth
                assert conv.dilation == 2 ** l

    def test_output_bounded(self):
        model = RD3NetLite(tiny_config(), seed=1)
        x = 10 * np.random.default_rng(1).standard_normal((2, 7, 16, 16)).astype(np.float32)
        y = model.forward(x)
        assert np.abs(y).max() < 1.0

    def test_zero_input_zero_head_gives_zero(self):
        model = RD3NetLite(tiny_config(), seed=2)
        model.branch.head.params["W"][...] = 0.0
        model.branch.head.params["b"][...] = 0.0
        y = model.forward(np.zeros((2, 7, 8, 16), dtype=np.float32))
        assert np.all(y == 0.0)


class TestDeterminism:
    def test_init_is_seed_deterministic(self):
        a = RD3NetLite(tiny_config(), seed=5).state_dict()
        b = RD3NetLite(tiny_config(), seed=5).state_dict()
        assert set(a) == set(b)
        for name in a:
            assert np.array_equal(a[name], b[name]), name

    def test_different_seed_different_params(self):
        a = RD3NetLite(tiny_config(), seed=5).state_dict()
        b = RD3NetLite(tiny_config(), seed=6).state_dict()
        assert any(not np.array_equal(a[n], b[n]) for n in a)


class TestAdam:
    def test_schedule_values(self):
        cfg = TrainConfig()
        assert learning_rate(cfg, 0) == pytest.approx(1e-3)
        assert learning_rate(cfg, 19999) == pytest.approx(1e-3)
        assert learning_rate(cfg, 20000) == pytest.approx(9e-4)
        assert learning_rate(cfg, 40000) == pytest.approx(8.1e-4)

    def test_scaled_decay_interval(self):
        cfg = TrainConfig(decay_interval=100)
        assert learning_rate(cfg, 100) == pytest.approx(9e-4)

    def test_descends_on_quadratic(self):
        w = np.array([1.0])
        adam = Adam({"w": w}, TrainConfig(weight_decay=0.0))
        for it in range(50):
            adam.step({"w": 2.0 * w}, it)
        assert w[0] < 1.0

    def test_weight_decay_is_decoupled(self):
        cfg = TrainConfig(weight_decay=0.1)
        w = np.array([1.0])
        adam = Adam({"w": w}, cfg)
        adam.step({"w": np.array([0.0])}, 0)
        # zero gradient: only the lr * wd * w term moves the weight
        assert w[0] == pytest.approx(1.0 - cfg.lr * 0.1)


class TestCheckpoint:
    def test_raw_round_trip(self, tmp_path):
        tensors = {
            "a.W": np.arange(6, dtype=np.float32).reshape(2, 3),
            "b": np.array([1.5], dtype=np.float32),
        }
        path = tmp_path / "ckpt"
        save_checkpoint(path, "accdoa", {"net.n_classes": 3, "stft.window": "hann"}, tensors)
        ckpt = load_checkpoint(path)
        assert ckpt.kind == "accdoa"
        assert ckpt.config["net.n_classes"] == "3"
        for name, arr in tensors.items():
            np.testing.assert_array_equal(ckpt.tensors[name], arr)

    def test_model_round_trip(self, tmp_path):
        cfg = tiny_config()
        model = RD3NetLite(cfg, seed=9)
        x = np.random.default_rng(3).standard_normal((1, 7, 8, 16)).astype(np.float32)
        model.train()
        model.forward(x)  # move running statistics off init
        model.eval()
        y_ref = model.forward(x)
        path = tmp_path / "model.ckpt"
        save_model(path, KIND_ACCDOA, model, cfg, StftConfig())
        kind, loaded, net_cfg, stft_cfg, _ = load_model(path)
        assert kind == KIND_ACCDOA
        assert net_cfg == cfg
        assert stft_cfg == StftConfig()
        np.testing.assert_allclose(loaded.forward(x), y_ref, atol=1e-6)

    def test_two_stage_round_trip_has_both_branches(self, tmp_path):
        cfg = tiny_config()
        model = TwoStageNet(cfg, seed=1)
        path = tmp_path / "two.ckpt"
        save_model(path, KIND_TWO_STAGE, model, cfg, StftConfig())
        ckpt = load_checkpoint(path)
        names = set(ckpt.tensors)
        assert any(n.startswith("sed.") for n in names)
        assert any(n.startswith("doa.") for n in names)
        kind, loaded, _, _, _ = load_model(path)
        assert kind == KIND_TWO_STAGE
        x = np.random.default_rng(4).standard_normal((1, 7, 8, 16)).astype(np.float32)
        assert loaded.predict(x).shape == (1, 8, 3, 3)


class TestTwoStageSemantics:
    def test_trunk_copy_bit_identical(self):
        model = TwoStageNet(tiny_config(), seed=2)
        sed_state = model.sed.trunk.state_dict()
        doa_state = model.doa.trunk.state_dict()
        assert any(not np.array_equal(sed_state[n], doa_state[n]) for n in sed_state)
        model.copy_trunk_to_doa()
        doa_state = model.doa.trunk.state_dict()
        for name in sed_state:
            assert np.array_equal(sed_state[name], doa_state[name]), name

    def test_compose_unit_direction_and_activity_norm(self):
        model = TwoStageNet(tiny_config(n_classes=2), seed=3)
        activity = np.array([[[0.8, 0.0]]])
        doa = np.zeros((1, 1, 2, 3))
        doa[0, 0, 0] = [2.0, 0.0, 0.0]
        out = model.compose(activity, doa)
        np.testing.assert_allclose(out[0, 0, 0], [0.8, 0, 0])
        np.testing.assert_allclose(out[0, 0, 1], [0, 0, 0])
