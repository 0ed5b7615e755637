import numpy as np
import pytest

from amclab import architectures
from amclab.nn.layers import (
    LayerSpec,
    build_network,
    conv,
    dense,
    drop,
    infer_shapes,
    lstm_layer,
)


class TestLayerSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            LayerSpec("pooling")

    def test_dropout_rate_validated(self):
        with pytest.raises(ValueError):
            drop(1.0)
        with pytest.raises(ValueError):
            drop(-0.1)

    def test_json_roundtrip(self):
        specs = [dense(16), conv(4, 2, 5), lstm_layer(8, pool="mean"),
                 drop(0.2), LayerSpec("relu")]
        for spec in specs:
            assert LayerSpec.from_json(spec.to_json()) == spec


class TestInferShapes:
    @pytest.mark.parametrize("arch", architectures.ARCH_IDS)
    @pytest.mark.parametrize("length", [64, 128])
    @pytest.mark.parametrize("classes", [2, 4, 8])
    def test_all_stacks_compose(self, arch, length, classes):
        specs = architectures.build(arch, length, classes, 1.0)
        shapes = infer_shapes(specs, (length, 2))
        if arch == "Autoencoder":
            assert shapes[-1] == (2 * length,)
        else:
            assert shapes[-1] == (classes,)

    def test_lstm_needs_sequence(self):
        with pytest.raises(ValueError):
            infer_shapes([LayerSpec("flatten"), lstm_layer(4)], (16, 2))

    def test_dense_needs_flat(self):
        with pytest.raises(ValueError):
            infer_shapes([dense(4)], (16, 2))

    def test_kernel_too_large(self):
        with pytest.raises(ValueError):
            infer_shapes([LayerSpec("iq_to_image"), conv(4, 3, 3)], (16, 2))

    def test_iq_to_image_shape_checked(self):
        with pytest.raises(ValueError):
            infer_shapes([LayerSpec("iq_to_image")], (16, 3))


class TestNetwork:
    def test_build_deterministic(self):
        specs = architectures.build("CNN", 64, 4, 0.1)
        a = build_network(specs, (64, 2), seed=11)
        b = build_network(specs, (64, 2), seed=11)
        np.testing.assert_array_equal(a.get_flat_params(), b.get_flat_params())

    def test_different_seeds_differ(self):
        specs = architectures.build("FCNN", 64, 4, 0.1)
        a = build_network(specs, (64, 2), seed=0)
        b = build_network(specs, (64, 2), seed=1)
        assert not np.array_equal(a.get_flat_params(), b.get_flat_params())

    def test_flat_params_roundtrip(self, rng):
        specs = architectures.build("CRNN", 64, 4, 0.05)
        net = build_network(specs, (64, 2), seed=0)
        flat = rng.standard_normal(net.num_params()).astype(np.float32)
        net.set_flat_params(flat)
        np.testing.assert_array_equal(net.get_flat_params(), flat)

    def test_flat_params_size_checked(self):
        specs = architectures.build("FCNN", 64, 4, 0.1)
        net = build_network(specs, (64, 2), seed=0)
        with pytest.raises(ValueError):
            net.set_flat_params(np.zeros(net.num_params() + 1, dtype=np.float32))

    @pytest.mark.parametrize("arch", ["FCNN", "CNN", "RNN", "CRNN",
                                      "SurrogateCNN"])
    def test_forward_yields_distribution(self, arch, rng):
        specs = architectures.build(arch, 64, 4, 0.1)
        net = build_network(specs, (64, 2), seed=0)
        out = net.forward(rng.standard_normal((3, 64, 2))).data
        assert out.shape == (3, 4)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-5)
        assert np.all(out >= 0)

    def test_inference_deterministic_with_dropout_layers(self, rng):
        specs = architectures.build("CNN", 64, 4, 0.1)
        net = build_network(specs, (64, 2), seed=0)
        x = rng.standard_normal((2, 64, 2))
        a = net.forward(x, train=False).data
        b = net.forward(x, train=False).data
        np.testing.assert_array_equal(a, b)

    def test_training_mode_dropout_varies(self, rng):
        specs = architectures.build("FCNN", 64, 4, 0.25)
        net = build_network(specs, (64, 2), seed=0)
        x = rng.standard_normal((2, 64, 2))
        drop_rng = np.random.default_rng(0)
        a = net.forward(x, train=True, rng=drop_rng).data
        b = net.forward(x, train=True, rng=drop_rng).data
        assert not np.array_equal(a, b)
