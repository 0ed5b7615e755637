import numpy as np
import pytest

from amclab.nn import TrainConfig, TrainingDiverged, build_network, fit
from amclab.nn.layers import LayerSpec, dense
from amclab.nn.training import evaluate_loss
from helpers import onehot


def separable_toy(n=120, seed=0):
    """Two well-separated Gaussian blobs shaped as (n, 4, 2) matrices."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    x = rng.standard_normal((n, 4, 2)) * 0.3 + (2.0 * y - 1.0)[:, None, None]
    return x.astype(np.float32), onehot(y, 2)


def toy_net(seed=0):
    specs = [LayerSpec("flatten"), dense(8), LayerSpec("relu"),
             dense(2), LayerSpec("softmax")]
    return build_network(specs, (4, 2), seed=seed)


class TestFit:
    def test_separable_toy_reaches_full_train_accuracy(self):
        x, y = separable_toy()
        net = toy_net()
        fit(net, x, y, x, y, TrainConfig(max_epochs=200, patience=200,
                                         batch_size=16))
        pred = np.argmax(net.forward(x).data, axis=1)
        assert np.mean(pred == np.argmax(y, axis=1)) == 1.0

    def test_patience_zero_stops_at_first_plateau(self):
        x, y = separable_toy(40)
        net = toy_net()
        result = fit(net, x, y, x, y, TrainConfig(max_epochs=500, patience=0))
        # stopped as soon as one epoch failed to improve
        assert result.epochs == result.best_epoch + 1 or result.epochs == 500

    def test_determinism(self):
        x, y = separable_toy(60)
        cfg = TrainConfig(max_epochs=12, patience=12, seed=5)
        net_a, net_b = toy_net(seed=5), toy_net(seed=5)
        fit(net_a, x, y, x, y, cfg)
        fit(net_b, x, y, x, y, cfg)
        np.testing.assert_array_equal(net_a.get_flat_params(),
                                      net_b.get_flat_params())

    def test_divergence_raises(self):
        x, y = separable_toy(40)
        x[0, 0, 0] = np.nan
        with pytest.raises(TrainingDiverged):
            fit(toy_net(), x, y, x, y, TrainConfig(max_epochs=5))

    def test_best_parameters_restored(self):
        x, y = separable_toy(80)
        xv, yv = separable_toy(40, seed=1)
        net = toy_net()
        result = fit(net, x, y, xv, yv, TrainConfig(max_epochs=40, patience=5))
        final_val = evaluate_loss(net, xv.astype(net.dtype), yv)
        assert abs(final_val - result.best_val_loss) < 1e-6

    def test_curve_records_every_epoch(self):
        x, y = separable_toy(40)
        result = fit(toy_net(), x, y, x, y,
                     TrainConfig(max_epochs=8, patience=8))
        assert len(result.curve) == result.epochs
        for entry in result.curve:
            assert {"epoch", "train_loss", "val_loss", "lr"} <= entry.keys()

    def test_lr_schedule_halves_and_floors(self):
        # pure-noise labels: validation loss plateaus, LR must decay to floor
        rng = np.random.default_rng(0)
        x = rng.standard_normal((60, 4, 2)).astype(np.float32)
        y = onehot(rng.integers(0, 2, 60), 2)
        xv = rng.standard_normal((30, 4, 2)).astype(np.float32)
        yv = onehot(rng.integers(0, 2, 30), 2)
        cfg = TrainConfig(max_epochs=80, patience=80, lr=1e-3,
                          lr_patience=2, lr_floor=1e-5)
        result = fit(toy_net(), x, y, xv, yv, cfg)
        lrs = [e["lr"] for e in result.curve]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))
        assert min(lrs) >= cfg.lr_floor
        assert min(lrs) < cfg.lr

    def test_frozen_subset_training(self):
        x, y = separable_toy(40)
        net = toy_net()
        first_layer_params = net.layers[1].params()
        frozen_before = [p.data.copy() for p in first_layer_params]
        head = [p for layer in net.layers[2:] for p in layer.params()]
        fit(net, x, y, x, y, TrainConfig(max_epochs=5, patience=5),
            params=head)
        for before, p in zip(frozen_before, first_layer_params):
            np.testing.assert_array_equal(before, p.data)

    def test_unknown_loss_rejected(self):
        x, y = separable_toy(20)
        with pytest.raises(ValueError):
            fit(toy_net(), x, y, x, y, TrainConfig(loss="hinge"))

    def test_mse_loss_trains_autoencoder_style(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((50, 4, 2)).astype(np.float32)
        target = x.reshape(50, -1)
        specs = [LayerSpec("flatten"), dense(16), LayerSpec("relu"), dense(8)]
        net = build_network(specs, (4, 2), seed=0)
        result = fit(net, x, target, x, target,
                     TrainConfig(max_epochs=30, patience=30, loss="mse"))
        assert result.curve[-1]["train_loss"] < result.curve[0]["train_loss"]
