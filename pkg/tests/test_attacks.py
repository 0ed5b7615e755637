import numpy as np
import pytest

from amclab import attacks
from amclab.attacks import (
    AttackConfig,
    apply,
    bim,
    bim_batch,
    budget_for_pnr,
    craft_batch,
    fgsm,
    fgsm_batch,
    mean_received_power,
    pnr_db,
)
from amclab.models import TrainedModel
from amclab.nn import build_network
from amclab.nn.layers import LayerSpec, dense
from amclab.signals import Domain, Split
from amclab.spectral import dft_matrix
from helpers import onehot


@pytest.fixture(scope="module")
def linear_model():
    """Flatten -> dense -> softmax with fixed weights: the input gradient has
    the closed form reshape(W (p - y))."""
    specs = [LayerSpec("flatten"), dense(4), LayerSpec("softmax")]
    net = build_network(specs, (8, 2), seed=0, dtype=np.float64)
    rng = np.random.default_rng(1)
    net.set_flat_params(rng.standard_normal(net.num_params()) * 0.5)
    return TrainedModel(arch_id="toy", network=net, input_domain=Domain.TIME,
                        class_names=["a", "b", "c", "d"])


@pytest.fixture(scope="module")
def constant_model():
    specs = [LayerSpec("flatten"), dense(4), LayerSpec("softmax")]
    net = build_network(specs, (8, 2), seed=0, dtype=np.float64)
    net.set_flat_params(np.zeros(net.num_params()))
    return TrainedModel(arch_id="const", network=net, input_domain=Domain.TIME,
                        class_names=["a", "b", "c", "d"])


def batch(rng, n=16, length=8):
    x = rng.standard_normal((n, length, 2))
    y = onehot(rng.integers(0, 4, n), 4)
    return x, y


class TestAttackConfig:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            AttackConfig("PGD", 1.0)

    def test_nonpositive_budget_rejected(self):
        with pytest.raises(ValueError):
            AttackConfig("FGSM", 0.0)

    def test_bim_alpha_default_is_tenth(self):
        cfg = AttackConfig("BIM", 2.0)
        assert cfg.alpha == pytest.approx(0.2)

    def test_bim_alpha_bounds(self):
        with pytest.raises(ValueError):
            AttackConfig("BIM", 1.0, alpha=2.0)
        with pytest.raises(ValueError):
            AttackConfig("BIM", 1.0, iterations=0)


class TestFgsm:
    def test_budget_exactness(self, linear_model, rng):
        x, y = batch(rng)
        deltas, degenerate = fgsm_batch(linear_model, x, y, p_t=0.04)
        assert not degenerate.any()
        norms_sq = np.sum(deltas**2, axis=(1, 2))
        np.testing.assert_allclose(norms_sq, 0.04, rtol=1e-9)

    def test_matches_analytic_gradient_direction(self, linear_model, rng):
        x, y = batch(rng, n=4)
        w = linear_model.network.layers[1].w.data  # (16, 4)
        probs = linear_model.predict_proba(x)
        deltas, _ = fgsm_batch(linear_model, x, y, p_t=1.0)
        for i in range(4):
            closed = (w @ (probs[i] - y[i])).reshape(8, 2)
            closed /= np.linalg.norm(closed)
            np.testing.assert_allclose(deltas[i], closed, atol=1e-9)

    def test_degenerate_zero_gradient(self, constant_model, rng):
        x, y = batch(rng, n=3)
        deltas, degenerate = fgsm_batch(constant_model, x, y, p_t=1.0)
        assert degenerate.all()
        np.testing.assert_array_equal(deltas, 0.0)

    def test_single_sample_wrapper(self, linear_model, rng):
        x, y = batch(rng, n=1)
        p = fgsm(linear_model, x[0], y[0], p_t=0.25)
        assert p.delta.shape == (8, 2)
        assert p.achieved_norm == pytest.approx(0.5, rel=1e-9)
        assert not p.degenerate
        assert p.meta["kind"] == "FGSM"
        assert p.meta["source_hash"] == linear_model.params_hash()

    def test_nonpositive_budget_rejected(self, linear_model, rng):
        x, y = batch(rng, n=1)
        with pytest.raises(ValueError):
            fgsm_batch(linear_model, x, y, p_t=-1.0)


class TestBim:
    def test_single_iteration_equals_fgsm(self, linear_model, rng):
        x, y = batch(rng)
        f, _ = fgsm_batch(linear_model, x, y, p_t=0.09)
        b, _ = bim_batch(linear_model, x, y, p_t=0.09, iterations=1)
        np.testing.assert_allclose(b, f, atol=1e-12)

    def test_budget_exactness(self, linear_model, rng):
        x, y = batch(rng)
        deltas, degenerate = bim_batch(linear_model, x, y, p_t=0.04,
                                       iterations=10)
        assert not degenerate.any()
        np.testing.assert_allclose(np.sum(deltas**2, axis=(1, 2)), 0.04,
                                   rtol=1e-9)

    def test_degenerate_freezes(self, constant_model, rng):
        x, y = batch(rng, n=2)
        deltas, degenerate = bim_batch(constant_model, x, y, p_t=1.0)
        assert degenerate.all()
        np.testing.assert_array_equal(deltas, 0.0)

    def test_craft_batch_dispatch(self, linear_model, rng):
        x, y = batch(rng, n=2)
        f, _ = craft_batch(linear_model, x, y, AttackConfig("FGSM", 0.01))
        f2, _ = fgsm_batch(linear_model, x, y, 0.01)
        np.testing.assert_array_equal(f, f2)

    def test_single_sample_wrapper(self, linear_model, rng):
        x, y = batch(rng, n=1)
        p = bim(linear_model, x[0], y[0], p_t=0.04, iterations=3)
        assert p.meta["kind"] == "BIM"
        assert p.achieved_norm == pytest.approx(0.2, rel=1e-9)


class TestApply:
    def test_zero_perturbation_identity(self, constant_model, rng):
        x, y = batch(rng, n=1)
        p = fgsm(constant_model, x[0], y[0], p_t=1.0)
        np.testing.assert_array_equal(apply(x[0], p, Domain.TIME), x[0])

    def test_apply_subtract_roundtrip(self, linear_model, rng):
        x, y = batch(rng, n=1)
        p = fgsm(linear_model, x[0], y[0], p_t=0.5)
        adv = apply(x[0], p, Domain.TIME)
        np.testing.assert_allclose(adv - p.delta, x[0], atol=1e-12)
        assert np.linalg.norm(adv - x[0]) == pytest.approx(p.achieved_norm,
                                                           rel=1e-9)

    def test_domain_mismatch_rejected(self, linear_model, rng):
        x, y = batch(rng, n=1)
        p = fgsm(linear_model, x[0], y[0], p_t=0.5)
        with pytest.raises(ValueError):
            apply(x[0], p, Domain.FREQUENCY)


class TestPnr:
    def test_eq_arithmetic_at_minus_18(self, tiny_dataset):
        # unit-energy dataset: mean power 1, so p_t = 10^(-1.8) gives a
        # -18 dB perturbation-to-signal ratio; at SNR 18 dB that is PNR 0
        p_t = 10.0 ** (-1.8)
        assert pnr_db(p_t, tiny_dataset, 18.0) == pytest.approx(0.0, abs=1e-6)

    def test_minus_28_gives_minus_10(self, tiny_dataset):
        p_t = 10.0 ** (-2.8)
        assert pnr_db(p_t, tiny_dataset, 18.0) == pytest.approx(-10.0,
                                                                abs=1e-6)

    def test_budget_roundtrip(self, tiny_dataset):
        for pnr in (-20.0, -6.0, 0.0, 4.0, 10.0):
            p_t = budget_for_pnr(pnr, tiny_dataset, 18.0)
            assert pnr_db(p_t, tiny_dataset, 18.0) == pytest.approx(
                pnr, abs=1e-9)

    def test_mean_received_power_unit_energy(self, tiny_dataset):
        assert mean_received_power(tiny_dataset) == pytest.approx(1.0,
                                                                  abs=1e-6)

    def test_nonpositive_budget_rejected(self, tiny_dataset):
        with pytest.raises(ValueError):
            pnr_db(0.0, tiny_dataset, 18.0)

    def test_empty_dataset_rejected(self, tiny_dataset):
        empty = tiny_dataset.subset(Split.TRAIN)
        empty.samples = empty.samples[:0]
        with pytest.raises(ValueError):
            mean_received_power(empty)

    def test_pnr_invariant_under_dft(self, tiny_dataset, tiny_freq_dataset,
                                     rng):
        # signal power and perturbation power both scale by the window
        # length, so the PNR number carries across domains
        pnr = -4.0
        p_time = budget_for_pnr(pnr, tiny_dataset, 18.0)
        p_freq = budget_for_pnr(pnr, tiny_freq_dataset, 18.0)
        delta_t = rng.standard_normal((128, 2))
        delta_t *= np.sqrt(p_time) / np.linalg.norm(delta_t)
        delta_f = dft_matrix(delta_t[None])[0]
        assert np.sum(delta_f**2) == pytest.approx(p_freq, rel=1e-9)


class TestLossAscent:
    def test_fgsm_increases_loss_on_most_samples(self, linear_model, rng):
        x, y = batch(rng, n=64)

        def mean_losses(xs):
            p = np.maximum(linear_model.predict_proba(xs), 1e-12)
            return -(y * np.log(p)).sum(axis=1)

        deltas, _ = fgsm_batch(linear_model, x, y, p_t=0.01)
        before = mean_losses(x)
        after = mean_losses(x + deltas)
        assert np.mean(after >= before) >= 0.9
