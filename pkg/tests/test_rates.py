"""Rate evaluation: per-user rates, weighted sums, and the reduced-problem
bridge identity."""

import numpy as np
import pytest

from risbeam.channel import stack_channels
from risbeam.harness import FULL_SCALE_WEIGHTS
from risbeam.model import AuxPrecoderSet, ChannelSet, PrecoderSet
from risbeam.rates import equivalent_rate, recover_precoder, user_rate, wsr
from risbeam.testing import random_instance


def eig_logdet(m):
    """Independent log-det through an eigendecomposition."""
    return float(np.sum(np.log(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))


class TestUserRate:
    def test_zero_precoder_gives_zero(self):
        rng = np.random.default_rng(0)
        inst = random_instance(rng)
        zero = PrecoderSet(w=tuple(np.zeros_like(wk) for wk in inst.precoders.w))
        assert user_rate(inst.channels, inst.theta, zero, 0,
                         inst.config.noise_power) == pytest.approx(0.0, abs=1e-14)

    def test_scalar_shannon_formula(self):
        rng = np.random.default_rng(1)
        inst = random_instance(rng, n_users=1, n_rx=1, n_streams=1, n_tx=3,
                               n_ris=4, weights=(1.0,))
        h = stack_channels(inst.channels, inst.theta)[0]
        w = inst.precoders.w[0][:, 0]
        snr = abs(h @ w) ** 2 / inst.config.noise_power
        assert user_rate(inst.channels, inst.theta, inst.precoders, 0,
                         inst.config.noise_power) == pytest.approx(np.log1p(snr), rel=1e-12)

    def test_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(2)
        inst = random_instance(rng, n_users=2, n_rx=2, n_tx=4, n_ris=6)
        noise = inst.config.noise_power
        for k in range(2):
            h_k = stack_channels(inst.channels, inst.theta)[2 * k: 2 * k + 2]
            full = noise * np.eye(2, dtype=complex)
            interf = noise * np.eye(2, dtype=complex)
            for j, w_j in enumerate(inst.precoders.w):
                gram = (h_k @ w_j) @ (h_k @ w_j).conj().T
                full += gram
                if j != k:
                    interf += gram
            expected = eig_logdet(full) - eig_logdet(interf)
            assert user_rate(inst.channels, inst.theta, inst.precoders, k,
                             noise) == pytest.approx(expected, rel=1e-10)

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            inst = random_instance(rng)
            for k in range(inst.config.n_users):
                assert user_rate(inst.channels, inst.theta, inst.precoders, k,
                                 inst.config.noise_power) >= 0.0

    def test_rejects_non_finite(self):
        rng = np.random.default_rng(4)
        inst = random_instance(rng)
        bad = PrecoderSet(w=(inst.precoders.w[0] * np.nan,) + inst.precoders.w[1:])
        with pytest.raises(ValueError):
            user_rate(inst.channels, inst.theta, bad, 0, inst.config.noise_power)


class TestWsr:
    def test_zero_precoder(self):
        rng = np.random.default_rng(5)
        inst = random_instance(rng)
        zero = PrecoderSet(w=tuple(np.zeros_like(wk) for wk in inst.precoders.w))
        assert wsr(inst.channels, inst.theta, zero, inst.config) == pytest.approx(0.0, abs=1e-14)

    def test_identical_users_give_common_rate(self):
        rng = np.random.default_rng(6)
        base = random_instance(rng, n_users=1, weights=(1.0,), n_rx=2, n_tx=4, n_ris=5)
        # Duplicate one user's channel and precoder: every per-user rate is
        # equal, so the equally weighted sum collapses to that rate.
        ch = ChannelSet(bs_ris=base.channels.bs_ris,
                        ris_user=base.channels.ris_user * 2,
                        direct=base.channels.direct * 2)
        prec = PrecoderSet(w=base.precoders.w * 2)
        cfg = random_instance(rng, n_users=2, n_rx=2, n_tx=4, n_ris=5).config
        rate_0 = user_rate(ch, base.theta, prec, 0, cfg.noise_power)
        assert wsr(ch, base.theta, prec, cfg) == pytest.approx(rate_0, rel=1e-12)

    def test_weighted_combination(self):
        rng = np.random.default_rng(7)
        inst = random_instance(rng, n_users=4, weights=FULL_SCALE_WEIGHTS, n_tx=8)
        parts = [user_rate(inst.channels, inst.theta, inst.precoders, k,
                           inst.config.noise_power) for k in range(4)]
        assert wsr(inst.channels, inst.theta, inst.precoders, inst.config) == \
            pytest.approx(float(np.dot(FULL_SCALE_WEIGHTS, parts)), rel=1e-12)

    def test_reference_weight_dot_product(self):
        # Frozen from the published per-user weights against rates (1,2,3,4).
        assert float(np.dot(FULL_SCALE_WEIGHTS, [1.0, 2.0, 3.0, 4.0])) == \
            pytest.approx(2.5065, abs=1e-12)


class TestEquivalentRate:
    def test_single_user_scalar_reduction(self):
        rng = np.random.default_rng(8)
        inst = random_instance(rng, n_users=1, n_rx=1, n_streams=1, n_tx=4,
                               n_ris=5, weights=(1.0,))
        h = stack_channels(inst.channels, inst.theta)     # (1, n_tx)
        f = inst.aux.f[0][0, 0]                           # scalar block
        h_bar = float(np.real((h @ h.conj().T).item()))   # ||h||^2
        cfg = inst.config
        # log(1 + P |h_bar f|^2 / (sigma^2 f* h_bar f)); the f and one h_bar
        # factor cancel, leaving log(1 + P h_bar / sigma^2).
        expected = np.log1p(cfg.power_bs * abs(h_bar * f) ** 2
                            / (cfg.noise_power * h_bar * abs(f) ** 2))
        assert expected == pytest.approx(np.log1p(cfg.power_bs * h_bar / cfg.noise_power))
        assert equivalent_rate(h, inst.aux, cfg) == pytest.approx(float(expected), rel=1e-10)

    def test_degenerate_precoder_rejected(self):
        rng = np.random.default_rng(9)
        inst = random_instance(rng)
        zero = AuxPrecoderSet(f=tuple(np.zeros_like(fk) for fk in inst.aux.f))
        with pytest.raises(ValueError, match="degenerate"):
            equivalent_rate(stack_channels(inst.channels, inst.theta), zero, inst.config)

    def test_scale_invariance(self):
        rng = np.random.default_rng(10)
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        base = equivalent_rate(h, inst.aux, inst.config)
        for c in (1e-3, 0.5, 7.0, 1e3):
            scaled = AuxPrecoderSet(f=tuple(c * fk for fk in inst.aux.f))
            assert equivalent_rate(h, scaled, inst.config) == pytest.approx(base, rel=1e-10)

    def test_unitary_rotation_invariance(self):
        rng = np.random.default_rng(11)
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        base = equivalent_rate(h, inst.aux, inst.config)
        rotated = []
        for fk in inst.aux.f:
            raw = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            q, _ = np.linalg.qr(raw)
            rotated.append(fk @ q)
        assert equivalent_rate(h, AuxPrecoderSet(f=tuple(rotated)),
                               inst.config) == pytest.approx(base, rel=1e-10)


class TestRecoverPrecoder:
    def test_power_equality(self):
        rng = np.random.default_rng(12)
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        w = recover_precoder(h, inst.aux, inst.config)
        assert w.total_power() == pytest.approx(inst.config.power_bs, rel=1e-12)

    def test_scale_absorbed(self):
        rng = np.random.default_rng(13)
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        w_a = recover_precoder(h, inst.aux, inst.config)
        scaled = AuxPrecoderSet(f=tuple(3.7 * fk for fk in inst.aux.f))
        w_b = recover_precoder(h, scaled, inst.config)
        for a, b in zip(w_a.w, w_b.w):
            assert np.allclose(a, b)

    def test_zero_rejected(self):
        rng = np.random.default_rng(14)
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        zero = AuxPrecoderSet(f=tuple(np.zeros_like(fk) for fk in inst.aux.f))
        with pytest.raises(ValueError):
            recover_precoder(h, zero, inst.config)


class TestBridgeIdentity:
    def test_bridge_on_random_triples(self):
        rng = np.random.default_rng(15)
        for _ in range(30):
            n_users = int(rng.integers(1, 4))
            inst = random_instance(
                rng, n_users=n_users, n_rx=2, n_tx=8, n_ris=16,
                weights=tuple([1.0 / n_users] * n_users))
            h = stack_channels(inst.channels, inst.theta)
            w = recover_precoder(h, inst.aux, inst.config)
            lhs = wsr(inst.channels, inst.theta, w, inst.config)
            rhs = equivalent_rate(h, inst.aux, inst.config)
            assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_power_down_scaling_stays_feasible(self):
        rng = np.random.default_rng(16)
        inst = random_instance(rng)
        for c in (1.0, 0.5, 0.1):
            scaled = PrecoderSet(w=tuple(c * wk for wk in inst.precoders.w))
            assert scaled.total_power() <= inst.config.power_bs * (1 + 1e-12)
            value = wsr(inst.channels, inst.theta, scaled, inst.config)
            assert np.isfinite(value)
