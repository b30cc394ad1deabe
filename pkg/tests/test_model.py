"""Domain types, unit conversions, and config validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risbeam.harness import FULL_SCALE_WEIGHTS, full_scale_system_config
from risbeam.model import (AuxPrecoderSet, PhaseVector, PrecoderSet,
                           SystemConfig, dbm_to_watts, validate_aux,
                           validate_config, validate_precoders, watts_to_dbm)


class TestDbmConversion:
    def test_reference_points(self):
        assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
        assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)
        # 10 ** ((-90 - 30) / 10), the default noise power.
        assert dbm_to_watts(-90.0) == pytest.approx(1e-12, rel=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dbm_to_watts(float("nan"))
        with pytest.raises(ValueError):
            watts_to_dbm(0.0)

    @given(st.floats(min_value=1e-15, max_value=1e3))
    def test_round_trip(self, watts):
        assert dbm_to_watts(watts_to_dbm(watts)) == pytest.approx(watts, rel=1e-12)


class TestPhaseVector:
    @given(st.lists(st.floats(min_value=-50.0, max_value=50.0), min_size=1, max_size=32))
    @settings(max_examples=50)
    def test_from_angles_unit_modulus(self, phases):
        pv = PhaseVector.from_angles(np.array(phases))
        assert np.all(np.abs(np.abs(pv.theta) - 1.0) <= 1e-12)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            PhaseVector(np.array([1.0, 0.5 + 0.5j]))

    def test_length(self):
        assert len(PhaseVector.from_angles(np.zeros(7))) == 7


def _full_cfg(**overrides):
    return full_scale_system_config(**overrides)


class TestValidateConfig:
    def test_full_scale_defaults_ok(self):
        cfg = _full_cfg()
        assert cfg.weights == FULL_SCALE_WEIGHTS
        assert validate_config(cfg) == []

    def test_stream_count_violation(self):
        cfg = _full_cfg(n_streams=3, n_rx=2)
        assert any("n_streams exceeds n_rx" in e for e in validate_config(cfg))

    def test_weight_sum_violation(self):
        cfg = _full_cfg(weights=(0.3, 0.3, 0.2, 0.1))
        assert any("weights must sum to 1" in e for e in validate_config(cfg))

    def test_nonpositive_weight(self):
        cfg = _full_cfg(weights=(0.5, 0.5, 0.0, 0.0))
        assert any("strictly positive" in e for e in validate_config(cfg))

    def test_collects_every_violation(self):
        cfg = SystemConfig(n_tx=2, n_ris=4, n_users=1, n_rx=4, n_streams=5,
                           power_bs=-1.0, noise_power=0.0, weights=(1.0,),
                           ls_shrink=1.5)
        errors = validate_config(cfg)
        assert len(errors) >= 4


class TestPrecoderSets:
    def test_power_budget(self):
        cfg = _full_cfg(n_tx=4, n_users=2, weights=(0.5, 0.5), power_bs=2.0)
        w = PrecoderSet(w=tuple(np.ones((4, 2), dtype=complex) for _ in range(2)))
        errors = validate_precoders(w, cfg)
        assert any("exceeds budget" in e for e in errors)

    def test_aux_nontriviality(self):
        cfg = _full_cfg(n_users=2, weights=(0.5, 0.5))
        zero = AuxPrecoderSet(f=tuple(np.zeros((4, 2), dtype=complex) for _ in range(2)))
        assert any("zero" in e for e in validate_aux(zero, cfg))
