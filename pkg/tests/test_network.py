import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcov.network import (Band, Blockage, Direction, db_to_linear, dbm_to_watts,
                               errors, linear_to_db, los_probability, table2_config, validate)


def codes(cfg):
    return [(v.code, v.tier) for v in errors(validate(cfg))]


def test_table2_is_valid(cfg):
    assert validate(cfg) == []


def test_zero_density_flagged(cfg):
    assert codes(cfg.with_tier(0, density=0.0)) == [("DensityNonPositive", 1)]


def test_sub6_array_flagged(cfg):
    assert codes(cfg.with_tier(0, antennas=64)) == [("Sub6MustBeSingleAntenna", 1)]


def test_other_violations(cfg):
    assert ("BiasNonPositive", 3) in codes(cfg.with_tier(2, bias_ul=0.0))
    assert ("MissingCarrier", 2) in codes(cfg.with_tier(1, carrier=None))
    assert ("NakagamiShapeInvalid", 2) in codes(cfg.with_tier(1, nakagami_shape=0))
    assert ("ArrayNeedsTwoAntennas", 3) in codes(cfg.with_tier(2, antennas=1))
    swapped = type(cfg)(tiers=(cfg.tiers[2], cfg.tiers[0]), blockage=cfg.blockage,
                        ue_density=cfg.ue_density)
    assert ("TierOrder", 2) in codes(swapped)


def test_low_ue_density_is_only_a_warning(cfg):
    from dataclasses import replace
    found = validate(replace(cfg, ue_density=1e-4))
    assert [v.severity for v in found] == ["warning"]
    assert errors(found) == []


def test_los_probability_examples():
    b = Blockage(1e-3, 15.0, 15.0)
    assert los_probability(0.0, b) == pytest.approx(0.79852, abs=5e-6)
    # direct evaluation exp(-(1.90986 + 0.225)) = 0.118261
    assert los_probability(100.0, b) == pytest.approx(math.exp(-(0.2 * 30 / math.pi + 0.225)))
    assert los_probability(100.0, b) == pytest.approx(0.11822, abs=5e-5)
    assert b.zeta == pytest.approx(2e-3 * 30 / math.pi)


def test_los_probability_rejects_negative():
    with pytest.raises(ValueError):
        los_probability(-1.0, Blockage(1e-3, 15.0, 15.0))


@given(st.floats(0, 5e-3), st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 2000),
       st.floats(0, 2000))
def test_los_probability_monotone_and_bounded(lam, ln, wd, d1, d2):
    b = Blockage(lam, ln, wd)
    lo, hi = sorted((d1, d2))
    p_lo, p_hi = los_probability(lo, b), los_probability(hi, b)
    assert 0.0 <= p_hi <= p_lo <= 1.0


def test_unit_conversions():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert db_to_linear(-38.5) == pytest.approx(10 ** -3.85)
    assert linear_to_db(100.0) == pytest.approx(20.0)


def test_tier_accessors(cfg):
    thz = cfg.tiers[2]
    assert thz.band is Band.THZ
    assert thz.power(Direction.DL) == thz.power("dl") == pytest.approx(0.19952623)
    assert cfg.indices(Band.MMWAVE) == [1]
    assert cfg.absorption_of(2) == 0.01 and cfg.absorption_of(1) == 0.0
