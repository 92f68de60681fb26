import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from testfee.equilibrium import (
    Fees,
    Participation,
    TestFeeStructure,
    adversarial_outcome,
    defect,
    equilibrium_thresholds,
    highest_threshold,
    participation,
    revenue_at,
)
from testfee.errors import NoThreshold, NotAThreshold
from testfee.measure import MixedDistribution
from testfee.verify import random_distribution, random_pmf

E1 = 1 - math.exp(-1)


def test_fully_revealing_thresholds(binary):
    assert equilibrium_thresholds(binary, 0.4).points == pytest.approx((0.4,))
    assert equilibrium_thresholds(binary, 0.6).points == pytest.approx((0.6, 1.1))


def test_gstar_interval_of_thresholds(gstar):
    ts = equilibrium_thresholds(gstar, 0.5)
    assert len(ts.intervals) == 1
    iv = ts.intervals[0]
    assert (iv.lo, iv.hi) == pytest.approx((0.5, 1.0))
    ht = highest_threshold(gstar, 0.5, mode="strict")
    assert ht.tau == pytest.approx(1.0) and ht.strict is False
    assert ts.contains(0.7) and not ts.contains(0.3)


def test_gstar_just_below_fee(gstar):
    out = adversarial_outcome(TestFeeStructure(gstar, Fees(0.0, 0.49)))
    assert out.revenue == pytest.approx(0.49 * E1, abs=1e-12)
    assert highest_threshold(gstar, 0.49, mode="strict").strict


def test_table1_unique_equilibrium(table1):
    out = adversarial_outcome(TestFeeStructure(table1, Fees(0.0, 0.45)))
    assert out.disclosure_prob == pytest.approx(5 / 9, abs=1e-12)
    assert out.revenue == pytest.approx(0.25, abs=1e-12)


def test_participation(binary, gstar):
    res = participation(TestFeeStructure(binary, Fees(0.0, 0.4)))
    assert res.status is Participation.STRICT_HOLD and res.slack == pytest.approx(0.05)
    res = participation(TestFeeStructure(gstar, Fees(0.0, 0.5)))
    assert res.status is Participation.FAIL and res.slack == pytest.approx(0.0, abs=1e-12)


def test_fail_means_no_testing(gstar):
    out = adversarial_outcome(TestFeeStructure(gstar, Fees(0.0, 0.5)))
    assert out.revenue == 0.0 and out.tested == 0.0 and out.nondisclosure_price == pytest.approx(0.5)


def test_revenue_at(gstar):
    tf = TestFeeStructure(gstar, Fees(0.0, 0.5))
    assert revenue_at(tf, 0.5) == pytest.approx(0.5 * E1, abs=1e-12)
    assert revenue_at(tf, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NotAThreshold):
        revenue_at(tf, 0.2)


def test_negative_fee_is_full_disclosure(binary):
    assert equilibrium_thresholds(binary, -0.1).is_empty
    with pytest.raises(NoThreshold):
        equilibrium_thresholds(binary, -0.1).maximum()
    out = adversarial_outcome(TestFeeStructure(binary, Fees(0.1, -0.1)))
    assert out.tau == -math.inf and out.revenue == pytest.approx(0.0)


def test_zero_fee_includes_lowest_score():
    u = MixedDistribution.uniform(0.0, 1.0)
    assert equilibrium_thresholds(u, 0.0).contains(0.0)


def test_fee_above_range_gives_no_disclosure(binary):
    out = adversarial_outcome(TestFeeStructure(binary, Fees(0.0, 0.6)))
    assert out.disclosure_prob == 0.0


# -- properties ------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=80, deadline=None)
@given(seeds, st.floats(0.0, 1.0))
def test_thresholds_are_defect_roots(seed, phi_d):
    d = random_distribution(np.random.default_rng(seed))
    ts = equilibrium_thresholds(d, phi_d)
    for t in ts.samples(5):
        if t > d.lowest_score:
            assert abs(defect(d, phi_d, t)) <= 1e-9


@settings(max_examples=80, deadline=None)
@given(seeds, st.floats(0.0, 1.0))
def test_highest_threshold_is_maximum(seed, phi_d):
    d = random_distribution(np.random.default_rng(seed))
    ts = equilibrium_thresholds(d, phi_d)
    ht = highest_threshold(d, phi_d)
    assert ht.tau == ts.maximum()
    assert all(t <= ht.tau for t in ts.samples(5))


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_revenue_between_zero_and_fees(seed):
    rng = np.random.default_rng(seed)
    pmf = random_pmf(rng)
    d = pmf.to_distribution()
    fees = Fees(float(rng.uniform(0, 0.3)), float(rng.uniform(0, 0.7)))
    out = adversarial_outcome(TestFeeStructure(d, fees))
    assert 0.0 <= out.revenue <= fees.phi_t + fees.phi_d + 1e-12
    assert 0.0 <= out.disclosure_prob <= 1.0
