import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from testfee.demand import (
    best_two_part_tariff,
    demand_correspondence,
    demand_point,
    fee_grid,
    robust_demand,
    to_csv,
)
from testfee.designer import SesParams, ses_build, upper_bound
from testfee.measure import MixedDistribution
from testfee.verify import random_distribution

E1 = 1 - math.exp(-1)
GRID = fee_grid(0.0, 1.0, 0.01)


def test_fully_revealing_correspondence(binary):
    (p,) = demand_correspondence(binary, [0.4])
    assert p.disclosure_probs == pytest.approx((0.5,))
    (p,) = demand_correspondence(binary, [0.6])
    assert p.disclosure_probs == pytest.approx((0.0, 1 / 6, 0.5))


def test_gstar_rectangle(gstar):
    (p,) = demand_correspondence(gstar, [0.5])
    assert p.has_interval
    assert p.disclosure_probs[0] == pytest.approx(0.0, abs=1e-12)
    assert p.disclosure_probs[-1] == pytest.approx(E1, abs=1e-12)
    gaps = np.diff(p.disclosure_probs)
    assert len(p.disclosure_probs) >= 11 and gaps.max() < 0.1


def test_robust_demand_points(binary, gstar):
    assert robust_demand(binary, [0.49, 0.51]) == [(0.49, 0.5), (0.51, 0.0)]
    assert robust_demand(gstar, [0.49])[0][1] == pytest.approx(E1)
    assert robust_demand(binary, [0.6])[0][1] == 0.0


def test_tariffs(binary, gstar, table1):
    assert best_two_part_tariff(binary, GRID).revenue == pytest.approx(0.25, abs=0.01)
    t = best_two_part_tariff(gstar, GRID)
    assert t.fees.phi_d == pytest.approx(0.49) and t.revenue == pytest.approx(0.5 * E1, abs=0.01)
    assert best_two_part_tariff(table1, GRID).revenue == pytest.approx(5 / 18, abs=0.01)


def test_tariff_tie_goes_to_lowest_fee(binary):
    t = best_two_part_tariff(binary, [0.3, 0.1, 0.2])
    assert t.fees.phi_d == 0.1 and t.revenue == pytest.approx(0.25)
    assert best_two_part_tariff(binary, GRID).fees.phi_d == 0.0


def test_negative_grid_rejected(binary):
    with pytest.raises(ValueError):
        demand_correspondence(binary, [-0.1])


def test_grid_and_csv(binary):
    assert fee_grid(0.0, 0.3, 0.1) == [0.0, 0.1, 0.2, 0.3]
    assert fee_grid(1.0, 0.0, 0.1) == []
    text = to_csv(demand_correspondence(binary, [0.6]))
    assert text.splitlines() == [
        "phi_d,robust_prob,robust_revenue,n_equilibria,probs",
        "0.6,0,0,3,0;0.166666667;0.5",
    ]


def test_discretized_mixed_flagged():
    p = demand_point(MixedDistribution.uniform(0.0, 1.0), 0.3, discretize_n=16)
    assert p.approximate


def test_ses_rectangle_property():
    p = SesParams(0.1, 0.35, 0.6, 1.0, 0.3)
    d = ses_build(p, 0.0, 1.0).structure.dist
    (pt,) = demand_correspondence(d, [p.phi_d])
    lo, hi = 1 - d.cdf(p.tau2), 1 - d.cdf(p.tau1)
    assert pt.has_interval
    assert min(abs(q - lo) for q in pt.disclosure_probs) < 1e-9
    assert min(abs(q - hi) for q in pt.disclosure_probs) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_robust_demand_nonincreasing(seed):
    d = random_distribution(np.random.default_rng(seed))
    probs = [q for _, q in robust_demand(d, fee_grid(0.0, 0.8, 0.05))]
    assert all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tariff_below_bound(seed):
    d = random_distribution(np.random.default_rng(seed))
    if not d.lower < d.mean < d.upper:
        return
    t = best_two_part_tariff(d, fee_grid(0.0, 1.0, 0.05))
    assert t.revenue <= upper_bound(d.lower, d.upper, d.mean) + 0.05
