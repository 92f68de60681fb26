import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from testfee.designer import (
    OptimizeConfig,
    SesParams,
    binary_optimal,
    epsilon_implement,
    optimize,
    ses_build,
    ses_distribution,
    upper_bound,
    validate_ses,
    zero_disclosure_benchmark,
)
from testfee.equilibrium import adversarial_outcome
from testfee.errors import DomainError, EpsTooLarge, InvalidParams
from testfee.measure import MixedDistribution, is_mpc

HALF_E = 0.5 * (1 - math.exp(-1))
LIGHT = OptimizeConfig(starts=3, max_iter=200)


@pytest.fixture(scope="module")
def uniform_solution():
    return optimize(MixedDistribution.uniform(0.0, 1.0))


def test_binary_closed_form():
    sol = binary_optimal(0.0, 1.0, 0.5)
    assert sol.relaxed_revenue == pytest.approx(HALF_E, abs=1e-15)
    assert sol.params.g == pytest.approx(math.exp(-1))
    assert sol.structure.fees.phi_t == 0.0 and sol.structure.fees.phi_d == pytest.approx(0.5)


def test_exact_optimum_guarantees_nothing_until_shifted():
    sol = binary_optimal(0.0, 1.0, 0.5)
    assert adversarial_outcome(sol.structure).revenue == 0.0
    shifted = epsilon_implement(sol, 0.01)
    assert adversarial_outcome(shifted).revenue == pytest.approx(0.49 * (1 - math.exp(-1)), abs=1e-12)


def test_upper_bound_values():
    assert upper_bound(0.0, 1.0, 0.5) == pytest.approx(HALF_E, abs=1e-15)
    with pytest.raises(DomainError):
        upper_bound(0.0, 1.0, 1.0)


def test_eps_limits():
    sol = binary_optimal(0.0, 1.0, 0.5)
    with pytest.raises(EpsTooLarge):
        epsilon_implement(sol, 0.5)
    with pytest.raises(EpsTooLarge):
        epsilon_implement(sol, 0.0)


def test_ses_validation():
    with pytest.raises(InvalidParams):
        validate_ses(SesParams(0.3, 0.2, 0.5, 1.0, 0.5), 0.0, 1.0)
    with pytest.raises(InvalidParams):
        validate_ses(SesParams(0.0, 0.1, 0.9, 1.0, 0.5), 0.0, 1.0)  # overshoots 1


def test_ses_shape():
    p = SesParams(0.1, 0.3, 0.4, 0.9, 0.4)
    d = ses_distribution(p, 0.0, 1.0)
    assert d.cdf(0.05) == 0.0
    assert d.cdf(0.2) == pytest.approx(0.4)
    assert d.cdf(0.35) == pytest.approx(0.4 * math.exp(0.25))
    assert d.cdf(0.7) == pytest.approx(p.top_level)
    assert d.cdf(0.9) == 1.0


def test_benchmark_is_option_value_at_mean():
    u = MixedDistribution.uniform(0.0, 1.0)
    tf = zero_disclosure_benchmark(u)
    assert tf.fees.phi_t == pytest.approx(0.125) and tf.fees.phi_d == 0.0


def test_uniform_optimum(uniform_solution):
    sol = uniform_solution
    assert sol.structure.fees.phi_t > 0
    assert 0.125 < sol.relaxed_revenue < upper_bound(0.0, 1.0, 0.5)
    assert sol.relaxed_revenue == pytest.approx(0.21089, abs=5e-4)
    assert is_mpc(sol.structure.dist, MixedDistribution.uniform(0.0, 1.0))
    assert sol.guaranteed_revenue <= sol.relaxed_revenue


def test_optimize_is_deterministic():
    u = MixedDistribution.uniform(0.0, 1.0)
    a, b = optimize(u, LIGHT), optimize(u, LIGHT)
    assert a.params == b.params and a.relaxed_revenue == b.relaxed_revenue


def test_optimize_binary_matches_closed_form():
    sol = optimize(MixedDistribution.binary(0.0, 1.0, 0.5), LIGHT)
    assert sol.relaxed_revenue == pytest.approx(HALF_E, abs=1e-4)


def test_point_mass_prior_rejected():
    with pytest.raises(DomainError):
        optimize(MixedDistribution.point_mass(0.5, 0.0, 1.0), LIGHT)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        OptimizeConfig.from_dict({"stars": 3})


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 4), st.floats(0.02, 0.98))
def test_binary_optimal_is_feasible_and_hits_bound(lo, width, share):
    hi, mu = lo + width, lo + share * width
    sol = binary_optimal(lo, hi, mu)
    prior = MixedDistribution.binary(lo, hi, mu)
    assert is_mpc(sol.structure.dist, prior)
    assert sol.relaxed_revenue == pytest.approx(upper_bound(lo, hi, mu), rel=1e-9, abs=1e-12)
    assert 0 <= sol.guaranteed_revenue <= sol.relaxed_revenue + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.0, 0.4), st.floats(0.05, 0.9), st.floats(0, 1))
def test_ses_build_mean_and_fee(phi_d, tau0, g, frac):
    tau1 = tau0 + phi_d
    y = frac * min(-math.log(g), (1 - tau1) / phi_d)
    p = SesParams(tau0, tau1, tau1 + phi_d * y, 1.0, g)
    built = ses_build(p, 0.0, 1.0)
    d = built.structure.dist
    assert built.structure.fees.phi_t >= 0
    if not built.degenerate:
        assert built.structure.fees.phi_t == pytest.approx(d.option_value(d.mean + phi_d), abs=1e-12)
