"""Acceptance criteria, each at its pinned tolerance. Every test prints one
``[PASS]``/``[FAIL]`` line (visible with ``pytest -v`` or ``-s``)."""

import math

import pytest

from testfee import verify as vf
from testfee.cli import table1_test
from testfee.demand import best_two_part_tariff, fee_grid, robust_demand
from testfee.designer import binary_optimal, epsilon_implement, optimize
from testfee.equilibrium import Fees, TestFeeStructure, adversarial_outcome
from testfee.measure import MixedDistribution
from testfee.oracle import Kind, enumerate_equilibria

HALF_E = 0.5 * (1 - math.exp(-1))
STEP = 0.01
GRID = fee_grid(0.0, 1.0, STEP)


@pytest.fixture
def report(capsys):
    def emit(n, label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {label}" + (f" ({detail})" if detail else ""))
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def uniform_solution():
    return optimize(MixedDistribution.uniform(0.0, 1.0))


def test_1_binary_closed_form(report):
    exact = binary_optimal(0.0, 1.0, 0.5).relaxed_revenue
    searched = optimize(MixedDistribution.binary(0.0, 1.0, 0.5)).relaxed_revenue
    ok = abs(exact - HALF_E) <= 1e-12 and abs(searched - HALF_E) <= 1e-4
    report(1, "binary optimum equals (1 - 1/e)/2", ok,
           f"closed form err {abs(exact - HALF_E):.3g}, search err {abs(searched - HALF_E):.3g}")


def test_2_fully_revealing(report):
    b = MixedDistribution.binary(0.0, 1.0, 0.5)
    fees = fee_grid(0.10, 0.49, 0.01)
    worst = max(abs(adversarial_outcome(TestFeeStructure(b, Fees(0.0, f))).revenue - f / 2) for f in fees)
    high = [q for f, q in robust_demand(b, fee_grid(0.5, 1.0, 0.01))]
    tariff = best_two_part_tariff(b, GRID).revenue
    ok = worst <= 1e-15 and all(q == 0.0 for q in high) and abs(tariff - 0.25) <= STEP
    report(2, "fully revealing test: revenue phi_d/2, demand drops at 1/2, tariff 1/4", ok,
           f"max err {worst:.3g}, tariff {tariff:.9g}")


def test_3_three_score_test(report):
    tariff = best_two_part_tariff(table1_test(1 / 9).to_distribution(), GRID).revenue
    p = 0.2
    bad = [e.disclosure_prob for e in enumerate_equilibria(table1_test(p), Fees(0.0, 0.49))
           if e.kind is Kind.THRESHOLD]
    found = any(abs(q - (1 - 3 * p) / 2) <= 1e-12 for q in bad)
    ok = abs(tariff - 5 / 18) <= STEP and found
    report(3, "three-score test: tariff 5/18, bad equilibrium at p = 0.2", ok,
           f"tariff {tariff:.9g}, bad equilibrium found: {found}")


def test_4_uniform_prior(report, uniform_solution):
    sol = uniform_solution
    phi_t, rev = sol.structure.fees.phi_t, sol.relaxed_revenue
    ok = phi_t > 0 and 0.125 < rev < 0.316061
    report(4, "uniform prior: positive testing fee, revenue in (0.125, 0.316061)", ok,
           f"phi_t {phi_t:.9g}, revenue {rev:.9g}")


def test_5_engine_oracle(report):
    rep = vf.engine_oracle_suite(seed=0, cases=500, fees_per_case=5, tol=1e-9)
    report(5, "engine matches brute-force oracle", rep.ok and rep.total == 500, rep.line())


SUITES = [
    (vf.integration_by_parts_suite, "integration by parts (1e-10)"),
    (vf.boundspeed_suite, "growth bound above highest threshold (1e-9 rel)"),
    (vf.weak_he_suite, "weak highest threshold on a grid (1e-10)"),
    (vf.designer_mpc_suite, "designer outputs are contractions (1e-9)"),
    (vf.revenue_identity_suite, "revenue identity under binding participation (1e-10)"),
    (vf.monotone_demand_suite, "robust demand nonincreasing"),
]


@pytest.mark.parametrize("suite,label", SUITES, ids=[s.__name__ for s, _ in SUITES])
def test_6_property_suites(report, suite, label):
    rep = suite(cases=200)
    report(6, label, rep.ok and rep.total >= 200, rep.line() + "".join(f"; {f}" for f in rep.failures))


def test_7_low_revenue_witness(report):
    rep = vf.low_revenue_suite(cases=50)
    report(7, "low-revenue witness within its bound", rep.ok and rep.total == 50, rep.line())


@pytest.mark.parametrize("which", ["binary", "uniform"])
def test_8_eps_convergence(report, which, uniform_solution):
    sol = binary_optimal(0.0, 1.0, 0.5) if which == "binary" else uniform_solution
    d = sol.structure.dist
    spread = d.upper - d.mean
    eps = [1e-2, 1e-3, 1e-4]
    revs = [adversarial_outcome(epsilon_implement(sol, e)).revenue for e in eps]
    increasing = all(a < b for a, b in zip(revs, revs[1:]))
    close = all(sol.relaxed_revenue - r <= 3 * e * spread for e, r in zip(eps, revs))
    report(8, f"eps-implementation converges ({which})", increasing and close,
           ", ".join(f"{e:g}: {r:.9g}" for e, r in zip(eps, revs)) + f"; relaxed {sol.relaxed_revenue:.9g}")
