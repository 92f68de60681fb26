"""Seeded randomized checks: engine against oracle, plus structural inequalities.

Each suite returns a :class:`SuiteReport`; the CLI ``verify`` command and the
test-suite both run them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demand import robust_demand
from .designer import OptimizeConfig, binary_optimal, optimize, ses_build, SesParams
from .equilibrium import (
    Fees,
    TestFeeStructure,
    adversarial_outcome,
    defect,
    equilibrium_thresholds,
    highest_threshold,
    revenue_at,
)
from .measure import Affine, ExpCdf, FinitePmf, Flat, MixedDistribution, Piece, discretize, is_mpc
from .oracle import adversarial_revenue_bruteforce, epsilon_star, low_revenue_witness, max_revenue_bruteforce


@dataclass
class SuiteReport:
    name: str
    total: int = 0
    passed: int = 0
    failures: list = field(default_factory=list)

    def record(self, ok: bool, detail: str = "") -> None:
        self.total += 1
        if ok:
            self.passed += 1
        elif len(self.failures) < 5:
            self.failures.append(detail)

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.passed == self.total

    def line(self) -> str:
        verb = "agree" if self.name == "engine-oracle" else "pass"
        return f"{self.name}: {self.passed}/{self.total} {verb}"


# -- generators -------------------------------------------------------------------


def random_pmf(rng: np.random.Generator, max_points: int = 12) -> FinitePmf:
    """Scores in [0, 1] (sometimes on a coarse grid, to provoke ties) with Dirichlet masses."""
    n = int(rng.integers(1, max_points + 1))
    if rng.random() < 0.3:
        scores = np.unique(rng.integers(0, 11, size=n) / 10.0)
    else:
        scores = np.unique(rng.random(n))
    masses = rng.dirichlet(np.ones(len(scores)))
    masses = np.maximum(masses, 1e-6)
    masses /= masses.sum()
    return FinitePmf(tuple(zip(scores.tolist(), masses.tolist())), 0.0, 1.0)


def random_fees(rng: np.random.Generator, dist) -> Fees:
    phi_d = float(rng.uniform(0.0, 0.7))
    if rng.random() < 0.2:
        return Fees(0.0, phi_d)
    room = dist.option_value(dist.mean + phi_d)
    return Fees(float(rng.uniform(0.0, 1.2 * room + 1e-3)), phi_d)


def random_distribution(rng: np.random.Generator) -> MixedDistribution:
    """Random mix of atoms and flat, affine and exponential pieces on [0, 1]."""
    k = int(rng.integers(1, 6))
    cuts = np.concatenate([[0.0], np.sort(rng.uniform(0.02, 0.98, k - 1)), [1.0]])
    if np.any(np.diff(cuts) < 1e-3):
        cuts = np.linspace(0.0, 1.0, k + 1)
    # increments: a jump at each piece start, a rise inside each piece, and a top atom
    weights = rng.dirichlet(np.ones(2 * k + 1))
    weights[rng.random(2 * k + 1) < 0.3] = 0.0
    if weights.sum() == 0:
        weights[-1] = 1.0
    weights /= weights.sum()
    level = 0.0
    pieces = []
    for i in range(k):
        a, b = float(cuts[i]), float(cuts[i + 1])
        level += weights[2 * i]
        rise = weights[2 * i + 1]
        if rise <= 0:
            pieces.append(Piece(a, b, Flat(level)))
        elif level > 1e-3 and rng.random() < 0.5:
            pieces.append(Piece(a, b, ExpCdf(level, (b - a) / math.log((level + rise) / level))))
        else:
            pieces.append(Piece(a, b, Affine(level, rise / (b - a))))
        level += rise
    return MixedDistribution(0.0, 1.0, tuple(pieces))


def random_ses(rng: np.random.Generator):
    """Random SES structure on [0, 1] whose top atom sits at the upper bound."""
    while True:
        phi_d = float(rng.uniform(0.05, 0.5))
        tau0 = float(rng.uniform(0.0, 0.4))
        tau1 = tau0 + phi_d
        g = float(rng.uniform(0.05, 0.9))
        y_max = min(-math.log(g), (1.0 - tau1) / phi_d)
        if y_max <= 0:
            continue
        tau2 = tau1 + phi_d * float(rng.uniform(0.0, y_max))
        p = SesParams(tau0, tau1, min(tau2, 1.0), 1.0, g)
        built = ses_build(p, 0.0, 1.0)
        if not built.degenerate:
            return p, built.structure


# -- suites -------------------------------------------------------------------------


def engine_oracle_suite(seed: int = 0, cases: int = 500, fees_per_case: int = 5,
                        tol: float = 1e-9) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("engine-oracle")
    for _ in range(cases):
        pmf = random_pmf(rng)
        dist = pmf.to_distribution()
        ok, detail = True, ""
        for _ in range(fees_per_case):
            fees = random_fees(rng, dist)
            eng = adversarial_outcome(TestFeeStructure(dist, fees)).revenue
            bru = adversarial_revenue_bruteforce(pmf, fees)
            if not abs(eng - bru) <= tol:
                ok, detail = False, f"{pmf.points} {fees}: engine {eng!r} oracle {bru!r}"
                break
        rep.record(ok, detail)
    return rep


def integration_by_parts_suite(seed: int = 1, cases: int = 200) -> SuiteReport:
    """``E[s | s <= tau] * G(tau) + I(tau) = tau * G(tau)``, and the left side
    matches a Stieltjes sum over a fine discretization."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("integration-by-parts")
    n = 2_000
    for _ in range(cases):
        d = random_distribution(rng)
        tau = float(rng.uniform(d.lowest_score, 1.0))
        g = d.cdf(tau)
        if g <= 0:
            tau, g = 1.0, 1.0
        lhs = d.conditional_mean_below(tau) * g + d.cdf_integral(tau)
        pmf = discretize(d, n)
        below = pmf.scores <= tau
        stieltjes = float(np.sum(pmf.scores[below] * pmf.masses[below]))
        exact_moment = tau * g - d.cdf_integral(tau)
        ok = abs(lhs - tau * g) <= 1e-10 and abs(stieltjes - exact_moment) <= 2.0 / n
        rep.record(ok, f"tau={tau} lhs={lhs} rhs={tau * g} stieltjes={stieltjes} exact={exact_moment}")
    return rep


def _fee_for(rng, d: MixedDistribution) -> float:
    return float(rng.uniform(0.01, 0.8))


def boundspeed_suite(seed: int = 2, cases: int = 200) -> SuiteReport:
    """Above the highest threshold ``I`` grows at most exponentially at rate ``1/phi_d``."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("boundspeed")
    for _ in range(cases):
        d = random_distribution(rng)
        phi_d = _fee_for(rng, d)
        tau = highest_threshold(d, phi_d).tau
        ta, tb = np.sort(rng.uniform(tau, tau + 1.0, 2))
        lhs = d.cdf_integral(tb)
        rhs = math.exp((tb - ta) / phi_d) * d.cdf_integral(ta) * (1 + 1e-9)
        rep.record(lhs <= rhs, f"phi_d={phi_d} tau={tau} ta={ta} tb={tb} {lhs} > {rhs}")
    return rep


def weak_he_suite(seed: int = 3, cases: int = 200) -> SuiteReport:
    """The defect never dips below zero above the (weak) highest threshold."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("weak-highest-threshold")
    for i in range(cases):
        if i % 4 == 0:
            _, tf = random_ses(rng)
            d, phi_d = tf.dist, tf.fees.phi_d
        else:
            d, phi_d = random_distribution(rng), _fee_for(rng, None)
        tau = highest_threshold(d, phi_d).tau
        end = max(d.upper, d.mean + phi_d)
        grid = np.linspace(tau, max(end, tau), 201)[1:]
        worst = float(np.min(defect(d, phi_d, grid))) if grid.size else 0.0
        rep.record(worst >= -1e-10, f"phi_d={phi_d} tau={tau} min defect {worst}")
    return rep


def designer_mpc_suite(seed: int = 4, cases: int = 200) -> SuiteReport:
    """Everything the designer emits is a contraction of its prior."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("designer-mpc")
    light = OptimizeConfig(starts=2, max_iter=120, seed=seed)
    for i in range(cases):
        if i % 5 == 0:
            pmf = random_pmf(rng, 6)
            prior = pmf.to_distribution()
            if len(pmf.scores) < 2:
                prior = MixedDistribution.uniform(0.0, 1.0)
            sol = optimize(prior, light)
        else:
            lo = float(rng.uniform(-1, 1))
            hi = lo + float(rng.uniform(0.1, 3))
            mu = float(rng.uniform(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo)))
            prior = MixedDistribution.binary(lo, hi, mu)
            sol = binary_optimal(lo, hi, mu)
        chk = is_mpc(sol.structure.dist, prior, tol=1e-9)
        rep.record(bool(chk), f"violation {chk.max_violation} mean gap {chk.mean_gap}")
    return rep


def revenue_identity_suite(seed: int = 5, cases: int = 200) -> SuiteReport:
    """With the binding testing fee, revenue at a threshold equals ``I(mu + phi_d) - I(tau)``."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("revenue-identity")
    while rep.total < cases:
        if rep.total % 2 == 0:
            p, tf = random_ses(rng)
            d, phi_d = tf.dist, p.phi_d
            tau = float(rng.uniform(p.tau1, p.tau2))
        else:
            d = random_distribution(rng)
            if d.mean > 0.99:
                continue
            phi_d = float(rng.uniform(0.01, 1.0 - d.mean))
            taus = equilibrium_thresholds(d, phi_d).samples(3)
            taus = [t for t in taus if t <= d.mean + phi_d and d.cdf(t) > 0]
            if not taus:
                continue
            tau = taus[int(rng.integers(len(taus)))]
        mu = d.mean
        if mu + phi_d > d.upper:
            continue
        tf = TestFeeStructure(d, Fees(d.option_value(mu + phi_d), phi_d))
        got = revenue_at(tf, tau)
        want = d.cdf_integral(mu + phi_d) - d.cdf_integral(tau)
        rep.record(abs(got - want) <= 1e-10, f"tau={tau} phi_d={phi_d}: {got} vs {want}")
    return rep


def monotone_demand_suite(seed: int = 6, cases: int = 200) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("robust-demand-monotone")
    grid = np.linspace(0.0, 0.8, 33).tolist()
    for _ in range(cases):
        d = random_distribution(rng) if rng.random() < 0.5 else random_pmf(rng).to_distribution()
        probs = [q for _, q in robust_demand(d, grid)]
        ok = all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))
        rep.record(ok, f"robust demand not monotone: {probs}")
    return rep


def near_full_surplus_cases(rng: np.random.Generator, count: int = 50) -> list:
    """``(structure, eps)`` pairs where some equilibrium is within ``eps`` of full surplus.

    Built from a pmf with an atom at the bottom of the support: concealing
    only that atom is an equilibrium for small disclosure fees, and a testing
    fee just under its option value extracts nearly everything.
    """
    out = []
    while len(out) < count:
        n = int(rng.integers(2, 7))
        inner = np.sort(rng.uniform(0.2, 1.0, n - 1))
        scores = np.unique(np.concatenate([[0.0], inner]))
        masses = rng.dirichlet(np.ones(len(scores)))
        pmf = FinitePmf(tuple(zip(scores.tolist(), masses.tolist())), 0.0, 1.0)
        d = pmf.to_distribution()
        lo, hi, mu = d.lower, d.upper, d.mean
        if not lo < mu < hi:
            continue
        eps_star = epsilon_star(lo, hi, mu)
        phi_d = float(rng.uniform(0.0, 0.9 * scores[1]))
        eps = float(rng.uniform(0.05, 1.0)) * eps_star
        shortfall = float(rng.uniform(0.0, 1.0)) * eps
        phi_t = pmf.option_value(lo + phi_d) - shortfall
        tf = TestFeeStructure(d, Fees(phi_t, phi_d))
        if max_revenue_bruteforce(pmf, tf.fees) >= (mu - lo) - eps:
            out.append((tf, eps))
    return out


def low_revenue_suite(seed: int = 7, cases: int = 50) -> SuiteReport:
    rng = np.random.default_rng(seed)
    rep = SuiteReport("low-revenue-witness")
    for tf, eps in near_full_surplus_cases(rng, cases):
        w = low_revenue_witness(tf, eps)
        rep.record(w.equilibrium.revenue <= w.bound + 1e-12,
                   f"{tf.fees} eps={eps}: witness {w.equilibrium.revenue} > {w.bound}")
    return rep


ALL_SUITES = (
    engine_oracle_suite,
    integration_by_parts_suite,
    boundspeed_suite,
    weak_he_suite,
    designer_mpc_suite,
    revenue_identity_suite,
    monotone_demand_suite,
    low_revenue_suite,
)
