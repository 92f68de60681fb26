"""Design of revenue-maximizing test-fee structures.

The optimal structures live in the step-exponential-step (SES) family: an atom
``g`` at ``tau0``, flat up to ``tau1 = tau0 + phi_d``, an exponential CDF of
length scale ``phi_d`` up to ``tau2``, no mass on ``(tau2, tau3)`` and a top atom
at ``tau3``. On the exponential stretch every score is an equilibrium threshold,
so the exact optimum is interval-degenerate; lowering ``phi_d`` by a small
``eps`` makes ``tau1 - eps`` the unique threshold (see :func:`epsilon_implement`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .equilibrium import (
    Fees,
    Participation,
    TestFeeStructure,
    adversarial_outcome,
    participation,
    revenue_at,
)
from .errors import DomainError, EpsTooLarge, Infeasible, InvalidParams
from .measure import ExpCdf, Flat, MixedDistribution, Piece, is_mpc, mpc_checkpoints

SES_TOL = 1e-12
FEASIBLE_TOL = 1e-11  # MPC slack accepted during the search (final check uses 1e-9)


@dataclass(frozen=True)
class SesParams:
    tau0: float
    tau1: float
    tau2: float
    tau3: float
    g: float

    @property
    def phi_d(self) -> float:
        return self.tau1 - self.tau0

    @property
    def top_level(self) -> float:
        """CDF level on the gap ``[tau2, tau3)``."""
        return self.g * math.exp((self.tau2 - self.tau1) / self.phi_d)


@dataclass(frozen=True)
class RelaxedSolution:
    structure: TestFeeStructure
    tau: float
    relaxed_revenue: float
    implementable: TestFeeStructure
    guaranteed_revenue: float
    params: SesParams | None = None
    eps: float = 0.0


class SesBuild(NamedTuple):
    structure: TestFeeStructure
    degenerate: bool  # True when tau3 < mean + phi_d forced the testing fee to 0


@dataclass(frozen=True)
class OptimizeConfig:
    starts: int = 8
    seed: int = 0
    max_iter: int = 1200  # objective evaluations per start
    xtol: float = 1e-10
    penalty_weight: float = 1e3
    eps: float | None = None  # default: 1e-4 of the value range

    @classmethod
    def from_dict(cls, d: dict | None) -> "OptimizeConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**d)


def _check_prior(lo: float, hi: float, mu: float) -> None:
    if not (lo < mu < hi):
        raise DomainError(f"need lower < mean < upper, got ({lo}, {mu}, {hi})")


def upper_bound(theta_lo: float, theta_hi: float, mu: float) -> float:
    """Revenue ceiling ``(hi - mu) * (1 - exp((lo - mu) / (hi - mu)))`` for any prior with this support and mean."""
    _check_prior(theta_lo, theta_hi, mu)
    spread = theta_hi - mu
    return -spread * math.expm1((theta_lo - mu) / spread)


# -- SES family -------------------------------------------------------------------


def validate_ses(p: SesParams, theta_lo: float, theta_hi: float) -> None:
    ok = (theta_lo - SES_TOL <= p.tau0 < p.tau1 <= p.tau2 <= p.tau3 <= theta_hi + SES_TOL
          and 0.0 < p.g <= 1.0)
    if not ok:
        raise InvalidParams(f"SES parameters out of order or g outside (0, 1]: {p}")
    if p.top_level > 1.0 + SES_TOL:
        raise InvalidParams(f"exponential stretch overshoots 1 ({p.top_level!r})")


def ses_distribution(p: SesParams, theta_lo: float, theta_hi: float) -> MixedDistribution:
    validate_ses(p, theta_lo, theta_hi)
    phi_d = p.phi_d
    top = min(p.top_level, 1.0)
    pieces = []
    if p.tau0 > theta_lo:
        pieces.append(Piece(theta_lo, p.tau0, Flat(0.0)))
    pieces.append(Piece(max(p.tau0, theta_lo), p.tau1, Flat(p.g)))
    if p.tau2 > p.tau1:
        pieces.append(Piece(p.tau1, p.tau2, ExpCdf(p.g, phi_d)))
    if p.tau3 > p.tau2:
        pieces.append(Piece(p.tau2, p.tau3, Flat(top)))
    if p.tau3 < theta_hi:
        pieces.append(Piece(p.tau3, theta_hi, Flat(1.0)))
    return MixedDistribution(theta_lo, theta_hi, tuple(pieces))


def ses_testing_fee(p: SesParams, mu: float) -> float:
    """Binding testing fee: top-atom mass times how far ``tau3`` sits above ``mu + phi_d``."""
    return (1.0 - min(p.top_level, 1.0)) * (p.tau3 - mu - p.phi_d)


def ses_build(p: SesParams, theta_lo: float, theta_hi: float) -> SesBuild:
    g = ses_distribution(p, theta_lo, theta_hi)
    phi_t = ses_testing_fee(p, g.mean)
    degenerate = phi_t < -SES_TOL
    tf = TestFeeStructure(g, Fees(max(phi_t, 0.0), p.phi_d))
    return SesBuild(tf, degenerate)


# -- closed forms and benchmarks ------------------------------------------------------


def default_eps(theta_lo: float, theta_hi: float) -> float:
    return 1e-4 * (theta_hi - theta_lo)


def _finish(tf: TestFeeStructure, tau: float, relaxed: float, params: SesParams | None,
            eps: float) -> RelaxedSolution:
    sol = RelaxedSolution(tf, tau, relaxed, tf, 0.0, params, eps)
    impl = epsilon_implement(sol, eps)
    return replace(sol, implementable=impl, guaranteed_revenue=adversarial_outcome(impl).revenue)


def binary_optimal(theta_lo: float, theta_hi: float, mu: float, eps: float | None = None) -> RelaxedSolution:
    """Optimal structure for a prior on ``{theta_lo, theta_hi}`` with mean ``mu``.

    No testing fee, disclosure fee ``theta_hi - mu``, an atom
    ``exp((theta_lo - mu)/(theta_hi - mu))`` at the bottom, flat up to
    ``theta_lo + theta_hi - mu`` and exponential from there to the top.
    """
    _check_prior(theta_lo, theta_hi, mu)
    spread = theta_hi - mu
    g = math.exp((theta_lo - mu) / spread)
    p = SesParams(theta_lo, theta_lo + spread, theta_hi, theta_hi, g)
    tf = ses_build(p, theta_lo, theta_hi).structure
    eps = default_eps(theta_lo, theta_hi) if eps is None else eps
    return _finish(tf, p.tau1, upper_bound(theta_lo, theta_hi, mu), p, eps)


def zero_disclosure_benchmark(prior: MixedDistribution) -> TestFeeStructure:
    """Fully revealing test, free disclosure, testing fee at its participation ceiling."""
    return TestFeeStructure(prior, Fees(prior.option_value(prior.mean), 0.0))


def epsilon_implement(sol: RelaxedSolution, eps: float) -> TestFeeStructure:
    """Lower the disclosure fee by ``eps`` so the relaxed threshold becomes strict.

    The testing fee also drops by ``eps`` if it would still bind at the new
    no-test cutoff.

    Raises
    ------
    EpsTooLarge
        Unless ``0 < eps < tau1 - tau0``.
    """
    tf = sol.structure
    fees = tf.fees
    width = fees.phi_d if sol.params is None else sol.params.phi_d
    if sol.params is None and fees.phi_d == 0.0:
        # zero-fee benchmark: only the testing fee can give way
        if not eps > 0:
            raise EpsTooLarge(f"eps must be positive, got {eps!r}")
        return TestFeeStructure(tf.dist, Fees(fees.phi_t - eps, 0.0))
    if not 0.0 < eps < width:
        raise EpsTooLarge(f"eps={eps!r} must lie in (0, {width!r})")
    shifted = TestFeeStructure(tf.dist, Fees(fees.phi_t, fees.phi_d - eps))
    if participation(shifted).status is Participation.FAIL:
        shifted = TestFeeStructure(tf.dist, Fees(fees.phi_t - eps, fees.phi_d - eps))
    return shifted


# -- search -----------------------------------------------------------------------


class _Candidate(NamedTuple):
    revenue: float
    params: SesParams
    phi_t: float


class _SesProblem:
    """Maps a point of the unit cube to an SES structure with the prior's mean.

    Coordinates: disclosure fee (as a share of ``upper - mean``), bottom atom
    location ``tau0`` in ``[lower, mean]``, top atom location ``tau3`` in
    ``[mean + phi_d, upper]``, and the bottom atom mass between its smallest and
    largest values compatible with the mean. The end of the exponential stretch
    ``tau2`` is then pinned down by the mean, so every decoded point has the
    right mean and a nonnegative testing fee; only the contraction constraint
    is left to the penalty.
    """

    def __init__(self, prior: MixedDistribution, penalty_weight: float):
        self.prior = prior
        self.lo, self.hi, self.mu = prior.lower, prior.upper, prior.mean
        self.weight = penalty_weight
        self.best: dict = {}

    def decode(self, z: np.ndarray) -> _Candidate | None:
        lo, hi, mu = self.lo, self.hi, self.mu
        z = [float(v) for v in z]
        phi_d = (hi - mu) * (1e-6 + (1.0 - 1e-6) * z[0])
        tau0 = lo + z[1] * (mu - lo)
        tau1 = tau0 + phi_d
        tau3 = mu + phi_d + z[2] * (hi - mu - phi_d)
        tau3 = min(tau3, hi)
        g_lo = math.exp(-(mu - tau0) / phi_d)
        g_hi = (tau3 - mu) / (tau3 - tau0)
        g = min(max(g_lo + z[3] * (g_hi - g_lo), g_lo), 1.0)
        if g <= 0.0:
            return None
        # mean condition: g e^y (tau3 - tau0 - phi_d y) = tau3 - mu, y = (tau2 - tau1)/phi_d
        span, need = tau3 - tau0, tau3 - mu
        y_max = -math.log(g)

        def gap(y):
            return g * math.exp(y) * (span - phi_d * y) - need

        if gap(0.0) >= 0.0:
            y = 0.0
        elif gap(y_max) <= 0.0:
            y = y_max
        else:
            y = brentq(gap, 0.0, y_max, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        tau2 = min(tau1 + phi_d * y, tau3)
        p = SesParams(tau0, tau1, tau2, tau3, g)
        phi_t = max(ses_testing_fee(p, mu), 0.0)
        return _Candidate(phi_t + p.phi_d * (1.0 - g), p, phi_t)

    def violation(self, p: SesParams) -> float:
        g = ses_distribution(p, self.lo, self.hi)
        xs = mpc_checkpoints(g, self.prior)
        worst = float(np.max(g.cdf_integral(xs) - self.prior.cdf_integral(xs)))
        return max(worst, abs(g.mean - self.mu))

    def objective(self, z: np.ndarray) -> float:
        cand = self.decode(z)
        if cand is None:
            return math.inf
        try:
            viol = self.violation(cand.params)
        except Exception:
            return math.inf
        if viol <= FEASIBLE_TOL:
            key = (-cand.revenue, tuple(z))
            if not self.best or key < self.best["key"]:
                self.best = {"key": key, "cand": cand}
        return -cand.revenue + self.weight * max(viol, 0.0)


def pattern_search(f, x0: np.ndarray, rng: np.random.Generator, step: float = 0.25,
                   xtol: float = 1e-10, max_evals: int = 1500):
    """Minimize ``f`` over the unit cube by polling along a rotating basis.

    Each round polls ``x +/- step * q`` for the columns ``q`` of an orthogonal
    basis, moving to the first improvement and doubling the step, or halving
    the step if nothing improves. After every unsuccessful round the basis is
    redrawn at random, which lets the search slide along constraint kinks that
    are not aligned with the coordinate axes. Returns ``(x, f(x))``.
    """
    n = len(x0)
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    fx = f(x)
    evals = 1
    basis = np.eye(n)
    while step > xtol and evals < max_evals:
        moved = False
        for q in np.concatenate([basis.T, -basis.T]):
            y = np.clip(x + step * q, 0.0, 1.0)
            if np.array_equal(y, x):
                continue
            fy = f(y)
            evals += 1
            if fy < fx:
                x, fx, moved = y, fy, True
                break
        if moved:
            step = min(2.0 * step, 0.5)
        else:
            step *= 0.5
            basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return x, fx


def optimize(prior: MixedDistribution, cfg: OptimizeConfig | dict | None = None) -> RelaxedSolution:
    """Search the SES family for the best structure feasible under ``prior``.

    A seeded multi-start pattern search runs over a box parameterization of the
    family (see ``_SesProblem``); candidates that break the contraction
    constraint are penalized. The best candidate that passes the exact
    :func:`testfee.measure.is_mpc` check is returned with its relaxed threshold
    ``tau1`` and its ``eps``-implementation.

    Raises
    ------
    DomainError
        For a degenerate prior.
    Infeasible
        If no candidate validates (not expected: a point mass at the mean is
        always reachable).
    """
    if not isinstance(cfg, OptimizeConfig):
        cfg = OptimizeConfig.from_dict(cfg)
    lo, hi, mu = prior.lower, prior.upper, prior.mean
    _check_prior(lo, hi, mu)
    if prior.option_value(mu) <= 0.0:
        raise DomainError("prior is a point mass; nothing to extract")
    eps = default_eps(lo, hi) if cfg.eps is None else cfg.eps
    rng = np.random.default_rng(cfg.seed)
    fixed = [np.array([1.0, 0.0, 1.0, 0.0]), np.array([0.5, 0.5, 0.5, 0.5]),
             np.array([0.25, 0.9, 0.5, 0.5])]
    randoms = list(rng.uniform(size=(max(cfg.starts - len(fixed), 0), 4)))
    starts = (fixed + randoms)[: max(cfg.starts, 1)]
    per_start = cfg.max_iter

    found = []
    for z0 in starts:
        prob = _SesProblem(prior, cfg.penalty_weight)
        pattern_search(prob.objective, z0, rng, xtol=cfg.xtol, max_evals=per_start)
        if prob.best:
            found.append(prob.best["cand"])
    found.sort(key=lambda c: (-c.revenue, c.params.tau0, c.params.tau1, c.params.tau2,
                              c.params.tau3, c.params.g))
    for cand in found:
        tf = ses_build(cand.params, lo, hi).structure
        if not is_mpc(tf.dist, prior, tol=1e-9):
            continue
        relaxed = revenue_at(tf, cand.params.tau1)
        if cand.params.phi_d <= eps:
            continue
        return _finish(tf, cand.params.tau1, relaxed, cand.params, eps)
    bench = zero_disclosure_benchmark(prior)
    if bench.fees.phi_t > 0:
        tau = prior.lowest_score
        return _finish(bench, tau, bench.fees.phi_t, None, eps)
    raise Infeasible("no feasible structure found")
