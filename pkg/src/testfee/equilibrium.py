"""Participation, disclosure thresholds and adversarial outcomes of a test-fee structure.

A threshold ``tau`` is an equilibrium cutoff when the non-disclosure price equals
``tau - phi_d``, i.e. when the defect ``D(tau) = I(tau) - phi_d * G(tau)``
vanishes with ``G(tau) > 0``. On each piece ``D`` has a closed form (affine,
quadratic or single exponential), so thresholds are found piece by piece without
bracketing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import NoThreshold, NotAThreshold
from .measure import Affine, ExpCdf, Flat, MixedDistribution

ROOT_TOL = 1e-10          # |D(tau)| allowed for a certified threshold
RATE_TOL = 1e-12          # ExpCdf rate vs phi_d for an identically-zero defect
PARTICIPATION_TOL = 1e-12  # slack at or below this counts as binding
MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class Fees:
    phi_t: float
    phi_d: float


@dataclass(frozen=True)
class TestFeeStructure:
    __test__ = False

    dist: MixedDistribution
    fees: Fees


class Participation(enum.Enum):
    STRICT_HOLD = "StrictHold"
    FAIL = "Fail"


class ParticipationResult(NamedTuple):
    status: Participation
    slack: float


@dataclass(frozen=True)
class Interval:
    """Closed interval of thresholds; ``closed_hi`` is False when the right end
    is only a limit point (the CDF jumps up there)."""

    lo: float
    hi: float
    closed_hi: bool = True


@dataclass(frozen=True)
class ThresholdSet:
    points: tuple = ()
    intervals: tuple = ()

    @property
    def is_empty(self) -> bool:
        return not self.points and not self.intervals

    def maximum(self) -> float:
        if self.is_empty:
            raise NoThreshold("no equilibrium threshold")
        return max([*self.points, *(iv.hi for iv in self.intervals)])

    def distance(self, tau: float) -> float:
        d = [abs(tau - p) for p in self.points]
        for iv in self.intervals:
            d.append(max(iv.lo - tau, tau - iv.hi, 0.0))
        return min(d) if d else math.inf

    def contains(self, tau: float, tol: float = MEMBER_TOL) -> bool:
        return self.distance(tau) <= tol

    def samples(self, interior: int = 9) -> list:
        """Points plus interval endpoints and ``interior`` evenly spaced inner values."""
        out = list(self.points)
        for iv in self.intervals:
            out.extend(np.linspace(iv.lo, iv.hi, interior + 2).tolist())
        return sorted(out)


@dataclass(frozen=True)
class EquilibriumOutcome:
    tau: float
    tested: float
    disclosure_prob: float
    nondisclosure_price: float
    revenue: float


class HighestThreshold(NamedTuple):
    tau: float
    strict: bool | None  # None in weak mode


def defect(dist: MixedDistribution, phi_d: float, tau):
    """``I(tau) - phi_d * G(tau)``; zero exactly at equilibrium thresholds."""
    return dist.cdf_integral(tau) - phi_d * dist.cdf(tau)


def participation(tf: TestFeeStructure) -> ParticipationResult:
    """Whether the asset is tested in every equilibrium.

    The slack is the option value of testing at the no-test cutoff
    ``mean + phi_d`` minus the testing fee. Only a strictly positive slack
    rules out the no-testing equilibrium.
    """
    g, f = tf.dist, tf.fees
    slack = g.option_value(g.mean + f.phi_d) - f.phi_t
    status = Participation.STRICT_HOLD if slack > PARTICIPATION_TOL else Participation.FAIL
    return ParticipationResult(status, slack)


# -- root finding -------------------------------------------------------------


def _quadratic_roots(a: float, b: float, c: float) -> list:
    if a == 0.0:
        return [-c / b] if b != 0.0 else []
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        if disc > -1e-15 * max(b * b, 1e-300):
            disc = 0.0
        else:
            return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return roots


def _piece_roots(dist: MixedDistribution, i: int, phi_d: float):
    """Threshold points and intervals inside piece ``i`` (on ``[a, b)``)."""
    p = dist.pieces[i]
    f = p.form
    area0 = dist._cum[i]
    width = p.width
    if isinstance(f, Flat):
        if f.c <= 0.0:
            return [], []
        offsets = [phi_d - area0 / f.c]
    elif isinstance(f, Affine):
        k = f.slope
        offsets = _quadratic_roots(0.5 * k, f.c0 - phi_d * k, area0 - phi_d * f.c0)
    else:
        c, r = f.coeff, f.rate
        const = area0 - c * r
        if abs(r - phi_d) <= RATE_TOL:
            if abs(const) <= RATE_TOL:
                hi_ok = abs(defect(dist, phi_d, p.b)) <= ROOT_TOL
                return [], [Interval(p.a, p.b, hi_ok)]
            return [], []
        ratio = -const / (c * (r - phi_d))
        offsets = [r * math.log(ratio)] if ratio > 0 else []
    points = []
    for u in offsets:
        if not (-1e-12 <= u < width):
            continue
        tau = p.a + max(u, 0.0)
        if dist.cdf(tau) > 0.0 and abs(defect(dist, phi_d, tau)) <= ROOT_TOL:
            points.append(tau)
    return points, []


def _scan(dist: MixedDistribution, phi_d: float) -> Iterator:
    """Yield ``(points, intervals)`` group by group from the top down."""
    if phi_d < 0:
        return
    top = dist.mean + phi_d
    if top >= dist.upper - 1e-12:
        yield [max(top, dist.upper)], []
    for i in range(len(dist.pieces) - 1, -1, -1):
        pts, ivs = _piece_roots(dist, i, phi_d)
        if pts or ivs:
            yield pts, ivs
    if phi_d == 0.0:
        # With no fee the bottom of the support is a threshold in the limit
        # sense even when it carries no atom: everyone discloses.
        yield [dist.lowest_score], []


def _assemble(groups) -> ThresholdSet:
    pts, ivs = [], []
    for p, v in groups:
        pts.extend(p)
        ivs.extend(v)
    ivs.sort(key=lambda iv: iv.lo)
    merged: list = []
    for iv in ivs:
        if merged and iv.lo <= merged[-1].hi + MEMBER_TOL:
            last = merged[-1]
            if iv.hi >= last.hi:
                merged[-1] = Interval(last.lo, iv.hi, iv.closed_hi)
        else:
            merged.append(iv)
    kept: list = []
    for t in sorted(pts):
        inside = [iv for iv in merged if iv.lo - MEMBER_TOL <= t <= iv.hi + MEMBER_TOL]
        if inside:
            for j, iv in enumerate(merged):
                if iv is inside[0] and not iv.closed_hi and abs(t - iv.hi) <= MEMBER_TOL:
                    merged[j] = Interval(iv.lo, iv.hi, True)
            continue
        if kept and t - kept[-1] <= 1e-12:
            continue
        kept.append(t)
    return ThresholdSet(tuple(kept), tuple(merged))


def equilibrium_thresholds(dist: MixedDistribution, phi_d: float) -> ThresholdSet:
    """All equilibrium thresholds for disclosure fee ``phi_d``.

    Members lie in ``[lowest score, max(upper, mean + phi_d)]``. Pieces whose
    exponential rate equals ``phi_d`` with a vanishing constant term give whole
    intervals. The set is empty only for negative fees.
    """
    return _assemble(_scan(dist, phi_d))


def highest_threshold(dist: MixedDistribution, phi_d: float, mode: str = "weak") -> HighestThreshold:
    """Largest threshold; in ``"strict"`` mode also report whether the defect is
    strictly positive everywhere above it.

    Raises
    ------
    NoThreshold
        When no threshold exists (negative ``phi_d``).
    """
    if mode not in ("weak", "strict"):
        raise ValueError(f"mode must be 'weak' or 'strict', not {mode!r}")
    group = next(_scan(dist, phi_d), None)
    if group is None:
        raise NoThreshold(f"no equilibrium threshold for phi_d={phi_d!r}")
    tau = _assemble([group]).maximum()
    if mode == "weak":
        return HighestThreshold(tau, None)
    # an interval can reach the top from a lower piece, so look at the full set
    full = equilibrium_thresholds(dist, phi_d)
    in_interval = any(iv.lo - MEMBER_TOL <= tau <= iv.hi + MEMBER_TOL for iv in full.intervals)
    return HighestThreshold(tau, not in_interval and _positive_above(dist, phi_d, tau))


def _positive_above(dist: MixedDistribution, phi_d: float, tau: float, n: int = 200) -> bool:
    end = max(dist.upper, dist.mean + phi_d)
    if tau >= end:
        end = tau + (dist.upper - dist.lower)
    grid = np.linspace(tau, end, n + 1)[1:]
    return bool(np.all(defect(dist, phi_d, grid) > 0.0))


def adversarial_outcome(tf: TestFeeStructure) -> EquilibriumOutcome:
    """Outcome of the intermediary-worst equilibrium.

    If participation is not strict the agent may skip the test and revenue is
    zero. Otherwise the asset is always tested and the worst equilibrium uses
    the highest threshold: scores strictly above it disclose, and an atom
    sitting exactly at it conceals.
    """
    g, f = tf.dist, tf.fees
    mu = g.mean
    part = participation(tf)
    if part.status is Participation.FAIL:
        return EquilibriumOutcome(mu + f.phi_d, 0.0, 0.0, mu, 0.0)
    if f.phi_d < 0:
        # every score prefers to disclose; non-disclosure is off path
        return EquilibriumOutcome(-math.inf, 1.0, 1.0, g.lower, f.phi_t + f.phi_d)
    tau = highest_threshold(g, f.phi_d).tau
    prob = 1.0 - g.cdf(tau)
    price = min(max(tau - f.phi_d, g.lower), mu)
    return EquilibriumOutcome(tau, 1.0, prob, price, f.phi_t + f.phi_d * prob)


def revenue_at(tf: TestFeeStructure, tau: float) -> float:
    """Revenue ``phi_t + phi_d * (1 - G(tau))`` at an equilibrium threshold.

    Raises
    ------
    NotAThreshold
        If ``tau`` is farther than ``1e-9`` from the threshold set.
    """
    g, f = tf.dist, tf.fees
    if not equilibrium_thresholds(g, f.phi_d).contains(tau, MEMBER_TOL):
        raise NotAThreshold(f"{tau!r} is not an equilibrium threshold")
    return f.phi_t + f.phi_d * (1.0 - g.cdf(tau))
