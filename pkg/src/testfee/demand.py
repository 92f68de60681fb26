"""Demand for disclosure as a function of the disclosure fee, and two-part tariff sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .equilibrium import Fees, Participation, TestFeeStructure, equilibrium_thresholds, participation
from .measure import MixedDistribution, discretize
from .oracle import Kind, enumerate_equilibria

PROB_DIGITS = 12  # probabilities closer than this are merged
TIE_TOL = 1e-12


@dataclass(frozen=True)
class DemandPoint:
    phi_d: float
    disclosure_probs: tuple
    robust_prob: float
    robust_revenue: float
    approximate: bool = False  # mixed equilibria taken from a discretized copy
    has_interval: bool = False  # a continuum of thresholds at this fee


class TariffChoice(NamedTuple):
    fees: Fees
    revenue: float
    needs_eps: bool  # the binding testing fee only attains the revenue as a limit


def _binding_fee(dist: MixedDistribution, phi_d: float) -> float:
    return max(dist.option_value(dist.mean + phi_d), 0.0)


def demand_point(dist: MixedDistribution, phi_d: float, discretize_n: int | None = None) -> DemandPoint:
    ts = equilibrium_thresholds(dist, phi_d)
    probs = {}

    def add(q):
        probs.setdefault(round(q, PROB_DIGITS), q)

    for t in ts.samples(9):
        add(1.0 - dist.cdf(t))
    approximate = False
    pmf = None
    if dist.is_discrete:
        pmf = dist.to_pmf()
    elif discretize_n:
        pmf, approximate = discretize(dist, discretize_n), True
    if pmf is not None:
        # testing is free here: the correspondence is about disclosure given testing
        for eq in enumerate_equilibria(pmf, Fees(0.0, phi_d)):
            if eq.kind is Kind.MIXED_AT_ATOM:
                add(eq.disclosure_prob)
    probs = tuple(sorted(probs.values()))
    robust = probs[0]
    revenue = _binding_fee(dist, phi_d) + phi_d * robust
    return DemandPoint(phi_d, probs, robust, revenue, approximate, bool(ts.intervals))


def demand_correspondence(dist: MixedDistribution, grid: Sequence[float],
                          discretize_n: int | None = None) -> list:
    """Disclosure probabilities of all equilibria at each disclosure fee in ``grid``.

    Thresholds contribute ``1 - G(tau)``; a continuum of thresholds contributes
    its endpoints and 9 interior samples. Mixed equilibria at atoms are added
    exactly when ``dist`` is finitely supported, or approximately from
    ``discretize(dist, discretize_n)`` when that is given.
    """
    if any(f < 0 for f in grid):
        raise ValueError("disclosure fees in the grid must be nonnegative")
    return [demand_point(dist, float(f), discretize_n) for f in grid]


def robust_demand(dist: MixedDistribution, grid: Sequence[float]) -> list:
    """``(phi_d, lowest disclosure probability)`` for each fee."""
    return [(p.phi_d, p.robust_prob) for p in demand_correspondence(dist, grid)]


def best_two_part_tariff(dist: MixedDistribution, grid: Sequence[float]) -> TariffChoice:
    """Best fee pair for a fixed test over a grid of disclosure fees.

    Each disclosure fee is paired with the highest testing fee participation
    allows, so the reported revenue is a supremum: realizing it needs a slightly
    lower testing fee. Ties go to the lowest disclosure fee.
    """
    best = None
    for p in demand_correspondence(dist, sorted(grid)):
        if best is None or p.robust_revenue > best.robust_revenue + TIE_TOL:
            best = p
    if best is None:
        raise ValueError("empty fee grid")
    fees = Fees(_binding_fee(dist, best.phi_d), best.phi_d)
    needs_eps = participation(TestFeeStructure(dist, fees)).status is Participation.FAIL
    return TariffChoice(fees, best.robust_revenue, needs_eps)


def fee_grid(start: float, stop: float, step: float) -> list:
    """Inclusive arithmetic grid, robust to rounding of the last point."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(round((stop - start) / step + 1e-9))
    if n < 0:
        return []
    return [round(start + i * step, 12) for i in range(n + 1)]


def to_csv(points: Sequence[DemandPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi_d", "robust_prob", "robust_revenue", "n_equilibria", "probs"])
    for p in points:
        w.writerow([f"{p.phi_d:.9g}", f"{p.robust_prob:.9g}", f"{p.robust_revenue:.9g}",
                    len(p.disclosure_probs), ";".join(f"{q:.9g}" for q in p.disclosure_probs)])
    return buf.getvalue()
