"""Brute-force equilibrium enumeration on finitely many scores.

This is deliberately independent of :mod:`testfee.equilibrium`: it never looks
at CDF pieces or defect roots, only at the score list, and checks every
candidate non-disclosure price for best-response consistency directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .equilibrium import (
    PARTICIPATION_TOL,
    Fees,
    TestFeeStructure,
    equilibrium_thresholds,
    participation,
    Participation,
)
from .errors import NotNearFullSurplus
from .measure import FinitePmf

BR_TOL = 1e-12


class Kind(enum.Enum):
    NO_TEST = "NoTest"
    THRESHOLD = "Threshold"
    MIXED_AT_ATOM = "MixedAtAtom"


@dataclass(frozen=True)
class OracleEquilibrium:
    """One outcome class of the disclosure game.

    For ``THRESHOLD`` the ``tau_or_atom`` field is the cutoff
    ``nondisclosure_price + phi_d`` (scores above it disclose); for
    ``MIXED_AT_ATOM`` it is the atom at which the agent randomizes, disclosing
    with probability ``mix_lambda``; for ``NO_TEST`` it is the off-path cutoff
    ``mean + phi_d``.
    """

    kind: Kind
    tau_or_atom: float
    mix_lambda: float | None
    nondisclosure_price: float
    disclosure_prob: float
    revenue: float


def _testing_pays(pmf: FinitePmf, fees: Fees, price: float) -> bool:
    # testing beats staying untested at non-disclosure price ``price``
    return fees.phi_t <= pmf.option_value(price + fees.phi_d) + BR_TOL


def enumerate_equilibria(pmf: FinitePmf, fees: Fees) -> list:
    """All pure-threshold, mixed-at-atom and no-testing equilibria.

    Candidate prices are the conditional means of every nonempty prefix of the
    sorted scores (pure cutoffs) and, for each atom, the unique price at which
    that atom is indifferent while randomizing. A full-disclosure candidate
    (empty prefix) only arises with a zero disclosure fee, where it coincides
    with randomization at the lowest atom.
    """
    s, m = pmf.scores.tolist(), pmf.masses.tolist()
    n = len(s)
    phi_t, phi_d = fees.phi_t, fees.phi_d
    mu = pmf.mean
    out = []

    if phi_t >= pmf.option_value(mu + phi_d) - PARTICIPATION_TOL:
        out.append(OracleEquilibrium(Kind.NO_TEST, mu + phi_d, None, mu, 0.0, 0.0))

    below_mass = below_moment = 0.0
    for k in range(n):
        # mixing at atom k: lower scores conceal, a share 1 - lam of atom k conceals
        if phi_d > 0 and below_mass > 0:
            target = s[k] - phi_d
            conceal_share = (target * below_mass - below_moment) / (m[k] * phi_d)
            if 0.0 < conceal_share < 1.0:
                lam = 1.0 - conceal_share
                price = target
                if _consistent(s, price, phi_d, conceal_upto=k, mixed=True) and _testing_pays(pmf, fees, price):
                    prob = math.fsum(m[k + 1:]) + lam * m[k]
                    out.append(OracleEquilibrium(Kind.MIXED_AT_ATOM, s[k], lam, price, prob,
                                                 phi_t + phi_d * prob))
        below_mass += m[k]
        below_moment += s[k] * m[k]
        # pure cutoff: scores 0..k conceal
        price = below_moment / below_mass
        if _consistent(s, price, phi_d, conceal_upto=k) and _testing_pays(pmf, fees, price):
            prob = math.fsum(m[k + 1:])
            out.append(OracleEquilibrium(Kind.THRESHOLD, price + phi_d, None, price, prob,
                                         phi_t + phi_d * prob))

    if phi_d == 0 and n and _testing_pays(pmf, fees, s[0]):
        # with a free disclosure the lowest score is indifferent, so full disclosure
        # sits at the end of the continuum of mixtures over the lowest atom
        out.append(OracleEquilibrium(Kind.THRESHOLD, s[0], None, s[0], 1.0, phi_t))
    return out


def _consistent(s, price, phi_d, conceal_upto, mixed=False) -> bool:
    """Best responses: scores with ``s - phi_d > price`` disclose, ``<`` conceal."""
    for i, si in enumerate(s):
        gain = si - phi_d - price
        if i < conceal_upto or (i == conceal_upto and not mixed):
            if gain > BR_TOL:
                return False
        elif i == conceal_upto:
            if abs(gain) > 1e-10:
                return False
        elif gain < -BR_TOL:
            return False
    return True


def adversarial_revenue_bruteforce(pmf: FinitePmf, fees: Fees) -> float:
    """Lowest revenue across all enumerated equilibria."""
    eqs = enumerate_equilibria(pmf, fees)
    return min(e.revenue for e in eqs)


def max_revenue_bruteforce(pmf: FinitePmf, fees: Fees) -> float:
    return max(e.revenue for e in enumerate_equilibria(pmf, fees))


# -- low-revenue witnesses ------------------------------------------------------


class Witness(NamedTuple):
    equilibrium: OracleEquilibrium
    bound: float


def full_surplus(lower: float, mean: float) -> float:
    return mean - lower


def epsilon_star(lower: float, upper: float, mean: float) -> float:
    """Largest shortfall for which the low-revenue bound applies."""
    return ((mean - lower) / (1.0 + upper)) ** 2


def witness_bound(lower: float, upper: float, mean: float, eps: float) -> float:
    """Revenue cap ``(upper-mean)/(mean-lower) * eps + sqrt(eps) * (upper-mean)``."""
    return (upper - mean) / (mean - lower) * eps + math.sqrt(eps) * (upper - mean)


def low_revenue_witness(tf: TestFeeStructure, eps: float) -> Witness:
    """A bad equilibrium for a structure that can nearly extract full surplus.

    If some equilibrium of ``tf`` earns at least ``mean - lower - eps``, there
    is another one earning at most ``witness_bound(eps)``. It is either the
    no-testing equilibrium (participation not strict) or the threshold
    equilibrium at the highest threshold.

    Raises
    ------
    ValueError
        If ``eps`` exceeds :func:`epsilon_star`.
    NotNearFullSurplus
        If ``tf`` is finitely supported and no equilibrium comes within ``eps``
        of full surplus.
    """
    g, fees = tf.dist, tf.fees
    lo, hi, mu = g.lower, g.upper, g.mean
    if not lo < mu < hi:
        raise ValueError("witness needs a nondegenerate mean")
    if not 0 <= eps <= epsilon_star(lo, hi, mu):
        raise ValueError(f"eps={eps!r} outside [0, {epsilon_star(lo, hi, mu)!r}]")
    bound = witness_bound(lo, hi, mu, eps)
    if g.is_discrete:
        best = max_revenue_bruteforce(g.to_pmf(), fees)
        if best < full_surplus(lo, mu) - eps:
            raise NotNearFullSurplus(
                f"best equilibrium revenue {best!r} is below {full_surplus(lo, mu) - eps!r}")
    if participation(tf).status is Participation.FAIL:
        return Witness(OracleEquilibrium(Kind.NO_TEST, mu + fees.phi_d, None, mu, 0.0, 0.0), bound)
    tau = equilibrium_thresholds(g, fees.phi_d).maximum()
    prob = 1.0 - g.cdf(tau)
    price = min(max(tau - fees.phi_d, lo), mu)
    eq = OracleEquilibrium(Kind.THRESHOLD, tau, None, price, prob, fees.phi_t + fees.phi_d * prob)
    return Witness(eq, bound)
