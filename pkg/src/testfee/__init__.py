"""Robust design and pricing of tests whose scores an agent may disclose for a fee."""

from .demand import DemandPoint, best_two_part_tariff, demand_correspondence, robust_demand
from .designer import (
    OptimizeConfig,
    RelaxedSolution,
    SesParams,
    binary_optimal,
    epsilon_implement,
    optimize,
    ses_build,
    upper_bound,
    zero_disclosure_benchmark,
)
from .equilibrium import (
    EquilibriumOutcome,
    Fees,
    Participation,
    TestFeeStructure,
    ThresholdSet,
    adversarial_outcome,
    equilibrium_thresholds,
    highest_threshold,
    participation,
    revenue_at,
)
from .measure import FinitePmf, MixedDistribution, discretize, from_literal, is_mpc, to_literal
from .oracle import adversarial_revenue_bruteforce, enumerate_equilibria, low_revenue_witness

__version__ = "0.1.0"
