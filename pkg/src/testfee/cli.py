"""Command-line front end: ``eval``, ``solve``, ``demand``, ``verify`` and ``repro``.

Scenario files are JSON objects::

    {"prior": <distribution>, "test": <distribution>,
     "fees": {"phi_t": 0.0, "phi_d": 0.4}, "optimizer": {"starts": 8}}

where a distribution is ``{"lower", "upper", "atoms": [{"x", "mass"}],
"segments": [{"a", "b", "form", "params"}]}``. Only ``prior`` is required.

Exit codes: 0 ok, 2 usage or validation error, 3 infeasible (test is not a
contraction of the prior, or no structure found), 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import verify as vf
from .demand import best_two_part_tariff, demand_correspondence, fee_grid, robust_demand, to_csv
from .designer import (
    OptimizeConfig,
    binary_optimal,
    optimize,
    upper_bound,
    zero_disclosure_benchmark,
)
from .equilibrium import (
    Fees,
    TestFeeStructure,
    adversarial_outcome,
    equilibrium_thresholds,
    participation,
)
from .errors import Infeasible, TestFeeError
from .measure import FinitePmf, MixedDistribution, from_literal, is_mpc
from .oracle import enumerate_equilibria, epsilon_star, witness_bound, Kind

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return "none"
    return f"{float(x):.9g}"


def _round(obj):
    """Round every float to 9 significant digits for JSON output."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _emit(lines: list, payload: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(_round(payload), indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


# -- scenario ---------------------------------------------------------------------


class Scenario:
    def __init__(self, prior: MixedDistribution, test=None, fees=None, optimizer=None):
        self.prior = prior
        self.test = test
        self.fees = fees
        self.optimizer = optimizer or {}


def load_scenario(path: str | None) -> Scenario:
    if not path:
        raise UsageError("--scenario is required")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read scenario: {exc}") from None
    if not isinstance(raw, dict) or "prior" not in raw:
        raise UsageError("scenario needs a 'prior' distribution")
    prior = from_literal(raw["prior"])
    test = from_literal(raw["test"]) if raw.get("test") else None
    fees = None
    if raw.get("fees") is not None:
        try:
            fees = Fees(float(raw["fees"]["phi_t"]), float(raw["fees"]["phi_d"]))
        except (KeyError, TypeError, ValueError):
            raise UsageError("fees need numeric phi_t and phi_d") from None
    if test is not None:
        chk = is_mpc(test, prior)
        if not chk:
            raise Infeasible(f"test is not a mean-preserving contraction of the prior "
                             f"(violation {fmt(chk.max_violation)}, mean gap {fmt(chk.mean_gap)})")
    return Scenario(prior, test, fees, raw.get("optimizer"))


# -- commands ---------------------------------------------------------------------


def _threshold_text(ts) -> str:
    parts = [fmt(p) for p in ts.points]
    parts += [f"[{fmt(iv.lo)}, {fmt(iv.hi)}{']' if iv.closed_hi else ')'}" for iv in ts.intervals]
    return "{" + ", ".join(parts) + "}"


def cmd_eval(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.test is None or sc.fees is None:
        raise UsageError("eval needs 'test' and 'fees' in the scenario")
    tf = TestFeeStructure(sc.test, sc.fees)
    part = participation(tf)
    ts = equilibrium_thresholds(sc.test, sc.fees.phi_d)
    out = adversarial_outcome(tf)
    lines = [
        f"participation: {part.status.value} (slack {fmt(part.slack)})",
        f"thresholds: {_threshold_text(ts)}",
        f"adversarial tau: {fmt(out.tau)}",
        f"test_prob: {fmt(out.tested)}",
        f"disclosure_prob: {fmt(out.disclosure_prob)}",
        f"nondisclosure_price: {fmt(out.nondisclosure_price)}",
        f"revenue: {fmt(out.revenue)}",
    ]
    payload = {
        "participation": part.status.value, "slack": part.slack,
        "threshold_points": list(ts.points),
        "threshold_intervals": [[iv.lo, iv.hi] for iv in ts.intervals],
        "tau": out.tau, "test_prob": out.tested, "disclosure_prob": out.disclosure_prob,
        "nondisclosure_price": out.nondisclosure_price, "revenue": out.revenue,
    }
    if ts.intervals or part.status.value == "Fail":
        eps = args.eps
        if 0 < eps < sc.fees.phi_d:
            shifted = TestFeeStructure(sc.test, Fees(max(sc.fees.phi_t - eps, 0.0), sc.fees.phi_d - eps))
            rev = adversarial_outcome(shifted).revenue
            lines.append(f"revenue at fees lowered by eps={fmt(eps)}: {fmt(rev)}")
            payload["eps"], payload["eps_revenue"] = eps, rev
    if ts.intervals:
        print("warning: interval-degenerate; use --eps", file=sys.stderr)
        payload["warning"] = "interval-degenerate; use --eps"
    _emit(lines, payload, args.json)
    return EXIT_OK


def _solve_prior(prior: MixedDistribution, cfg: dict, eps: float):
    atoms = prior.atoms()
    if prior.is_discrete and len(atoms) == 2:
        (x0, _), (x1, _) = atoms
        return binary_optimal(x0, x1, prior.mean, eps)
    return optimize(prior, OptimizeConfig.from_dict({**cfg, "eps": eps}))


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    prior = sc.prior
    try:
        sol = _solve_prior(prior, sc.optimizer, args.eps)
    except ValueError as exc:  # bad optimizer settings
        if isinstance(exc, TestFeeError):
            raise
        raise UsageError(str(exc)) from None
    bound = upper_bound(prior.lower, prior.upper, prior.mean)
    bench = zero_disclosure_benchmark(prior)
    f, fi = sol.structure.fees, sol.implementable.fees
    lines = []
    if sol.params is not None:
        p = sol.params
        lines.append(f"ses: tau0={fmt(p.tau0)} tau1={fmt(p.tau1)} tau2={fmt(p.tau2)} "
                     f"tau3={fmt(p.tau3)} g={fmt(p.g)}")
    else:
        lines.append("ses: none (zero-disclosure-fee benchmark)")
    lines += [
        f"fees: phi_t={fmt(f.phi_t)} phi_d={fmt(f.phi_d)}",
        f"relaxed_revenue: {fmt(sol.relaxed_revenue)}",
        f"implementable (eps={fmt(sol.eps)}): phi_t={fmt(fi.phi_t)} phi_d={fmt(fi.phi_d)} "
        f"revenue={fmt(sol.guaranteed_revenue)}",
        f"upper_bound: {fmt(bound)}",
        f"benchmark_revenue: {fmt(bench.fees.phi_t)}",
    ]
    payload = {
        "params": None if sol.params is None else vars(sol.params),
        "fees": {"phi_t": f.phi_t, "phi_d": f.phi_d},
        "relaxed_revenue": sol.relaxed_revenue,
        "eps": sol.eps,
        "implementable_fees": {"phi_t": fi.phi_t, "phi_d": fi.phi_d},
        "guaranteed_revenue": sol.guaranteed_revenue,
        "upper_bound": bound,
        "benchmark_revenue": bench.fees.phi_t,
    }
    _emit(lines, payload, args.json)
    return EXIT_OK


def parse_grid(text: str) -> list:
    try:
        a, b, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--grid wants a:b:step, got {text!r}") from None
    if step <= 0:
        raise UsageError("grid step must be positive")
    grid = fee_grid(a, b, step)
    if not grid:
        raise UsageError(f"grid {text!r} is empty")
    if grid[0] < 0:
        raise UsageError("disclosure fees must be nonnegative")
    return grid


def cmd_demand(args) -> int:
    sc = load_scenario(args.scenario)
    grid = parse_grid(args.grid)
    dist = sc.test if sc.test is not None else sc.prior
    points = demand_correspondence(dist, grid, args.discretize)
    text = to_csv(points)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for p in points:
        if p.has_interval:
            print(f"note: continuum of thresholds at phi_d={fmt(p.phi_d)} "
                  f"(probs span [{fmt(p.disclosure_probs[0])}, {fmt(p.disclosure_probs[-1])}])",
                  file=sys.stderr)
    if any(p.approximate for p in points):
        print("note: mixed equilibria taken from a discretized copy", file=sys.stderr)
    tariff = best_two_part_tariff(dist, grid)
    print(f"best tariff: phi_t={fmt(tariff.fees.phi_t)} phi_d={fmt(tariff.fees.phi_d)} "
          f"revenue={fmt(tariff.revenue)}{' (supremum)' if tariff.needs_eps else ''}", file=sys.stderr)
    return EXIT_OK


def run_suites(seed: int, cases: int, tol: float) -> list:
    small = min(cases, 200)
    return [
        vf.engine_oracle_suite(seed, cases, tol=tol),
        vf.integration_by_parts_suite(seed + 1, small),
        vf.boundspeed_suite(seed + 2, small),
        vf.weak_he_suite(seed + 3, small),
        vf.designer_mpc_suite(seed + 4, small),
        vf.revenue_identity_suite(seed + 5, small),
        vf.monotone_demand_suite(seed + 6, small),
        vf.low_revenue_suite(seed + 7, min(cases, 50)),
    ]


def cmd_verify(args) -> int:
    if args.cases <= 0:
        raise UsageError("--cases must be positive")
    reports = run_suites(args.seed, args.cases, args.tol)
    for r in reports:
        print(r.line())
        for f in r.failures:
            print(f"  failure: {f}")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VERIFY


# -- repro ------------------------------------------------------------------------


def _binary() -> MixedDistribution:
    return MixedDistribution.binary(0.0, 1.0, 0.5)


def table1_test(p: float) -> FinitePmf:
    """Scores 0, 3/4, 1 from a value that is 0 or 1 with equal odds.

    Value 0 scores 0 w.p. ``1 - p`` and 3/4 w.p. ``p``; value 1 scores 3/4
    w.p. ``3p`` and 1 otherwise.
    """
    return FinitePmf(((0.0, 0.5 * (1 - p)), (0.75, 2 * p), (1.0, 0.5 * (1 - 3 * p))), 0.0, 1.0)


def _tariff_rows(dist, grid) -> list:
    t = best_two_part_tariff(dist, grid)
    return [("best phi_d", t.fees.phi_d), ("best phi_t", t.fees.phi_t), ("robust revenue", t.revenue)]


def repro(name: str) -> list:
    """``(label, value)`` rows reproducing a worked example."""
    grid = fee_grid(0.0, 1.0, 0.01)
    if name == "fig2a":
        d = _binary()
        rows = [(f"robust demand at {f}", q) for f, q in robust_demand(d, [0.1, 0.4, 0.49, 0.5, 0.6])]
        return rows + _tariff_rows(d, grid) + [("target", 0.25)]
    if name == "fig2b":
        d = table1_test(1 / 9).to_distribution()
        rows = [(f"robust demand at {f}", q) for f, q in robust_demand(d, [0.1, 0.49, 0.6])]
        return rows + _tariff_rows(d, grid) + [("target (1+p)/4", 5 / 18)]
    if name == "fig2c":
        d = binary_optimal(0.0, 1.0, 0.5).structure.dist
        pts = demand_correspondence(d, [0.49, 0.5])
        rows = [(f"robust demand at {p.phi_d}", p.robust_prob) for p in pts]
        rows.append(("demand span at 0.5", pts[1].disclosure_probs[-1] - pts[1].disclosure_probs[0]))
        return rows + _tariff_rows(d, grid) + [("target (1-1/e)/2", 0.5 * (1 - math.exp(-1)))]
    if name == "fig4":
        sol = binary_optimal(0.0, 1.0, 0.5)
        d, p = sol.structure.dist, sol.params
        return [("bottom atom g", p.g), ("cdf at 0.3", d.cdf(0.3)), ("cdf at 0.75", d.cdf(0.75)),
                ("phi_d", p.phi_d), ("phi_t", sol.structure.fees.phi_t),
                ("relaxed revenue", sol.relaxed_revenue),
                (f"guaranteed revenue (eps={fmt(sol.eps)})", sol.guaranteed_revenue)]
    if name == "table1":
        d = table1_test(1 / 9).to_distribution()
        rows = _tariff_rows(d, grid) + [("target 5/18", 5 / 18)]
        bad = [e for e in enumerate_equilibria(table1_test(0.2), Fees(0.0, 0.49))
               if e.kind is Kind.THRESHOLD]
        rows.append(("p=0.2 lowest disclosure prob", min(e.disclosure_prob for e in bad)))
        rows.append(("target (1-3p)/2", (1 - 3 * 0.2) / 2))
        return rows
    if name == "prop1":
        lo, hi, mu = 0.0, 1.0, 0.5
        rows = [("eps*", epsilon_star(lo, hi, mu))]
        rows += [(f"delta({e})", witness_bound(lo, hi, mu, e)) for e in (0.01, 0.04)]
        return rows
    raise UsageError(f"unknown example {name!r}")


REPRO_NAMES = ("fig2a", "fig2b", "fig2c", "fig4", "table1", "prop1")


def cmd_repro(args) -> int:
    rows = repro(args.example)
    _emit([f"{k}: {fmt(v)}" for k, v in rows], {k: v for k, v in rows}, args.json)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="testfee", description="Robust test-fee structures.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", metavar="PATH")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--eps", type=float, default=1e-4,
                       help="fee shift used for interval-degenerate structures (default 1e-4)")

    p = sub.add_parser("eval", help="participation, thresholds and adversarial revenue")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("solve", help="robustly optimal structure for the prior")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("demand", help="demand correspondence as CSV")
    common(p)
    p.add_argument("--grid", default="0:1:0.01", metavar="A:B:STEP")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--discretize", type=int, default=None, metavar="N",
                   help="add approximate mixed equilibria from an N-cell discretization")
    p.set_defaults(func=cmd_demand)

    p = sub.add_parser("verify", help="randomized engine-vs-oracle and inequality suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-9, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repro", help="reproduce a worked example")
    p.add_argument("example", choices=REPRO_NAMES)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_repro)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, TestFeeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
