"""Exact calculus for score distributions built from atoms and closed-form CDF pieces.

A distribution on ``[lower, upper]`` is a list of pieces ``(a, b, form)``, each
giving the CDF on ``[a, b)``. Atoms are not stored separately: they are the
jumps between consecutive pieces, the value of the first piece at ``lower`` and
the gap between the last piece's left limit and 1 at ``upper``.

Every quantity used downstream (the CDF ``G``, its running integral ``I``, means,
conditional means, option values) has a closed form on each piece, so nothing in
here needs quadrature.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import lambertw

from .errors import DomainMismatch, InvalidDistribution, ZeroMassBelow

CDF_TOL = 1e-12
ATOM_TOL = 1e-14

ArrayLike = Union[float, np.ndarray]


# --------------------------------------------------------------------------
# piece forms; ``u`` is always the offset from the piece's left end
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Flat:
    """Constant CDF level ``c``."""

    c: float

    def value(self, u):
        return self.c + 0.0 * u

    def area(self, u):
        return self.c * u

    @property
    def has_density(self) -> bool:
        return False


@dataclass(frozen=True)
class Affine:
    """CDF ``c0 + slope * u``; ``c0`` is the level at the piece's left end."""

    c0: float
    slope: float

    def value(self, u):
        return self.c0 + self.slope * u

    def area(self, u):
        return self.c0 * u + 0.5 * self.slope * u * u

    @property
    def has_density(self) -> bool:
        return self.slope > 0


@dataclass(frozen=True)
class ExpCdf:
    """CDF ``coeff * exp(u / rate)``.

    ``coeff`` is the level at the piece's left end and ``rate`` is a length:
    the CDF grows by a factor ``e`` every ``rate`` units of score.
    """

    coeff: float
    rate: float

    def value(self, u):
        return self.coeff * np.exp(u / self.rate)

    def area(self, u):
        return self.coeff * self.rate * np.expm1(u / self.rate)

    @property
    def has_density(self) -> bool:
        return True


Form = Union[Flat, Affine, ExpCdf]


@dataclass(frozen=True)
class Piece:
    a: float
    b: float
    form: Form

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def width(self) -> float:
        return self.b - self.a

    def left_value(self) -> float:
        return float(self.form.value(0.0))

    def right_limit(self) -> float:
        return float(self.form.value(self.width))


# --------------------------------------------------------------------------
# finite pmfs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FinitePmf:
    """Finitely supported score distribution.

    ``points`` holds ``(score, mass)`` pairs with strictly increasing scores.
    ``lower`` and ``upper`` default to the extreme scores.
    """

    points: tuple
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        pts = tuple((float(s), float(m)) for s, m in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise InvalidDistribution("empty pmf")
        if any(m <= 0 for _, m in pts):
            raise InvalidDistribution("pmf masses must be positive")
        if any(pts[i][0] >= pts[i + 1][0] for i in range(len(pts) - 1)):
            raise InvalidDistribution("pmf scores must be strictly increasing")
        total = math.fsum(m for _, m in pts)
        if abs(total - 1.0) > CDF_TOL:
            raise InvalidDistribution(f"pmf masses sum to {total!r}")
        lo = pts[0][0] if self.lower is None else float(self.lower)
        hi = pts[-1][0] if self.upper is None else float(self.upper)
        if pts[0][0] < lo or pts[-1][0] > hi:
            raise InvalidDistribution("pmf scores outside [lower, upper]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for s, _ in self.points])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.points])

    @property
    def mean(self) -> float:
        return math.fsum(s * m for s, m in self.points)

    def option_value(self, cutoff: float) -> float:
        return math.fsum(m * (s - cutoff) for s, m in self.points if s > cutoff)

    def to_distribution(self) -> "MixedDistribution":
        return MixedDistribution.from_atoms(self.points, self.lower, self.upper)

    def __len__(self):
        return len(self.points)


# --------------------------------------------------------------------------
# mixed distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedDistribution:
    """Score CDF on ``[lower, upper]`` made of Flat, Affine and ExpCdf pieces.

    Parameters
    ----------
    lower, upper : float
        Support bounds, ``lower < upper``.
    pieces : sequence of Piece
        Must tile ``[lower, upper]`` in order. Piece ``i`` gives the CDF on
        ``[a_i, b_i)``; the CDF equals 1 from ``upper`` on.
    """

    lower: float
    upper: float
    pieces: tuple
    _starts: tuple = field(init=False, repr=False, compare=False)
    _cum: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        _validate(lo, hi, pieces)
        cum = [0.0]
        for p in pieces[:-1]:
            cum.append(cum[-1] + float(p.form.area(p.width)))
        object.__setattr__(self, "_starts", tuple(p.a for p in pieces))
        object.__setattr__(self, "_cum", tuple(cum))

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_atoms(cls, points: Iterable, lower: float | None = None,
                   upper: float | None = None) -> "MixedDistribution":
        """Step CDF with the given ``(score, mass)`` atoms."""
        pts = sorted((float(s), float(m)) for s, m in points)
        if not pts:
            raise InvalidDistribution("no atoms given")
        lo = pts[0][0] if lower is None else float(lower)
        hi = pts[-1][0] if upper is None else float(upper)
        if not lo < hi:
            raise InvalidDistribution("need lower < upper")
        if pts[0][0] < lo or pts[-1][0] > hi:
            raise InvalidDistribution("atom outside [lower, upper]")
        if any(m < 0 for _, m in pts):
            raise InvalidDistribution("negative atom mass")
        total = math.fsum(m for _, m in pts)
        if abs(total - 1.0) > CDF_TOL:
            raise InvalidDistribution(f"atom masses sum to {total!r}")
        cuts = sorted({lo, hi, *(s for s, _ in pts if lo < s < hi)})
        pieces = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            level = math.fsum(m for s, m in pts if s <= a)
            pieces.append(Piece(a, b, Flat(min(level, 1.0))))
        return cls(lo, hi, tuple(pieces))

    @classmethod
    def uniform(cls, lower: float, upper: float) -> "MixedDistribution":
        return cls(lower, upper, (Piece(lower, upper, Affine(0.0, 1.0 / (upper - lower))),))

    @classmethod
    def binary(cls, lower: float, upper: float, mean: float) -> "MixedDistribution":
        """Two atoms at the support bounds with the given mean."""
        p_hi = (mean - lower) / (upper - lower)
        return cls.from_atoms([(lower, 1.0 - p_hi), (upper, p_hi)], lower, upper)

    @classmethod
    def point_mass(cls, x: float, lower: float, upper: float) -> "MixedDistribution":
        return cls.from_atoms([(x, 1.0)], lower, upper)

    # -- evaluation ---------------------------------------------------------

    def _index(self, x: float) -> int:
        return bisect.bisect_right(self._starts, x) - 1

    def cdf(self, x: ArrayLike) -> ArrayLike:
        """Right-continuous CDF; 0 below ``lower`` and 1 from ``upper`` on."""
        if np.ndim(x) == 0:
            x = float(x)
            if x < self.lower:
                return 0.0
            if x >= self.upper:
                return 1.0
            p = self.pieces[self._index(x)]
            return float(p.form.value(x - p.a))
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.upper, 1.0, 0.0)
        inside = (x >= self.lower) & (x < self.upper)
        idx = np.searchsorted(self._starts, x, side="right") - 1
        for i, p in enumerate(self.pieces):
            m = inside & (idx == i)
            if m.any():
                out[m] = p.form.value(x[m] - p.a)
        return out

    def cdf_left(self, x: float) -> float:
        """Left limit ``G(x-)``."""
        x = float(x)
        if x <= self.lower:
            return 0.0
        if x > self.upper:
            return 1.0
        i = bisect.bisect_left(self._starts, x) - 1
        p = self.pieces[i]
        return float(p.form.value(x - p.a))

    def cdf_integral(self, x: ArrayLike) -> ArrayLike:
        """``I(x)``, the integral of the CDF from ``lower`` to ``x``."""
        if np.ndim(x) == 0:
            x = float(x)
            if x <= self.lower:
                return 0.0
            if x >= self.upper:
                return self.total_area + (x - self.upper)
            i = self._index(x)
            p = self.pieces[i]
            return self._cum[i] + float(p.form.area(x - p.a))
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        above = x >= self.upper
        out[above] = self.total_area + (x[above] - self.upper)
        inside = (x > self.lower) & ~above
        idx = np.searchsorted(self._starts, x, side="right") - 1
        for i, p in enumerate(self.pieces):
            m = inside & (idx == i)
            if m.any():
                out[m] = self._cum[i] + p.form.area(x[m] - p.a)
        return out

    @property
    def total_area(self) -> float:
        p = self.pieces[-1]
        return self._cum[-1] + float(p.form.area(p.width))

    @property
    def mean(self) -> float:
        return self.upper - self.total_area

    def conditional_mean_below(self, tau: float) -> float:
        """Mean score given ``s <= tau``, atom at ``tau`` included.

        Raises
        ------
        ZeroMassBelow
            If the CDF vanishes at ``tau``.
        """
        g = self.cdf(tau)
        if g <= 0.0:
            raise ZeroMassBelow(f"no mass at or below {tau!r}")
        val = tau - self.cdf_integral(tau) / g
        return min(max(val, self.lower), min(tau, self.upper))

    def option_value(self, cutoff: float) -> float:
        """Expected excess ``E[(s - cutoff)^+]``, i.e. the integral of ``1 - G`` above ``cutoff``."""
        if cutoff >= self.upper:
            return 0.0
        val = (self.upper - cutoff) - (self.total_area - self.cdf_integral(cutoff))
        return max(val, 0.0)

    # -- structure ----------------------------------------------------------

    @property
    def breakpoints(self) -> tuple:
        return self._starts + (self.upper,)

    def atoms(self) -> list:
        """``(score, mass)`` for every jump larger than ``ATOM_TOL``."""
        out = []
        first = self.pieces[0].left_value()
        if first > ATOM_TOL:
            out.append((self.lower, first))
        for prev, nxt in zip(self.pieces[:-1], self.pieces[1:]):
            jump = nxt.left_value() - prev.right_limit()
            if jump > ATOM_TOL:
                out.append((nxt.a, jump))
        top = 1.0 - self.pieces[-1].right_limit()
        if top > ATOM_TOL:
            out.append((self.upper, top))
        return out

    @property
    def is_discrete(self) -> bool:
        return not any(p.form.has_density for p in self.pieces)

    @property
    def lowest_score(self) -> float:
        """Infimum of the support."""
        for p in self.pieces:
            if p.form.has_density or p.left_value() > 0.0:
                return p.a
        return self.upper

    def to_pmf(self) -> FinitePmf:
        if not self.is_discrete:
            raise InvalidDistribution("distribution has a continuous part")
        pts = self.atoms()
        total = math.fsum(m for _, m in pts)
        pts = [(s, m / total) for s, m in pts]
        return FinitePmf(tuple(pts), self.lower, self.upper)


def _validate(lo: float, hi: float, pieces: Sequence[Piece]) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidDistribution(f"bad support [{lo}, {hi}]")
    if not pieces:
        raise InvalidDistribution("no pieces")
    if abs(pieces[0].a - lo) > CDF_TOL or abs(pieces[-1].b - hi) > CDF_TOL:
        raise InvalidDistribution("pieces must start at lower and end at upper")
    prev_end = 0.0
    for i, p in enumerate(pieces):
        if not p.a < p.b:
            raise InvalidDistribution(f"empty piece [{p.a}, {p.b})")
        if i and abs(p.a - pieces[i - 1].b) > CDF_TOL:
            raise InvalidDistribution("pieces must tile the support")
        f = p.form
        if isinstance(f, Affine) and f.slope < 0:
            raise InvalidDistribution("affine slope must be nonnegative")
        if isinstance(f, ExpCdf) and not (f.coeff > 0 and f.rate > 0):
            raise InvalidDistribution("expcdf needs coeff > 0 and rate > 0")
        start, end = p.left_value(), p.right_limit()
        if start < prev_end - CDF_TOL:
            raise InvalidDistribution(f"CDF decreases at {p.a}")
        if end > 1.0 + CDF_TOL or start < -CDF_TOL:
            raise InvalidDistribution(f"CDF leaves [0, 1] on [{p.a}, {p.b})")
        prev_end = end


# --------------------------------------------------------------------------
# mean-preserving contraction check
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MpcCheck:
    ok: bool
    max_violation: float
    mean_gap: float
    worst_x: float

    def __bool__(self):
        return self.ok


def _line(p: Piece):
    """Express a polynomial piece as ``alpha + k * x`` in absolute score units."""
    f = p.form
    if isinstance(f, Flat):
        return f.c, 0.0
    return f.c0 - f.slope * p.a, f.slope


def _exp_meets_line(e: Piece, alpha: float, k: float) -> list:
    # coeff * exp((x - a) / r) = alpha + k x
    c, r, a = e.form.coeff, e.form.rate, e.a
    if k == 0.0:
        return [a + r * math.log(alpha / c)] if alpha > 0 else []
    # with v = (alpha + k x) / (k r):  v exp(-v) = c/(k r) * exp(-(alpha/k + a)/r)
    try:
        rhs = c / (k * r) * math.exp(-(alpha / k + a) / r)
    except OverflowError:
        return []
    if not 0 < rhs <= 1 / math.e:
        return []
    roots = []
    for branch in (0, -1):
        w = lambertw(-rhs, branch)
        if abs(w.imag) > 1e-12 or not math.isfinite(w.real):
            continue
        v = -w.real
        roots.append(r * v - alpha / k)
    return roots


def crossings(p: Piece, q: Piece, lo: float, hi: float) -> list:
    """Scores in ``(lo, hi)`` where the CDF forms of ``p`` and ``q`` are equal."""
    pe, qe = isinstance(p.form, ExpCdf), isinstance(q.form, ExpCdf)
    if not pe and not qe:
        (a1, k1), (a2, k2) = _line(p), _line(q)
        xs = [(a2 - a1) / (k1 - k2)] if k1 != k2 else []
    elif pe and qe:
        f, g = p.form, q.form
        dk = 1 / f.rate - 1 / g.rate
        if dk == 0:
            xs = []
        else:
            rhs = math.log(g.coeff) - math.log(f.coeff) + p.a / f.rate - q.a / g.rate
            xs = [rhs / dk]
    else:
        e, other = (p, q) if pe else (q, p)
        xs = _exp_meets_line(e, *_line(other))
    return [x for x in xs if lo < x < hi and math.isfinite(x)]


def is_mpc(candidate: MixedDistribution, prior: MixedDistribution,
           tol: float = 1e-9, grid: int = 2048) -> MpcCheck:
    """Check that ``candidate`` is a mean-preserving contraction of ``prior``.

    The integral inequality ``I_cand(x) <= I_prior(x) + tol`` is tested at the
    breakpoints of both distributions, at every interior point where the two
    CDFs cross (where the difference of integrals can peak) and on a uniform
    grid of ``grid`` points. Means must agree within ``tol``.
    """
    if abs(candidate.lower - prior.lower) > CDF_TOL or abs(candidate.upper - prior.upper) > CDF_TOL:
        raise DomainMismatch("candidate and prior have different supports")
    xs = mpc_checkpoints(candidate, prior)
    if grid:
        xs = np.concatenate([xs, np.linspace(prior.lower, prior.upper, grid)])
    diff = candidate.cdf_integral(xs) - prior.cdf_integral(xs)
    j = int(np.argmax(diff))
    worst = float(diff[j])
    gap = abs(candidate.mean - prior.mean)
    return MpcCheck(worst <= tol and gap <= tol, worst, gap, float(xs[j]))


def mpc_checkpoints(candidate: MixedDistribution, prior: MixedDistribution) -> np.ndarray:
    """Breakpoints of both distributions plus the crossings of their CDFs."""
    cuts = sorted(set(candidate.breakpoints) | set(prior.breakpoints))
    xs = list(cuts)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        pc = candidate.pieces[candidate._index(mid)]
        pp = prior.pieces[prior._index(mid)]
        xs.extend(crossings(pc, pp, lo, hi))
    return np.asarray(xs, dtype=float)


# --------------------------------------------------------------------------
# discretization
# --------------------------------------------------------------------------


def discretize(dist: MixedDistribution, n: int) -> FinitePmf:
    """Collapse every continuous piece into ``n`` cells at their conditional means.

    Atoms pass through unchanged. Because each cell is replaced by its own
    conditional mean, the output is a mean-preserving contraction of ``dist``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    mass_at: dict = {}
    for x, m in dist.atoms():
        mass_at[x] = mass_at.get(x, 0.0) + m
    for p in dist.pieces:
        if not p.form.has_density:
            continue
        u = np.linspace(0.0, p.width, n + 1)
        v = p.form.value(u)
        area = p.form.area(u)
        cell_mass = np.diff(v)
        # first moment of the cell relative to the piece start, by parts
        moment = np.diff(u * v) - np.diff(area)
        for m, mom in zip(cell_mass, moment):
            if m > 0:
                x = p.a + mom / m
                mass_at[x] = mass_at.get(x, 0.0) + float(m)
    pts = sorted(mass_at.items())
    total = math.fsum(m for _, m in pts)
    pts = tuple((s, m / total) for s, m in pts)
    return FinitePmf(pts, dist.lower, dist.upper)


# --------------------------------------------------------------------------
# literal format
# --------------------------------------------------------------------------

_FORM_PARAMS = {"flat": ("c",), "affine": ("c0", "slope"), "expcdf": ("coeff", "rate")}
_FORM_TYPES = {"flat": Flat, "affine": Affine, "expcdf": ExpCdf}


def from_literal(obj: dict) -> MixedDistribution:
    """Build a distribution from its plain-object form.

    ``segments`` give the CDF directly on ``[a, b)`` and must tile the support.
    Without segments the distribution is the step CDF of ``atoms``. When both
    are present, each listed atom must match the jump the segments imply.
    """
    try:
        lo, hi = float(obj["lower"]), float(obj["upper"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDistribution(f"distribution needs numeric lower/upper: {exc}") from None
    atoms = [(float(a["x"]), float(a["mass"])) for a in obj.get("atoms", []) or []]
    segs = obj.get("segments", []) or []
    if not segs:
        return MixedDistribution.from_atoms(atoms, lo, hi)
    pieces = []
    for s in segs:
        kind = s.get("form")
        if kind not in _FORM_PARAMS:
            raise InvalidDistribution(f"unknown segment form {kind!r}")
        raw = s.get("params", {})
        names = _FORM_PARAMS[kind]
        if isinstance(raw, dict):
            try:
                vals = [float(raw[k]) for k in names]
            except KeyError as exc:
                raise InvalidDistribution(f"{kind} segment missing {exc}") from None
        else:
            vals = [float(v) for v in raw]
            if len(vals) != len(names):
                raise InvalidDistribution(f"{kind} segment takes {len(names)} params")
        pieces.append(Piece(float(s["a"]), float(s["b"]), _FORM_TYPES[kind](*vals)))
    dist = MixedDistribution(lo, hi, tuple(pieces))
    jumps = dist.atoms()
    for x, m in atoms:
        got = sum(mm for xx, mm in jumps if abs(xx - x) <= 1e-12)
        if abs(got - m) > 1e-9:
            raise InvalidDistribution(f"atom at {x} has mass {got}, literal says {m}")
    return dist


def to_literal(dist: MixedDistribution) -> dict:
    segs = []
    for p in dist.pieces:
        kind = {Flat: "flat", Affine: "affine", ExpCdf: "expcdf"}[type(p.form)]
        params = {k: getattr(p.form, k) for k in _FORM_PARAMS[kind]}
        segs.append({"a": p.a, "b": p.b, "form": kind, "params": params})
    return {
        "lower": dist.lower,
        "upper": dist.upper,
        "atoms": [{"x": x, "mass": m} for x, m in dist.atoms()],
        "segments": segs,
    }
