"""Closed-form solutions for two merchants with exclusive and inclusive customers.

Customers are either exclusive (click only one merchant) or inclusive (click
both).  This module solves for the exclusive-priority scoring mechanism in
closed form, reproduces the classic benchmarks it nests (monopoly pricing,
bilateral trade, partnership dissolution), and builds the bundled-versus-
separate design comparison for the uniform revenue-only case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quad import gl_nodes_segmented
from .distributions import (
    BUYER,
    SELLER,
    TypeDistribution,
    WelfareWeight,
    inverse_weighted,
    weighted_virtual,
)
from .finite import FiniteDataset, FiniteMechanism, TieBreakRule
from .scoring import ScoringRule, band_probabilities, ironing_bracket

_TOL = 1e-12


@dataclass(frozen=True)
class ExclusiveInclusiveData:
    """Masses of exclusive and inclusive customers for two merchants.

    ``excl_1`` is the mass of customers who click only merchant 1, owned by
    merchant 2 (own exclusives are normalized away: reallocating them changes
    nothing).  ``excl_2`` symmetrically.  ``incl_1``/``incl_2`` are each
    merchant's holdings of inclusive customers.  Masses sum to 1.
    """

    excl_1: float
    excl_2: float
    incl_1: float
    incl_2: float

    def __post_init__(self):
        vals = (self.excl_1, self.excl_2, self.incl_1, self.incl_2)
        if min(vals) < 0.0:
            raise ValueError("masses must be nonnegative")
        if abs(sum(vals) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")

    @property
    def incl_total(self) -> float:
        return self.incl_1 + self.incl_2

    def adjusted_shares(self) -> tuple[float, float]:
        """Each merchant's share of the inclusive mass net of the dormant
        exclusive customers the designer can hand them for free."""
        m = self.incl_total
        if m <= 0.0:
            return 0.0, 0.0
        b1 = max(0.0, (self.incl_1 - self.excl_1) / m)
        b2 = max(0.0, (self.incl_2 - self.excl_2) / m)
        return b1, b2

    def to_finite_dataset(self) -> FiniteDataset:
        """Three-profile dataset: 1-exclusive, 2-exclusive, inclusive."""
        profiles = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        masses = np.array([[0.0, self.excl_2, self.incl_1],
                           [self.excl_1, 0.0, self.incl_2]])
        return FiniteDataset(profiles, masses)


@dataclass(frozen=True)
class EPSolution:
    """Ironing levels and inclusive tie-break of the exclusive-priority
    mechanism.

    ``slack`` flags merchants whose worst-off type strictly exceeds their
    outside option (possible only when the ironing floor is positive and the
    merchant's inclusive holding is below the exclusive mass owed to them).
    """

    z: tuple[float, float]
    p_incl: tuple[float, float]
    beta: tuple[float, float]
    case: str
    z_floor: float
    slack: tuple[bool, bool]


def _solve_level(dist: TypeDistribution, eta: WelfareWeight, target: float,
                 combine, z_lo: float, z_hi: float) -> float:
    """Bisection for combine(P_S(z), P_B(z)) = target, increasing in z."""

    def val(z):
        p_s, p_b = band_probabilities(dist, eta, z)
        return combine(p_s, p_b)

    lo, hi = z_lo, z_hi
    if val(hi) < target - 1e-9:
        raise ValueError("tie-probability equation has no root in the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if val(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _TOL:
            break
    return 0.5 * (lo + hi)


def solve_ep(data: ExclusiveInclusiveData, dist: TypeDistribution,
             eta: WelfareWeight) -> EPSolution:
    """Closed-form ironing levels and inclusive tie-break probabilities.

    The case split is driven by the adjusted inclusive shares (b1, b2) against
    the probability mass available at the ironing floor.
    """
    b = data.adjusted_shares()
    swap = b[0] < b[1]
    b1, b2 = (b[1], b[0]) if swap else b
    z_floor, z_top = ironing_bracket(dist, eta)
    ps_floor, pb_floor = band_probabilities(dist, eta, z_floor)

    slack1 = slack2 = False
    if b1 <= 0.0 and b2 <= 0.0:
        case = "both-zero"
        z1 = z2 = z_floor
        p1 = p2 = 0.0
        if z_floor > 0.0:
            slack1, slack2 = (data.incl_1 < data.excl_1), (data.incl_2 < data.excl_2)
    elif b2 <= 0.0:
        z2 = z_floor
        p2 = 0.0
        if b1 > pb_floor:
            case = "one-sided-ironing"
            z1 = _solve_level(dist, eta, b1, lambda ps, pb: pb, z_floor, z_top)
            p1 = 1.0
        else:
            case = "one-sided-tie"
            z1 = z_floor
            p1 = b1 / pb_floor if pb_floor > 0.0 else 0.0
        if z_floor > 0.0:
            slack1, slack2 = (data.incl_1 < data.excl_1), (data.incl_2 < data.excl_2)
    else:
        if b1 + b2 <= pb_floor:
            case = "floor-tie"
            z1 = z2 = z_floor
            p1 = b1 / pb_floor
            p2 = b2 / pb_floor
        else:
            z_t = _solve_level(dist, eta, b1 + b2, lambda ps, pb: ps + pb,
                               z_floor, z_top)
            ps_t, pb_t = band_probabilities(dist, eta, z_t)
            if pb_t - ps_t >= (b1 - b2) - 1e-12:
                case = "common-level"
                z1 = z2 = z_t
                if pb_t - ps_t > 0.0:
                    p1 = 0.5 * (1.0 + (b1 - b2) / (pb_t - ps_t))
                else:
                    p1 = 0.5
                p1 = min(1.0, max(0.0, p1))
                p2 = 1.0 - p1
            else:
                case = "split-levels"
                z1 = _solve_level(dist, eta, b1, lambda ps, pb: pb, z_floor, z_top)
                z2 = _solve_level(dist, eta, b2, lambda ps, pb: ps, z_floor, z_top)
                p1, p2 = 0.5, 0.5  # ties have zero probability when z1 != z2

    if swap:
        z1, z2 = z2, z1
        p1, p2 = p2, p1
        b1, b2 = b2, b1
    return EPSolution((z1, z2), (p1, p2), (b1, b2), case, z_floor, (slack1, slack2))


def to_finite_mechanism(data: ExclusiveInclusiveData, dist: TypeDistribution,
                        eta: WelfareWeight, solution: EPSolution | None = None,
                        grid_size: int = 201) -> FiniteMechanism:
    """Instantiate the exclusive-priority mechanism on the three-profile
    dataset, wiring the closed-form tie-break probabilities into per-profile
    weights."""
    if solution is None:
        solution = solve_ep(data, dist, eta)
    ds = data.to_finite_dataset()
    z1, z2 = solution.z
    rules = [ScoringRule(dist, eta, z1), ScoringRule(dist, eta, z2)]

    def exclusive_weight(z_i, excl_own_mass, incl_own):
        # priority to the preferred merchant; at a zero-score tie hand over
        # only enough exclusive mass to cover the inclusive holding
        if z_i > 0.0 or excl_own_mass <= 0.0:
            return 1.0
        return min(excl_own_mass, incl_own) / excl_own_mass

    w1 = exclusive_weight(z1, data.excl_1, data.incl_1)
    w2 = exclusive_weight(z2, data.excl_2, data.incl_2)
    p1, p2 = solution.p_incl
    weights = np.array([
        [w1, 0.0, 1.0 - w1],
        [0.0, w2, 1.0 - w2],
        [p1, p2, max(0.0, 1.0 - p1 - p2)],
    ])
    return FiniteMechanism(ds, rules, TieBreakRule(weights), grid_size=grid_size)


# -- classic benchmarks ----------------------------------------------------


@dataclass(frozen=True)
class ClassicBenchmarks:
    """Solutions of the three textbook settings nested by the model."""

    monopoly_price: float
    bilateral_gap: float
    dissolution_level: float
    dissolution_interval: tuple[float, float]
    dissolution: EPSolution


def classic_benchmarks(dist: TypeDistribution | None = None,
                       eta: WelfareWeight | None = None) -> ClassicBenchmarks:
    """Monopoly posted price, bilateral-trade boundary gap, and the equal-share
    dissolution ironing level, all from the general machinery."""
    dist = dist or TypeDistribution.uniform()
    eta = eta or WelfareWeight.revenue_only()
    price = inverse_weighted(dist, eta, 0.0, BUYER)

    # trade boundary of the buyer/seller setting: theta_1 = phi_B^{-1}(phi_S(theta_2))
    grid = np.linspace(0.0, 1.0, 101)
    gaps = []
    for t2 in grid:
        target = weighted_virtual(dist, eta, t2, SELLER)
        hi = weighted_virtual(dist, eta, 1.0, BUYER)
        if target > hi:
            continue
        gaps.append(inverse_weighted(dist, eta, target, BUYER) - t2)
    gap = float(np.mean(gaps))

    pd_data = ExclusiveInclusiveData(0.0, 0.0, 0.5, 0.5)
    sol = solve_ep(pd_data, dist, eta)
    rule = ScoringRule(dist, eta, sol.z[0])
    return ClassicBenchmarks(price, gap, sol.z[0], rule.tie_interval(), sol)


# -- bundled versus separate design (uniform, revenue-only) -----------------


@dataclass(frozen=True)
class BundlingExample:
    """Uniform revenue-only comparison of one bundled design against separate
    exclusive and inclusive designs.

    Merchants split the inclusive mass equally; the remaining customers are
    exclusive to merchant 2 but owned by merchant 1.
    """

    incl_total: float

    def __post_init__(self):
        if not 0.0 < self.incl_total < 1.0:
            raise ValueError("inclusive mass must lie in (0, 1)")

    # closed forms -------------------------------------------------------

    @property
    def scarcity(self) -> float:
        """Ratio of exclusive to inclusive mass; drives how much the bundled
        design lowers the ironing level."""
        return (1.0 - self.incl_total) / self.incl_total

    @property
    def ironing_level(self) -> float:
        return max(0.0, 0.5 - self.scarcity)

    @property
    def tie_interval(self) -> tuple[float, float]:
        nu = self.scarcity
        return (max(0.0, 0.25 - nu / 2.0), max(0.5, 0.75 - nu / 2.0))

    @property
    def incl_tiebreak_1(self) -> float:
        return min(1.0, 0.5 + self.scarcity)

    def dataset(self) -> ExclusiveInclusiveData:
        half = self.incl_total / 2.0
        return ExclusiveInclusiveData(0.0, 1.0 - self.incl_total, half, half)

    # transfer tables ----------------------------------------------------

    def separate_exclusive_transfer(self, theta) -> np.ndarray:
        """Merchant 2's transfer under the stand-alone posted price 1/2."""
        theta = np.asarray(theta, dtype=float)
        out = np.where(theta > 0.5, (1.0 - self.incl_total) * 0.5, 0.0)
        return out if out.ndim else float(out)

    def separate_inclusive_transfer(self, theta) -> np.ndarray:
        """Either merchant's transfer under the stand-alone equal-share
        dissolution design (ironing level 1/2, tie band [1/4, 3/4])."""
        return self._inclusive_table(theta, 0.25, 0.75)

    def bundled_exclusive_transfer(self, theta) -> np.ndarray:
        """Merchant 2's hypothetical itemized exclusive transfer in the
        bundled design: per-unit price equal to the nearest band edge."""
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.tie_interval
        mass = 1.0 - self.incl_total
        out = np.where(theta < lo, mass * lo, np.where(theta > hi, mass * hi, 0.0))
        return out if out.ndim else float(out)

    def bundled_inclusive_transfer(self, theta) -> np.ndarray:
        lo, hi = self.tie_interval
        return self._inclusive_table(theta, lo, hi)

    def _inclusive_table(self, theta, lo: float, hi: float) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        half = self.incl_total / 2.0
        out = np.where(theta < lo, half * (theta ** 2 - lo * (1.0 - lo)),
                       np.where(theta > hi, half * (theta ** 2 - hi * (1.0 - hi)),
                                0.0))
        return out if out.ndim else float(out)

    # revenues -----------------------------------------------------------

    def separate_revenue(self) -> float:
        lo, hi = 0.25, 0.75
        x, w = gl_nodes_segmented(0.0, 1.0, [0.5, lo, hi], 32)
        excl = float(np.sum(self.separate_exclusive_transfer(x) * w))
        incl = float(np.sum(self.separate_inclusive_transfer(x) * w))
        return excl + 2.0 * incl

    def bundled_revenue(self) -> float:
        lo, hi = self.tie_interval
        x, w = gl_nodes_segmented(0.0, 1.0, [lo, hi], 32)
        excl = float(np.sum(self.bundled_exclusive_transfer(x) * w))
        incl = float(np.sum(self.bundled_inclusive_transfer(x) * w))
        return excl + 2.0 * incl


def bundling_example(incl_total: float) -> BundlingExample:
    return BundlingExample(incl_total)
