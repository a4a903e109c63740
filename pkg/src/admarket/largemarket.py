"""Large-market limit: the three-market design and its efficiency.

As the number of merchants grows, the optimal mechanism converges to an
ex-post implementation with a selling market (posted price per unit of CTR),
an exchange market (data for equivalent CTR-1 ads), and a degenerate buying
market at full price.  This module evaluates the limit prices, profits, the
asymptotic relative efficiency ratio, and finite-N convergence diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._quad import gl_nodes_segmented
from .continuum import CTRLaw, solve_symmetric, symmetric_interim_clicks
from .distributions import (
    SELLER,
    TypeDistribution,
    WelfareWeight,
    inverse_weighted,
    weighted_range,
)
from .scoring import ScoringRule


@dataclass(frozen=True)
class LargeMarketConfig:
    """Primitives of the symmetric large-market limit.

    ``mean_ctr`` is the expected CTR of a merchant's own dataset;
    ``zeta`` = (surplus-engagement weight, surplus-value weight) defines the
    total-surplus denominator of the efficiency ratio.
    """

    dist: TypeDistribution
    eta: WelfareWeight
    mean_ctr: float
    zeta: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.mean_ctr <= 1.0:
            raise ValueError("mean CTR must lie in [0, 1]")
        if min(self.zeta) < 0.0 or max(self.zeta) <= 0.0:
            raise ValueError("surplus weights must be nonnegative, not all zero")


@dataclass(frozen=True)
class ThreeMarketDesign:
    """Limit prices: selling price per unit of CTR, buying price, and the
    bid-ask-only benchmark price (with a saturation flag when the benchmark
    would procure every type)."""

    selling_price: float
    buying_price: float
    bid_ask_price: float
    bid_ask_saturated: bool
    selling_degenerate: bool


def design(cfg: LargeMarketConfig) -> ThreeMarketDesign:
    """Posted prices of the three-market design.

    The selling price equates the weighted marginal cost of procurement with
    the unit marginal revenue of the exchange market; the bid-ask benchmark
    instead equates it with 1/mean CTR.
    """
    p_s = inverse_weighted(cfg.dist, cfg.eta, 1.0, SELLER)
    degenerate = cfg.mean_ctr <= 0.0
    if degenerate:
        p_tilde, saturated = 1.0, True
    else:
        _, hi = weighted_range(cfg.dist, cfg.eta, SELLER)
        y = 1.0 / cfg.mean_ctr
        if y >= hi:
            p_tilde, saturated = 1.0, y > hi
        else:
            p_tilde, saturated = inverse_weighted(cfg.dist, cfg.eta, y, SELLER), False
    return ThreeMarketDesign(p_s, 1.0, p_tilde, saturated, degenerate)


@dataclass(frozen=True)
class LimitProfits:
    selling_only: float      # bid-ask design at its own optimal price
    exchange_residual: float
    combined: float          # selling + exchange at the selling price


def profits(cfg: LargeMarketConfig, dsn: ThreeMarketDesign | None = None) -> LimitProfits:
    """Limit profits: (1 - p*mu)F(p) from the selling market, plus
    (1 - mu)(1 - F(p)) residual resale from the exchange market."""
    dsn = dsn or design(cfg)
    mu = cfg.mean_ctr
    f = cfg.dist.cdf

    def pi_selling(p):
        return (1.0 - p * mu) * float(f(p))

    def pi_exchange(p):
        return (1.0 - mu) * (1.0 - float(f(p)))

    p_s, p_t = dsn.selling_price, dsn.bid_ask_price
    return LimitProfits(pi_selling(p_t),
                        pi_exchange(p_s),
                        pi_selling(p_s) + pi_exchange(p_s))


@dataclass(frozen=True)
class EfficiencyBreakdown:
    value: float
    engagement_limit: float   # achieved = maximal residual engagement, 1 - mu
    surplus_limit: float      # merchants' limit surplus
    revenue_limit: float
    surplus_max: float        # first-best merchant surplus, 1 - mu E[theta]
    engagement_max: float


def are(cfg: LargeMarketConfig) -> EfficiencyBreakdown:
    """Asymptotic relative efficiency: achieved weighted objective over the
    maximal weighted total surplus.

    Merchant surplus in the limit accrues only to selling-market participants:
    mu * E[(p_S - theta)_+].
    """
    dsn = design(cfg)
    mu = cfg.mean_ctr
    p_s = dsn.selling_price
    x, w = gl_nodes_segmented(0.0, 1.0, [p_s], 32)
    gain = np.maximum(p_s - x, 0.0)
    v_limit = mu * float(np.sum(gain * cfg.dist.pdf(x) * w))
    r_limit = profits(cfg, dsn).combined
    w_limit = 1.0 - mu
    v_max = 1.0 - mu * cfg.dist.mean()
    numer = (cfg.eta.eta_w * w_limit + cfg.eta.eta_v * v_limit
             + cfg.eta.eta_r * r_limit)
    zeta_w, zeta_v = cfg.zeta
    denom = zeta_w * w_limit + zeta_v * v_max
    return EfficiencyBreakdown(numer / denom, w_limit, v_limit, r_limit,
                               v_max, w_limit)


@dataclass
class FiniteNDiagnostics:
    """Per-N convergence of scaled interim clicks and aggregate transfers."""

    n_values: list[int]
    ironing_levels: list[float]
    theta_grid: np.ndarray
    scaled_clicks: list[np.ndarray]        # N * S^N(theta) per N
    aggregate_transfers: list[float]       # N * E[T^N | selling side] mass
    limit_step: np.ndarray                 # 0 below p_S, mu above
    limit_transfer: float                  # -p_S * mu * F(p_S)


def finite_n_diagnostics(cfg: LargeMarketConfig, law: CTRLaw, n_values,
                         grid_size: int = 61) -> FiniteNDiagnostics:
    """Track N*S^N and aggregate transfers toward their large-market limits.

    ``law`` must have mean equal to cfg.mean_ctr; clicks and transfers come
    from the symmetric continuum solution at each N.
    """
    if abs(law.mean() - cfg.mean_ctr) > 1e-9:
        raise ValueError("CTR law mean must match the configured mean CTR")
    dsn = design(cfg)
    p_s = dsn.selling_price
    grid = np.linspace(0.0, 1.0, grid_size)
    mu = cfg.mean_ctr
    zs, curves, transfers = [], [], []
    for n in n_values:
        z_n = solve_symmetric(law, cfg.dist, cfg.eta, n, tol=1e-7)
        zs.append(z_n)
        s_curve = np.array([symmetric_interim_clicks(law, cfg.dist, cfg.eta,
                                                     n, z_n, t)
                            for t in grid])
        curves.append(n * s_curve)
        transfers.append(n * _expected_transfer(cfg, law, n, z_n, grid, s_curve))
    step = np.where(grid < p_s, 0.0, mu)
    limit_t = -p_s * mu * float(cfg.dist.cdf(p_s))
    return FiniteNDiagnostics(list(n_values), zs, grid, curves, transfers,
                              step, limit_t)


def _expected_transfer(cfg: LargeMarketConfig, law: CTRLaw, n: int, z_n: float,
                       grid: np.ndarray, s_curve: np.ndarray) -> float:
    """Selling-side E[T^N] per merchant via the envelope formula: aggregate
    transfer of types below the critical type, who end up selling all their
    data in the large-market limit."""
    a = law.mean() / n
    rule = ScoringRule(cfg.dist, cfg.eta, z_n)
    theta_hat = rule.critical_type()
    net = s_curve - a
    cum = np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5
                                           * (net[1:] + net[:-1]))))
    cum -= float(np.interp(theta_hat, grid, cum))
    t_curve = grid * net - cum
    pdf = cfg.dist.pdf(grid)
    mask = grid < theta_hat
    return float(np.trapezoid(np.where(mask, t_curve * pdf, 0.0), grid))
