"""Ironed scoring rules: flattened weighted virtual functions with a tie band.

A rule is parametrized by an ironing level z.  Below the band the score follows
the weighted virtual cost, above it the weighted virtual value, and on the band
[theta_S(z), theta_B(z)] it is constant equal to z, which is where ties between
merchants occur with positive probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._quad import adaptive_simpson_segmented
from .distributions import (
    BUYER,
    SELLER,
    TypeDistribution,
    WelfareWeight,
    inverse_weighted_clamped,
    weighted_virtual,
)

CRITICAL_TYPE_TOL = 1e-9


def ironing_bracket(dist: TypeDistribution, eta: WelfareWeight) -> tuple[float, float]:
    """Admissible ironing levels [max(0, phi_B_eta(0)), phi_S_eta(1)]."""
    lo = max(0.0, float(weighted_virtual(dist, eta, 0.0, BUYER)))
    hi = float(weighted_virtual(dist, eta, 1.0, SELLER))
    return lo, hi


@dataclass(frozen=True)
class ScoringRule:
    dist: TypeDistribution
    eta: WelfareWeight
    z: float
    _band: tuple[float, float] = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = ironing_bracket(self.dist, self.eta)
        if not (lo - 1e-12 <= self.z <= hi + 1e-12):
            raise ValueError(f"ironing level z={self.z} outside bracket [{lo}, {hi}]")
        t_lo = inverse_weighted_clamped(self.dist, self.eta, self.z, SELLER)
        t_hi = inverse_weighted_clamped(self.dist, self.eta, self.z, BUYER)
        object.__setattr__(self, "_band", (t_lo, t_hi))

    def tie_interval(self) -> tuple[float, float]:
        """Band of types scoring exactly z, clamped to [0, 1]."""
        return self._band

    def score(self, t):
        """Ironed weighted virtual function, nonnegative and nondecreasing."""
        t = np.asarray(t, dtype=float)
        lo, hi = self._band
        out = np.full(t.shape, self.z)
        below = t < lo
        above = t > hi
        if np.any(below):
            out[below] = weighted_virtual(self.dist, self.eta, t[below], SELLER)
        if np.any(above):
            out[above] = weighted_virtual(self.dist, self.eta, t[above], BUYER)
        return out if out.ndim else float(out)

    def critical_type(self) -> float:
        """Worst-off type pinned by z: E[score(t) - eta_w - eta_v t] / eta_r.

        The integrand kinks at the band endpoints, so the quadrature is split
        there.
        """
        lo, hi = self._band

        def integrand(t):
            return (float(self.score(t)) - self.eta.eta_w - self.eta.eta_v * t) \
                * float(self.dist.pdf(t))

        val = adaptive_simpson_segmented(integrand, 0.0, 1.0, [lo, hi],
                                         tol=CRITICAL_TYPE_TOL)
        t_hat = val / self.eta.eta_r
        if not (-1e-6 <= t_hat <= 1.0 + 1e-6):
            raise RuntimeError(f"critical type {t_hat} escaped [0, 1]")
        return float(np.clip(t_hat, 0.0, 1.0))


def band_probabilities(dist: TypeDistribution, eta: WelfareWeight, z: float) -> tuple[float, float]:
    """(P_S(z), P_B(z)): probabilities that the weighted virtual cost / value
    of an opponent's type falls below z, with range clamping to {0, 1}."""
    if z < 0.0:
        raise ValueError("ironing level must be nonnegative")
    p_s = float(dist.cdf(inverse_weighted_clamped(dist, eta, z, SELLER)))
    p_b = float(dist.cdf(inverse_weighted_clamped(dist, eta, z, BUYER)))
    # clamp hard when z is outside the respective range
    if z <= weighted_virtual(dist, eta, 0.0, SELLER):
        p_s = 0.0
    if z >= weighted_virtual(dist, eta, 1.0, BUYER):
        p_b = 1.0
    return p_s, p_b
