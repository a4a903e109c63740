"""Regular type distributions on [0, 1] and their weighted virtual type transforms.

A distribution is *regular* when both the virtual value phi_B(t) = t - (1-F)/f
and the virtual cost phi_S(t) = t + F/f are strictly increasing.  Regularity is
validated at construction on a fixed grid; everything downstream (ironing,
closed-form solvers, the continuum system) relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._quad import gl_nodes

BUYER = "B"
SELLER = "S"

_REGULARITY_GRID = np.linspace(0.0, 1.0, 1001)

BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


class IrregularDistributionError(ValueError):
    """Raised at construction when a distribution fails the regularity check."""


class OutOfRangeError(ValueError):
    """Raised when an inverse is requested outside the function's range."""


@dataclass(frozen=True)
class WelfareWeight:
    """Designer objective weights (surplus, engagement, revenue)."""

    eta_v: float
    eta_w: float
    eta_r: float

    def __post_init__(self):
        if min(self.eta_v, self.eta_w, self.eta_r) < 0.0:
            raise ValueError("welfare weights must be nonnegative")
        if abs(self.eta_v + self.eta_w + self.eta_r - 1.0) > 1e-12:
            raise ValueError("welfare weights must sum to 1")
        if self.eta_r <= 0.0:
            raise ValueError("revenue weight eta_r must be strictly positive")

    @classmethod
    def revenue_only(cls) -> "WelfareWeight":
        return cls(0.0, 0.0, 1.0)


class TypeDistribution:
    """A regular type distribution supported on [0, 1].

    Supported kinds: ``uniform``, ``beta`` (shape a, b) and ``piecewise`` (an
    explicit piecewise-linear cdf given by a knot table; the density is the
    slope and must be strictly positive).
    """

    def __init__(self, kind: str, *, a: float | None = None, b: float | None = None,
                 knots_x: np.ndarray | None = None, knots_cdf: np.ndarray | None = None):
        self.kind = kind
        if kind == "uniform":
            pass
        elif kind == "beta":
            if a is None or b is None or a <= 0 or b <= 0:
                raise ValueError("beta distribution needs positive shape parameters")
            self.a, self.b = float(a), float(b)
            self._frozen = stats.beta(self.a, self.b)
        elif kind == "piecewise":
            x = np.asarray(knots_x, dtype=float)
            c = np.asarray(knots_cdf, dtype=float)
            if x.ndim != 1 or x.shape != c.shape or len(x) < 2:
                raise ValueError("knot table needs matching 1-d arrays of length >= 2")
            if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
                raise ValueError("knot abscissae must span [0, 1]")
            if abs(c[0]) > 1e-12 or abs(c[-1] - 1.0) > 1e-12:
                raise ValueError("knot cdf values must span [0, 1]")
            if np.any(np.diff(x) <= 0):
                raise ValueError("knot abscissae must be strictly increasing")
            slopes = np.diff(c) / np.diff(x)
            if np.any(slopes <= 0):
                raise ValueError("piecewise cdf must have strictly positive density")
            self._kx = x
            self._kc = c
            self._slopes = slopes
        else:
            raise ValueError(f"unknown distribution kind: {kind!r}")
        self._check_regularity()

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls) -> "TypeDistribution":
        return cls("uniform")

    @classmethod
    def beta(cls, a: float, b: float) -> "TypeDistribution":
        return cls("beta", a=a, b=b)

    @classmethod
    def piecewise_linear_cdf(cls, knots_x, knots_cdf) -> "TypeDistribution":
        return cls("piecewise", knots_x=knots_x, knots_cdf=knots_cdf)

    # -- primitives --------------------------------------------------------

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            out = np.clip(t, 0.0, 1.0)
        elif self.kind == "beta":
            out = self._frozen.cdf(t)
        else:
            out = np.interp(t, self._kx, self._kc)
        return out if out.ndim else float(out)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            out = np.ones_like(t)
        elif self.kind == "beta":
            out = self._frozen.pdf(t)
        else:
            idx = np.clip(np.searchsorted(self._kx, t, side="right") - 1, 0,
                          len(self._slopes) - 1)
            out = self._slopes[idx]
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5
        if self.kind == "beta":
            return self.a / (self.a + self.b)
        x, w = gl_nodes(0.0, 1.0, 128)
        return float(np.sum(x * self.pdf(x) * w))

    # -- virtual transforms ------------------------------------------------

    def virtual_value(self, t):
        """phi_B(t) = t - (1 - F(t)) / f(t)."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = t - (1.0 - np.asarray(self.cdf(t))) / np.asarray(self.pdf(t))
        out = np.where(t == 1.0, 1.0, out)  # (1 - F(1)) / f(1) -> 0
        return out if out.ndim else float(out)

    def virtual_cost(self, t):
        """phi_S(t) = t + F(t) / f(t)."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = t + np.asarray(self.cdf(t)) / np.asarray(self.pdf(t))
        out = np.where(t == 0.0, 0.0, out)  # F(0) / f(0) -> 0
        return out if out.ndim else float(out)

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _check_domain(t):
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise OutOfRangeError("type must lie in [0, 1]")

    def _check_regularity(self):
        g = _REGULARITY_GRID
        for fn, name in ((self.virtual_value, "virtual value"),
                         (self.virtual_cost, "virtual cost")):
            v = fn(g)
            if not np.all(np.isfinite(v[1:-1])) or np.any(np.diff(v) <= 0):
                raise IrregularDistributionError(
                    f"{name} is not strictly increasing; distribution is not regular")

    def __repr__(self):
        if self.kind == "beta":
            return f"TypeDistribution(beta, a={self.a}, b={self.b})"
        return f"TypeDistribution({self.kind})"


def weighted_virtual(dist: TypeDistribution, eta: WelfareWeight, t, side: str):
    """Weighted virtual type: eta_w + eta_v * t + eta_r * phi_side(t)."""
    if side == BUYER:
        phi = dist.virtual_value(t)
    elif side == SELLER:
        phi = dist.virtual_cost(t)
    else:
        raise ValueError(f"side must be {BUYER!r} or {SELLER!r}")
    t = np.asarray(t, dtype=float)
    out = eta.eta_w + eta.eta_v * t + eta.eta_r * phi
    return out if out.ndim else float(out)


def weighted_range(dist: TypeDistribution, eta: WelfareWeight, side: str) -> tuple[float, float]:
    """Range [phi_eta(0), phi_eta(1)] of the weighted virtual function."""
    return (float(weighted_virtual(dist, eta, 0.0, side)),
            float(weighted_virtual(dist, eta, 1.0, side)))


def inverse_weighted(dist: TypeDistribution, eta: WelfareWeight, y: float, side: str) -> float:
    """Invert the weighted virtual function by bisection.

    The function is strictly increasing by regularity; raises
    :class:`OutOfRangeError` when y is outside its range.
    """
    lo_val, hi_val = weighted_range(dist, eta, side)
    if y < lo_val - BISECT_TOL or y > hi_val + BISECT_TOL:
        raise OutOfRangeError(
            f"y={y} outside weighted virtual range [{lo_val}, {hi_val}] for side {side}")
    if y <= lo_val:
        return 0.0
    if y >= hi_val:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if weighted_virtual(dist, eta, mid, side) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def inverse_weighted_clamped(dist: TypeDistribution, eta: WelfareWeight, y: float,
                             side: str) -> float:
    """Like :func:`inverse_weighted` but clamps out-of-range targets to 0 or 1."""
    lo_val, hi_val = weighted_range(dist, eta, side)
    if y <= lo_val:
        return 0.0
    if y >= hi_val:
        return 1.0
    return inverse_weighted(dist, eta, y, side)
