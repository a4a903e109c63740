"""Continuum-CTR model: ironing-level system and symmetric reduction.

With a continuum of CTR profiles, ties have probability zero and the optimal
targeted ads rule assigns each customer to the merchant with the highest
quality score omega_i * g_i(theta_i).  The ironing levels z solve a monotone
nonlinear system equating the worst-off type's expected clicks to the outside
option; under product-form laws the system reduces to one-dimensional
integrals per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._quad import gl_nodes, gl_nodes_segmented
from .distributions import (
    BUYER,
    SELLER,
    TypeDistribution,
    WelfareWeight,
    weighted_range,
    weighted_virtual,
)
from .scoring import ScoringRule, ironing_bracket

RESIDUAL_TOL = 1e-6
_OUTER_SEGMENTS = 8
_NODES_PER_SEG = 16


class SolverError(RuntimeError):
    """Raised when the ironing-level solver fails to converge; carries the
    residual trace for diagnosis."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class CTRLaw:
    """Distribution of a single CTR coordinate, supported inside [0, 1]."""

    def __init__(self, kind: str, *, lo: float = 0.0, hi: float = 1.0,
                 a: float | None = None, b: float | None = None,
                 knots_x=None, knots_cdf=None):
        self.kind = kind
        if kind == "uniform":
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError("uniform CTR law needs 0 <= lo < hi <= 1")
            self.lo, self.hi = float(lo), float(hi)
        elif kind == "beta":
            if a is None or b is None or a <= 0 or b <= 0:
                raise ValueError("beta CTR law needs positive shapes")
            self.a, self.b = float(a), float(b)
            self.lo, self.hi = 0.0, 1.0
            self._frozen = stats.beta(self.a, self.b)
        elif kind == "piecewise":
            x = np.asarray(knots_x, dtype=float)
            c = np.asarray(knots_cdf, dtype=float)
            if x.ndim != 1 or x.shape != c.shape or len(x) < 2:
                raise ValueError("knot table needs matching 1-d arrays")
            if np.any(np.diff(x) <= 0) or np.any(np.diff(c) <= 0):
                raise ValueError("knots must be strictly increasing")
            if abs(c[0]) > 1e-12 or abs(c[-1] - 1.0) > 1e-12:
                raise ValueError("knot cdf must span [0, 1]")
            if x[0] < -1e-12 or x[-1] > 1.0 + 1e-12:
                raise ValueError("support must lie in [0, 1]")
            self._kx, self._kc = x, c
            self._slopes = np.diff(c) / np.diff(x)
            self.lo, self.hi = float(x[0]), float(x[-1])
        else:
            raise ValueError(f"unknown CTR law kind: {kind!r}")

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "CTRLaw":
        return cls("uniform", lo=lo, hi=hi)

    @classmethod
    def beta(cls, a: float, b: float) -> "CTRLaw":
        return cls("beta", a=a, b=b)

    @classmethod
    def piecewise_linear_cdf(cls, knots_x, knots_cdf) -> "CTRLaw":
        return cls("piecewise", knots_x=knots_x, knots_cdf=knots_cdf)

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "uniform":
            out = np.where((w >= self.lo) & (w <= self.hi),
                           1.0 / (self.hi - self.lo), 0.0)
        elif self.kind == "beta":
            out = self._frozen.pdf(w)
        else:
            inside = (w >= self.lo) & (w <= self.hi)
            idx = np.clip(np.searchsorted(self._kx, w, side="right") - 1, 0,
                          len(self._slopes) - 1)
            out = np.where(inside, self._slopes[idx], 0.0)
        return out if out.ndim else float(out)

    def cdf(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "uniform":
            out = np.clip((w - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        elif self.kind == "beta":
            out = self._frozen.cdf(w)
        else:
            out = np.interp(w, self._kx, self._kc)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.lo + self.hi)
        if self.kind == "beta":
            return self.a / (self.a + self.b)
        x, w = gl_nodes(self.lo, self.hi, 128)
        return float(np.sum(x * self.pdf(x) * w))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        if self.kind == "uniform":
            return self.lo + u * (self.hi - self.lo)
        if self.kind == "beta":
            return self._frozen.ppf(u)
        return np.interp(u, self._kc, self._kx)

    def __repr__(self):
        return f"CTRLaw({self.kind}, support=[{self.lo}, {self.hi}])"


@dataclass(frozen=True)
class ContinuumDataset:
    """Merchant datasets over a continuum of CTR profiles.

    ``lam`` is the strictly positive mass distribution across merchants;
    ``laws[k][i]`` is the law of coordinate i under merchant k's dataset
    (each dataset is a product of independent coordinate laws).
    """

    lam: np.ndarray
    laws: tuple

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "laws", tuple(tuple(row) for row in self.laws))
        n = len(lam)
        if n < 2:
            raise ValueError("need at least two merchants")
        if np.any(lam <= 0) or abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError("mass distribution must be strictly positive and sum to 1")
        if len(self.laws) != n or any(len(row) != n for row in self.laws):
            raise ValueError("laws must be an N-by-N table of coordinate laws")

    @classmethod
    def iid(cls, n: int, law: CTRLaw, lam=None) -> "ContinuumDataset":
        lam = np.full(n, 1.0 / n) if lam is None else np.asarray(lam, dtype=float)
        return cls(lam, tuple(tuple(law for _ in range(n)) for _ in range(n)))

    @property
    def n_merchants(self) -> int:
        return len(self.lam)

    def outside_option(self) -> np.ndarray:
        """a_i = lam_i * E[omega_i] under merchant i's own dataset."""
        return np.array([self.lam[i] * self.laws[i][i].mean()
                         for i in range(self.n_merchants)])


# -- pieces of the ironing-level system ------------------------------------


class _ScoreKernel:
    """Tabulated map from a score level t to P(weighted virtual <= t).

    The weighted virtual transforms are strictly increasing under regularity,
    so F(phi^{-1}(t)) is an increasing function of t with tabulated knots;
    linear interpolation is exact for uniform types and accurate to the table
    resolution otherwise.
    """

    _TABLE_N = 2049

    def __init__(self, dist: TypeDistribution, eta: WelfareWeight):
        theta = np.linspace(0.0, 1.0, self._TABLE_N)
        self._cdf = np.asarray(dist.cdf(theta), dtype=float)
        self._phi_s = np.asarray(weighted_virtual(dist, eta, theta, SELLER),
                                 dtype=float)
        self._phi_b = np.asarray(weighted_virtual(dist, eta, theta, BUYER),
                                 dtype=float)

    def below_prob(self, t: np.ndarray, z: float) -> np.ndarray:
        """P(ironed score < t) at ironing level z, left value at t == z."""
        p_s = np.interp(t, self._phi_s, self._cdf)
        p_b = np.interp(t, self._phi_b, self._cdf)
        return np.where(t <= z, p_s, p_b)


def _kernels_for(dists: list[TypeDistribution],
                 eta: WelfareWeight) -> list[_ScoreKernel]:
    cache: dict[int, _ScoreKernel] = {}
    out = []
    for d in dists:
        key = id(d)
        if key not in cache:
            cache[key] = _ScoreKernel(d, eta)
        out.append(cache[key])
    return out


def ironed_below_prob(dist: TypeDistribution, eta: WelfareWeight, t, z: float):
    """P(ironed score of a type < t) for ironing level z.

    Uses the left value at t == z: band types score exactly z, which does not
    count for the strict event.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return _ScoreKernel(dist, eta).below_prob(t, z)


def _score_breaks(dist: TypeDistribution, eta: WelfareWeight, z: float) -> list[float]:
    """Score levels where the below-probability kinks or jumps."""
    out = [z]
    for side in (SELLER, BUYER):
        out.extend(weighted_range(dist, eta, side))
    return [b for b in out if b > 0.0]


def _inner_mean_batch(law_j: CTRLaw, kernel_j: _ScoreKernel, c_values,
                      z_j: float, breaks_j: list[float]) -> np.ndarray:
    """E over omega_j of P(omega_j * ironed score_j < c), per entry of
    ``c_values``; one interpolation pass over all quadrature nodes."""
    c_values = np.asarray(c_values, dtype=float)
    out = np.zeros_like(c_values)
    pos = np.flatnonzero(c_values > 0.0)
    if pos.size == 0:
        return out
    xs, ws, sizes = [], [], []
    for m in pos:
        c = c_values[m]
        x, w = gl_nodes_segmented(law_j.lo, law_j.hi,
                                  [c / b for b in breaks_j], _NODES_PER_SEG)
        xs.append(x)
        ws.append(w)
        sizes.append(len(x))
    x_all = np.concatenate(xs)
    w_all = np.concatenate(ws)
    c_all = np.repeat(c_values[pos], sizes)
    with np.errstate(divide="ignore"):
        t = np.where(x_all > 0.0, c_all / np.where(x_all > 0.0, x_all, 1.0), 1e6)
    vals = kernel_j.below_prob(np.minimum(t, 1e6), z_j) * law_j.pdf(x_all) * w_all
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    out[pos] = np.add.reduceat(vals, bounds[:-1])
    return out


def _lhs_clicks(data: ContinuumDataset, dists: list[TypeDistribution],
                eta: WelfareWeight, z: np.ndarray, i: int,
                own_level: float | None = None,
                kernels: list[_ScoreKernel] | None = None) -> float:
    """Expected clicks of merchant i's worst-off type (score own_level or z_i)
    under the highest-quality-score rule; factorizes over coordinates."""
    n = data.n_merchants
    level = z[i] if own_level is None else own_level
    kernels = kernels or _kernels_for(dists, eta)
    breaks = [_score_breaks(dists[j], eta, z[j]) for j in range(n)]
    total = 0.0
    for k in range(n):
        law_i = data.laws[k][i]
        xo, wo = gl_nodes_segmented(
            law_i.lo, law_i.hi,
            list(np.linspace(law_i.lo, law_i.hi, _OUTER_SEGMENTS + 1)[1:-1]),
            _NODES_PER_SEG)
        inner = np.ones_like(xo)
        for j in range(n):
            if j == i:
                continue
            inner *= _inner_mean_batch(data.laws[k][j], kernels[j],
                                       xo * level, z[j], breaks[j])
        total += data.lam[k] * float(np.sum(xo * inner * law_i.pdf(xo) * wo))
    return total


def optz_residual(data: ContinuumDataset, dists, eta: WelfareWeight,
                  z) -> np.ndarray:
    """Residual of the ironing-level system: worst-off expected clicks minus
    the outside option, per merchant."""
    dists = _as_dist_list(dists, data.n_merchants)
    z = np.asarray(z, dtype=float)
    a = data.outside_option()
    return np.array([_lhs_clicks(data, dists, eta, z, i) - a[i]
                     for i in range(data.n_merchants)])


@dataclass
class IroningSolution:
    z: np.ndarray
    corner: np.ndarray       # True where z_i sits at the top of its bracket
    residuals: np.ndarray
    iterations: int


def solve_optz(data: ContinuumDataset, dists, eta: WelfareWeight,
               tol: float = RESIDUAL_TOL, max_sweeps: int = 12) -> IroningSolution:
    """Solve the monotone ironing-level system.

    A few damped Gauss-Seidel coordinate-bisection sweeps give a warm start
    and detect corner coordinates (outside option unattainable even at the
    top of the bracket); a Newton solve on the free coordinates then drives
    the residuals to tolerance, which matters when the cross-coupling is
    strong (nearly degenerate CTR laws).
    """
    from scipy import optimize

    n = data.n_merchants
    dists = _as_dist_list(dists, n)
    kernels = _kernels_for(dists, eta)
    a = data.outside_option()
    lo_hi = [ironing_bracket(dists[i], eta) for i in range(n)]
    z = np.array([0.5 * (lo + hi) for lo, hi in lo_hi])
    corner = np.zeros(n, dtype=bool)
    trace = []
    evals = 0
    for sweep in range(max_sweeps):
        for i in range(n):
            lo, hi = lo_hi[i]
            top = _lhs_clicks(data, dists, eta, z, i, own_level=hi,
                              kernels=kernels) - a[i]
            evals += 1
            if top < 0.0:
                target, corner[i] = hi, True
            else:
                corner[i] = False
                b_lo, b_hi = lo, hi
                for _ in range(30):
                    mid = 0.5 * (b_lo + b_hi)
                    if _lhs_clicks(data, dists, eta, z, i, own_level=mid,
                                   kernels=kernels) < a[i]:
                        b_lo = mid
                    else:
                        b_hi = mid
                    evals += 1
                target = 0.5 * (b_lo + b_hi)
            z[i] += 0.5 * (target - z[i])  # damped update
        res = optz_residual(data, dists, eta, z)
        trace.append((sweep, z.copy(), res.copy()))

    z[corner] = [lo_hi[i][1] for i in range(n) if corner[i]]
    free = np.flatnonzero(~corner)
    if free.size:
        lo_f = np.array([lo_hi[i][0] for i in free])
        hi_f = np.array([lo_hi[i][1] for i in free])

        def func(x):
            nonlocal evals
            clipped = np.clip(x, lo_f, hi_f)
            probe = z.copy()
            probe[free] = clipped
            r = np.array([_lhs_clicks(data, dists, eta, probe, i,
                                      kernels=kernels) - a[i] for i in free])
            evals += free.size
            # keep the solver inside the bracket without flattening the map
            return r + (x - clipped)

        root = optimize.root(func, z[free], method="hybr",
                             options={"xtol": 1e-12})
        z[free] = np.clip(root.x, lo_f, hi_f)
    res = optz_residual(data, dists, eta, z)
    res_eff = np.where(corner, np.minimum(res, 0.0), res)
    trace.append((max_sweeps, z.copy(), res.copy()))
    if np.max(np.abs(res_eff)) > tol:
        raise SolverError(
            f"ironing-level solver stalled; residuals {res}", trace)
    return IroningSolution(z, corner, res, evals)


def solve_symmetric(law: CTRLaw, dist: TypeDistribution, eta: WelfareWeight,
                    n: int, tol: float = 1e-9) -> float:
    """Common ironing level for n exchangeable merchants with i.i.d. CTRs.

    Solves E[omega * x(z, omega)^(n-1)] = E[omega]/n by bisection; the left
    side is strictly increasing in z from 0.
    """
    if n < 2:
        raise ValueError("need at least two merchants")
    target = law.mean() / n
    z_lo, z_hi = ironing_bracket(dist, eta)
    kernel = _ScoreKernel(dist, eta)
    xo, wo = gl_nodes_segmented(
        law.lo, law.hi, list(np.linspace(law.lo, law.hi, _OUTER_SEGMENTS + 1)[1:-1]),
        _NODES_PER_SEG)

    def h(z):
        breaks = _score_breaks(dist, eta, z)
        inner = _inner_mean_batch(law, kernel, xo * z, z, breaks)
        return float(np.sum(xo * inner ** (n - 1) * law.pdf(xo) * wo))

    if h(z_hi) < target:
        raise SolverError("symmetric ironing equation has no interior root")
    lo, hi = z_lo, z_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def symmetric_interim_clicks(law: CTRLaw, dist: TypeDistribution,
                             eta: WelfareWeight, n: int, z: float,
                             theta: float) -> float:
    """S(theta) for one of n exchangeable merchants at common ironing level z."""
    rule = ScoringRule(dist, eta, z)
    g = float(rule.score(theta))
    breaks = _score_breaks(dist, eta, z)
    kernel = _ScoreKernel(dist, eta)
    xo, wo = gl_nodes_segmented(
        law.lo, law.hi, list(np.linspace(law.lo, law.hi, _OUTER_SEGMENTS + 1)[1:-1]),
        _NODES_PER_SEG)
    inner = _inner_mean_batch(law, kernel, xo * g, z, breaks)
    return float(np.sum(xo * inner ** (n - 1) * law.pdf(xo) * wo))


def rn_continuum_baseline(data: ContinuumDataset, seed: int = 0,
                          draws: int = 100_000) -> dict:
    """Benchmark ads rule proportional to each dataset's density ratio.

    Gives every merchant exactly their outside option; returns Monte Carlo
    click estimates next to the exact values, plus a mass-balance check on
    test rectangles.
    """
    n = data.n_merchants
    rng = np.random.default_rng(seed)
    ks = rng.choice(n, size=draws, p=data.lam)
    omega = np.empty((draws, n))
    for k in range(n):
        mask = ks == k
        for i in range(n):
            omega[mask, i] = data.laws[k][i].sample(rng, int(mask.sum()))

    dens = np.stack([
        np.prod(np.stack([np.asarray(data.laws[k][i].pdf(omega[:, i]))
                          for i in range(n)], axis=1), axis=1)
        for k in range(n)], axis=1)              # (draws, k)
    agg = dens @ data.lam
    clicks_mc = np.array([
        float(np.mean(omega[:, i] * data.lam[i] * dens[:, i] / agg))
        for i in range(n)])
    a = data.outside_option()

    # mass balance on dyadic test rectangles in the first two coordinates
    rect_errors = []
    for lo0, hi0, lo1, hi1 in [(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 0.5),
                               (0.25, 0.75, 0.25, 0.75)]:
        in_rect = ((omega[:, 0] >= lo0) & (omega[:, 0] < hi0)
                   & (omega[:, 1] >= lo1) & (omega[:, 1] < hi1))
        # total assignment weight is identically 1, so the induced measure of
        # the rectangle is its empirical alpha-mass
        induced = float(np.mean(in_rect))
        exact = float(sum(
            data.lam[k]
            * (data.laws[k][0].cdf(hi0) - data.laws[k][0].cdf(lo0))
            * (data.laws[k][1].cdf(hi1) - data.laws[k][1].cdf(lo1))
            for k in range(n)))
        rect_errors.append(abs(induced - exact))
    return {"clicks": clicks_mc, "outside_option": a,
            "max_click_error": float(np.max(np.abs(clicks_mc - a))),
            "max_rectangle_error": float(np.max(rect_errors))}


def _as_dist_list(dists, n: int) -> list[TypeDistribution]:
    if isinstance(dists, TypeDistribution):
        return [dists] * n
    dists = list(dists)
    if len(dists) != n:
        raise ValueError("need one type distribution per merchant")
    return dists
