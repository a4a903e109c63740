"""Direct mechanism engine for finitely many customer profiles.

Allocates each profile's mass to the merchant with the highest quality score
(CTR times ironed score), breaks ties by per-profile weights, and produces the
interim objects the theory is stated in: expected clicks S_i, worst-off types,
transfers, payoffs and the objective decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quad import gl_nodes_segmented
from .distributions import BUYER, SELLER, inverse_weighted_clamped, weighted_virtual
from .scoring import ScoringRule

TIE_TOL = 1e-9
DEFAULT_GRID = 201
DEFAULT_MC_DRAWS = 200_000
MC_CHUNK = 20_000


@dataclass(frozen=True)
class FiniteDataset:
    """Customer profiles (CTR vectors) and per-merchant ownership masses.

    ``profiles`` has shape (K, N); ``masses`` has shape (N, K) with
    masses[i, k] the mass of profile k initially owned by merchant i.  Total
    mass is 1.
    """

    profiles: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        profiles = np.asarray(self.profiles, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        object.__setattr__(self, "profiles", profiles)
        object.__setattr__(self, "masses", masses)
        if profiles.ndim != 2 or masses.shape != (profiles.shape[1], profiles.shape[0]):
            raise ValueError("profiles must be (K, N) and masses (N, K)")
        if profiles.shape[1] < 2:
            raise ValueError("need at least two merchants")
        if np.any(profiles < 0) or np.any(profiles > 1):
            raise ValueError("CTRs must lie in [0, 1]")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError("total customer mass must equal 1")

    @property
    def n_merchants(self) -> int:
        return self.profiles.shape[1]

    @property
    def n_profiles(self) -> int:
        return self.profiles.shape[0]

    def alpha(self) -> np.ndarray:
        """Aggregate mass per profile."""
        return self.masses.sum(axis=0)

    def outside_option(self) -> np.ndarray:
        """a_i: expected clicks from targeting one's own dataset independently."""
        return np.einsum("ik,ki->i", self.masses, self.profiles)


@dataclass(frozen=True)
class TieBreakRule:
    """Per-profile tie-break weights over merchants plus the designer sink.

    ``weights`` has shape (K, N + 1); the last column is the designer.  On a
    tie, mass splits proportionally to the weights of the tied participants
    (the designer participates only in ties at score zero).  If all tied
    weights vanish, tied merchants split uniformly.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 2 or np.any(w < 0):
            raise ValueError("tie-break weights must be a nonnegative (K, N+1) array")

    @classmethod
    def uniform(cls, n_profiles: int, n_merchants: int) -> "TieBreakRule":
        w = np.zeros((n_profiles, n_merchants + 1))
        w[:, :n_merchants] = 1.0 / n_merchants
        return cls(w)

    def split(self, k: int, tied: np.ndarray, designer_tied: bool) -> np.ndarray:
        """Probability vector over merchants for profile k given the tie set."""
        w = self.weights[k, :-1] * tied
        total = w.sum() + (self.weights[k, -1] if designer_tied else 0.0)
        if total <= 0.0:
            n_tied = tied.sum()
            if n_tied == 0:
                return np.zeros_like(w)
            return tied / n_tied
        return w / total


@dataclass
class WorstOffType:
    theta_hat: float
    attained: bool


@dataclass
class MechanismOutcome:
    """Interim curves and the objective decomposition of a mechanism."""

    grid: np.ndarray
    clicks: np.ndarray       # S_i on grid, shape (N, G)
    transfers: np.ndarray    # T_i on grid
    payoffs: np.ndarray      # U_i on grid
    outside: np.ndarray      # a_i
    theta_hat: np.ndarray
    attained: np.ndarray
    surplus: float           # V
    engagement: float        # W
    revenue: float           # R
    value: float             # eta_v V + eta_w W + eta_r R


class FiniteMechanism:
    """Scoring mechanism over a finite dataset.

    Opponent expectations are exact piecewise integrals for two merchants,
    tensor Gauss-Legendre for three, and seeded Monte Carlo beyond that.
    """

    def __init__(self, dataset: FiniteDataset, rules: list[ScoringRule],
                 tiebreak: TieBreakRule | None = None, grid_size: int = DEFAULT_GRID,
                 seed: int = 0, mc_draws: int = DEFAULT_MC_DRAWS):
        if len(rules) != dataset.n_merchants:
            raise ValueError("one scoring rule per merchant required")
        self.dataset = dataset
        self.rules = rules
        self.tiebreak = tiebreak or TieBreakRule.uniform(dataset.n_profiles,
                                                         dataset.n_merchants)
        if self.tiebreak.weights.shape != (dataset.n_profiles, dataset.n_merchants + 1):
            raise ValueError("tie-break weights shape does not match the dataset")
        self.grid = np.linspace(0.0, 1.0, grid_size)
        self.seed = seed
        self.mc_draws = mc_draws
        self._clicks_cache: dict[int, np.ndarray] = {}

    # -- ex-post allocation ------------------------------------------------

    def scores(self, theta: np.ndarray) -> np.ndarray:
        return np.array([float(r.score(t)) for r, t in zip(self.rules, theta)])

    def allocate(self, theta) -> np.ndarray:
        """Mass of each profile assigned to each merchant, shape (N, K)."""
        theta = np.asarray(theta, dtype=float)
        g = self.scores(theta)
        ds = self.dataset
        x = np.zeros((ds.n_merchants, ds.n_profiles))
        alpha = ds.alpha()
        for k in range(ds.n_profiles):
            q = ds.profiles[k] * g
            top = max(q.max(), 0.0)
            tied = q >= top - TIE_TOL
            designer_tied = top <= TIE_TOL
            x[:, k] = self.tiebreak.split(k, tied, designer_tied) * alpha[k]
        return x

    def _clicks_batch(self, i: int, theta_i: float, opponents: np.ndarray) -> np.ndarray:
        """Clicks to merchant i at own type theta_i for a batch of opponent
        profiles, shape (M, N-1) -> (M,)."""
        ds = self.dataset
        n, k_n = ds.n_merchants, ds.n_profiles
        m = opponents.shape[0]
        g = np.empty((m, n))
        others = [j for j in range(n) if j != i]
        g[:, i] = float(self.rules[i].score(theta_i))
        for col, j in enumerate(others):
            g[:, j] = self.rules[j].score(opponents[:, col])
        alpha = ds.alpha()
        wts = self.tiebreak.weights
        clicks = np.zeros(m)
        for k in range(k_n):
            q = ds.profiles[k][None, :] * g            # (M, N)
            top = np.maximum(q.max(axis=1), 0.0)
            tied = q >= (top - TIE_TOL)[:, None]
            designer_tied = top <= TIE_TOL
            w = wts[k, :-1][None, :] * tied
            total = w.sum(axis=1) + wts[k, -1] * designer_tied
            p_i = np.where(total > 0.0, w[:, i] / np.where(total > 0.0, total, 1.0),
                           tied[:, i] / np.maximum(tied.sum(axis=1), 1))
            clicks += ds.profiles[k, i] * p_i * alpha[k]
        return clicks

    # -- interim quantities ------------------------------------------------

    def interim_clicks(self, i: int, theta_i: float) -> float:
        """S_i(theta_i): expected clicks over opponents' types."""
        n = self.dataset.n_merchants
        if n == 2:
            return self._interim_exact2(i, theta_i)
        if n == 3:
            return self._interim_tensor3(i, theta_i)
        return self._interim_mc(i, theta_i)

    def _opponent_breaks(self, i: int, j: int, theta_i: float) -> list[float]:
        """Type values of opponent j where merchant i's winner set can change."""
        ds = self.dataset
        rule_j = self.rules[j]
        band = rule_j.tie_interval()
        breaks = [band[0], band[1]]
        g_i = float(self.rules[i].score(theta_i))
        for k in range(ds.n_profiles):
            w_j = ds.profiles[k, j]
            if w_j <= 0.0:
                continue
            c = ds.profiles[k, i] * g_i / w_j
            for side in (SELLER, BUYER):
                breaks.append(inverse_weighted_clamped(rule_j.dist, rule_j.eta, c, side))
        return breaks

    def _interim_exact2(self, i: int, theta_i: float) -> float:
        j = 1 - i
        rule_j = self.rules[j]
        breaks = self._opponent_breaks(i, j, theta_i)
        pts = np.unique(np.clip(np.array([0.0, 1.0] + breaks), 0.0, 1.0))
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi - lo <= 1e-14:
                continue
            mid = 0.5 * (lo + hi)
            # clicks are constant in the opponent's type within a segment,
            # except that the tie band must be probed at an exact band point
            band = rule_j.tie_interval()
            if band[0] - 1e-12 <= lo and hi <= band[1] + 1e-12:
                mid = float(np.clip(mid, band[0], band[1]))
            c = self._clicks_batch(i, theta_i, np.array([[mid]]))[0]
            total += c * (float(rule_j.dist.cdf(hi)) - float(rule_j.dist.cdf(lo)))
        return total

    def _interim_tensor3(self, i: int, theta_i: float) -> float:
        others = [j for j in range(3) if j != i]
        nodes, weights = [], []
        for j in others:
            band = self.rules[j].tie_interval()
            x, w = gl_nodes_segmented(0.0, 1.0, list(band), 32)
            nodes.append(x)
            weights.append(w * self.rules[j].dist.pdf(x))
        xa, xb = np.meshgrid(nodes[0], nodes[1], indexing="ij")
        wa, wb = np.meshgrid(weights[0], weights[1], indexing="ij")
        opp = np.column_stack([xa.ravel(), xb.ravel()])
        clicks = self._clicks_batch(i, theta_i, opp)
        return float(np.sum(clicks * (wa * wb).ravel()))

    def _interim_mc(self, i: int, theta_i: float) -> float:
        n = self.dataset.n_merchants
        acc, done = 0.0, 0
        chunk_idx = 0
        while done < self.mc_draws:
            m = min(MC_CHUNK, self.mc_draws - done)
            rng = np.random.default_rng(
                np.random.SeedSequence([self.seed, i, chunk_idx]))
            u = rng.random((m, n - 1))
            opp = np.empty_like(u)
            others = [j for j in range(n) if j != i]
            for col, j in enumerate(others):
                opp[:, col] = _sample_from_cdf(self.rules[j].dist, u[:, col])
            acc += self._clicks_batch(i, theta_i, opp).sum()
            done += m
            chunk_idx += 1
        return acc / self.mc_draws

    def interim_clicks_grid(self, i: int) -> np.ndarray:
        if i not in self._clicks_cache:
            self._clicks_cache[i] = np.array(
                [self.interim_clicks(i, t) for t in self.grid])
        return self._clicks_cache[i]

    def worst_off_type(self, i: int, tol: float = 1e-6) -> WorstOffType:
        """Representative worst-off type: where S_i crosses the outside option.

        Prefers the critical type pinned by the ironing level when the
        crossing is attained there.
        """
        a_i = self.dataset.outside_option()[i]
        t_hat = self.rules[i].critical_type()
        if abs(self.interim_clicks(i, t_hat) - a_i) <= max(tol, 1e-4):
            return WorstOffType(t_hat, True)
        s = self.interim_clicks_grid(i) - a_i
        if np.all(s >= -tol):
            idx = int(np.argmin(np.abs(s)))
            return WorstOffType(float(self.grid[idx]), bool(abs(s[idx]) <= tol))
        if np.all(s <= tol):
            idx = int(np.argmin(np.abs(s)))
            return WorstOffType(float(self.grid[idx]), bool(abs(s[idx]) <= tol))
        sign_change = np.nonzero(np.diff(np.signbit(s)))[0]
        idx = sign_change[0]
        lo, hi = self.grid[idx], self.grid[idx + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if (self.interim_clicks(i, mid) - a_i) * s[idx] > 0:
                lo = mid
            else:
                hi = mid
        return WorstOffType(0.5 * (lo + hi), True)

    def interim_transfers_grid(self, i: int, theta_hat: float) -> np.ndarray:
        """T_i on the grid via the envelope formula anchored at theta_hat."""
        s = self.interim_clicks_grid(i)
        a_i = self.dataset.outside_option()[i]
        net = s - a_i
        integral = _cumulative_from(self.grid, net, theta_hat)
        return self.grid * net - integral

    # -- objective ---------------------------------------------------------

    def outcome(self) -> MechanismOutcome:
        ds = self.dataset
        n = ds.n_merchants
        a = ds.outside_option()
        clicks = np.vstack([self.interim_clicks_grid(i) for i in range(n)])
        theta_hat = np.empty(n)
        attained = np.empty(n, dtype=bool)
        transfers = np.empty_like(clicks)
        for i in range(n):
            wo = self.worst_off_type(i)
            theta_hat[i] = wo.theta_hat
            attained[i] = wo.attained
            transfers[i] = self.interim_transfers_grid(i, wo.theta_hat)
        payoffs = self.grid[None, :] * (clicks - a[:, None]) - transfers
        pdfs = np.vstack([self.rules[i].dist.pdf(self.grid) for i in range(n)])
        surplus = float(np.sum(np.trapezoid(self.grid * (clicks - a[:, None]) * pdfs,
                                        self.grid, axis=1)))
        engagement = float(np.sum(np.trapezoid((clicks - a[:, None]) * pdfs,
                                           self.grid, axis=1)))
        revenue = float(np.sum(np.trapezoid(transfers * pdfs, self.grid, axis=1)))
        eta = self.rules[0].eta
        value = eta.eta_v * surplus + eta.eta_w * engagement + eta.eta_r * revenue
        return MechanismOutcome(self.grid, clicks, transfers, payoffs, a, theta_hat,
                                attained, surplus, engagement, revenue, value)

    def virtual_objective(self, theta_prime: np.ndarray) -> float:
        """psi_eta(x, theta'): expected net clicks weighted by the (unironed)
        virtual type function switching sides at theta'_i."""
        total = 0.0
        for i in range(self.dataset.n_merchants):
            s = self.interim_clicks_grid(i) - self.dataset.outside_option()[i]
            rule = self.rules[i]
            phi = np.where(
                self.grid < theta_prime[i],
                weighted_virtual(rule.dist, rule.eta, self.grid, SELLER),
                weighted_virtual(rule.dist, rule.eta, self.grid, BUYER))
            total += float(np.trapezoid(s * phi * rule.dist.pdf(self.grid), self.grid))
        return total


def rn_baseline(dataset: FiniteDataset, grid_size: int = DEFAULT_GRID) -> MechanismOutcome:
    """Type-independent benchmark allocation x = alpha with zero transfers.

    Every merchant keeps exactly their outside option, so all objective parts
    vanish.
    """
    grid = np.linspace(0.0, 1.0, grid_size)
    n = dataset.n_merchants
    a = dataset.outside_option()
    clicks = np.repeat(a[:, None], grid_size, axis=1)
    zeros = np.zeros_like(clicks)
    return MechanismOutcome(grid, clicks, zeros, zeros.copy(), a,
                            theta_hat=np.zeros(n), attained=np.ones(n, dtype=bool),
                            surplus=0.0, engagement=0.0, revenue=0.0, value=0.0)


def _cumulative_from(grid: np.ndarray, values: np.ndarray, anchor: float) -> np.ndarray:
    """Trapezoid cumulative integral of values over grid, anchored to vanish
    at ``anchor`` (linearly interpolated between grid points)."""
    cum = np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5 * (values[1:] + values[:-1]))))
    at_anchor = float(np.interp(anchor, grid, cum))
    return cum - at_anchor


def _sample_from_cdf(dist, u: np.ndarray) -> np.ndarray:
    """Inverse-cdf sampling on a fine interpolation table."""
    xs = np.linspace(0.0, 1.0, 4097)
    cs = dist.cdf(xs)
    return np.interp(u, cs, xs)
