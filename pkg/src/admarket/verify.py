"""Numerical verification oracles for mechanisms on finite datasets.

Checks incentive compatibility, participation, click monotonicity, the
envelope formula, and the saddle-point structure of a scoring mechanism, and
compares its value against a brute-force search over the score-threshold
family on tiny instances.  Violations are reported, not thrown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import BUYER, SELLER, weighted_virtual
from .finite import FiniteDataset, FiniteMechanism, MechanismOutcome, TieBreakRule
from .scoring import ScoringRule, ironing_bracket

DEFAULT_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    witness: str
    tolerance: float

    def to_text(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{self.name}: {status} worst={self.worst:.3e} "
                f"tol={self.tolerance:.1e} at {self.witness}")


@dataclass
class VerificationReport:
    results: list[CheckResult] = field(default_factory=list)

    def add(self, result: CheckResult) -> None:
        self.results.append(result)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_text(self) -> str:
        lines = [r.to_text() for r in self.results]
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# -- interim-curve checks ---------------------------------------------------


def check_ic(outcome: MechanismOutcome, tol: float = DEFAULT_TOL) -> CheckResult:
    """Truthful reporting beats every grid deviation for every merchant."""
    worst, witness = -np.inf, "-"
    for i in range(outcome.clicks.shape[0]):
        net = outcome.clicks[i] - outcome.outside[i]
        deviation = outcome.grid[:, None] * net[None, :] - outcome.transfers[i][None, :]
        truthful = np.diag(deviation)
        gain = deviation - truthful[:, None]
        idx = np.unravel_index(np.argmax(gain), gain.shape)
        if gain[idx] > worst:
            worst = float(gain[idx])
            witness = (f"merchant {i}, theta={outcome.grid[idx[0]]:.4f}"
                       f" reporting {outcome.grid[idx[1]]:.4f}")
    return CheckResult("incentive-compatibility", worst <= tol, worst, witness, tol)


def check_ir(outcome: MechanismOutcome, tol: float = DEFAULT_TOL) -> CheckResult:
    """Payoffs nonnegative; worst-off payoff binds where attainment is flagged."""
    worst = float(np.max(-outcome.payoffs))
    i, j = np.unravel_index(np.argmax(-outcome.payoffs), outcome.payoffs.shape)
    witness = f"merchant {i}, theta={outcome.grid[j]:.4f}"
    ok = worst <= tol
    for i in range(outcome.payoffs.shape[0]):
        if outcome.attained[i]:
            slack = float(np.min(outcome.payoffs[i]))
            if slack > tol:
                ok = False
                worst = max(worst, slack)
                witness = f"merchant {i}: worst-off payoff {slack:.3e} not binding"
    return CheckResult("participation", ok, worst, witness, tol)


def check_monotonicity(outcome: MechanismOutcome, tol: float = 1e-3) -> CheckResult:
    """Interim clicks nondecreasing up to integration/MC noise."""
    drops = -np.diff(outcome.clicks, axis=1)
    worst = float(np.max(drops))
    i, j = np.unravel_index(np.argmax(drops), drops.shape)
    witness = f"merchant {i}, theta={outcome.grid[j]:.4f}"
    return CheckResult("click-monotonicity", worst <= tol, worst, witness, tol)


def check_envelope(outcome: MechanismOutcome, tol: float = DEFAULT_TOL) -> CheckResult:
    """U_i(theta) - U_i(theta_hat) equals the integral of net clicks."""
    worst, witness = 0.0, "-"
    for i in range(outcome.clicks.shape[0]):
        net = outcome.clicks[i] - outcome.outside[i]
        cum = np.concatenate(([0.0], np.cumsum(np.diff(outcome.grid) * 0.5
                                               * (net[1:] + net[:-1]))))
        cum -= float(np.interp(outcome.theta_hat[i], outcome.grid, cum))
        u_hat = float(np.interp(outcome.theta_hat[i], outcome.grid,
                                outcome.payoffs[i]))
        err = np.abs(outcome.payoffs[i] - u_hat - cum)
        j = int(np.argmax(err))
        if err[j] > worst:
            worst = float(err[j])
            witness = f"merchant {i}, theta={outcome.grid[j]:.4f}"
    return CheckResult("envelope", worst <= tol, worst, witness, tol)


# -- saddle-point structure -------------------------------------------------


def check_saddle(mech: FiniteMechanism, outcome: MechanismOutcome | None = None,
                 tol: float = 5e-3, seed: int = 0,
                 n_profiles: int = 25) -> CheckResult:
    """Scoring allocation maximizes the per-customer virtual score pointwise,
    the virtual objective is minimized at the worst-off profile, and the
    objective identity holds for random switch profiles."""
    outcome = outcome or mech.outcome()
    rng = np.random.default_rng(seed)
    n = mech.dataset.n_merchants
    worst, witness, ok = 0.0, "-", True

    # (a) pointwise maximization over sampled type profiles
    for _ in range(n_profiles):
        theta = rng.random(n)
        g = mech.scores(theta)
        x = mech.allocate(theta)
        for k in range(mech.dataset.n_profiles):
            attained = float(np.sum(x[:, k] * mech.dataset.profiles[k] * g))
            best = mech.dataset.alpha()[k] * max(0.0,
                                                 float(np.max(mech.dataset.profiles[k] * g)))
            gap = best - attained
            if gap > worst:
                worst, witness = gap, f"pointwise max at profile {k}"
            if gap > tol:
                ok = False

    # (b) per-coordinate minimization of the virtual objective at theta_hat
    base = mech.virtual_objective(outcome.theta_hat)
    scan = np.linspace(0.0, 1.0, 21)
    for i in range(n):
        for t in scan:
            probe = outcome.theta_hat.copy()
            probe[i] = t
            gap = base - mech.virtual_objective(probe)
            if gap > worst:
                worst, witness = gap, f"virtual objective below saddle at merchant {i}, theta'={t:.2f}"
            if gap > tol:
                ok = False

    # (c) switch-profile invariance of objective = virtual objective - rents
    vals = []
    for _ in range(5):
        probe = rng.random(n)
        rents = sum(float(np.interp(probe[i], outcome.grid, outcome.payoffs[i]))
                    for i in range(n))
        vals.append(mech.virtual_objective(probe)
                    - mech.rules[0].eta.eta_r * rents)
    spread = float(np.max(vals) - np.min(vals))
    if spread > worst:
        worst, witness = spread, "objective identity spread over random switch profiles"
    if spread > tol:
        ok = False
    return CheckResult("saddle-point", ok, worst, witness, tol)


def full_report(mech: FiniteMechanism, tol: float = DEFAULT_TOL,
                saddle_tol: float = 5e-3) -> VerificationReport:
    outcome = mech.outcome()
    report = VerificationReport()
    report.add(check_ic(outcome, tol))
    report.add(check_ir(outcome, tol))
    report.add(check_monotonicity(outcome, max(tol, 1e-3)))
    report.add(check_envelope(outcome, tol))
    report.add(check_saddle(mech, outcome, saddle_tol))
    return report


# -- brute force ------------------------------------------------------------


class InstanceTooLargeError(ValueError):
    """Raised when the brute-force oracle is asked for an instance beyond
    desk scale."""


def virtual_objective_min(mech: FiniteMechanism) -> tuple[float, np.ndarray]:
    """Minimum over switch profiles of the virtual objective; separable per
    coordinate, so each coordinate is scanned independently on the grid."""
    grid = mech.grid
    best_val = 0.0
    argmin = np.empty(mech.dataset.n_merchants)
    for i in range(mech.dataset.n_merchants):
        s = mech.interim_clicks_grid(i) - mech.dataset.outside_option()[i]
        rule = mech.rules[i]
        f = rule.dist.pdf(grid)
        integrand_s = s * weighted_virtual(rule.dist, rule.eta, grid, SELLER) * f
        integrand_b = s * weighted_virtual(rule.dist, rule.eta, grid, BUYER) * f

        def cumtrapz(y):
            return np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5
                                                    * (y[1:] + y[:-1]))))

        below = cumtrapz(integrand_s)
        above = cumtrapz(integrand_b)
        vals = below + (above[-1] - above)
        j = int(np.argmin(vals))
        best_val += float(vals[j])
        argmin[i] = grid[j]
    return best_val, argmin


def brute_force_value(dataset: FiniteDataset, dist, eta, grid_n: int = 21,
                      z_steps: int = 9, tie_steps: int = 5,
                      extra_candidates=()) -> dict:
    """Best max-min value over the score-threshold family on a tiny instance.

    Searches ironing-level pairs and inclusive-style tie weights on coarse
    grids, evaluating min over switch profiles of the virtual objective for
    each candidate.  Returns the best value and the best candidate.
    """
    if dataset.n_merchants != 2:
        raise InstanceTooLargeError("brute force supports exactly 2 merchants")
    if dataset.n_profiles > 3:
        raise InstanceTooLargeError("brute force supports at most 3 profiles")
    if grid_n > 21:
        raise InstanceTooLargeError("brute force type grid capped at 21 points")
    dists = dist if isinstance(dist, (list, tuple)) else [dist, dist]
    lo0, hi0 = ironing_bracket(dists[0], eta)
    lo1, hi1 = ironing_bracket(dists[1], eta)
    z_grid_0 = np.linspace(lo0, hi0, z_steps)
    z_grid_1 = np.linspace(lo1, hi1, z_steps)
    p_grid = np.linspace(0.0, 1.0, tie_steps)
    candidates = [(z0, z1, p) for z0 in z_grid_0 for z1 in z_grid_1
                  for p in p_grid]
    candidates.extend(extra_candidates)
    # ties on a profile reached by only one merchant always go to that
    # merchant; the searched weight applies to shared profiles
    shared = dataset.profiles > 0.0
    best = {"value": -np.inf, "candidate": None, "argmin": None}
    for z0, z1, p in candidates:
        rules = [ScoringRule(dists[0], eta, float(z0)),
                 ScoringRule(dists[1], eta, float(z1))]
        weights = np.tile([p, 1.0 - p, 0.0], (dataset.n_profiles, 1))
        weights[:, :2] = np.where(shared.sum(axis=1, keepdims=True) > 1,
                                  weights[:, :2], shared.astype(float))
        mech = FiniteMechanism(dataset, rules, TieBreakRule(weights),
                               grid_size=grid_n)
        val, argmin = virtual_objective_min(mech)
        if val > best["value"]:
            best = {"value": val, "candidate": (float(z0), float(z1), float(p)),
                    "argmin": argmin}
    return best
