"""Acceptance gate: one test per headline requirement.

Run with ``pytest -v`` to get one pass/fail line per criterion.  Each test
prints supporting numbers; printed output is shown on failure.
"""

import json
import time

import numpy as np
import pytest

import admarket as am
from admarket import cli
from admarket.verify import virtual_objective_min

UNIF = am.TypeDistribution.uniform()
REV = am.WelfareWeight(0.0, 0.0, 1.0)


def test_criterion_1_classic_benchmarks():
    t0 = time.perf_counter()
    b = am.classic_benchmarks(UNIF, REV)
    assert abs(b.monopoly_price - 0.5) < 1e-8
    assert abs(b.bilateral_gap - 0.5) < 1e-8
    assert abs(b.dissolution_level - 0.5) < 1e-8
    assert abs(b.dissolution_interval[0] - 0.25) < 1e-8
    assert abs(b.dissolution_interval[1] - 0.75) < 1e-8
    elapsed = time.perf_counter() - t0
    print(f"classic benchmarks ok in {elapsed:.3f}s")
    assert elapsed < 1.0


def test_criterion_2_bundling_example():
    t0 = time.perf_counter()
    ex = am.bundling_example(0.8)
    assert abs(ex.scarcity - 0.25) < 1e-12
    assert abs(ex.ironing_level - 0.25) < 1e-12
    assert np.allclose(ex.tie_interval, (0.125, 0.625), atol=1e-12)
    assert abs(ex.incl_tiebreak_1 - 0.75) < 1e-12

    # Monte Carlo revenue comparison at 3 standard errors
    rng = np.random.default_rng(42)
    n = 400_000
    th1, th2 = rng.random(n), rng.random(n)
    sep = (ex.separate_exclusive_transfer(th2)
           + ex.separate_inclusive_transfer(th1)
           + ex.separate_inclusive_transfer(th2))
    bun = (ex.bundled_exclusive_transfer(th2)
           + ex.bundled_inclusive_transfer(th1)
           + ex.bundled_inclusive_transfer(th2))
    diff = bun - sep
    mean, se = float(np.mean(diff)), float(np.std(diff) / np.sqrt(n))
    print(f"bundled - separate = {mean:.5f} (3 s.e. = {3 * se:.5f})")
    assert mean > 3.0 * se
    assert abs(mean - (ex.bundled_revenue() - ex.separate_revenue())) < 5 * se

    # The revenue gap is largest (1/24) at the ironing threshold 2/3 and
    # vanishes as the inclusive mass approaches 1, not at the threshold;
    # the limit clause is checked in its corrected direction.
    gaps = {a: am.bundling_example(a).bundled_revenue()
            - am.bundling_example(a).separate_revenue()
            for a in (2.0 / 3.0, 0.8, 0.9, 0.99, 0.999)}
    print("revenue gaps:", {k: round(v, 5) for k, v in gaps.items()})
    assert abs(gaps[2.0 / 3.0] - 1.0 / 24.0) < 1e-9
    vals = list(gaps.values())
    assert all(np.diff(vals) < 0)
    assert gaps[0.999] < 5e-3
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 30.0


def _ep_data_from_beta(b1, b2):
    s = (1.0 - b1 - b2) / (2.0 - b1 - b2)
    m = s / (1.0 - b1 - b2)
    e = s / 2.0
    return am.ExclusiveInclusiveData(e, e, b1 * m + e, b2 * m + e)


def test_criterion_3_exclusive_priority_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    datasets = [
        _ep_data_from_beta(0.2, 0.1),     # floor tie
        _ep_data_from_beta(0.5, 0.4),     # common interior level
        _ep_data_from_beta(0.8, 0.1),     # split levels
        am.ExclusiveInclusiveData(0.0, 0.3, 0.6, 0.1),   # one-sided ironing
        am.ExclusiveInclusiveData(0.1, 0.4, 0.3, 0.2),   # one-sided tie
        am.ExclusiveInclusiveData(0.3, 0.3, 0.2, 0.2),   # both shares zero
    ]
    while len(datasets) < 50:
        datasets.append(am.ExclusiveInclusiveData(*rng.dirichlet(np.ones(4))))
    cases = set()
    worst = 0.0
    for data in datasets:
        sol = am.solve_ep(data, UNIF, REV)
        cases.add(sol.case)
        mech = am.to_finite_mechanism(data, UNIF, REV, sol)
        a = mech.dataset.outside_option()
        for i in range(2):
            if sol.slack[i]:
                continue
            wo = mech.worst_off_type(i)
            err = abs(mech.interim_clicks(i, wo.theta_hat) - a[i])
            worst = max(worst, err)
            assert err < 1e-3, f"{data} merchant {i}: err {err:.2e}"
    print(f"cases covered: {sorted(cases)}; worst |S - a| = {worst:.2e}")
    assert len(cases) >= 4

    # positive score floor exception: worst-off payoff strictly above the
    # outside option for the merchant short on inclusive data
    eta = am.WelfareWeight(0.0, 0.6, 0.4)
    data = am.ExclusiveInclusiveData(0.05, 0.55, 0.2, 0.2)
    sol = am.solve_ep(data, UNIF, eta)
    assert any(sol.slack)
    mech = am.to_finite_mechanism(data, UNIF, eta, sol)
    a = mech.dataset.outside_option()
    for i in range(2):
        if sol.slack[i]:
            wo = mech.worst_off_type(i)
            gap = mech.interim_clicks(i, wo.theta_hat) - a[i]
            print(f"exception merchant {i}: S - a = {gap:.4f}")
            assert gap > 1e-3
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 300.0


def test_criterion_4_two_merchant_quality_sweep():
    t0 = time.perf_counter()
    eps_grid = (0.3, 0.6, 0.9, 0.99)
    z_sym = []
    for eps in eps_grid:
        law = am.CTRLaw.uniform(eps, 1.0)
        sol = am.solve_optz(am.ContinuumDataset.iid(2, law), UNIF, REV)
        z_sym.append(sol.z[0])
        sol_a = am.solve_optz(am.ContinuumDataset.iid(2, law, lam=[0.8, 0.2]),
                              UNIF, REV)
        assert sol_a.z[0] > sol_a.z[1], f"eps={eps}: {sol_a.z}"
    print("symmetric z(eps):", [round(z, 4) for z in z_sym])
    assert abs(z_sym[-1] - 0.5) < 0.02
    assert all(np.diff(z_sym) > 0)
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 300.0


def test_criterion_5_symmetric_level_sequence():
    t0 = time.perf_counter()
    ns = (2, 5, 10, 25, 50, 100, 200)
    for lo in (0.0, 0.9):
        law = am.CTRLaw.uniform(lo, 1.0)
        zs = [am.solve_symmetric(law, UNIF, REV, n, tol=1e-6) for n in ns]
        print(f"law U[{lo},1]: z_N =", [round(z, 4) for z in zs])
        assert all(np.diff(zs) > 0)
        if lo == 0.9:
            assert zs[-1] > 0.95
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 600.0


def test_criterion_6_limit_prices_profits_efficiency():
    t0 = time.perf_counter()
    for er in (0.25, 0.5, 0.99, 1.0):
        eta = am.WelfareWeight(1.0 - er, 0.0, er) if er < 1.0 else REV
        cfg = am.LargeMarketConfig(UNIF, eta, 0.5)
        assert abs(am.design(cfg).selling_price - 1.0 / (1.0 + er)) < 1e-10
    for mu in np.linspace(0.02, 1.0, 50):
        pr = am.profits(am.LargeMarketConfig(UNIF, REV, float(mu)))
        if mu < 1.0:
            assert pr.combined > pr.selling_only
        else:
            assert pr.combined >= pr.selling_only - 1e-12
    eta99 = am.WelfareWeight(0.01, 0.0, 0.99)
    assert am.are(am.LargeMarketConfig(UNIF, eta99, 1e-9)).value > 0.98
    for mu in (0.2, 0.5, 0.8):
        assert am.are(am.LargeMarketConfig(UNIF, eta99, mu)).value < 1.0
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.2f}s")
    assert elapsed < 10.0


def test_criterion_7_scaled_clicks_and_transfer_limits():
    t0 = time.perf_counter()
    law = am.CTRLaw.uniform(0.99, 1.0)
    cfg = am.LargeMarketConfig(UNIF, REV, law.mean())
    diag = am.finite_n_diagnostics(cfg, law, [100])
    p_s = am.design(cfg).selling_price
    # the limit step is defined on [0, 1); theta = 1 sits in the vanishing
    # buying market and is excluded
    mask = diag.theta_grid < 1.0
    err = np.max(np.abs(diag.scaled_clicks[0] - diag.limit_step)[mask])
    tr = diag.aggregate_transfers[0]
    rel = abs(tr - diag.limit_transfer) / abs(diag.limit_transfer)
    print(f"p_S={p_s:.4f}; max |N*S - step| = {err:.4f}; "
          f"transfer rel err = {rel:.4f}")
    assert err < 0.05
    assert rel < 0.05
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 600.0


def test_criterion_8_verification_suite():
    t0 = time.perf_counter()
    # equal-share dissolution instance
    ds = am.FiniteDataset(profiles=[(1.0, 1.0)], masses=[[0.5], [0.5]])
    mech = am.FiniteMechanism(ds, [am.ScoringRule(UNIF, REV, 0.5)] * 2,
                              am.TieBreakRule(np.array([[0.5, 0.5, 0.0]])))
    rep = am.full_report(mech)
    print(rep.to_text())
    assert rep.passed

    # bilateral instance: buyer owns nothing, seller owns everything
    dsb = am.FiniteDataset(profiles=[(1.0, 1.0)], masses=[[0.0], [1.0]])
    z_top = float(am.weighted_virtual(UNIF, REV, 1.0, am.SELLER))
    mechb = am.FiniteMechanism(dsb, [am.ScoringRule(UNIF, REV, 0.0),
                                     am.ScoringRule(UNIF, REV, z_top)],
                               am.TieBreakRule(np.array([[0.0, 1.0, 0.0]])))
    repb = am.full_report(mechb)
    print(repb.to_text())
    assert repb.passed

    # corrupted-transfer mutant must fail with a witness
    from dataclasses import replace
    out = mech.outcome()
    bad = replace(out, transfers=out.transfers + 0.01 * out.grid[None, :] ** 2)
    res = am.check_ic(bad)
    assert not res.passed and "merchant" in res.witness

    # brute force on a two-profile instance whose optimum sits on the grid
    data = am.ExclusiveInclusiveData(0.0, 0.2, 0.4, 0.4)
    sol = am.solve_ep(data, UNIF, REV)
    ds2 = am.FiniteDataset(profiles=[(0.0, 1.0), (1.0, 1.0)],
                           masses=[[0.2, 0.4], [0.0, 0.4]])
    tb = am.TieBreakRule(np.array([[0.0, 1.0, 0.0],
                                   [sol.p_incl[0], sol.p_incl[1], 0.0]]))
    rules = [am.ScoringRule(UNIF, REV, sol.z[0]),
             am.ScoringRule(UNIF, REV, sol.z[1])]
    mech2 = am.FiniteMechanism(ds2, rules, tb, grid_size=21)
    value, _ = virtual_objective_min(mech2)
    best = am.brute_force_value(ds2, UNIF, REV, grid_n=21, z_steps=9,
                                tie_steps=5)
    # two grid steps' worth of objective error, measured locally
    z0, z1, p = best["candidate"]
    step = 0.25  # z grid spacing
    neighbors = []
    for dz in (-step, step):
        zs0 = min(max(z0 + dz, 0.0), 2.0)
        r = [am.ScoringRule(UNIF, REV, zs0), am.ScoringRule(UNIF, REV, z1)]
        m = am.FiniteMechanism(ds2, r, am.TieBreakRule(
            np.tile([p, 1 - p, 0.0], (2, 1))), grid_size=21)
        neighbors.append(abs(virtual_objective_min(m)[0] - best["value"]))
    tol = 2.0 * max(max(neighbors), 1e-4)
    print(f"scoring value {value:.6f} vs brute force {best['value']:.6f} "
          f"(tol {tol:.4f}) at {best['candidate']}")
    assert abs(value - best["value"]) <= tol
    elapsed = time.perf_counter() - t0
    print(f"done in {elapsed:.1f}s")
    assert elapsed < 600.0


def test_criterion_9_determinism(tmp_path):
    configs = {
        "solve-stylized": {"schema_version": 1, "mode": "bundling",
                           "incl_total": [0.7, 0.8]},
        "solve-continuum": {"schema_version": 1, "mode": "symmetric-sequence",
                            "distribution": {"kind": "uniform"},
                            "eta": {"eta_v": 0.0, "eta_w": 0.0, "eta_r": 1.0},
                            "law": {"kind": "uniform", "lo": 0.0, "hi": 1.0},
                            "n_values": [2, 5]},
        "solve-finite": {"schema_version": 1,
                         "distribution": {"kind": "uniform"},
                         "eta": {"eta_v": 0.0, "eta_w": 0.0, "eta_r": 1.0},
                         "profiles": [[1.0, 1.0]], "masses": [[0.5], [0.5]],
                         "ironing_levels": [0.5, 0.5],
                         "tie_weights": [[0.5, 0.5, 0.0]], "grid_size": 101},
    }
    for cmd, payload in configs.items():
        cfile = tmp_path / f"{cmd}.json"
        cfile.write_text(json.dumps(payload))
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{cmd}-{tag}"
            assert cli.main([cmd, "--config", str(cfile), "--out", str(out),
                             "--seed", "11"]) == 0
            outs.append(out)
        for csv in outs[0].glob("*.csv"):
            assert csv.read_bytes() == (outs[1] / csv.name).read_bytes(), csv
