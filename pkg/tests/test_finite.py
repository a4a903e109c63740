"""Finite-dataset mechanism engine tests."""

import numpy as np
import pytest

import admarket as am

UNIF = am.TypeDistribution.uniform()
REV = am.WelfareWeight(0.0, 0.0, 1.0)


def _dissolution_mechanism(grid_size=201):
    ds = am.FiniteDataset(profiles=[(1.0, 1.0)], masses=[[0.5], [0.5]])
    rules = [am.ScoringRule(UNIF, REV, 0.5), am.ScoringRule(UNIF, REV, 0.5)]
    tb = am.TieBreakRule(np.array([[0.5, 0.5, 0.0]]))
    return am.FiniteMechanism(ds, rules, tb, grid_size=grid_size)


def test_outside_option():
    ds = am.FiniteDataset(profiles=[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
                          masses=[[0.0, 0.1, 0.3], [0.2, 0.0, 0.4]])
    a = ds.outside_option()
    assert np.allclose(a, [0.0 * 1 + 0.1 * 0 + 0.3 * 1,
                           0.2 * 0 + 0.0 * 1 + 0.4 * 1])


def test_allocation_symmetric_tie():
    mech = _dissolution_mechanism()
    x = mech.allocate(np.array([0.5, 0.5]))
    assert np.allclose(x, [[0.5], [0.5]])  # alpha = 0.5 + 0.5, split half


def test_allocation_solo_profile():
    ds = am.FiniteDataset(profiles=[(1.0, 0.0)], masses=[[1.0], [0.0]])
    rules = [am.ScoringRule(UNIF, REV, 0.0), am.ScoringRule(UNIF, REV, 0.0)]
    mech = am.FiniteMechanism(ds, rules, am.TieBreakRule.uniform(1, 2))
    x = mech.allocate(np.array([0.9, 0.9]))
    assert np.isclose(x[0, 0], 1.0)
    assert np.isclose(x[1, 0], 0.0)


def test_designer_keeps_negative_scores():
    mech = _dissolution_mechanism()
    # both scores negative is impossible here (scores are >= 0); with score 0
    # and designer option 0 the tie includes the designer when weights say so
    ds = am.FiniteDataset(profiles=[(1.0, 1.0)], masses=[[0.5], [0.5]])
    rules = [am.ScoringRule(UNIF, REV, 0.0), am.ScoringRule(UNIF, REV, 0.0)]
    tb = am.TieBreakRule(np.array([[0.25, 0.25, 0.5]]))
    mech0 = am.FiniteMechanism(ds, rules, tb)
    x = mech0.allocate(np.array([0.1, 0.1]))  # both scores 0 -> tie with designer
    assert np.allclose(x.sum(axis=0), 0.5)    # designer keeps half the mass


def test_dissolution_worst_off_and_band_attainment():
    mech = _dissolution_mechanism()
    wo = mech.worst_off_type(0)
    assert wo.attained
    assert abs(wo.theta_hat - 0.5) < 1e-6
    a = mech.dataset.outside_option()[0]
    for th in (0.3, 0.5, 0.7):   # anywhere on the tie band
        assert abs(mech.interim_clicks(0, th) - a) < 1e-9


def test_dissolution_outcome_values():
    out = _dissolution_mechanism().outcome()
    assert abs(out.revenue - 5.0 / 48.0) < 2e-3
    assert abs(out.engagement) < 1e-6
    assert np.all(out.payoffs >= -1e-9)


def test_interim_clicks_monotone():
    mech = _dissolution_mechanism()
    for i in range(2):
        s = mech.interim_clicks_grid(i)
        assert np.all(np.diff(s) >= -1e-12)


def test_exact_and_mc_interim_agree():
    ds = am.FiniteDataset(profiles=[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
                          masses=[[0.0, 0.2, 0.3], [0.1, 0.0, 0.4]])
    rules = [am.ScoringRule(UNIF, REV, 0.3), am.ScoringRule(UNIF, REV, 0.6)]
    tb = am.TieBreakRule.uniform(3, 2)
    mech = am.FiniteMechanism(ds, rules, tb, seed=7, mc_draws=400_000)
    for i, th in ((0, 0.2), (0, 0.8), (1, 0.5)):
        exact = mech._interim_exact2(i, th)
        mc = mech._interim_mc(i, th)
        assert abs(exact - mc) < 5e-3


def test_three_merchant_tensor_path():
    ds = am.FiniteDataset(profiles=[(1.0, 1.0, 1.0)],
                          masses=[[1 / 3], [1 / 3], [1 / 3]])
    rules = [am.ScoringRule(UNIF, REV, 0.5)] * 3
    tb = am.TieBreakRule(np.array([[1 / 3, 1 / 3, 1 / 3, 0.0]]))
    mech = am.FiniteMechanism(ds, rules, tb, grid_size=61)
    s = mech.interim_clicks_grid(0)
    assert np.all(np.diff(s) >= -1e-9)
    assert 0.0 <= s[0] <= s[-1] <= 1.0


def test_transfers_zero_at_worst_off():
    mech = _dissolution_mechanism()
    out = mech.outcome()
    for i in range(2):
        u_hat = np.interp(out.theta_hat[i], out.grid, out.payoffs[i])
        assert abs(u_hat) < 1e-8


def test_rn_baseline_gives_outside_option():
    ds = am.FiniteDataset(profiles=[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
                          masses=[[0.0, 0.2, 0.3], [0.1, 0.0, 0.4]])
    out = am.rn_baseline(ds)
    for i in range(2):
        assert np.allclose(out.clicks[i], ds.outside_option()[i], atol=1e-9)


def test_dataset_validation():
    with pytest.raises(ValueError):
        am.FiniteDataset(profiles=[(1.0, 0.0)], masses=[[0.6], [0.6]])
    with pytest.raises(ValueError):
        am.FiniteDataset(profiles=[(1.5, 0.0)], masses=[[0.5], [0.5]])
