"""Large-market limit tests."""

import numpy as np
import pytest

import admarket as am

UNIF = am.TypeDistribution.uniform()


def _cfg(mu, eta_r=1.0, eta_v=None):
    eta_v = (1.0 - eta_r) if eta_v is None else eta_v
    eta = am.WelfareWeight(eta_v, max(0.0, 1.0 - eta_v - eta_r), eta_r)
    return am.LargeMarketConfig(UNIF, eta, mean_ctr=mu)


def test_selling_price_closed_form():
    for er in (0.1, 0.5, 0.99, 1.0):
        dsn = am.design(_cfg(0.5, eta_r=er))
        assert abs(dsn.selling_price - 1.0 / (1.0 + er)) < 1e-10
        assert dsn.buying_price == 1.0


def test_bid_ask_saturation():
    # low mean CTR pushes the bid-ask benchmark past the top type
    dsn = am.design(_cfg(0.3))
    assert dsn.bid_ask_price == 1.0
    assert dsn.bid_ask_saturated
    # high mean CTR keeps it interior: phi_S(p) = 1/mu, uniform -> p = 1/(2mu)
    dsn2 = am.design(_cfg(0.8))
    assert not dsn2.bid_ask_saturated
    assert abs(dsn2.bid_ask_price - 1.0 / 1.6) < 1e-9


def test_profit_closed_forms():
    cfg = _cfg(0.5)
    pr = am.profits(cfg)
    # selling at p=0.5: (1 - 0.25) * 0.5; exchange: 0.5 * 0.5
    assert abs(pr.combined - (0.75 * 0.5 + 0.25)) < 1e-9
    assert abs(pr.selling_only - (1.0 - 0.5) * 1.0) < 1e-9  # saturated at p=1


def test_combined_dominates_selling_only():
    for mu in np.linspace(0.02, 1.0, 50):
        pr = am.profits(_cfg(float(mu)))
        if mu < 1.0:
            assert pr.combined > pr.selling_only
        else:
            assert pr.combined >= pr.selling_only - 1e-12


def test_are_closed_form():
    # mu = 0.5, revenue only: ARE = 0.625 / 0.75
    res = am.are(_cfg(0.5))
    assert abs(res.value - 0.625 / 0.75) < 1e-9
    assert abs(res.surplus_max - 0.75) < 1e-12
    assert abs(res.engagement_limit - 0.5) < 1e-12


def test_are_bounds():
    assert am.are(_cfg(1e-9, eta_r=0.99)).value > 0.98
    for mu in (0.2, 0.5, 0.8):
        assert am.are(_cfg(mu, eta_r=0.99)).value < 1.0


def test_finite_n_diagnostics_shapes_and_trend():
    law = am.CTRLaw.uniform(0.9, 1.0)
    cfg = _cfg(law.mean())
    diag = am.finite_n_diagnostics(cfg, law, [5, 25], grid_size=41)
    assert len(diag.scaled_clicks) == 2
    assert diag.ironing_levels[1] > diag.ironing_levels[0]
    # transfers approach the limit from above in magnitude order
    errs = [abs(t - diag.limit_transfer) for t in diag.aggregate_transfers]
    assert errs[1] < errs[0]


def test_finite_n_diagnostics_mean_mismatch():
    law = am.CTRLaw.uniform(0.9, 1.0)
    with pytest.raises(ValueError):
        am.finite_n_diagnostics(_cfg(0.5), law, [5])


def test_config_validation():
    with pytest.raises(ValueError):
        am.LargeMarketConfig(UNIF, am.WelfareWeight.revenue_only(), 1.5)
    with pytest.raises(ValueError):
        am.LargeMarketConfig(UNIF, am.WelfareWeight.revenue_only(), 0.5,
                             zeta=(0.0, 0.0))
