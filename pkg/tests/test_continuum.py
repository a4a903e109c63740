"""Continuum-CTR ironing-level system tests."""

import numpy as np
import pytest
from scipy import integrate, optimize

import admarket as am
from admarket.continuum import ironed_below_prob

UNIF = am.TypeDistribution.uniform()
REV = am.WelfareWeight(0.0, 0.0, 1.0)


def test_ironed_below_prob_closed_form():
    # uniform types, pure revenue: P_below(t) = t/2 up to the level (seller
    # branch, strict), (t+1)/2 clamped above it (buyer branch)
    t = np.array([0.1, 0.3, 0.5, 0.5 + 1e-9, 0.9, 1.5])
    got = ironed_below_prob(UNIF, REV, t, 0.5)
    want = np.where(t <= 0.5, t / 2.0, np.clip((t + 1.0) / 2.0, 0.0, 1.0))
    assert np.allclose(got, want, atol=1e-9)


def _x_closed_form(z, w):
    # E over opponent CTR ~ U(0,1) of the win probability for own level z and
    # own CTR w, for uniform types and pure revenue weights
    c = w * z
    return 0.5 * (w + c - c * np.log(c))


def test_symmetric_equation_closed_form_n2():
    # for N=2 the fixed point solves 4z - 3z*log(z) = 1.5
    oracle = optimize.brentq(lambda z: 4 * z - 3 * z * np.log(z) - 1.5,
                             1e-6, 1.0)
    z2 = am.solve_symmetric(am.CTRLaw.uniform(0.0, 1.0), UNIF, REV, 2)
    assert abs(z2 - oracle) < 1e-6


def test_symmetric_equation_quadrature_oracle_n5():
    law = am.CTRLaw.uniform(0.0, 1.0)
    z5 = am.solve_symmetric(law, UNIF, REV, 5)

    def h(z):
        val, _ = integrate.quad(lambda w: w * _x_closed_form(z, w) ** 4,
                                0.0, 1.0, limit=200)
        return val

    assert abs(h(z5) - 0.5 / 5.0) < 1e-7


def test_symmetric_sequence_increasing():
    law = am.CTRLaw.uniform(0.0, 1.0)
    zs = [am.solve_symmetric(law, UNIF, REV, n) for n in (2, 5, 10, 25)]
    assert all(np.diff(zs) > 0)


def test_optz_symmetric_matches_reduction():
    law = am.CTRLaw.uniform(0.0, 1.0)
    data = am.ContinuumDataset.iid(2, law)
    sol = am.solve_optz(data, UNIF, REV)
    z2 = am.solve_symmetric(law, UNIF, REV, 2)
    assert abs(sol.z[0] - sol.z[1]) < 1e-7
    assert abs(sol.z[0] - z2) < 1e-5
    assert np.max(np.abs(sol.residuals)) < 1e-6


def test_optz_asymmetric_masses_order_levels():
    law = am.CTRLaw.uniform(0.8, 1.0)
    data = am.ContinuumDataset.iid(2, law, lam=[0.8, 0.2])
    sol = am.solve_optz(data, UNIF, REV)
    assert sol.z[0] > sol.z[1]


def test_optz_residual_monotone_in_own_level():
    law = am.CTRLaw.uniform(0.5, 1.0)
    data = am.ContinuumDataset.iid(2, law)
    vals = [am.optz_residual(data, UNIF, REV, [z, 0.4])[0]
            for z in (0.2, 0.4, 0.8, 1.2)]
    assert all(np.diff(vals) > 0)


def test_ctr_law_kinds():
    b = am.CTRLaw.beta(2.0, 5.0)
    assert abs(b.mean() - 2.0 / 7.0) < 1e-12
    pw = am.CTRLaw.piecewise_linear_cdf([0.0, 0.5, 1.0], [0.0, 0.8, 1.0])
    assert abs(float(pw.cdf(0.5)) - 0.8) < 1e-12
    rng = np.random.default_rng(0)
    s = pw.sample(rng, 20000)
    assert abs(np.mean(s < 0.5) - 0.8) < 0.01
    with pytest.raises(ValueError):
        am.CTRLaw.uniform(0.8, 0.5)


def test_dataset_validation():
    law = am.CTRLaw.uniform(0.0, 1.0)
    with pytest.raises(ValueError):
        am.ContinuumDataset.iid(2, law, lam=[1.0, 0.0])
    data = am.ContinuumDataset.iid(3, law)
    assert np.allclose(data.outside_option(), [0.5 / 3] * 3)


def test_rn_continuum_baseline():
    law = am.CTRLaw.uniform(0.2, 1.0)
    data = am.ContinuumDataset.iid(2, law, lam=[0.6, 0.4])
    res = am.rn_continuum_baseline(data, seed=1, draws=200_000)
    assert res["max_click_error"] < 5e-3
    assert res["max_rectangle_error"] < 5e-3
