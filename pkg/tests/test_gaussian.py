import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from bpri.errors import DimensionTooSmall, SingularMatrix
from bpri.gaussian import (attention_objective, discretized_lqg, js_positive_part_risk_mc,
                           lqg_arbitrate, lqg_expected_loss, lqg_gain, lqg_mutual_info,
                           lqg_scalar_posterior_var, scalar_rate_distortion, sparse_theta,
                           stein_highdim_table, stein_lambda_star, stein_risk, stein_risk_mc,
                           stein_shrinkage_factor)

P_GRID = (3, 5, 10, 20, 50, 100)


# --- Stein ------------------------------------------------------------------

def test_shrinkage_factor_examples():
    assert stein_shrinkage_factor(1.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert stein_shrinkage_factor(1e12, 0.5) > 1 - 1e-11
    assert stein_shrinkage_factor(0.5, 1.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        stein_shrinkage_factor(1.0, 0.0)


def test_risk_examples():
    theta = np.array([1.0, -2.0, 0.5, 0.0])
    assert stein_risk(1e12, theta) == pytest.approx(4.0, abs=1e-9)
    for p in (1, 3, 7):
        assert stein_risk(1.0, np.zeros(p), 0.5) == pytest.approx(0.25 * p, abs=1e-15)


def test_risk_matches_monte_carlo():
    rng = np.random.default_rng(11)
    for i in range(5):
        p = int(rng.integers(1, 8))
        theta = rng.normal(0, 1.5, p)
        lam = float(np.exp(rng.uniform(-3, 3)))
        est, se = stein_risk_mc(lam, theta, n_rep=200_000, seed=i)
        assert abs(est - stein_risk(lam, theta)) < 3 * se


def test_lambda_star():
    lam, r = stein_lambda_star(np.zeros(5))
    assert lam == pytest.approx(1e-3) and r == pytest.approx(stein_risk(1e-3, np.zeros(5)))
    # risk is minimized where s = |theta|^2 / (|theta|^2 + p), i.e. lam = |theta|^2 / (2 tau2 p)
    for p in P_GRID:
        theta = sparse_theta(p)
        lam, r = stein_lambda_star(theta)
        assert lam == pytest.approx((theta @ theta) / (2 * 0.5 * p), rel=1e-5)
        assert r < p
    stars = [stein_lambda_star(sparse_theta(p))[0] for p in P_GRID]
    assert all(b <= a for a, b in zip(stars, stars[1:]))


def test_lambda_star_bounded_scalar_oracle():
    theta = np.array([2.0, -1.0, 0.3])
    lam, r = stein_lambda_star(theta, tau2=2.0)
    res = optimize.minimize_scalar(lambda x: stein_risk(math.exp(x), theta, 2.0),
                                   bounds=(-7, 7), method="bounded", options={"xatol": 1e-10})
    assert lam == pytest.approx(math.exp(res.x), rel=1e-5)


def test_james_stein():
    est, se = js_positive_part_risk_mc(np.zeros(3), n_rep=100_000, seed=1)
    assert 3 - est > 5 * se
    theta = np.array([50.0, 0.0, 0.0])
    est, se = js_positive_part_risk_mc(theta, n_rep=100_000, seed=2)
    assert abs(est - 3) < 3 * se
    est, se = js_positive_part_risk_mc(sparse_theta(10), n_rep=100_000, seed=3)
    assert 10 - est > 5 * se
    with pytest.raises(DimensionTooSmall):
        js_positive_part_risk_mc(np.zeros(2))


def test_js_mc_deterministic():
    assert js_positive_part_risk_mc(np.ones(4), 3000, 9) == js_positive_part_risk_mc(np.ones(4), 3000, 9)


def test_highdim_table_flat_risks():
    rows = stein_highdim_table((3, 20, 100), n_rep=5000, seed=0)
    for p, lam, risk, js, mle in rows:
        assert risk < p and js < p and mle == p
    assert rows[-1][2] < 0.1 * rows[-1][4]


@given(st.floats(1e-3, 1e3), st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.floats(0.1, 5))
def test_risk_decomposition(lam, theta, tau2):
    theta = np.array(theta)
    s = stein_shrinkage_factor(lam, tau2)
    bias2, var = (s - 1) ** 2 * (theta @ theta), s**2 * theta.size
    assert bias2 >= 0 and var >= 0
    assert stein_risk(lam, theta, tau2) == pytest.approx(bias2 + var, rel=1e-12)
    assert stein_shrinkage_factor(lam * 1.01, tau2) > s


# --- scalar attention -------------------------------------------------------

def _numeric_maximizer(sigma_x2, gamma, a, lam):
    """Grid plus bounded scalar search on (0, sigma_x2]."""
    grid = np.linspace(sigma_x2 * 1e-4, sigma_x2, 2001)
    vals = [attention_objective(v, sigma_x2, gamma, a, lam) for v in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda v: -attention_objective(v, sigma_x2, gamma, a, lam),
                                   bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return res.x if -res.fun >= vals[i] else grid[i]


def test_attention_corner():
    # 2 lam gamma a^2 sigma_x2 = 0.6 <= 1: no attention
    r = lqg_scalar_posterior_var(1.0, 0.3, 1.0, 1.0)
    assert r.variance == 1.0
    assert _numeric_maximizer(1.0, 0.3, 1.0, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_attention_interior_point():
    sigma_x2, gamma, a = 2.0, 0.5, 1.0
    lam = 2 / (2 * gamma * a**2 * sigma_x2)
    r = lqg_scalar_posterior_var(sigma_x2, gamma, a, lam)
    assert r.variance == pytest.approx(sigma_x2 / 2, abs=1e-15)
    assert _numeric_maximizer(sigma_x2, gamma, a, lam) == pytest.approx(sigma_x2 / 2, rel=1e-6)
    # both closed forms coincide exactly at this point
    assert r.agree


def test_attention_full_limit():
    assert lqg_scalar_posterior_var(1.0, 1.0, 1.0, 1e9).variance < 1e-9


def test_attention_sweep_maximizer_beats_displayed():
    rng = np.random.default_rng(4)
    for _ in range(100):
        sx, g, a = np.exp(rng.uniform(-1, 1, 3))
        lam = float(np.exp(rng.uniform(-2, 3)))
        r = lqg_scalar_posterior_var(sx, g, a, lam)
        assert r.value >= r.displayed_value - 1e-12
        assert r.value == pytest.approx(attention_objective(_numeric_maximizer(sx, g, a, lam), sx, g, a, lam),
                                        abs=1e-9)
        if not r.agree:
            assert r.value > r.displayed_value


# --- matrix LQG -------------------------------------------------------------

def test_gain_examples():
    k, se = lqg_gain(np.eye(2), np.eye(2), 1.0)
    assert np.allclose(k, 0.5 * np.eye(2), atol=1e-15) and np.allclose(se, 0.5 * np.eye(2), atol=1e-15)
    k, se = lqg_gain(np.eye(2), np.eye(2), 1e12)
    assert np.abs(se).max() < 1e-10
    # the formula as written tends to the identity as lam -> 0
    k, _ = lqg_gain(np.eye(2), np.eye(2), 1e-12)
    assert np.allclose(k, np.eye(2), atol=1e-11)


def test_spd_checks():
    with pytest.raises(SingularMatrix):
        lqg_gain([[1.0, 0.5], [0.4, 1.0]], np.eye(2), 1.0)
    with pytest.raises(SingularMatrix):
        lqg_gain([[1.0, 2.0], [2.0, 1.0]], np.eye(2), 1.0)
    with pytest.raises(SingularMatrix):
        lqg_gain(np.eye(2), np.eye(3), 1.0)


def test_mutual_info_examples():
    mi = lqg_mutual_info([[1.0]], [[1.0]], 1.0)
    assert mi.detform == pytest.approx(0.5 * math.log(2), abs=1e-15)
    assert mi.detform == pytest.approx(0.346574, abs=5e-7)
    # K = 1/2, SigmaEps = 1/2, SigmaA = 1/4 + 1/2
    assert mi.ratio == pytest.approx(0.5 * math.log(1.5), abs=1e-15)
    assert mi.inconsistent and mi.discrepancy == pytest.approx(0.5 * math.log(4 / 3), abs=1e-15)
    assert lqg_mutual_info(np.eye(3), np.eye(3), 1e-12).detform < 1e-11


def test_expected_loss_examples():
    assert lqg_expected_loss(np.eye(2), np.eye(2), 1.0) == pytest.approx(1.0, abs=1e-15)
    assert lqg_expected_loss(np.eye(2), np.eye(2), 1e12) < 1e-10
    sx = np.array([[2.0, 0.3], [0.3, 1.0]])
    q = np.array([[1.0, 0.2], [0.2, 0.5]])
    assert lqg_expected_loss(sx, q, 1e-12) == pytest.approx(np.trace(q @ sx), rel=1e-9)
    losses = [lqg_expected_loss(sx, q, lam) for lam in np.geomspace(0.01, 100, 20)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def _random_spd(rng, n):
    m = rng.normal(size=(n, n))
    a = m @ m.T + 0.5 * np.eye(n)
    return 0.5 * (a + a.T)


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(1, 4), st.floats(0.01, 100))
def test_gain_identities(seed, n, lam):
    rng = np.random.default_rng(seed)
    sx, q = _random_spd(rng, n), _random_spd(rng, n)
    k, se = lqg_gain(sx, q, lam)
    scale = max(1.0, np.abs(sx).max())
    assert np.abs(k @ sx - sx @ k.T).max() < 1e-10 * scale
    assert np.abs(k + lam * se @ q - np.eye(n)).max() < 1e-9 * max(1.0, lam * np.abs(q).max())
    assert np.linalg.eigvalsh(sx - se).min() > 0
    ev = np.linalg.eigvals(k).real
    assert np.all(ev > 0) and np.all(ev < 1)


def test_discretized_bridge_to_closed_form():
    """41-point BA reproduces the scalar (I, E[loss]) within 2% in the informative range."""
    for lam in (1.0, 2.0, 5.0):
        oi, ol = discretized_lqg(1.0, 1.0, lam)
        ci, cl = scalar_rate_distortion(1.0, 1.0, lam)
        assert oi == pytest.approx(ci, rel=0.02)
        assert ol == pytest.approx(cl, rel=0.02)


def test_arbitration_verdicts():
    arb = lqg_arbitrate(1.0, 1.0, 2.0)
    v = arb.matches()
    assert v["closed_form"] and not v["detform"] and not v["ratio"]
    # at lam = 1 the determinant form happens to coincide with the truth
    arb = lqg_arbitrate(1.0, 1.0, 1.0)
    assert arb.matches()["detform"]
