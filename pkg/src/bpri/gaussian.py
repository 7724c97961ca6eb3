"""Gaussian specializations: Stein shrinkage under an information price and LQG attention.

Stein: with theta ~ N(0, tau2 I) and X ~ N(theta, I), the Gibbs rule is the
linear shrinkage a = s X with s = lam / (lam + 1/(2 tau2)).

LQG: a Gaussian state with covariance SigmaX tracked under quadratic loss
weight Q. Two closed forms for the mutual information are in circulation and
they disagree; both are returned together with a discretized Blahut-Arimoto
run that serves as ground truth in the scalar case.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, stats

from .ba import ba_solve
from .errors import DimensionTooSmall, MaxIterExceeded, SingularMatrix
from .gibbs import check_lambda
from .rng import stream

DEFAULT_TAU2 = 0.5
MC_CHUNK = 10_000


def _theta(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.size == 0 or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be a non-empty finite vector")
    return theta


def _tau2(tau2) -> float:
    tau2 = float(tau2)
    if not (np.isfinite(tau2) and tau2 > 0):
        raise ValueError(f"tau2 must be finite and > 0, got {tau2!r}")
    return tau2


def sparse_theta(p: int, head=(1.0, 0.5, 0.25)) -> np.ndarray:
    theta = np.zeros(p)
    n = min(p, len(head))
    theta[:n] = head[:n]
    return theta


def stein_shrinkage_factor(lam, tau2=DEFAULT_TAU2) -> float:
    lam = check_lambda(lam)
    return lam / (lam + 1.0 / (2.0 * _tau2(tau2)))


def stein_risk(lam, theta, tau2=DEFAULT_TAU2) -> float:
    """Squared bias (s-1)^2 |theta|^2 plus variance s^2 p."""
    theta = _theta(theta)
    s = stein_shrinkage_factor(lam, tau2)
    return float((s - 1.0) ** 2 * (theta @ theta) + s**2 * theta.size)


def stein_lambda_star(theta, tau2=DEFAULT_TAU2, lambda_grid=None, rtol: float = 1e-6):
    """Risk-minimizing lambda: grid argmin refined by golden section in log-lambda.

    Returns ``(lam_star, risk)``. Ties on the grid go to the smaller lambda; a
    minimum at a grid end is returned as is.
    """
    theta = _theta(theta)
    grid = np.logspace(-3, 3, 40) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lambda grid must be a non-empty vector of positive values")
    grid = np.sort(grid)
    risks = np.array([stein_risk(l, theta, tau2) for l in grid])
    i = int(np.argmin(risks))
    if i == 0 or i == grid.size - 1:
        return float(grid[i]), float(risks[i])

    def f(log_lam):
        return stein_risk(np.exp(log_lam), theta, tau2)

    lo, mid, hi = np.log(grid[i - 1]), np.log(grid[i]), np.log(grid[i + 1])
    res = optimize.minimize_scalar(f, bracket=(lo, mid, hi), method="golden",
                                   options={"xtol": rtol})
    lam = float(np.exp(res.x))
    r = stein_risk(lam, theta, tau2)
    if r > risks[i]:
        return float(grid[i]), float(risks[i])
    return lam, r


def _mc_squared_error(theta, n_rep, seed, estimator):
    theta = _theta(theta)
    if n_rep < 2:
        raise ValueError("n_rep must be >= 2")
    losses = []
    done = 0
    chunk = 0
    while done < n_rep:
        n = min(MC_CHUNK, n_rep - done)
        x = theta + stream(seed, chunk).standard_normal((n, theta.size))
        losses.append(np.sum((estimator(x) - theta) ** 2, axis=1))
        done += n
        chunk += 1
    loss = np.concatenate(losses)
    return float(loss.mean()), float(loss.std(ddof=1) / np.sqrt(n_rep))


def stein_risk_mc(lam, theta, tau2=DEFAULT_TAU2, n_rep: int = 200_000, seed: int = 0):
    """Monte Carlo (risk, se) of the shrinkage rule s X."""
    s = stein_shrinkage_factor(lam, tau2)
    return _mc_squared_error(theta, n_rep, seed, lambda x: s * x)


def js_positive_part_risk_mc(theta, n_rep: int = 200_000, seed: int = 0):
    """Monte Carlo (risk, se) of the positive-part James-Stein estimator."""
    theta = _theta(theta)
    p = theta.size
    if p < 3:
        raise DimensionTooSmall(f"James-Stein needs p >= 3, got {p}")

    def js(x):
        norm2 = np.sum(x * x, axis=1, keepdims=True)
        return np.maximum(1.0 - (p - 2) / norm2, 0.0) * x

    return _mc_squared_error(theta, n_rep, seed, js)


STEIN_HIGHDIM_COLUMNS = ("p", "lambda_star", "risk_bpri", "risk_js", "risk_mle")


def stein_highdim_table(p_grid=(3, 5, 10, 20, 50, 100), tau2=DEFAULT_TAU2,
                        n_rep: int = 20_000, seed: int = 0):
    """Rows (p, lam_star, risk at lam_star, JS risk by MC, MLE risk) for the sparse theta."""
    rows = []
    for p in p_grid:
        theta = sparse_theta(int(p))
        lam, risk = stein_lambda_star(theta, tau2)
        js, _ = js_positive_part_risk_mc(theta, n_rep, seed)
        rows.append((int(p), lam, risk, js, float(p)))
    return rows


def stein_risk_curves(p_grid=(3, 5, 10, 20, 50, 100), lambda_grid=None, tau2=DEFAULT_TAU2):
    """Rows (p, lambda, risk) of the analytic risk for the sparse theta."""
    grid = np.logspace(-3, 3, 40) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    return [(int(p), float(l), stein_risk(l, sparse_theta(int(p)), tau2))
            for p in p_grid for l in grid]


# --- scalar LQG attention -------------------------------------------------

@dataclass(frozen=True)
class ScalarAttention:
    """Posterior variance choice for a scalar Gaussian state.

    ``variance`` maximizes ``-gamma a^2 v - log(sigma_x2 / v) / (2 lam)`` over
    ``0 < v <= sigma_x2``. ``displayed_variance`` is the alternative closed
    form ``sigma_x2 (1 - 1/(2 lam gamma a^2 sigma_x2))_+`` kept for comparison;
    it can be zero, where its objective is ``-inf``.
    """

    variance: float
    value: float
    displayed_variance: float
    displayed_value: float

    @property
    def agree(self) -> bool:
        return bool(np.isclose(self.variance, self.displayed_variance, rtol=1e-9, atol=0))


def attention_objective(v, sigma_x2, gamma, a, lam) -> float:
    if v <= 0:
        return -np.inf
    return float(-gamma * a**2 * v - np.log(sigma_x2 / v) / (2.0 * lam))


def lqg_scalar_posterior_var(sigma_x2, gamma, a, lam) -> ScalarAttention:
    for name, v in (("sigma_x2", sigma_x2), ("gamma", gamma), ("a", a)):
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be finite and > 0")
    lam = check_lambda(lam)
    w = gamma * a**2
    # first-order condition -w + 1/(2 lam v) = 0, clamped to the prior variance
    v = min(sigma_x2, 1.0 / (2.0 * lam * w))
    shown = sigma_x2 * max(1.0 - 1.0 / (2.0 * lam * w * sigma_x2), 0.0)
    return ScalarAttention(
        variance=v,
        value=attention_objective(v, sigma_x2, gamma, a, lam),
        displayed_variance=shown,
        displayed_value=attention_objective(shown, sigma_x2, gamma, a, lam),
    )


def scalar_rate_distortion(sigma_x2, weight, lam):
    """(I, E[loss]) of the optimal scalar rule under loss weight * (x - a)^2."""
    v = min(sigma_x2, 1.0 / (2.0 * lam * weight))
    return 0.5 * np.log(sigma_x2 / v), weight * v


def discretized_lqg(sigma_x2, weight, lam, n: int = 41, width: float = 4.0,
                    tol: float = 1e-6, max_iter: int = 5000):
    """(I, E[loss]) from Blahut-Arimoto on a discretized scalar LQG problem.

    States and reports share an ``n``-point grid on +-``width`` standard
    deviations; state weights are the normal density renormalized on the grid.
    The tolerance is loose on purpose: (I, E[loss]) settle long before the
    marginal stops drifting along near-flat directions.
    """
    sd = np.sqrt(sigma_x2)
    grid = np.linspace(-width * sd, width * sd, n)
    prior = stats.norm.pdf(grid, scale=sd)
    prior /= prior.sum()
    loss = weight * (grid[:, None] - grid[None, :]) ** 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        sol = ba_solve(prior, loss, lam, tol=tol, max_iter=max_iter)
    return sol.mutual_info, sol.expected_loss


# --- matrix LQG -----------------------------------------------------------

SYM_TOL = 1e-12


def _spd(m, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.all(np.isfinite(m)):
        raise SingularMatrix(f"{name}: expected a finite square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.T)) > SYM_TOL:
        raise SingularMatrix(f"{name}: not symmetric within {SYM_TOL}")
    try:
        linalg.cholesky(m, lower=True)
    except linalg.LinAlgError as e:
        raise SingularMatrix(f"{name}: not positive definite") from e
    return 0.5 * (m + m.T)


def _spd_inv(m: np.ndarray) -> np.ndarray:
    c = linalg.cho_factor(m, lower=True)
    inv = linalg.cho_solve(c, np.eye(m.shape[0]))
    return 0.5 * (inv + inv.T)


def _logdet_spd(m: np.ndarray) -> float:
    c, _ = linalg.cho_factor(m, lower=True)
    return float(2.0 * np.sum(np.log(np.diag(c))))


def _pair(sigma_x, q):
    sigma_x = _spd(sigma_x, "SigmaX")
    q = _spd(q, "Q")
    if sigma_x.shape != q.shape:
        raise SingularMatrix(f"SigmaX {sigma_x.shape} and Q {q.shape} differ in shape")
    return sigma_x, q


def lqg_gain(sigma_x, q, lam):
    """Gain ``K = (SigmaX^-1 + lam Q)^-1 SigmaX^-1`` and noise covariance ``(SigmaX^-1 + lam Q)^-1``."""
    sigma_x, q = _pair(sigma_x, q)
    lam = check_lambda(lam)
    sx_inv = _spd_inv(sigma_x)
    precision = sx_inv + lam * q
    try:
        sigma_eps = _spd_inv(0.5 * (precision + precision.T))
    except linalg.LinAlgError as e:
        raise SingularMatrix("posterior precision is not positive definite") from e
    return sigma_eps @ sx_inv, sigma_eps


@dataclass(frozen=True)
class LqgMutualInfo:
    detform: float
    ratio: float

    @property
    def discrepancy(self) -> float:
        return abs(self.detform - self.ratio)

    @property
    def inconsistent(self) -> bool:
        return self.discrepancy > 1e-9


def lqg_mutual_info(sigma_x, q, lam) -> LqgMutualInfo:
    """Both closed forms for I(X;A).

    ``detform`` is ``log det(I + SigmaX^1/2 lam Q SigmaX^1/2) / 2``; ``ratio`` is
    ``log(det SigmaA / det SigmaEps) / 2`` with ``SigmaA = K SigmaX K' + SigmaEps``.
    They are not equal in general; callers that need a single number should
    arbitrate with :func:`discretized_lqg`.
    """
    sigma_x, q = _pair(sigma_x, q)
    lam = check_lambda(lam)
    w, v = linalg.eigh(sigma_x)
    root = (v * np.sqrt(w)) @ v.T
    inner = np.eye(q.shape[0]) + lam * root @ q @ root
    detform = 0.5 * _logdet_spd(0.5 * (inner + inner.T))
    k, sigma_eps = lqg_gain(sigma_x, q, lam)
    sigma_a = k @ sigma_x @ k.T + sigma_eps
    ratio = 0.5 * (_logdet_spd(0.5 * (sigma_a + sigma_a.T)) - _logdet_spd(sigma_eps))
    return LqgMutualInfo(detform, ratio)


def lqg_expected_loss(sigma_x, q, lam) -> float:
    """trace(Q SigmaEps)."""
    _, sigma_eps = lqg_gain(sigma_x, q, lam)
    return float(np.trace(_spd(q, "Q") @ sigma_eps))


@dataclass(frozen=True)
class LqgArbitration:
    lam: float
    detform: float
    ratio: float
    oracle_mi: float
    oracle_loss: float
    closed_form_mi: float
    closed_form_loss: float

    def matches(self, rtol: float = 0.02) -> dict:
        """Which candidate mutual-information values agree with the discretized oracle."""
        def ok(x):
            return bool(abs(x - self.oracle_mi) <= rtol * abs(self.oracle_mi) + 1e-6)

        return {"detform": ok(self.detform), "ratio": ok(self.ratio),
                "closed_form": ok(self.closed_form_mi)}


def lqg_arbitrate(sigma_x2, weight, lam, n: int = 41) -> LqgArbitration:
    """Evaluate both scalar MI formulas against the discretized oracle."""
    lam = check_lambda(lam)
    mi = lqg_mutual_info([[sigma_x2]], [[weight]], lam)
    oi, ol = discretized_lqg(sigma_x2, weight, lam, n=n)
    ci, cl = scalar_rate_distortion(sigma_x2, weight, lam)
    return LqgArbitration(lam, mi.detform, mi.ratio, oi, ol, float(ci), float(cl))
