"""Multinomial-logit channels and their curvature diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ba import ba_solve, support_set
from .errors import BpriError
from .gibbs import check_lambda
from .prob import LossMatrix, as_prior
from .rng import normal_block


def _utilities(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 2:
        raise BpriError(f"need a vector of at least 2 utilities, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise BpriError("utilities must be finite")
    return u


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def softmax_channel(u, lam) -> np.ndarray:
    """Choice probabilities proportional to exp(lam * u)."""
    return _softmax_rows(check_lambda(lam) * _utilities(u))


def curvature(u, lam) -> float:
    """lam times the variance of realized utility under the logit choice law."""
    u = _utilities(u)
    lam = check_lambda(lam)
    p = _softmax_rows(lam * u)
    mean = p @ u
    return float(lam * max(p @ (u - mean) ** 2, 0.0))


def log_partition(u, lam) -> float:
    """log sum_j exp(lam * u_j)."""
    z = float(lam) * _utilities(u)
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def _tri(theta) -> np.ndarray:
    theta = float(theta)
    if not np.isfinite(theta):
        raise BpriError("theta must be finite")
    return np.array([theta, 0.0, -theta])


def tri_choice_curvature(theta, lam) -> float:
    """Curvature on the symmetric menu (theta, 0, -theta) via its closed-form variance."""
    lam = check_lambda(lam)
    p = softmax_channel(_tri(theta), lam)
    var = theta**2 * (p[0] + p[2]) - theta**2 * (p[0] - p[2]) ** 2
    return float(lam * max(var, 0.0))


_TRI_SCORE = np.array([1.0, 0.0, -1.0])


def mnl_fisher_info(theta, lam) -> float:
    """Fisher information about theta carried by one choice from (theta, 0, -theta)."""
    lam = check_lambda(lam)
    p = softmax_channel(_tri(theta), lam)
    dp = lam * p * (_TRI_SCORE - p @ _TRI_SCORE)
    live = p > 0
    return float(np.sum(dp[live] ** 2 / p[live]))


def mnl_fisher_info_fd(theta, lam, h: float = 1e-5) -> float:
    """Same quantity with dp/dtheta from central differences."""
    p = softmax_channel(_tri(theta), lam)
    dp = (softmax_channel(_tri(theta + h), lam) - softmax_channel(_tri(theta - h), lam)) / (2 * h)
    live = p > 0
    return float(np.sum(dp[live] ** 2 / p[live]))


@dataclass(frozen=True)
class CurvatureTableRow:
    lam: float
    mean: float
    sd: float
    se: float
    ci_low: float
    ci_high: float

    def as_tuple(self):
        return (self.lam, self.mean, self.sd, self.se, self.ci_low, self.ci_high)


CURVATURE_COLUMNS = ("lambda", "mean", "sd", "se", "ci_low", "ci_high")


def mc_curvature(k: int, lambda_grid, b: int, seed: int) -> list[CurvatureTableRow]:
    """Average curvature over ``b`` standard-normal utility vectors of length ``k``.

    Draw ``i`` comes from substream ``i`` of ``seed`` and the same draws are
    reused at every lambda, so the lambda profile is free of resampling noise.
    """
    if k < 2 or b < 2:
        raise BpriError("mc_curvature needs k >= 2 and b >= 2")
    u = normal_block(seed, b, k)
    rows = []
    for lam in np.asarray(lambda_grid, dtype=float):
        lam = check_lambda(lam)
        p = _softmax_rows(lam * u)
        mean_u = np.sum(p * u, axis=1, keepdims=True)
        h = lam * np.maximum(np.sum(p * (u - mean_u) ** 2, axis=1), 0.0)
        m = float(h.mean())
        sd = float(h.std(ddof=1))
        se = sd / np.sqrt(b)
        rows.append(CurvatureTableRow(float(lam), m, sd, se, m - 1.96 * se, m + 1.96 * se))
    return rows


@dataclass(frozen=True)
class SweepRow:
    lam: float
    support: frozenset
    regime: str
    mutual_info: float
    max_entry: float
    converged: bool


def consideration_sweep(prior, utilities, lambda_grid, eps: float = 1e-9,
                        tol: float = 1e-12, max_iter: int = 100_000) -> list[SweepRow]:
    """Solve the logit problem along an increasing lambda grid and classify the support.

    Regimes: ``deterministic`` when every row puts more than 0.99 on one option
    and the choice still depends on the state, ``full`` when every option is
    considered, ``sparse`` otherwise. A single considered option at low lambda
    counts as sparse: it is deterministic but carries no information.
    """
    prior = as_prior(prior)
    loss = LossMatrix.from_utility(utilities)
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise BpriError("lambda grid must be non-empty and strictly increasing")
    n_y = loss.shape[1]
    rows = []
    for lam in grid:
        sol = ba_solve(prior, loss, lam, tol=tol, max_iter=max_iter)
        sup = support_set(sol.marginal, eps)
        live = prior > 0
        max_entry = float(sol.channel[live].max(axis=1).min())
        if max_entry > 0.99 and (len(sup) > 1 or live.sum() == 1):
            regime = "deterministic"
        elif len(sup) == n_y:
            regime = "full"
        else:
            regime = "sparse"
        rows.append(SweepRow(float(lam), sup, regime, sol.mutual_info, max_entry, sol.converged))
    return rows


def dominated_options(utilities, margin: float = 1.0) -> frozenset:
    """Options beaten by some other option by at least ``margin`` in every state."""
    u = np.asarray(utilities, dtype=float)
    out = set()
    for j in range(u.shape[1]):
        for k in range(u.shape[1]):
            if k != j and np.all(u[:, k] - u[:, j] >= margin):
                out.add(j)
                break
    return frozenset(out)
