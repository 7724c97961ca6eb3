"""Gibbs channel update, log-partition, value identity and entropic tilt.

Loss form is canonical: ``f(y|x) ∝ q(y) exp(-lam * loss(x, y))`` and the
priced objective is ``E[loss] + I(X;Y) / lam``. In the utility form
(``utility = -loss``) every value here changes sign.
"""
from __future__ import annotations

import numpy as np

from .errors import BpriError, DimensionMismatch, EmptySupport
from .prob import _mi, as_channel, as_loss, as_marginal, as_prior

# exp(-745) is below the smallest subnormal double
UNDERFLOW_GAP = 745.0


def check_lambda(lam) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise BpriError(f"lambda must be finite and > 0, got {lam!r}")
    return lam


def price_to_lambda(price: float) -> float:
    """The information price is the penalty coefficient 1/lambda."""
    return 1.0 / check_lambda(price)


def _gibbs(loss: np.ndarray, q: np.ndarray, lam: float):
    """Unchecked core of :func:`gibbs_update`."""
    scaled = lam * loss
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    support = q > 0
    row_min = np.where(support, scaled, np.inf).min(axis=1, keepdims=True)
    logw = logq - scaled
    # beyond this gap exp() is below double precision; make the zero explicit
    logw[(scaled - row_min) > UNDERFLOW_GAP] = -np.inf
    m = logw.max(axis=1, keepdims=True)
    w = np.exp(logw - m)
    s = w.sum(axis=1, keepdims=True)
    f = w / s
    log_z = (m + np.log(s)).ravel()
    return f, log_z


def gibbs_update(loss, q, lam):
    """Gibbs channel for a fixed report marginal.

    Returns ``(channel, log_z)`` where ``log_z[x] = log sum_y q(y) exp(-lam loss(x, y))``.
    Reports with ``q(y) == 0`` get exactly zero probability.
    """
    loss = as_loss(loss)
    q = np.asarray(q, dtype=float)
    if q.ndim == 1 and q.size and np.all(q == 0):
        raise EmptySupport("marginal has no positive entry")
    q = as_marginal(q, "q")
    if loss.shape[1] != q.size:
        raise DimensionMismatch(f"loss has {loss.shape[1]} reports but q has {q.size}")
    return _gibbs(loss, q, check_lambda(lam))


def objective(prior, loss, f, lam) -> float:
    """Priced objective E[loss] + I(X;Y)/lam (loss units)."""
    prior = as_prior(prior)
    loss = as_loss(loss)
    f = as_channel(f)
    if f.shape != loss.shape or prior.size != loss.shape[0]:
        raise DimensionMismatch(f"prior {prior.shape}, loss {loss.shape}, channel {f.shape}")
    lam = check_lambda(lam)
    return _objective(prior, loss, f, lam)


def _objective(prior, loss, f, lam, q=None):
    expected = float(prior @ np.sum(f * loss, axis=1))
    return expected + _mi(prior, f, q) / lam


def optimal_value(prior, log_z, lam) -> float:
    """-E[log Z(X)] / lam, the loss-form optimal value at a fixed point.

    The utility-form value reported in the literature is the negative of this.
    """
    prior = as_prior(prior)
    log_z = np.asarray(log_z, dtype=float)
    if log_z.shape != prior.shape:
        raise DimensionMismatch(f"log_z shape {log_z.shape} vs prior {prior.shape}")
    live = prior > 0
    return float(-(prior[live] @ log_z[live]) / check_lambda(lam))


def entropic_tilt(prior, log_z, lam) -> np.ndarray:
    """Tilted state law proportional to exp(log_z / lam) * prior."""
    prior = as_prior(prior)
    log_z = np.asarray(log_z, dtype=float)
    if log_z.shape != prior.shape:
        raise DimensionMismatch(f"log_z shape {log_z.shape} vs prior {prior.shape}")
    if not np.all(np.isfinite(log_z[prior > 0])):
        raise BpriError("log_z must be finite on the prior's support")
    lam = check_lambda(lam)
    logw = np.full(prior.shape, -np.inf)
    live = prior > 0
    logw[live] = np.log(prior[live]) + log_z[live] / lam
    w = np.exp(logw - logw[live].max())
    return w / w.sum()
