"""Probability primitives on finite alphabets.

All information quantities are in nats. The conventions ``0 log 0 = 0`` and
``0 log(0/0) = 0`` are used throughout; positive mass against zero mass is an
error rather than ``+inf``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss, NonSimplexInput, SupportViolation

SIMPLEX_TOL = 1e-12
LOG2 = float(np.log(2.0))


def as_simplex(p, name: str = "p") -> np.ndarray:
    """Validate a probability vector, renormalizing only rounding-level drift."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise NonSimplexInput(f"{name}: expected a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise NonSimplexInput(f"{name}: entries must be finite and non-negative")
    s = p.sum()
    if abs(s - 1.0) > SIMPLEX_TOL:
        raise NonSimplexInput(f"{name}: sums to {s!r}, not 1 within {SIMPLEX_TOL}")
    return p / s


as_prior = as_simplex
as_marginal = as_simplex


def as_channel(f, name: str = "channel") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or 0 in f.shape:
        raise NonSimplexInput(f"{name}: expected a non-empty 2-D matrix, got shape {f.shape}")
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise NonSimplexInput(f"{name}: entries must be finite and non-negative")
    s = f.sum(axis=1)
    bad = np.flatnonzero(np.abs(s - 1.0) > SIMPLEX_TOL)
    if bad.size:
        raise NonSimplexInput(f"{name}: row {bad[0]} sums to {s[bad[0]]!r}")
    return f / s[:, None]


@dataclass(frozen=True)
class LossMatrix:
    """Per-(state, report) loss; utilities enter negated."""

    entries: np.ndarray
    is_utility_negated: bool = False

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or 0 in e.shape:
            raise DimensionMismatch(f"loss: expected a non-empty 2-D matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise NonFiniteLoss("loss: all entries must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_utility(cls, utility) -> "LossMatrix":
        return cls(-np.asarray(utility, dtype=float), is_utility_negated=True)

    @property
    def shape(self):
        return self.entries.shape


def as_loss(loss) -> np.ndarray:
    if isinstance(loss, LossMatrix):
        return loss.entries
    return LossMatrix(loss).entries


def _check_pair(prior: np.ndarray, f: np.ndarray):
    if f.shape[0] != prior.size:
        raise DimensionMismatch(f"prior has {prior.size} states but channel has {f.shape[0]} rows")


def _xlogy_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise a*log(a/b) with 0 where a == 0."""
    out = np.zeros(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    m = a > 0
    out[m] = a[m] * (np.log(a[m]) - np.log(b[m]))
    return out


def entropy(p) -> float:
    """Shannon entropy in nats."""
    p = as_simplex(p)
    nz = p[p > 0]
    return float(max(-np.sum(nz * np.log(nz)), 0.0))


def kl(p, q) -> float:
    """KL(p || q) in nats; raises SupportViolation if p is not dominated by q."""
    p = as_simplex(p, "p")
    q = as_simplex(q, "q")
    if p.shape != q.shape:
        raise DimensionMismatch(f"kl: shapes {p.shape} and {q.shape} differ")
    if np.any((q == 0) & (p > 0)):
        raise SupportViolation("kl: p puts mass where q has none")
    return float(max(_xlogy_ratio(p, q).sum(), 0.0))


def induced_marginal(prior, f) -> np.ndarray:
    prior = as_prior(prior)
    f = as_channel(f)
    _check_pair(prior, f)
    q = prior @ f
    return q / q.sum()


def mutual_information(prior, f) -> float:
    """I(X;Y) = sum_x p(x) sum_y f(y|x) log(f(y|x)/q(y))."""
    prior = as_prior(prior)
    f = as_channel(f)
    _check_pair(prior, f)
    return _mi(prior, f)


def _mi(prior: np.ndarray, f: np.ndarray, q: np.ndarray | None = None) -> float:
    if q is None:
        q = prior @ f
    # weight by the joint: a subnormal f(y|x) whose joint mass underflows to 0
    # may leave q(y) == 0 and contributes nothing anyway
    joint = prior[:, None] * f
    m = joint > 0
    ratio = f[m] / np.broadcast_to(q, f.shape)[m]
    return float(max(joint[m] @ np.log(ratio), 0.0))


def refinement_gain(prior, f) -> float:
    """Expected log-score gain E[log p(X|Y) - log p(X)] from prior to posterior.

    Computed through Bayes posteriors of the joint law, independently of
    :func:`mutual_information`, which it must equal.
    """
    prior = as_prior(prior)
    f = as_channel(f)
    _check_pair(prior, f)
    joint = prior[:, None] * f
    q = joint.sum(axis=0)
    m = joint > 0
    post = np.zeros_like(joint)
    post[m] = joint[m] / np.broadcast_to(q, joint.shape)[m]
    logprior = np.broadcast_to(np.log(np.where(prior > 0, prior, 1.0))[:, None], joint.shape)
    gain = joint[m] @ (np.log(post[m]) - logprior[m])
    return float(gain)


def to_bits(nats: float) -> float:
    return nats / LOG2
