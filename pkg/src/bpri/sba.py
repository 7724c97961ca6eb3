"""Stochastic Blahut-Arimoto: Robbins-Monro updates of the report marginal.

Each step samples a state, forms its Gibbs row against the current marginal
(optionally with zero-mean noise added to the loss row) and moves the marginal
a step ``eta_t`` toward that row. Only the marginal is state; the channel is
the Gibbs kernel it induces.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

from .ba import _check_problem, ba_solve
from .gibbs import _gibbs, check_lambda
from .prob import as_marginal
from .rng import stream

log = logging.getLogger(__name__)

CLAMP_FLOOR = 1e-300
CHUNK = 1 << 16


@dataclass(frozen=True)
class StepSchedule:
    """eta_t = a / (t + b + 1)."""

    a: float = 1.0
    b: float = 10.0

    def __post_init__(self):
        if not (self.a > 0 and self.b >= 0):
            raise ValueError("step schedule needs a > 0 and b >= 0")
        # eta_0 == 1 is allowed: the first step then replaces q_0 by one Gibbs row
        if not self.eta(0) <= 1:
            raise ValueError(f"eta_0 = {self.eta(0)} must be <= 1")

    def eta(self, t):
        return self.a / (np.asarray(t, dtype=float) + self.b + 1.0)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    sigma: float = 0.0
    stream: int = 1

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValueError("gaussian noise needs a finite sigma >= 0")


@dataclass
class SbaTrajectory:
    t: np.ndarray
    eta: np.ndarray
    iterates: np.ndarray
    sampled_state: np.ndarray
    kl_series: np.ndarray | None
    final_marginal: np.ndarray
    final_channel: np.ndarray
    clamp_events: int = 0

    def csv_rows(self):
        kl = self.kl_series if self.kl_series is not None else np.full(self.t.size, np.nan)
        for row in zip(self.t, self.eta, kl, self.sampled_state):
            yield int(row[0]), float(row[1]), float(row[2]), int(row[3])


@numba.njit(cache=True)
def _sba_chunk(q, loss, lam, a, b, t0, states, noise, batch, ref, stride,
               out_t, out_eta, out_q, out_kl, out_x, n_out):
    n_y = q.size
    n_steps = states.size // batch
    row = np.empty(n_y)
    acc = np.empty(n_y)
    clamps = 0
    for k in range(n_steps):
        t = t0 + k
        eta = a / (t + b + 1.0)
        acc[:] = 0.0
        for j in range(batch):
            i = k * batch + j
            x = states[i]
            m = -np.inf
            for y in range(n_y):
                if q[y] > 0.0:
                    row[y] = np.log(q[y]) - lam * (loss[x, y] + noise[i, y])
                else:
                    row[y] = -np.inf
                if row[y] > m:
                    m = row[y]
            s = 0.0
            for y in range(n_y):
                row[y] = np.exp(row[y] - m)
                s += row[y]
            for y in range(n_y):
                acc[y] += row[y] / s
        total = 0.0
        for y in range(n_y):
            q[y] = (1.0 - eta) * q[y] + eta * acc[y] / batch
            if 0.0 < q[y] < 1e-300:
                q[y] = 0.0
                clamps += 1
            total += q[y]
        for y in range(n_y):
            q[y] /= total
        if (t + 1) % stride == 0:
            out_t[n_out] = t + 1
            out_eta[n_out] = eta
            out_x[n_out] = states[k * batch]
            kl = 0.0
            for y in range(n_y):
                out_q[n_out, y] = q[y]
                if ref[y] > 0.0:
                    kl += ref[y] * (np.log(ref[y]) - np.log(q[y]))
            out_kl[n_out] = kl
            n_out += 1
    return n_out, clamps


def reference_marginal(prior, loss, lam) -> np.ndarray:
    """Deterministic BA fixed point used as the convergence target."""
    return ba_solve(prior, loss, lam, tol=1e-12).marginal


def sba_run(prior, loss, lam, schedule: StepSchedule = StepSchedule(),
            noise: NoiseModel = NoiseModel(), seed: int = 0, T: int = 100_000,
            log_stride: int = 100, reference=None, batch: int = 1, q0=None) -> SbaTrajectory:
    """Run ``T`` S-BA steps from a uniform (or given interior) marginal.

    States come from substream 0 of ``seed`` and loss noise from substream
    ``noise.stream``, so a run is bitwise reproducible. ``batch > 1`` averages
    that many sampled Gibbs rows per step. If ``reference`` is given the
    trajectory records KL(reference || q_t) at every logged step. The final
    channel is the noiseless Gibbs kernel of the final marginal.
    """
    prior, loss = _check_problem(prior, loss)
    lam = check_lambda(lam)
    if T < 1 or log_stride < 1 or batch < 1:
        raise ValueError("T, log_stride and batch must be >= 1")
    n_x, n_y = loss.shape
    q = np.full(n_y, 1.0 / n_y) if q0 is None else as_marginal(q0, "q0").copy()
    ref = np.zeros(n_y) if reference is None else as_marginal(reference, "reference")

    n_rec = T // log_stride
    out_t = np.empty(n_rec, dtype=np.int64)
    out_eta = np.empty(n_rec)
    out_q = np.empty((n_rec, n_y))
    out_kl = np.empty(n_rec)
    out_x = np.empty(n_rec, dtype=np.int64)

    state_rng = stream(seed, 0)
    noise_rng = stream(seed, noise.stream) if noise.kind == "gaussian" else None
    n_out = 0
    clamps = 0
    t = 0
    while t < T:
        n = min(CHUNK, T - t)
        states = state_rng.choice(n_x, size=n * batch, p=prior).astype(np.int64)
        if noise_rng is not None:
            xi = noise.sigma * noise_rng.standard_normal((n * batch, n_y))
        else:
            xi = np.zeros((n * batch, n_y))
        n_out, c = _sba_chunk(q, loss, lam, schedule.a, schedule.b, t, states, xi, batch, ref,
                              log_stride, out_t, out_eta, out_q, out_kl, out_x, n_out)
        clamps += c
        t += n
    if clamps:
        log.warning("sba_run: clamped %d marginal entries below %g to zero", clamps, CLAMP_FLOOR)

    channel, _ = _gibbs(loss, q, lam)
    return SbaTrajectory(
        t=out_t, eta=out_eta, iterates=out_q, sampled_state=out_x,
        kl_series=out_kl if reference is not None else None,
        final_marginal=q, final_channel=channel, clamp_events=clamps,
    )


def smoothed_kl(traj: SbaTrajectory, window: int = 1000, burn_in: float = 0.1) -> np.ndarray:
    """Means of the logged KL series over consecutive ``window``-step blocks after burn-in."""
    if traj.kl_series is None:
        raise ValueError("trajectory has no KL series; pass a reference to sba_run")
    stride = int(traj.t[1] - traj.t[0]) if traj.t.size > 1 else 1
    per = max(window // stride, 1)
    keep = traj.kl_series[traj.t > burn_in * traj.t[-1]]
    n = keep.size // per
    return keep[: n * per].reshape(n, per).mean(axis=1)


def mean_field_check(prior, loss, lam, q, n_samples: int | None = 10_000, seed: int = 0) -> float:
    """Sup-norm gap between a Monte Carlo average of sampled Gibbs rows and G(q).

    ``n_samples=None`` enumerates states with their prior weights instead of
    sampling, which reproduces G(q) exactly.
    """
    prior, loss = _check_problem(prior, loss)
    q = as_marginal(q, "q")
    f, _ = _gibbs(loss, q, check_lambda(lam))
    g = prior @ f
    if n_samples is None:
        est = (prior[:, None] * f).sum(axis=0)
    else:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        xs = stream(seed, 0).choice(prior.size, size=n_samples, p=prior)
        est = np.bincount(xs, minlength=prior.size) @ f / n_samples
    return float(np.max(np.abs(est - g)))
