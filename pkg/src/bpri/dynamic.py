"""Information-priced control of finite MDPs.

Each stage is a static priced problem: the state law at that stage is the
prior, the action-value table is the loss, and the soft value is
``V(s) = -log sum_a q(a) exp(-lam Q(s, a)) / lam``. The action marginal ``q``
is the unconditional action law, so the backward (values, policies) and
forward (state laws) passes depend on each other; they are alternated until
the state laws stop moving.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ba import _floored, ba_solve
from .errors import BpriError, DimensionMismatch, MaxIterExceeded, MaxOuterExceeded
from .gibbs import _gibbs, check_lambda
from .prob import SIMPLEX_TOL, _mi, as_prior

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteMdp:
    transition: np.ndarray  # (state, action, next_state)
    stage_loss: np.ndarray  # (state, action)
    terminal_loss: np.ndarray
    initial: np.ndarray
    discount: float | None = None
    horizon: int | None = None

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        loss = np.asarray(self.stage_loss, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or 0 in p.shape:
            raise DimensionMismatch(f"transition must be (S, A, S), got {p.shape}")
        s, a = p.shape[:2]
        if loss.shape != (s, a):
            raise DimensionMismatch(f"stage_loss must be {(s, a)}, got {loss.shape}")
        term = np.zeros(s) if self.terminal_loss is None else np.asarray(self.terminal_loss, dtype=float)
        if term.shape != (s,):
            raise DimensionMismatch(f"terminal_loss must have {s} entries")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=2) - 1.0)) > SIMPLEX_TOL:
            raise BpriError("every transition row must be a probability vector")
        if not (np.all(np.isfinite(loss)) and np.all(np.isfinite(term))):
            raise BpriError("losses must be finite")
        init = as_prior(self.initial, "initial")
        if init.size != s:
            raise DimensionMismatch(f"initial has {init.size} entries, expected {s}")
        if self.discount is not None and not 0 < self.discount < 1:
            raise BpriError(f"discount must lie in (0, 1), got {self.discount}")
        if self.horizon is not None and self.horizon < 1:
            raise BpriError("horizon must be >= 1")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "stage_loss", loss)
        object.__setattr__(self, "terminal_loss", term)
        object.__setattr__(self, "initial", init)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteMdp":
        s, a = int(d["n_states"]), int(d["n_actions"])
        return cls(
            transition=np.asarray(d["transition"], dtype=float).reshape(s, a, s),
            stage_loss=np.asarray(d["stage_loss"], dtype=float).reshape(s, a),
            terminal_loss=d.get("terminal_loss"),
            initial=d["initial"],
            discount=d.get("discount"),
            horizon=d.get("horizon"),
        )

    @classmethod
    def from_json(cls, path) -> "FiniteMdp":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states, "n_actions": self.n_actions,
            "transition": self.transition.ravel().tolist(),
            "stage_loss": self.stage_loss.ravel().tolist(),
            "terminal_loss": self.terminal_loss.tolist(),
            "initial": self.initial.tolist(),
            "discount": self.discount, "horizon": self.horizon,
        }


def _expect_next(mdp: FiniteMdp, v: np.ndarray) -> np.ndarray:
    return mdp.transition @ v


def _push(mdp: FiniteMdp, m: np.ndarray, policy: np.ndarray) -> np.ndarray:
    nxt = np.einsum("s,sa,sat->t", m, policy, mdp.transition)
    return nxt / nxt.sum()


@dataclass
class SoftPlan:
    policies: np.ndarray        # (T, S, A)
    marginals: np.ndarray       # (T, A)
    values: np.ndarray          # (T+1, S); last row is the terminal loss
    state_marginals: np.ndarray  # (T+1, S)
    q_values: np.ndarray        # (T, S, A)
    mutual_info: np.ndarray     # (T,)
    total_objective: float
    lam: float
    outer_iterations: int
    converged: bool
    change: float

    @property
    def horizon(self) -> int:
        return self.policies.shape[0]

    def csv_rows(self):
        for t in range(self.horizon):
            for s in range(self.policies.shape[1]):
                for a in range(self.policies.shape[2]):
                    yield (t, s, a, float(self.policies[t, s, a]),
                           float(self.q_values[t, s, a]), float(self.values[t, s]))


PLAN_COLUMNS = ("t", "state", "action", "prob", "Q", "V")


def _stage(prior, q_table, lam, tol, max_iter, q0):
    """Static priced stage: returns (policy over all states, marginal, soft values)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MaxIterExceeded)
        # floor the warm start so actions dropped earlier can re-enter
        sol = ba_solve(prior, q_table, lam, tol=tol, max_iter=max_iter, q0=_floored(q0))
    ok = not any(issubclass(w.category, MaxIterExceeded) for w in caught)
    policy, log_z = _gibbs(q_table, sol.marginal, lam)
    return policy, sol.marginal, -log_z / lam, ok


def soft_bellman_finite(mdp: FiniteMdp, lam, horizon: int | None = None, tol: float = 1e-10,
                        max_outer: int = 1000, damping: float = 0.5,
                        stage_tol: float | None = None, stage_max_iter: int = 100_000) -> SoftPlan:
    """Finite-horizon soft Bellman recursion with self-consistent action marginals.

    The outer loop runs a backward pass (stage problems solved at the current
    state laws) and a forward pass (state laws propagated through the new
    policies and mixed with the old ones by ``damping``). It stops once the
    largest change in any state law is below ``tol``.
    """
    lam = check_lambda(lam)
    T = horizon if horizon is not None else mdp.horizon
    if T is None or T < 1:
        raise BpriError("horizon must be >= 1")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    stage_tol = min(tol, 1e-12) if stage_tol is None else stage_tol
    S, A = mdp.n_states, mdp.n_actions

    uniform = np.full((S, A), 1.0 / A)
    m = np.empty((T + 1, S))
    m[0] = mdp.initial
    for t in range(T):
        m[t + 1] = _push(mdp, m[t], uniform)

    policies = np.empty((T, S, A))
    marginals = np.full((T, A), 1.0 / A)
    values = np.empty((T + 1, S))
    qv = np.empty((T, S, A))
    converged = False
    change = np.inf
    for outer in range(1, max_outer + 1):
        values[T] = mdp.terminal_loss
        stages_ok = True
        for t in range(T - 1, -1, -1):
            qv[t] = mdp.stage_loss + _expect_next(mdp, values[t + 1])
            policies[t], marginals[t], values[t], ok = _stage(
                m[t], qv[t], lam, stage_tol, stage_max_iter, marginals[t])
            stages_ok &= ok
        new = np.empty_like(m)
        new[0] = mdp.initial
        for t in range(T):
            new[t + 1] = _push(mdp, new[t], policies[t])
        change = float(np.max(np.abs(new - m)))
        if change < tol:
            m = new
            converged = stages_ok
            break
        m = (1 - damping) * m + damping * new
    if not converged:
        warnings.warn(f"soft_bellman_finite: state laws still moving by {change:.3g} "
                      f"after {outer} passes", MaxOuterExceeded, stacklevel=2)

    mi = np.array([_mi(m[t], policies[t]) for t in range(T)])
    expected = sum(float(m[t] @ np.sum(policies[t] * mdp.stage_loss, axis=1)) for t in range(T))
    total = expected + float(m[T] @ mdp.terminal_loss) + float(mi.sum()) / lam
    return SoftPlan(policies, marginals, values, m, qv, mi, total, lam, outer, converged, change)


def lazy_occupancy(mdp: FiniteMdp, policy: np.ndarray, start=None, tol: float = 1e-12,
                   max_iter: int = 1_000_000) -> np.ndarray:
    """Long-run state law from ``start`` under ``policy``.

    Power iteration on the lazy chain (stay with probability 1/2), which has the
    same stationary laws as the original chain but cannot oscillate.
    """
    d = mdp.initial if start is None else as_prior(start, "start")
    kernel = np.einsum("sa,sat->st", policy, mdp.transition)
    lazy = 0.5 * (np.eye(mdp.n_states) + kernel)
    for _ in range(max_iter):
        nxt = d @ lazy
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - d)) < tol:
            return nxt
        d = nxt
    log.warning("lazy_occupancy: no convergence in %d steps", max_iter)
    return d


@dataclass
class StationaryPlan:
    values: np.ndarray
    policy: np.ndarray
    marginal: np.ndarray
    occupancy: np.ndarray
    q_values: np.ndarray
    lam: float
    iterations: int
    converged: bool
    contraction_violations: int
    sweeps: int = 0


def _soft_values(mdp: FiniteMdp, q: np.ndarray, lam: float, v: np.ndarray, tol: float,
                 max_sweeps: int):
    """Soft value iteration with the action marginal held at ``q``.

    For fixed ``q`` the soft Bellman operator is a ``discount``-contraction in
    the sup norm; sweeps whose change shrinks by less than ``discount + 0.05``
    are counted as violations.
    """
    beta = mdp.discount
    prev = np.inf
    violations = 0
    for sweep in range(1, max_sweeps + 1):
        qv = mdp.stage_loss + beta * _expect_next(mdp, v)
        policy, log_z = _gibbs(qv, q, lam)
        v_new = -log_z / lam
        delta = float(np.max(np.abs(v_new - v)))
        if delta > (beta + 0.05) * prev + 1e-14:
            violations += 1
        v, prev = v_new, delta
        if delta < tol:
            break
    qv = mdp.stage_loss + beta * _expect_next(mdp, v)
    policy, log_z = _gibbs(qv, q, lam)
    return -log_z / lam, policy, qv, sweep, violations


def soft_value_iteration(mdp: FiniteMdp, lam, tol: float = 1e-12, max_iter: int = 10_000,
                         inner_tol: float | None = None,
                         max_sweeps: int = 100_000) -> StationaryPlan:
    """Discounted soft Bellman fixed point with occupancy-weighted action marginals.

    The outer variable is the action marginal ``q``. For each ``q`` the soft
    values are solved to ``inner_tol`` by contraction, the Gibbs policy and its
    long-run occupancy follow, and ``q`` takes one Blahut-Arimoto step to the
    occupancy-weighted action law. Iterating the stage problem to its own fixed
    point inside every sweep instead lets ``q`` jump between corners at small
    lambda and cycle; holding ``q`` as the outer variable keeps every map
    continuous. Stops when both the values and ``q`` move by less than ``tol``.
    """
    if mdp.discount is None:
        raise BpriError("soft_value_iteration needs a discount in (0, 1)")
    lam = check_lambda(lam)
    inner_tol = min(tol, 1e-13) if inner_tol is None else inner_tol
    S, A = mdp.n_states, mdp.n_actions
    v = np.zeros(S)
    q = np.full(A, 1.0 / A)
    violations = 0
    sweeps = 0
    converged = False
    dv = dq = np.inf
    for it in range(1, max_iter + 1):
        v_new, policy, qv, n, bad = _soft_values(mdp, q, lam, v, inner_tol, max_sweeps)
        sweeps += n
        violations += bad
        occ = lazy_occupancy(mdp, policy)
        q_new = occ @ policy
        q_new /= q_new.sum()
        dv = float(np.max(np.abs(v_new - v)))
        dq = float(np.max(np.abs(q_new - q)))
        v = v_new
        if dv < tol and dq < tol:
            converged = True
            break
        q = q_new
    if violations:
        log.warning("soft_value_iteration: %d sweeps contracted slower than %.2f",
                    violations, mdp.discount + 0.05)
    if not converged:
        warnings.warn(f"soft_value_iteration: no convergence in {max_iter} outer steps "
                      f"(value change {dv:.3g}, marginal change {dq:.3g})",
                      MaxIterExceeded, stacklevel=2)
    return StationaryPlan(v, policy, q, occ, qv, lam, it, converged, violations, sweeps)


def classical_dp_oracle(mdp: FiniteMdp, horizon: int | None = None, tol: float = 1e-13,
                        max_iter: int = 1_000_000):
    """Hard-min dynamic programming; ties go to the lowest action index.

    With a horizon returns ``(values (T+1, S), actions (T, S))`` by backward
    induction. Without one, runs discounted value iteration and returns
    ``(values (S,), actions (S,))``; the MDP's own horizon is not consulted.
    """
    T = horizon
    if T is not None:
        values = np.empty((T + 1, mdp.n_states))
        actions = np.empty((T, mdp.n_states), dtype=int)
        values[T] = mdp.terminal_loss
        for t in range(T - 1, -1, -1):
            qv = mdp.stage_loss + _expect_next(mdp, values[t + 1])
            actions[t] = np.argmin(qv, axis=1)
            values[t] = qv.min(axis=1)
        return values, actions
    if mdp.discount is None:
        raise BpriError("classical_dp_oracle needs a horizon or a discount")
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        qv = mdp.stage_loss + mdp.discount * _expect_next(mdp, v)
        v_new = qv.min(axis=1)
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    qv = mdp.stage_loss + mdp.discount * _expect_next(mdp, v)
    return v, np.argmin(qv, axis=1)
