"""Deterministic Blahut-Arimoto iteration for information-priced decisions.

``ba_solve`` finds the Gibbs fixed point at a given lambda, ``solve_capacity``
inverts the lambda -> I(X;Y) map by bisection, and ``trace_frontier`` sweeps a
lambda grid to trace the loss/information frontier.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapacityOutOfRange, DimensionMismatch, MaxIterExceeded, NonMonotoneBracket
from .gibbs import _gibbs, check_lambda
from .prob import _mi, as_loss, as_marginal, as_prior, entropy

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass
class GibbsSolution:
    channel: np.ndarray
    marginal: np.ndarray
    log_z: np.ndarray
    lam: float
    expected_loss: float
    mutual_info: float
    objective_value: float
    iterations: int
    residual: float
    converged: bool = True
    dropped_states: tuple = ()
    descent_violations: int = 0
    # -E[log Z]/lam over states with prior mass
    optimal_value: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "price": 1.0 / self.lam,
            "expected_loss": self.expected_loss,
            "mutual_info_nats": self.mutual_info,
            "objective_value": self.objective_value,
            "optimal_value": self.optimal_value,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "dropped_states": list(self.dropped_states),
            "marginal": self.marginal.tolist(),
            "channel": self.channel.tolist(),
            "log_z": self.log_z.tolist(),
        }


@dataclass(frozen=True)
class FrontierPoint:
    lam: float
    kappa: float
    expected_loss: float


def _check_problem(prior, loss):
    prior = as_prior(prior)
    loss = as_loss(loss)
    if loss.shape[0] != prior.size:
        raise DimensionMismatch(f"prior has {prior.size} states but loss has {loss.shape[0]} rows")
    return prior, loss


def ba_solve(prior, loss, lam, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             q0=None) -> GibbsSolution:
    """Blahut-Arimoto fixed point of the priced problem at ``lam``.

    Alternates the Gibbs update and the induced marginal from a strictly
    positive start (uniform unless ``q0`` is given) until the sup-norm change
    in the marginal drops below ``tol`` and KL(q_t || q_{t-1}) < tol**2.
    States with zero prior mass are removed before solving and come back as
    uniform rows in the returned channel.
    """
    prior, loss = _check_problem(prior, loss)
    lam = check_lambda(lam)
    if not tol > 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    n_x, n_y = loss.shape
    live = prior > 0
    dropped = tuple(int(i) for i in np.flatnonzero(~live))
    if dropped:
        log.warning("ba_solve: dropping zero-prior states %s", dropped)
    p, L = prior[live], loss[live]

    q = np.full(n_y, 1.0 / n_y) if q0 is None else as_marginal(q0, "q0").copy()
    prev_obj = np.inf
    violations = 0
    converged = False
    residual = np.inf
    for it in range(1, max_iter + 1):
        f, log_z = _gibbs(L, q, lam)
        q_new = p @ f
        q_new /= q_new.sum()
        nz = q_new > 0
        step_kl = max(float(q_new[nz] @ (np.log(q_new[nz]) - np.log(q[nz]))), 0.0)
        # J(f_t) = -(E[log Z_t] + KL(q_{t+1} || q_t)) / lam; BA never increases it
        obj = -(p @ log_z + step_kl) / lam
        if obj > prev_obj + 1e-12 * max(1.0, abs(prev_obj)):
            violations += 1
        prev_obj = obj
        residual = float(np.max(np.abs(q_new - q)))
        q_old, q = q, q_new
        if residual < tol and step_kl < tol * tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"ba_solve: no convergence in {max_iter} iterations at lambda={lam:g} "
                      f"(residual {residual:.3g})", MaxIterExceeded, stacklevel=2)
    if violations:
        log.warning("ba_solve: objective increased %d times (rounding level)", violations)

    expected = float(p @ np.sum(f * L, axis=1))
    mi = _mi(p, f, q)
    channel = np.full((n_x, n_y), 1.0 / n_y)
    channel[live] = f
    full_log_z = np.empty(n_x)
    full_log_z[live] = log_z
    if dropped:
        full_log_z[~live] = _gibbs(loss[~live], q_old, lam)[1]
    sol = GibbsSolution(
        channel=channel, marginal=q, log_z=full_log_z, lam=lam, expected_loss=expected,
        mutual_info=mi, objective_value=expected + mi / lam, iterations=it,
        residual=residual, converged=converged, dropped_states=dropped,
        descent_violations=violations, optimal_value=float(-(p @ log_z) / lam),
    )
    return sol


def ba_step(prior, loss, sol: GibbsSolution) -> np.ndarray:
    """One further BA marginal update from a solution's marginal."""
    prior, loss = _check_problem(prior, loss)
    f, _ = _gibbs(loss, sol.marginal, sol.lam)
    q = prior @ f
    return q / q.sum()


@dataclass
class CapacityResult:
    """Outcome of a capacity-constrained solve.

    On a differentiable stretch of the frontier ``solution`` holds the Gibbs
    solution whose information matches ``kappa``. At a kink ``solution`` is
    None and the optimizer is the mixture ``alpha * low + (1 - alpha) * high``.
    """

    kappa: float
    solution: GibbsSolution | None
    low: GibbsSolution | None = None
    high: GibbsSolution | None = None
    alpha: float | None = None
    kink: bool = False
    grid_fallback: bool = False
    evaluations: int = 0
    corner: bool = False

    @property
    def lam(self) -> float:
        if self.solution is not None:
            return self.solution.lam
        return float(np.sqrt(self.low.lam * self.high.lam))

    @property
    def mutual_info(self) -> float:
        if self.solution is not None:
            return self.solution.mutual_info
        return self.alpha * self.low.mutual_info + (1 - self.alpha) * self.high.mutual_info

    @property
    def expected_loss(self) -> float:
        if self.solution is not None:
            return self.solution.expected_loss
        return self.alpha * self.low.expected_loss + (1 - self.alpha) * self.high.expected_loss


def _floored(q, floor: float = 1e-6) -> np.ndarray:
    """Warm-start marginal kept away from zero so dropped reports can return."""
    q = np.maximum(q, floor)
    return q / q.sum()


LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12


def solve_capacity(prior, loss, kappa: float, tol_kappa: float = 1e-8, tol_fp: float = 1e-12,
                   max_bisect: int = 60, max_iter: int = DEFAULT_MAX_ITER) -> CapacityResult:
    """Gibbs solution whose mutual information equals ``kappa`` (nats).

    Brackets lambda by geometric expansion, then bisects in log-lambda. A
    bracket that stays split across ``kappa`` after ``max_bisect`` halvings is
    treated as a kink and returned as a two-solution mixture. If the recorded
    I(lambda) values turn out non-monotone, a log-spaced grid scan replaces the
    bisection and the result is flagged.
    """
    prior, loss = _check_problem(prior, loss)
    h = entropy(prior)
    if not (0.0 <= kappa <= h + tol_kappa):
        raise CapacityOutOfRange(f"kappa={kappa!r} outside [0, H(prior)={h:.12g}]")

    cache: dict[float, GibbsSolution] = {}

    def solve(lam):
        if lam not in cache:
            q0 = None
            if cache:
                near = min(cache, key=lambda x: abs(np.log(x / lam)))
                q0 = _floored(cache[near].marginal)
            cache[lam] = ba_solve(prior, loss, lam, tol=tol_fp, max_iter=max_iter, q0=q0)
        return cache[lam]

    def monotone() -> bool:
        lams = sorted(cache)
        mis = np.array([cache[x].mutual_info for x in lams])
        return bool(np.all(np.diff(mis) >= -1e-9))

    def done(sol):
        # at zero information a whole interval of prices supports the frontier
        return CapacityResult(kappa, sol, evaluations=len(cache),
                              corner=sol.mutual_info <= tol_kappa)

    lo = hi = 1.0
    s = solve(1.0)
    if abs(s.mutual_info - kappa) < tol_kappa:
        return done(s)
    if s.mutual_info < kappa:
        while True:
            hi *= 4.0
            s = solve(hi)
            if abs(s.mutual_info - kappa) < tol_kappa:
                return done(s)
            if s.mutual_info > kappa:
                break
            if hi >= LAMBDA_MAX:
                raise CapacityOutOfRange(
                    f"kappa={kappa!r} not reached; I -> {s.mutual_info:.12g} at lambda={hi:g}")
            lo = hi
    else:
        while True:
            lo /= 4.0
            s = solve(lo)
            if abs(s.mutual_info - kappa) < tol_kappa:
                return done(s)
            if s.mutual_info < kappa:
                break
            if lo <= LAMBDA_MIN:
                return done(s)
            hi = lo
    bracket = (lo, hi)

    for _ in range(max_bisect):
        if not monotone():
            return _grid_fallback(prior, loss, kappa, bracket, solve, cache)
        mid = float(np.sqrt(lo * hi))
        if mid in (lo, hi):
            break
        s = solve(mid)
        if abs(s.mutual_info - kappa) < tol_kappa:
            return done(s)
        if s.mutual_info < kappa:
            lo = mid
        else:
            hi = mid
    if not monotone():
        return _grid_fallback(prior, loss, kappa, bracket, solve, cache)

    s_lo, s_hi = solve(lo), solve(hi)
    jump = s_hi.mutual_info - s_lo.mutual_info
    if jump <= max(10 * tol_kappa, 1e-8):
        # bracket collapsed without a jump: accuracy is limited by the inner solver
        best = min((s_lo, s_hi), key=lambda z: abs(z.mutual_info - kappa))
        return done(best)
    alpha = (s_hi.mutual_info - kappa) / jump
    log.info("solve_capacity: kink at kappa=%g between lambda=%g and %g", kappa, lo, hi)
    return CapacityResult(kappa, None, low=s_lo, high=s_hi, alpha=float(alpha), kink=True,
                          evaluations=len(cache))


def _grid_fallback(prior, loss, kappa, bracket, solve, cache, n_grid: int = 200):
    warnings.warn("solve_capacity: I(lambda) not monotone on the bracket; using grid scan",
                  NonMonotoneBracket, stacklevel=3)
    lo, hi = bracket
    grid = np.geomspace(lo, hi, n_grid)
    best = min((solve(float(x)) for x in grid), key=lambda z: abs(z.mutual_info - kappa))
    return CapacityResult(kappa, best, grid_fallback=True, evaluations=len(cache))


def trace_frontier(prior, loss, lambda_grid, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, warm_start: bool = True,
                   workers: int = 1) -> list[FrontierPoint]:
    """Solve at each lambda of an increasing grid; points come back sorted by kappa.

    With ``warm_start`` each solve starts from the previous marginal (floored
    away from zero so that reports dropped at low lambda can re-enter).
    Parallel solving is only used when warm starts are off.
    """
    prior, loss = _check_problem(prior, loss)
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda_grid must be a non-empty, strictly increasing positive vector")

    if warm_start:
        sols = []
        q = None
        for lam in grid:
            s = ba_solve(prior, loss, lam, tol=tol, max_iter=max_iter, q0=q)
            sols.append(s)
            q = _floored(s.marginal)
    else:
        run = lambda lam: ba_solve(prior, loss, lam, tol=tol, max_iter=max_iter)  # noqa: E731
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                sols = list(ex.map(run, grid))
        else:
            sols = [run(lam) for lam in grid]

    pts = sorted((FrontierPoint(s.lam, s.mutual_info, s.expected_loss) for s in sols),
                 key=lambda p: (p.kappa, p.lam))
    diag = frontier_diagnostics(pts)
    if diag["max_loss_increase"] > 1e-9 or diag["min_convexity_gap"] < -1e-6:
        log.warning("trace_frontier: shape check failed: %s", diag)
    return pts


def frontier_diagnostics(points: list[FrontierPoint]) -> dict:
    """Shape checks on a kappa-sorted frontier.

    ``max_loss_increase`` is the largest rise in expected loss between
    consecutive points. ``min_convexity_gap`` is the smallest value of
    (chord - loss) at interior points, where the chord joins the two
    neighbours; a convex loss-vs-kappa curve keeps it non-negative.
    """
    k = np.array([p.kappa for p in points])
    e = np.array([p.expected_loss for p in points])
    out = {"max_loss_increase": 0.0, "min_convexity_gap": 0.0}
    if k.size >= 2:
        out["max_loss_increase"] = float(max(np.max(np.diff(e)), 0.0))
    gaps = []
    for i in range(1, k.size - 1):
        span = k[i + 1] - k[i - 1]
        if span <= 0:
            continue
        w = (k[i] - k[i - 1]) / span
        gaps.append((1 - w) * e[i - 1] + w * e[i + 1] - e[i])
    if gaps:
        out["min_convexity_gap"] = float(min(min(gaps), 0.0))
    return out


def support_set(q, eps: float = 1e-9) -> frozenset:
    """Report indices whose marginal mass exceeds ``eps``."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    q = np.asarray(q, dtype=float)
    return frozenset(int(i) for i in np.flatnonzero(q > eps))
