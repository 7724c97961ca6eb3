import logging
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from bpri.ba import (ba_solve, ba_step, frontier_diagnostics, solve_capacity, support_set,
                     trace_frontier, FrontierPoint)
from bpri.errors import CapacityOutOfRange, MaxIterExceeded, NonFiniteLoss
from bpri.fixtures import binary_entropy_bits, binary_hamming, random_instance
from bpri.gibbs import optimal_value
from bpri.prob import entropy, induced_marginal, to_bits

from conftest import lambdas, problem


def test_binary_hamming_matches_rate_distortion():
    prior, loss = binary_hamming()
    for lam in np.linspace(0.2, 8, 20):
        sol = ba_solve(prior, loss, lam)
        d = sol.expected_loss
        assert to_bits(sol.mutual_info) == pytest.approx(max(1 - binary_entropy_bits(d), 0), abs=1e-4)


def test_constant_loss_one_iteration():
    sol = ba_solve([0.3, 0.7], np.full((2, 3), 1.5), 2.0)
    assert sol.iterations == 1 and sol.mutual_info == 0.0
    assert np.allclose(sol.channel, 1 / 3)


def test_tiny_lambda_is_uninformative():
    prior, loss = random_instance(5, 0)
    sol = ba_solve(prior, loss, 1e-12)
    assert sol.mutual_info < 1e-9
    assert sol.expected_loss == pytest.approx((prior @ loss).mean(), abs=1e-9)


def test_zero_prior_states_dropped(caplog):
    loss = np.array([[0.0, 1.0], [1.0, 0.0], [0.3, 0.3]])
    with caplog.at_level(logging.WARNING):
        sol = ba_solve([0.5, 0.5, 0.0], loss, 2.0)
    assert sol.dropped_states == (2,)
    assert np.allclose(sol.channel[2], 0.5)
    ref = ba_solve([0.5, 0.5], loss[:2], 2.0)
    assert sol.objective_value == pytest.approx(ref.objective_value, abs=1e-14)


def test_max_iter_flagged():
    prior, loss = random_instance(0, 3)
    with pytest.warns(MaxIterExceeded):
        sol = ba_solve(prior, loss, 5.0, max_iter=3)
    assert not sol.converged and sol.iterations == 3


def test_nonfinite_loss_rejected():
    with pytest.raises(NonFiniteLoss):
        ba_solve([0.5, 0.5], [[0.0, np.nan], [1.0, 0.0]], 1.0)


def test_capacity_examples():
    prior, loss = binary_hamming()
    res = solve_capacity(prior, loss, 0.0)
    assert res.mutual_info < 1e-8
    res = solve_capacity(prior, loss, 0.3681)
    assert res.expected_loss == pytest.approx(0.1, abs=1e-4)
    # R(D) inverted analytically: ln 2 - H(0.1) nats
    assert math.log(2) - entropy([0.1, 0.9]) == pytest.approx(0.3681, abs=1e-4)
    k = 3
    res = solve_capacity(np.full(k, 1 / k), 1 - np.eye(k), math.log(k) - 1e-6)
    assert res.expected_loss < 1e-4
    with pytest.raises(CapacityOutOfRange):
        solve_capacity(prior, loss, 1.0)


def test_capacity_kink_mixture():
    # two states, two reports with a dominated third: I(lambda) jumps where the
    # informative report set switches on; any target inside the jump is a mixture
    prior, loss = binary_hamming()
    for kappa in (0.05, 0.2, 0.5):
        res = solve_capacity(prior, loss, kappa, tol_kappa=1e-9)
        assert res.mutual_info == pytest.approx(kappa, abs=1e-8)
        if res.kink:
            assert 0 <= res.alpha <= 1


def test_trace_frontier_shape_and_single_point():
    pts = trace_frontier(*random_instance(2, 1), [1e-12])
    assert len(pts) == 1 and pts[0].kappa < 1e-9
    prior, loss = random_instance(2, 2)
    pts = trace_frontier(prior, loss, np.geomspace(0.5, 20, 30))
    d = frontier_diagnostics(pts)
    assert d["max_loss_increase"] <= 1e-9 and d["min_convexity_gap"] >= -1e-6
    assert [p.kappa for p in pts] == sorted(p.kappa for p in pts)


def test_frontier_diagnostics_detects_concavity():
    pts = [FrontierPoint(1, 0.0, 1.0), FrontierPoint(2, 0.5, 0.9), FrontierPoint(3, 1.0, 0.0)]
    assert frontier_diagnostics(pts)["min_convexity_gap"] < 0


def test_parallel_frontier_matches_sequential():
    prior, loss = random_instance(2, 3)
    grid = np.geomspace(0.5, 10, 8)
    a = trace_frontier(prior, loss, grid, warm_start=False)
    b = trace_frontier(prior, loss, grid, warm_start=False, workers=4)
    assert a == b


def test_support_set_examples():
    assert support_set(np.full(4, 0.25), 1e-12) == frozenset(range(4))
    assert support_set([1.0, 0.0, 0.0]) == frozenset({0})


def test_support_growth_observed(caplog):
    """Support size along a lambda grid; shrinking is an observation, so only log it."""
    prior, loss = random_instance(4, 0, 4, 6)
    sizes = [len(support_set(ba_solve(prior, loss, lam, tol=1e-12).marginal, 1e-6))
             for lam in np.geomspace(0.1, 20, 12)]
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        logging.getLogger(__name__).warning("support shrank along grid: %s", sizes)
    assert sizes[-1] >= 1


@settings(max_examples=25)
@given(problem(), lambdas)
def test_fixed_point_properties(pl, lam):
    prior, loss = pl
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        sol = ba_solve(prior, loss, lam, tol=1e-10, max_iter=20_000)
    if not sol.converged:
        return
    assert np.abs(ba_step(prior, loss, sol) - sol.marginal).max() < 10 * 1e-10 + 1e-12
    assert sol.objective_value == pytest.approx(optimal_value(prior, sol.log_z, lam), abs=1e-9)
    assert sol.objective_value == pytest.approx(sol.expected_loss + sol.mutual_info / lam, abs=1e-10)
    assert np.abs(induced_marginal(prior, sol.channel) - sol.marginal).max() < 1e-9
    assert sol.descent_violations == 0


@pytest.mark.filterwarnings("ignore::bpri.errors.MaxIterExceeded")  # slow corners at small lambda
@settings(max_examples=15)
@given(problem(max_x=4, max_y=4))
def test_information_nondecreasing_in_lambda(pl):
    prior, loss = pl
    grid = np.geomspace(0.1, 10, 8)
    mi = [ba_solve(prior, loss, lam, tol=1e-10).mutual_info for lam in grid]
    assert all(b >= a - 1e-7 for a, b in zip(mi, mi[1:]))
