import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from bpri.choice import (consideration_sweep, curvature, dominated_options, log_partition,
                         mc_curvature, mnl_fisher_info, mnl_fisher_info_fd, softmax_channel,
                         tri_choice_curvature)
from bpri.errors import BpriError

PAPER_GRID = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.8, 2.0, 2.5, 3.0]
utility_vectors = hnp.arrays(float, st.integers(2, 8), elements=st.floats(-5, 5))


def test_softmax_examples():
    assert np.allclose(softmax_channel([3.0, -1.0, 7.0, 0.0], 1e-12), 0.25, atol=1e-9)
    assert np.allclose(softmax_channel([0.0, 0.0, 0.0], 2.0), 1 / 3, atol=1e-15)
    e = math.exp(1)
    assert softmax_channel([1.0, 0.0], 1.0) == pytest.approx([e / (1 + e), 1 / (1 + e)], abs=1e-15)
    assert softmax_channel([1.0, 0.0], 1.0) == pytest.approx([0.731059, 0.268941], abs=5e-7)
    # no overflow at large lam * u
    assert softmax_channel([800.0, 0.0], 10.0)[0] == 1.0


def test_input_validation():
    with pytest.raises(BpriError):
        softmax_channel([1.0], 1.0)
    with pytest.raises(BpriError):
        curvature([1.0, np.inf], 1.0)


def _fd_second_derivative(u, lam, h=1e-4):
    return (log_partition(u, lam + h) - 2 * log_partition(u, lam) + log_partition(u, lam - h)) / h**2


def test_curvature_examples():
    assert curvature([2.0, 2.0, 2.0], 1.5) == 0.0
    assert tri_choice_curvature(0.0, 1.0) == 0.0
    u = np.array([0.3, -1.2, 0.8, 2.0])
    for lam in (0.5, 1.0, 2.0):
        assert curvature(u, lam) / lam == pytest.approx(_fd_second_derivative(u, lam), abs=1e-5)


def test_tri_choice():
    assert tri_choice_curvature(1.0, 1.0) == pytest.approx(curvature([1.0, 0.0, -1.0], 1.0), abs=1e-12)
    assert tri_choice_curvature(50.0, 1.0) < 1e-6


def test_fisher_info():
    assert mnl_fisher_info(0.5, 1e-12) < 1e-20
    assert mnl_fisher_info(50.0, 1.0) < 1e-6
    assert mnl_fisher_info(-50.0, 1.0) < 1e-6
    for theta, lam in [(0.5, 1.0), (1.3, 0.7), (-0.4, 2.2)]:
        assert mnl_fisher_info(theta, lam) == pytest.approx(mnl_fisher_info_fd(theta, lam), rel=1e-6)


def test_fisher_info_interior_peak_in_lambda():
    # flat choices at small lam and degenerate ones at large lam both carry no information
    grid = np.geomspace(0.01, 100, 81)
    vals = [mnl_fisher_info(1.0, lam) for lam in grid]
    i = int(np.argmax(vals))
    assert 0 < i < len(grid) - 1
    assert vals[0] < 0.1 * vals[i] and vals[-1] < 0.1 * vals[i]


def test_mc_curvature_table():
    rows = mc_curvature(5, PAPER_GRID, 4000, seed=20240601)
    by = {r.lam: r for r in rows}
    gate = 3 * 0.00433 * math.sqrt(2)
    assert abs(by[0.9].mean - 0.456) <= gate
    assert abs(by[0.3].mean - 0.227) <= gate
    assert max(rows, key=lambda r: r.mean).lam in (0.9, 1.1)
    se = by[0.9].se
    assert by[0.9].mean - by[0.3].mean > 5 * se
    assert by[0.9].mean - by[2.5].mean > 5 * se
    for r in rows:
        assert r.se == pytest.approx(r.sd / math.sqrt(4000))
        assert r.ci_low == pytest.approx(r.mean - 1.96 * r.se)
        assert r.ci_high == pytest.approx(r.mean + 1.96 * r.se)
    assert [r.lam for r in rows] == PAPER_GRID


def test_mc_curvature_deterministic_and_independent_of_grid():
    a = mc_curvature(4, [0.5, 1.0], 100, seed=3)
    b = mc_curvature(4, [1.0], 100, seed=3)
    assert a[1] == b[0]
    with pytest.raises(BpriError):
        mc_curvature(1, [1.0], 10, seed=0)


def test_consideration_sweep_regimes():
    prior = np.array([0.3, 0.4, 0.3])
    u = np.array([[1.0, 0.2, -1.5, 0.5],
                  [0.1, 1.2, -0.8, 0.4],
                  [0.3, 0.0, -1.2, 1.1]])
    # option 2 trails option 0 by at least one utility unit in every state
    assert dominated_options(u) == frozenset({2})
    # BA drifts toward a corner at rate ~ 1 - lam * gap, so the stretch between
    # 1e-7 and 1e-2 would need ~1/lam iterations per point; skip it
    grid = np.concatenate([[1e-12], np.geomspace(0.05, 200, 24)])
    rows = consideration_sweep(prior, u, grid)
    assert rows[0].mutual_info < 1e-9
    assert rows[-1].regime == "deterministic" and rows[-1].max_entry > 0.99
    # record the threshold: the dominated option is out on every grid point from here on
    threshold = min(r.lam for r in rows if 2 not in r.support)
    for r in rows:
        if r.lam >= threshold:
            assert 2 not in r.support
    assert threshold <= 0.05
    assert rows[1].regime == "sparse" and len(rows[1].support) == 1
    assert any(r.regime == "full" for r in rows)


@given(utility_vectors, st.floats(-100, 100), st.floats(0.01, 10))
def test_softmax_translation_invariant(u, c, lam):
    assert np.abs(softmax_channel(u + c, lam) - softmax_channel(u, lam)).max() < 1e-12


@given(utility_vectors, st.floats(0.01, 10))
def test_curvature_nonnegative_and_sums(u, lam):
    p = softmax_channel(u, lam)
    assert abs(p.sum() - 1) < 1e-12
    assert curvature(u, lam) >= 0


@given(st.floats(-20, 20), st.floats(0.01, 10))
def test_tri_choice_matches_generic(theta, lam):
    assert tri_choice_curvature(theta, lam) == pytest.approx(
        curvature([theta, 0.0, -theta], lam), abs=1e-12)


@given(hnp.arrays(float, st.integers(2, 6), elements=st.floats(-2, 2)), st.floats(0.2, 5))
def test_curvature_log_partition_identity(u, lam):
    assert curvature(u, lam) == pytest.approx(lam * _fd_second_derivative(u, lam), abs=1e-5 * max(1, lam))
