import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpri.fixtures import sba_instance
from bpri.gibbs import gibbs_update
from bpri.prob import kl
from bpri.sba import (NoiseModel, StepSchedule, mean_field_check, reference_marginal, sba_run,
                      smoothed_kl)


def test_schedule():
    s = StepSchedule()
    assert s.eta(0) == pytest.approx(1 / 11)
    assert s.eta(89) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        StepSchedule(a=2.0, b=0.0)
    with pytest.raises(ValueError):
        StepSchedule(a=0.0)


def test_single_replacement_step():
    prior, loss = sba_instance()
    traj = sba_run(prior, loss, 2.0, StepSchedule(a=1.0, b=0.0), seed=3, T=1, log_stride=1)
    x = traj.sampled_state[0]
    f, _ = gibbs_update(loss, np.full(3, 1 / 3), 2.0)
    assert np.allclose(traj.final_marginal, f[x], atol=1e-15)


def test_constant_loss_is_stationary():
    traj = sba_run([0.2, 0.8], np.full((2, 3), 4.0), 1.5, seed=0, T=2000, log_stride=50)
    assert np.allclose(traj.iterates, 1 / 3, atol=1e-15)


def test_noiseless_convergence_and_final_channel():
    prior, loss = sba_instance()
    ref = reference_marginal(prior, loss, 2.0)
    traj = sba_run(prior, loss, 2.0, seed=0, T=200_000, reference=ref)
    assert kl(ref, traj.final_marginal) < 1e-3
    f, _ = gibbs_update(loss, traj.final_marginal, 2.0)
    assert np.array_equal(traj.final_channel, f)
    assert traj.kl_series[-1] == pytest.approx(kl(ref, traj.final_marginal), abs=1e-15)


def test_noisy_convergence():
    prior, loss = sba_instance()
    ref = reference_marginal(prior, loss, 2.0)
    traj = sba_run(prior, loss, 2.0, noise=NoiseModel("gaussian", 0.5), seed=0, T=500_000,
                   reference=ref)
    assert kl(ref, traj.final_marginal) < 5e-3


def test_batch_runs_and_csv_rows():
    prior, loss = sba_instance()
    traj = sba_run(prior, loss, 2.0, seed=1, T=1000, log_stride=100, batch=4,
                   reference=reference_marginal(prior, loss, 2.0))
    rows = list(traj.csv_rows())
    assert len(rows) == 10 and rows[0][0] == 100 and rows[-1][0] == 1000


def test_smoothed_kl_needs_reference():
    prior, loss = sba_instance()
    with pytest.raises(ValueError):
        smoothed_kl(sba_run(prior, loss, 2.0, seed=0, T=100, log_stride=10))


def test_mean_field_check():
    prior, loss = sba_instance()
    q = np.array([0.2, 0.3, 0.5])
    assert mean_field_check(prior, loss, 2.0, q, n_samples=None) == pytest.approx(0.0, abs=1e-15)
    assert mean_field_check([1.0, 0.0, 0.0], loss, 2.0, q, n_samples=7) == pytest.approx(0.0, abs=1e-15)
    assert mean_field_check(np.full(3, 1 / 3), loss, 2.0, q, n_samples=10_000, seed=5) < 0.02


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.floats(0.0, 1.0), st.integers(1, 3))
def test_iterates_on_simplex_and_seed_determinism(seed, sigma, batch):
    prior, loss = sba_instance()
    noise = NoiseModel("gaussian", sigma)
    a = sba_run(prior, loss, 2.0, noise=noise, seed=seed, T=500, log_stride=10, batch=batch)
    b = sba_run(prior, loss, 2.0, noise=noise, seed=seed, T=500, log_stride=10, batch=batch)
    assert np.array_equal(a.iterates, b.iterates)
    assert np.all(a.iterates >= 0)
    assert np.abs(a.iterates.sum(axis=1) - 1).max() < 1e-12
