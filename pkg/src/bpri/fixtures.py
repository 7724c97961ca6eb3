"""Small named problem instances shared by the checks, the CLI and the tests."""
import numpy as np

from .dynamic import FiniteMdp
from .rng import stream


def binary_hamming():
    """Fair coin reported under Hamming loss: prior, loss."""
    return np.array([0.5, 0.5]), 1.0 - np.eye(2)


def binary_entropy_bits(d):
    d = np.clip(np.asarray(d, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(d * np.log2(d) + (1 - d) * np.log2(1 - d))
    return np.nan_to_num(h, nan=0.0)


def random_instance(seed: int, index: int, n_x: int = 4, n_y: int = 6):
    """Dirichlet(1) prior and U[0, 1] losses from substream ``index``."""
    rng = stream(seed, index)
    return rng.dirichlet(np.ones(n_x)), rng.uniform(0.0, 1.0, (n_x, n_y))


def sba_instance(seed: int = 0):
    """3x3 instance with an interior fixed point at lambda = 2.

    Zero loss for the matching report and U(1, 3) losses elsewhere keep every
    report in the optimal support, which the stochastic scheme needs.
    """
    rng = np.random.default_rng(seed)
    prior = rng.dirichlet(np.full(3, 3.0))
    loss = (1.0 - np.eye(3)) * rng.uniform(1.0, 3.0, (3, 3))
    return prior, loss


def mdp_3x2(horizon: int = 5, discount: float = 0.9) -> FiniteMdp:
    transition = np.array([
        [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]],
        [[0.3, 0.5, 0.2], [0.2, 0.2, 0.6]],
        [[0.5, 0.25, 0.25], [0.1, 0.1, 0.8]],
    ])
    stage_loss = np.array([[1.0, 0.4], [0.2, 1.5], [0.8, 0.7]])
    return FiniteMdp(transition, stage_loss, np.array([0.0, 0.5, 1.0]), np.full(3, 1 / 3),
                     discount=discount, horizon=horizon)


def absorbing_mdp(stage_loss, initial) -> FiniteMdp:
    """Every state stays put whatever the action; zero terminal loss."""
    stage_loss = np.asarray(stage_loss, dtype=float)
    s, a = stage_loss.shape
    return FiniteMdp(np.tile(np.eye(s)[:, None, :], (1, a, 1)), stage_loss, None, initial)


def single_state_mdp(stage_loss, discount: float = 0.9) -> FiniteMdp:
    stage_loss = np.asarray(stage_loss, dtype=float).reshape(1, -1)
    return FiniteMdp(np.ones((1, stage_loss.shape[1], 1)), stage_loss, None, [1.0],
                     discount=discount)


PROBLEM_FIXTURES = {"binary-hamming": binary_hamming, "sba-3x3": sba_instance}
MDP_FIXTURES = {"mdp-3x2": mdp_3x2}
