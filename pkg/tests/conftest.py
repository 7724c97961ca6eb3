import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def simplex(draw, n=None, min_n=2, max_n=6, strict=False):
    if n is None:
        n = draw(st.integers(min_n, max_n))
    lo = 0.05 if strict else 0.0
    w = draw(hnp.arrays(float, n, elements=st.floats(lo, 1.0)))
    if w.sum() <= 0:
        w = np.ones(n)
    return w / w.sum()


@st.composite
def channel(draw, n_x, n_y, strict=False):
    return np.stack([draw(simplex(n_y, strict=strict)) for _ in range(n_x)])


@st.composite
def problem(draw, max_x=5, max_y=5):
    """(prior, loss) with a strictly positive prior and bounded losses."""
    n_x = draw(st.integers(2, max_x))
    n_y = draw(st.integers(2, max_y))
    prior = draw(simplex(n_x, strict=True))
    loss = draw(hnp.arrays(float, (n_x, n_y), elements=st.floats(0.0, 2.0)))
    return prior, loss


lambdas = st.floats(0.1, 20.0)
