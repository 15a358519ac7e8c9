import numpy as np
import pytest

from scalevar import Path, make_grid, sample


def ulps_apart(x, y) -> float:
    """Distance between two complex values in units of the larger one's spacing."""
    x = complex(x)
    y = complex(y)
    scale = max(abs(x), abs(y), np.finfo(float).tiny)
    return abs(x - y) / float(np.spacing(scale))


def dyadic_complex(rng, shape):
    """Complex samples on a dyadic lattice: k * 2^-15 per component, |k| <= 2^15.

    Sums, differences, small rational scalings and divisions by powers of two
    stay exact in binary64, so algebraic operator identities hold bitwise.
    """
    re = rng.integers(-(2**15), 2**15 + 1, size=shape) * 2.0**-15
    im = rng.integers(-(2**15), 2**15 + 1, size=shape) * 2.0**-15
    return re + 1j * im


def dyadic_sampled_path(rng, n_nodes=9, dim=1, h=2.0**-6):
    """Sampled path on a dyadic grid, values on the dyadic lattice."""
    n = n_nodes - 1
    grid = make_grid(0.0, n * h, n, 0.0)
    values = dyadic_complex(rng, (n_nodes, dim))
    return Path.from_samples(grid, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def sampled(fn, grid, dim=1, label="", vectorized=True):
    return sample(Path.from_callable(fn, dim=dim, vectorized=vectorized, label=label), grid)
