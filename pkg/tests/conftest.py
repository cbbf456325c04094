import numpy as np
import pytest

from tppca.params import Dataset, DofSpec, ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240215)


def random_params(rng, q=2, d=1, dof=None, sigma2=None):
    """A well-conditioned random parameter set for small-instance tests."""
    W = rng.normal(size=(q, d)) + np.eye(q, d)
    mu = rng.normal(scale=0.5, size=q)
    s2 = float(sigma2 if sigma2 is not None else 0.3 + rng.uniform(0, 0.7))
    return ModelParams(W=W, mu=mu, sigma2=s2, dof=dof or DofSpec.single(3.0))


def toy_dataset(rng, n=50, q=2):
    return Dataset(X=rng.normal(size=(n, q)))
