import numpy as np
import pytest

from mvdlm import ModelSpec, Priors


@pytest.fixture
def scalar_spec():
    """p = d = 1 local level with delta = 0.5, beta = 0.9."""
    return ModelSpec(
        p=1,
        d=1,
        design=[1.0],
        evolution=[[1.0]],
        state_discounts=[0.5],
        vol_discounts=[0.9],
    )


@pytest.fixture
def scalar_priors():
    return Priors(m0=[[0.0]], P0=[[1.0]], S0=[[1.0]])


def local_level(p, delta, beta, p0=0.01, s0_scale=1.0, n0=1.0):
    """Convenience builder: d = 1 random-walk level model."""
    spec = ModelSpec(
        p=p,
        d=1,
        design=[1.0],
        evolution=[[1.0]],
        state_discounts=[delta],
        vol_discounts=np.atleast_1d(beta),
    )
    priors = Priors(
        m0=np.zeros((1, p)),
        P0=[[p0]],
        S0=s0_scale * np.eye(p),
        n0=n0,
    )
    return spec, priors
