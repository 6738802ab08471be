import numpy as np
import pytest

from ckkslt import ckks


@pytest.fixture(scope="session")
def toy_params():
    # N=2^10, L+1=5, alpha=5 (beta=1), delta=2^40
    return ckks.CkksParams.make(ring_dim=2**10, levels=5, alpha=5, prime_bits=44)


@pytest.fixture(scope="session")
def small_params():
    return ckks.CkksParams.make(ring_dim=2**8, levels=3, alpha=3, prime_bits=30)


@pytest.fixture(scope="session")
def toy_keys(toy_params):
    rng = np.random.default_rng(1234)
    sk, pk = ckks.keygen(toy_params, rng)
    return sk, pk
