import numpy as np
import pytest

from chaincompress import build_chain, random_reversible_chain, symmetrize

K3_RATES = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
P2_RATES = np.array([[0.0, 1.0], [2.0, 0.0]])


@pytest.fixture(scope="session")
def k3_chain():
    """Complete graph on 3 states, all off-diagonal rates one."""
    return build_chain(K3_RATES)


@pytest.fixture(scope="session")
def p2_chain():
    """Two-state chain with rates 1 (0 -> 1) and 2 (1 -> 0)."""
    return build_chain(P2_RATES)


@pytest.fixture(scope="session")
def k3_lap(k3_chain):
    return symmetrize(k3_chain)


@pytest.fixture(scope="session")
def p2_lap(p2_chain):
    return symmetrize(p2_chain)


@pytest.fixture(scope="session")
def chain_factory():
    """Reproducible random chains; also hands back a random proper subset."""

    def make(seed, n=None, subset_size=None):
        rng = np.random.default_rng(seed)
        if n is None:
            n = int(rng.integers(6, 40))
        chain = random_reversible_chain(n, seed=seed)
        if subset_size is None:
            subset_size = int(rng.integers(1, max(2, n // 2)))
        subset = tuple(sorted(rng.choice(n, size=subset_size, replace=False)))
        return chain, subset

    return make
