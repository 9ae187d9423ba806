import pytest

from qbm import derive


@pytest.fixture
def p_over():
    """Overdamped benchmark: lambda1 = 0.8, lambda2 = 0.2, w = 0.6."""
    return derive(1.0, 1.0, 0.16, 1.0)


@pytest.fixture
def p_under():
    return derive(1.0, 0.5, 1.0, 1.0)


@pytest.fixture
def p_crit():
    return derive(1.0, 2.0, 1.0, 1.0)


@pytest.fixture
def pq_over():
    """Overdamped with hbar*beta = 1, so nu = 2*pi."""
    return derive(1.0, 1.0, 0.16, 1.0, hbar=1.0)


@pytest.fixture
def pq_under():
    return derive(1.0, 0.5, 1.0, 1.0, hbar=1.0)


@pytest.fixture
def pq_crit():
    return derive(1.0, 2.0, 1.0, 1.0, hbar=1.0)
