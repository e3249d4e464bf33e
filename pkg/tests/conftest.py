"""Pytest configuration and shared fixtures."""
import numpy as np
import pytest

from qsylv.core.config import get_settings
from qsylv.services.numlin import RankPolicy


@pytest.fixture(autouse=True)
def pinned_env(monkeypatch):
    """Pin the QSYLV_* environment for all tests."""
    monkeypatch.setenv("QSYLV_TOL", "1e-10")
    monkeypatch.setenv("QSYLV_RESIDUAL_TOL", "1e-8")
    monkeypatch.setenv("QSYLV_ORACLE_SIZE_CAP", "4096")
    monkeypatch.setenv("QSYLV_CHECK_WORKERS", "1")
    monkeypatch.setenv("QSYLV_LOG_LEVEL", "WARNING")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    """Seeded generator so every run draws the same instances."""
    return np.random.default_rng(20240601)


@pytest.fixture
def policy():
    return RankPolicy(rel_tol=1e-10)
