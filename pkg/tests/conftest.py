"""Shared fixtures and random-instance helpers for the test suite."""

import numpy as np
import pytest


def random_stiefel(rng, m: int, r: int) -> np.ndarray:
    """Random column-orthonormal m x r matrix via QR of a Gaussian."""
    A = rng.standard_normal((m, r))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def random_unit(rng, m: int) -> np.ndarray:
    v = rng.standard_normal(m)
    return v / np.linalg.norm(v)


def random_sphere_sample(rng, n: int, m: int) -> np.ndarray:
    Z = rng.standard_normal((n, m))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)
