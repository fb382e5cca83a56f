"""Seeded random matrix ensembles used by the property suites.

Every generator takes a ``numpy.random.Generator``; suites derive one per
trial from ``seed + trial_index`` so any single trial can be replayed.
"""
import numpy as np

from .matcore import adjoint, random_unitary, sqrtm_psd


def trial_rng(seed, index):
    return np.random.default_rng(seed + index)


def complex_gaussian(n, rng, m=None):
    m = n if m is None else m
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)


def random_hermitian(n, rng):
    X = complex_gaussian(n, rng)
    return 0.5 * (X + adjoint(X))


def random_pd(n, rng, floor=1e-2):
    X = complex_gaussian(n, rng)
    return X @ adjoint(X) / n + floor * np.eye(n)


def random_sectorial(n, rng, g_norm=1.0):
    """``H^{1/2}(I + iG)H^{1/2}`` with H positive definite and ‖G‖ = g_norm.

    The numerical range lies in the sector |arg z| <= arctan(g_norm).
    """
    H = random_pd(n, rng)
    G = random_hermitian(n, rng)
    G *= g_norm / np.linalg.norm(G, 2)
    root = sqrtm_psd(H)
    return root @ (np.eye(n) + 1j * G) @ root


def random_pd_real_part(n, rng):
    """``H + iS`` with H positive definite and S Hermitian of comparable size."""
    return random_pd(n, rng) + 1j * random_hermitian(n, rng)


def random_orthonormal(n, rng):
    return random_unitary(n, rng)
