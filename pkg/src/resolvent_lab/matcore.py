"""Dense complex linear algebra with explicit contracts.

Every discretised operator in the package is a square ``complex128`` numpy
array. The kernels delegate to LAPACK through numpy/scipy; this module pins
down ordering, tolerances and failure modes so that the rest of the code
can rely on them.
"""
import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotHermitian, Singular

HERMITIAN_TOL = 1e-10
DIAGONALIZABLE_COND = 1e8
PIVOT_TOL = 1e-12


class HermEigen(NamedTuple):
    values: np.ndarray   # ascending
    vectors: np.ndarray  # orthonormal columns


class SVDResult(NamedTuple):
    singular_values: np.ndarray  # descending
    left: np.ndarray
    right: np.ndarray            # rows are right singular vectors (V*)


class SpectralDecomp(NamedTuple):
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    diagonalizable: bool
    condition: float


def as_cmatrix(A):
    """Validate and convert ``A`` to a square, finite ``complex128`` array."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def adjoint(A):
    return np.conj(np.transpose(A))


def random_unitary(n, rng):
    """Haar-distributed unitary via QR with phase correction."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def herm_eig(A):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    A = as_cmatrix(A)
    scale = max(np.linalg.norm(A), 1e-300)
    asym = np.linalg.norm(A - adjoint(A))
    if asym > HERMITIAN_TOL * scale:
        raise NotHermitian(f"‖A - A*‖ = {asym:.3e} exceeds {HERMITIAN_TOL:g}·‖A‖")
    try:
        values, vectors = np.linalg.eigh(0.5 * (A + adjoint(A)))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"Hermitian eigensolver failed: {exc}") from exc
    return HermEigen(values, vectors)


def herm_eigvals(A):
    return herm_eig(A).values


def svd(A):
    A = as_cmatrix(A)
    try:
        U, s, Vh = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"SVD failed: {exc}") from exc
    return SVDResult(s, U, Vh)


def singular_values(A):
    A = as_cmatrix(A)
    try:
        return np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"SVD failed: {exc}") from exc


def modulus_order(values):
    """Indices sorting by ascending modulus, ties broken by argument in (-π, π]."""
    values = np.asarray(values)
    ang = np.angle(values)
    ang = np.where(ang <= -np.pi, np.pi, ang)
    # round modulus so that numerically equal moduli tie deterministically
    mod = np.abs(values)
    key = np.round(mod / max(mod.max(initial=0.0), 1e-300), 12)
    return np.lexsort((ang, key))


def gen_eig(A, residual_tol=1e-8):
    """Eigenvalues sorted by modulus plus right eigenvectors.

    ``diagonalizable`` is False when the eigenvector matrix has condition
    number above 1e8 or some eigenpair residual exceeds ``residual_tol``
    relative to ‖A‖.
    """
    A = as_cmatrix(A)
    try:
        w, V = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NoConvergence(f"eigensolver failed: {exc}") from exc
    order = modulus_order(w)
    w, V = w[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond):
        cond = np.inf
    scale = max(np.linalg.norm(A, 2), 1e-300)
    resid = np.linalg.norm(A @ V - V * w, axis=0).max() / scale
    diagonalizable = bool(cond <= DIAGONALIZABLE_COND and resid <= residual_tol)
    return SpectralDecomp(w, V, diagonalizable, cond)


def solve(A, b):
    """Solve ``A x = b`` by pivoted LU; raises ``Singular`` on tiny pivots."""
    A = as_cmatrix(A)
    b = np.asarray(b, dtype=np.complex128)
    with warnings.catch_warnings():
        # exact zero pivots are reported below as Singular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    threshold = PIVOT_TOL * np.linalg.norm(A, 1)
    if pivots.min() <= threshold:
        rank = int(np.sum(np.linalg.svd(A, compute_uv=False) > threshold))
        raise Singular(f"matrix is numerically singular (estimated rank {rank})", rank=rank)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def inverse(A):
    A = as_cmatrix(A)
    return solve(A, np.eye(A.shape[0], dtype=np.complex128))


def sqrtm_psd(A, inverse=False):
    """Square root (or inverse square root) of a Hermitian positive matrix."""
    values, vectors = herm_eig(A)
    if inverse:
        values = 1.0 / np.sqrt(values)
    else:
        values = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * values) @ adjoint(vectors)
