"""Galerkin matrices of the model operators on (0, π).

All operators are expressed in the orthonormal Dirichlet sine basis
``e_n(x) = sqrt(2/π) sin(n x)``, n = 1..N. The Laplacian -f'' is diagonal
there; Riemann-Liouville derivatives produce dense real matrices whose
entries are computed by Gauss-Jacobi product rules.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, gammaln

from .errors import DomainError, QuadratureFailure
from .matcore import as_cmatrix
from .quadrature import adaptive_gauss, jacobi_rule

KINDS = ("dirichlet_laplacian", "rl_perturbed", "power_diagonal")
SIDES = ("left", "right")
INTERVAL = (0.0, math.pi)


@dataclass(frozen=True)
class OperatorSpec:
    kind: str = "rl_perturbed"
    N: int = 32
    alpha_rl: float = 0.25
    xi: float = 0.2
    k: int = 1
    side: str = "left"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N}")
        if self.side not in SIDES:
            raise DomainError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.kind == "rl_perturbed":
            if not 0.0 < self.alpha_rl < 0.5:
                raise DomainError(
                    f"alpha_rl must lie in (0, 1/2) for rl_perturbed, got {self.alpha_rl}"
                )
            if self.xi < 0:
                raise DomainError(f"xi must be >= 0, got {self.xi}")
        if self.kind == "power_diagonal" and (int(self.k) != self.k or self.k < 1):
            raise DomainError(f"k must be a positive integer, got {self.k}")


def assemble(spec):
    """Build the matrix described by an :class:`OperatorSpec`."""
    if spec.kind == "dirichlet_laplacian":
        return assemble_dirichlet_laplacian(spec.N)
    if spec.kind == "power_diagonal":
        return power_diagonal(spec.N, spec.k)
    return assemble_perturbed(spec)


def assemble_dirichlet_laplacian(N):
    """-f'' on (0, π) with Dirichlet conditions: diag(1, 4, ..., N²)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    n = np.arange(1, N + 1, dtype=float)
    return np.diag(n**2).astype(np.complex128)


def power_diagonal(N, k):
    """diag(n^{2k}), the model for eigenvalue growth of an order-2k operator."""
    if N < 1 or k < 1:
        raise DomainError("N and k must be >= 1")
    if 2 * k * math.log(N) >= math.log(np.finfo(float).max):
        raise OverflowError(f"N^(2k) = {N}^{2 * k} is not representable as a float")
    n = np.arange(1, N + 1, dtype=float)
    return np.diag(n ** (2 * k)).astype(np.complex128)


def xi_threshold(alpha):
    """Largest coupling for which the tail bound keeps the norm-condition sum below one.

    ``sqrt(6 (1 - 2α)) Γ(1 - α) / π^(3/2 - α)``.
    """
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    return math.sqrt(6.0 * (1.0 - 2.0 * alpha)) * math.gamma(1.0 - alpha) / math.pi ** (1.5 - alpha)


def column_norm_bound(alpha, n):
    """Minkowski bound on ‖D^α e_n‖ for the orthonormal sine basis."""
    n = np.asarray(n, dtype=float)
    return (
        math.sqrt(2.0 / math.pi) * n * math.pi ** (0.5 - alpha)
        / (math.sqrt(1.0 - 2.0 * alpha) * math.gamma(1.0 - alpha))
    )


# --------------------------------------------------------------------------
# Riemann-Liouville integrals and derivatives of general functions
# --------------------------------------------------------------------------

def rl_frac_integral(alpha, f, x, side="left", a=INTERVAL[0], b=INTERVAL[1], tol=1e-10):
    """Fractional integral ``I^α_{a+} f(x)`` (or ``I^α_{b-}`` for side='right').

    The substitution ``u = |x - t|**α`` turns the weakly singular kernel into
    the constant ``1/Γ(α+1)``::

        I^α_{a+} f(x) = 1/Γ(α+1) ∫_0^{(x-a)^α} f(x - u^{1/α}) du

    ``f`` must accept numpy arrays.
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if side == "left":
        span = x - a
        g = lambda u: f(x - u ** (1.0 / alpha))
    elif side == "right":
        span = b - x
        g = lambda u: f(x + u ** (1.0 / alpha))
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    if span < 0:
        raise DomainError(f"x={x} lies outside [{a}, {b}]")
    upper = span**alpha
    value, _ = adaptive_gauss(g, 0.0, upper, tol=tol * math.gamma(alpha + 1.0))
    return value / math.gamma(alpha + 1.0)


def _richardson_central(F, x, h):
    d1 = (F(x + h) - F(x - h)) / (2 * h)
    d2 = (F(x + h / 2) - F(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def rl_frac_derivative(alpha, side, f, x, h=1e-5, a=INTERVAL[0], b=INTERVAL[1], tol=1e-12):
    """Riemann-Liouville derivative of order ``0 < α < 1``.

    ``D^α_{a+} f = d/dx I^{1-α}_{a+} f`` and ``D^α_{b-} f = -d/dx I^{1-α}_{b-} f``;
    the outer derivative is a central difference with one Richardson step.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if side == "left":
        if x - h <= a:
            raise DomainError(f"x={x} is too close to the singular endpoint a={a}")
        sign = 1.0
    elif side == "right":
        if x + h >= b:
            raise DomainError(f"x={x} is too close to the singular endpoint b={b}")
        sign = -1.0
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    F = lambda y: rl_frac_integral(1.0 - alpha, f, y, side=side, a=a, b=b, tol=tol)
    return sign * _richardson_central(F, x, h)


# --------------------------------------------------------------------------
# Galerkin assembly in the sine basis
# --------------------------------------------------------------------------

def default_order(N):
    """Gauss-Jacobi order resolving sin(nx)sin(kx), n, k <= N, on (0, π)."""
    return max(64, 2 * N + 64)


def _basis_derivative_profile(alpha, N, x, order):
    """``h_k(x)`` with ``D^α_{0+} e_k(x) = x^{1-α} h_k(x)`` for k = 1..N.

    Uses ``D^α_{0+} e_k = I^{1-α}_{0+} e_k'`` (valid because e_k(0) = 0) and a
    Gauss-Jacobi rule carrying the weight ``τ^{-α}`` of the inner integral.
    """
    beta = 1.0 - alpha
    y, w = jacobi_rule(order, 0.0, 1.0, beta - 1.0)
    # t = x - τ with τ = x·y, so the inner integral is x^β ∫_0^1 e_k'(x(1-y)) y^{β-1} dy
    T = np.outer(x, 1.0 - y)
    k = np.arange(1, N + 1)
    out = np.empty((x.size, N))
    c = math.sqrt(2.0 / math.pi) / gamma(beta)
    for j, kk in enumerate(k):
        out[:, j] = c * kk * (np.cos(kk * T) @ w)
    return out


def basis_frac_derivative(alpha, side, N, x, order=None):
    """Values ``(D^α e_k)(x)`` for k = 1..N at the points ``x`` (shape len(x) × N)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = order or default_order(N)
    beta = 1.0 - alpha
    if side == "left":
        return x[:, None] ** beta * _basis_derivative_profile(alpha, N, x, order)
    # D_{π-} = R D_{0+} R with (Rf)(x) = f(π - x) and R e_k = (-1)^{k+1} e_k
    sgn = (-1.0) ** np.arange(N)
    r = math.pi - x
    return r[:, None] ** beta * _basis_derivative_profile(alpha, N, r, order) * sgn


def assemble_rl_galerkin(alpha, side, N, order=None):
    """Matrix ``K[n, k] = (D^α e_k, e_n)`` of a Riemann-Liouville derivative.

    The outer inner product uses a Gauss-Jacobi rule with weight
    ``x^{1-α}`` (or ``(π-x)^{1-α}`` for the right-sided operator), matching
    the algebraic behaviour of ``D^α e_k`` at the singular end.
    """
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    if side not in SIDES:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    if N < 1:
        raise DomainError("N must be >= 1")
    order = order or default_order(N)
    beta = 1.0 - alpha
    n = np.arange(1, N + 1)
    c = math.sqrt(2.0 / math.pi)
    if side == "left":
        x, w = jacobi_rule(order, 0.0, math.pi, beta)
        prof = _basis_derivative_profile(alpha, N, x, order)
        E = c * np.sin(np.outer(x, n))
    else:
        # weight (π - x)^β; nodes generated in r = π - x
        r, w = jacobi_rule(order, 0.0, math.pi, beta)
        x = math.pi - r
        prof = _basis_derivative_profile(alpha, N, r, order) * (-1.0) ** np.arange(N)
        E = c * np.sin(np.outer(x, n))
    K = (E * w[:, None]).T @ prof
    if not np.all(np.isfinite(K)):
        raise QuadratureFailure("non-finite Galerkin entries")
    return K.astype(np.complex128)


def assemble_perturbed(spec):
    """W = diag(n²) + ξ·K for ``-f'' + ξ D^α f`` in the sine basis."""
    if spec.kind != "rl_perturbed":
        raise DomainError(f"assemble_perturbed needs kind='rl_perturbed', got {spec.kind!r}")
    W = assemble_dirichlet_laplacian(spec.N)
    if spec.xi == 0:
        return W
    return W + spec.xi * assemble_rl_galerkin(spec.alpha_rl, spec.side, spec.N)


# --------------------------------------------------------------------------
# Multi-index series for the Kipriyanov example
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KipriyanovParams:
    n: int
    k: int
    Lmax: int

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.Lmax < 2:
            raise DomainError("need n >= 1, k >= 1, Lmax >= 2")

    @property
    def regime_ok(self):
        return self.n / 2 + 1 < 2 * self.k < self.n


@dataclass
class KipriyanovSeries:
    partial_sum: float
    tail_bound: float
    regime_ok: bool
    params: KipriyanovParams = field(repr=False, default=None)


_CHUNK = 4_000_000


def _series_sum(n, k, L):
    l = np.arange(1, L + 1, dtype=float)
    log_safe = 4 * k * math.log(L) + math.log(n) < 600
    if log_safe:
        a, b = l**2, l ** (2 * k)

        def total(A, B):
            return float(np.sum(A / (B * B)))
    else:
        a, b = l**2, 2 * k * np.log(l)

        def total(A, logB):
            return float(np.sum(np.exp(np.log(A) - 2.0 * logB)))

    combine_b = np.add if log_safe else np.logaddexp
    # fold trailing coordinates into flat arrays while they stay small
    folds = max(1, min(n, int(math.log(_CHUNK) / math.log(L))))
    A = np.zeros(1)
    B = np.zeros(1) if log_safe else np.full(1, -np.inf)
    for _ in range(folds):
        A = (A[:, None] + a[None, :]).ravel()
        B = combine_b(B[:, None], b[None, :]).ravel()
    outer = n - folds
    if outer == 0:
        return total(A, B)
    s = 0.0
    for idx in np.ndindex(*(L,) * outer):
        A0 = sum(a[i] for i in idx)
        if log_safe:
            B0 = sum(b[i] for i in idx)
        else:
            B0 = np.logaddexp.reduce([b[i] for i in idx])
        s += total(A + A0, combine_b(B, B0))
    return s


def psi_tail_bound(n, k, Lmax):
    """Integral-comparison bound for ``Σ_{j > Lmax^n} 1 / (n (j^{1/n} - 1)^q)``.

    With q = 2(2k - 1) and j = (z + 1)^n the comparison integral becomes
    ``∫_{Lmax-1}^∞ (z+1)^{n-1} z^{-q} dz``, finite iff q > n.
    """
    q = 2 * (2 * k - 1)
    if q <= n:
        return math.inf
    z0 = Lmax - 1.0
    log_z0 = math.log(z0)
    total = 0.0
    for i in range(n):
        log_c = gammaln(n) - gammaln(i + 1) - gammaln(n - i)
        total += math.exp(log_c + (i - q + 1) * log_z0) / (q - i - 1)
    return total


def kipriyanov_series(params):
    """Partial sum of ``Σ (Σ l_j²) / (Σ l_j^{2k})²`` over the box ``l_j <= Lmax``."""
    partial = _series_sum(params.n, params.k, params.Lmax)
    return KipriyanovSeries(
        partial_sum=partial,
        tail_bound=psi_tail_bound(params.n, params.k, params.Lmax),
        regime_ok=params.regime_ok,
        params=params,
    )


def psi(l, k):
    """``ψ(l) = (Σ l_j^{2k})² / Σ l_j²`` for an array of multi-indices (last axis)."""
    l = np.asarray(l, dtype=float)
    return np.sum(l ** (2 * k), axis=-1) ** 2 / np.sum(l**2, axis=-1)


def psi_sandwich(n, k, t_values):
    """Check ``n (t-1)^q <= ψ(l) <= n t^q`` on the cube vertices ``l ∈ {t-1, t}^n``.

    Here q = 2(2k - 1) and ``s = t^n`` is the count of indices with all
    components at most t. Returns the smallest relative slack over both sides.
    """
    q = 2 * (2 * k - 1)
    corners = np.array(list(np.ndindex(*(2,) * n)), dtype=float)
    worst = math.inf
    for t in t_values:
        vals = psi(t - 1 + corners, k)
        lower = n * (t - 1.0) ** q
        upper = n * float(t) ** q
        worst = min(worst, float(np.min((vals - lower) / upper)), float(np.min((upper - vals) / upper)))
    return worst


# --------------------------------------------------------------------------
# Matrix interchange
# --------------------------------------------------------------------------

def matrix_to_dict(A):
    A = as_cmatrix(A)
    return {"n": int(A.shape[0]), "re": A.real.tolist(), "im": A.imag.tolist()}


def matrix_from_dict(data):
    try:
        n = int(data["n"])
        A = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if A.shape != (n, n):
        raise ValueError(f"matrix JSON declares n={n} but holds shape {A.shape}")
    return as_cmatrix(A)


def save_matrix(A, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_dict(A), fh)


def load_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return matrix_from_dict(json.load(fh))
