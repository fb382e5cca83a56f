"""Hermitian components, numerical range geometry and singular-value estimates.

Conventions
-----------
* ``s_n`` are singular values in descending order.
* For positive operators with compact inverse (the discretised ``W``) the
  eigenvalues ``λ_n(Re W)`` are ascending; for compact operators such as
  ``Re B`` or ``Re W^{-1}`` they are descending. Each function states which
  pairing it uses; indices in reports are 1-based.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import (
    DomainError,
    FitFailure,
    NotAccretive,
    NotOrthonormal,
    NotSectorial,
    RealPartNotPD,
)
from .matcore import adjoint, as_cmatrix

ACCRETIVE_TOL = 1e-8


def herm_components(A):
    """Return ``(Re A, Im A) = ((A + A*)/2, (A - A*)/2i)``."""
    A = as_cmatrix(A)
    Ah = adjoint(A)
    return 0.5 * (A + Ah), (A - Ah) / 2j


# --------------------------------------------------------------------------
# numerical range
# --------------------------------------------------------------------------

@dataclass
class SectorEstimate:
    theta: float
    accretive: bool

    def to_dict(self):
        return {"theta": self.theta, "accretive": self.accretive}


def _support_points(A, phis):
    """Numerical-range boundary points ``v* A v`` for the top eigenvector of Re(e^{-iφ}A)."""
    phis = np.atleast_1d(phis)
    rot = np.exp(-1j * phis)[:, None, None] * A[None, :, :]
    herm = 0.5 * (rot + np.conj(np.swapaxes(rot, 1, 2)))
    _, vecs = np.linalg.eigh(herm)
    v = vecs[:, :, -1]
    return np.einsum("pi,ij,pj->p", np.conj(v), A, v)


def _abs_arg(z, floor):
    return np.where(np.abs(z) > floor, np.abs(np.angle(z)), 0.0)


def is_accretive(A, tol=ACCRETIVE_TOL):
    H, _ = herm_components(A)
    scale = max(1.0, np.linalg.norm(A, 2))
    return bool(np.linalg.eigvalsh(H)[0] >= -tol * scale)


def sector_angle(A, grid=720, strict=True):
    """Semi-angle of the smallest sector with vertex 0 containing the numerical range.

    The boundary of the range is sampled at ``grid`` rotation angles and the
    best angle is then polished by golden-section search.
    """
    A = as_cmatrix(A)
    if not is_accretive(A):
        if strict:
            raise NotAccretive("real part is not positive semidefinite")
        return SectorEstimate(float("nan"), False)
    floor = 1e-13 * max(np.linalg.norm(A, 2), 1e-300)
    phis = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    vals = _abs_arg(_support_points(A, phis), floor)
    best = int(np.argmax(vals))
    theta = float(vals[best])

    f = lambda phi: float(_abs_arg(_support_points(A, phi), floor)[0])
    step = 2 * np.pi / grid
    lo, hi = phis[best] - step, phis[best] + step
    g = (math.sqrt(5) - 1) / 2
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(60):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    theta = max(theta, fc, fd)
    return SectorEstimate(theta, True)


# --------------------------------------------------------------------------
# sectorial bound: s_{2m-1}(B), s_{2m}(B) <= sqrt(2) sec θ λ_m(Re B)
# --------------------------------------------------------------------------

@dataclass
class Lemma1Result:
    bound_holds: bool
    margin: float
    theta: float
    singular_values: np.ndarray = field(repr=False)
    real_eigenvalues: np.ndarray = field(repr=False)


def lemma1_check(B, theta=None, tol=1e-10):
    B = as_cmatrix(B)
    if theta is None:
        try:
            theta = sector_angle(B).theta
        except NotAccretive as exc:
            raise NotSectorial(str(exc)) from exc
    if not 0.0 <= theta < np.pi / 2:
        raise NotSectorial(f"sector semi-angle {theta} is not below π/2")
    s = matcore.singular_values(B)
    lam = matcore.herm_eigvals(herm_components(B)[0])[::-1]
    n = s.size
    c = math.sqrt(2.0) / math.cos(theta)
    slack = []
    for m in range(1, (n + 1) // 2 + 1):
        rhs = c * lam[m - 1]
        slack.append(rhs - s[2 * m - 2])
        if 2 * m <= n:
            slack.append(rhs - s[2 * m - 1])
    margin = float(min(slack))
    return Lemma1Result(margin >= -tol, margin, float(theta), s, lam)


# --------------------------------------------------------------------------
# factorisation W = H^{1/2}(I + iG)H^{1/2} and the norm conditions
# --------------------------------------------------------------------------

@dataclass
class SectorialFactors:
    H: np.ndarray
    G: np.ndarray
    eigenvalues: np.ndarray   # of H, ascending
    eigenvectors: np.ndarray
    H_half: np.ndarray = field(repr=False)


def factor_sectorial(W):
    W = as_cmatrix(W)
    H, Im = herm_components(W)
    lam, E = matcore.herm_eig(H)
    if lam[0] <= 1e-10 * np.linalg.norm(W, 2):
        raise RealPartNotPD(f"smallest eigenvalue of Re W is {lam[0]:.3e}")
    root = np.sqrt(lam)
    H_half = (E * root) @ adjoint(E)
    H_mhalf = (E / root) @ adjoint(E)
    G = H_mhalf @ Im @ H_mhalf
    G = 0.5 * (G + adjoint(G))
    return SectorialFactors(H, G, lam, E, H_half)


def absolute_norm_7c(W):
    """``(Σ |b_nk|² λ_n / λ_k)^{1/2}`` with b the matrix of G in the eigenbasis of H."""
    f = factor_sectorial(W)
    b = adjoint(f.eigenvectors) @ f.G @ f.eigenvectors
    ratio = f.eigenvalues[:, None] / f.eigenvalues[None, :]
    return float(np.sqrt(np.sum(np.abs(b) ** 2 * ratio)))


@dataclass
class NormCondition:
    value: float
    satisfied: bool

    def to_dict(self):
        return {"value": self.value, "satisfied": self.satisfied}


def norm_condition_12x(W):
    """``Σ_n λ_n^{-2} ‖(Im W) e_n‖²`` over the eigenpairs of Re W; satisfied iff < 1."""
    W = as_cmatrix(W)
    H, Im = herm_components(W)
    lam, E = matcore.herm_eig(H)
    if lam[0] <= 1e-10 * np.linalg.norm(W, 2):
        raise RealPartNotPD(f"smallest eigenvalue of Re W is {lam[0]:.3e}")
    cols = np.linalg.norm(Im @ E, axis=0)
    value = float(np.sum(cols**2 / lam**2))
    return NormCondition(value, value < 1.0)


def semi_angle_from_norm(N_val, eps=1e-6):
    """Sector semi-angle of W² from the absolute norm: arctan(N/(1-N²) + ε)."""
    if not 0.0 <= N_val < 1.0:
        raise DomainError(f"absolute norm must lie in [0, 1), got {N_val}")
    return math.atan(N_val / (1.0 - N_val**2) + eps)


def condition_6d_bound(theta):
    """``(sqrt(cot²θ + 4) - cot θ) / 2``; increases to 1 as θ → π/2."""
    if not 0.0 < theta < np.pi / 2:
        raise DomainError(f"theta must lie in (0, π/2), got {theta}")
    cot = 1.0 / math.tan(theta)
    return 0.5 * (math.sqrt(cot * cot + 4.0) - cot)


def condition_6d_check(W, theta):
    return absolute_norm_7c(W) < condition_6d_bound(theta)


# --------------------------------------------------------------------------
# two-sided equivalences
# --------------------------------------------------------------------------

@dataclass
class RatioReport:
    window: tuple
    ratios: np.ndarray
    rmin: float
    rmax: float
    drift: float
    levels: list = field(default_factory=list)
    lemma2: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "window": [int(self.window[0]), int(self.window[1])],
            "rmin": self.rmin,
            "rmax": self.rmax,
            "drift": self.drift,
        }
        if self.lemma2:
            out["lemma2"] = dict(self.lemma2)
        return out


def _check_window(window, n):
    a, b = int(window[0]), int(window[1])
    if not 1 <= a <= b <= n:
        raise DomainError(f"window [{a}, {b}] is not inside [1, {n}]")
    return a, b


def _drift(levels):
    if len(levels) < 2:
        return 0.0
    first, last = levels[0], levels[-1]
    return float(max(
        abs(last["rmin"] - first["rmin"]) / abs(first["rmin"]),
        abs(last["rmax"] - first["rmax"]) / abs(first["rmax"]),
    ))


def _resolvent_singular_values(W):
    return matcore.singular_values(matcore.inverse(W))


def _real_part_eigs(W):
    H, _ = herm_components(W)
    lam = matcore.herm_eigvals(H)
    if lam[0] <= 1e-10 * np.linalg.norm(W, 2):
        raise RealPartNotPD(f"smallest eigenvalue of Re W is {lam[0]:.3e}")
    return lam


def theorem1_ratio(W_small, W_large, window=(1, 16)):
    """Ratios ``s_n(W^{-1}) λ_n(Re W)`` on a window at two discretisation levels.

    Also reports the one-sided variant ``s_n(W^{-1}) λ_{2n}(Re W)`` where 2n
    is available; its supremum is the empirical constant of the lower estimate.
    """
    mats = [as_cmatrix(W_small), as_cmatrix(W_large)]
    a, b = _check_window(window, mats[0].shape[0] // 2 or 1)
    levels = []
    lemma2_sup = 0.0
    for W in mats:
        s = _resolvent_singular_values(W)
        lam = _real_part_eigs(W)
        r = s[a - 1:b] * lam[a - 1:b]
        idx = np.arange(a, b + 1)
        idx2 = idx[2 * idx <= lam.size]
        r2 = s[idx2 - 1] * lam[2 * idx2 - 1]
        lemma2_sup = max(lemma2_sup, float(np.max(r2)) if r2.size else 0.0)
        levels.append({"N": int(W.shape[0]), "ratios": r, "rmin": float(r.min()),
                       "rmax": float(r.max()), "lemma2_ratios": r2})
    return RatioReport(
        window=(a, b),
        ratios=levels[-1]["ratios"],
        rmin=min(lv["rmin"] for lv in levels),
        rmax=max(lv["rmax"] for lv in levels),
        drift=_drift(levels),
        levels=levels,
        lemma2={"sup": lemma2_sup,
                "inf": float(min(lv["lemma2_ratios"].min() for lv in levels
                                 if lv["lemma2_ratios"].size))},
    )


def real_resolvent_equiv(W, window=(1, 16)):
    """Ratios ``λ_n(Re W^{-1}) λ_n(Re W)`` (descending times ascending)."""
    W = as_cmatrix(W)
    a, b = _check_window(window, W.shape[0])
    lam = _real_part_eigs(W)
    inv_re = matcore.herm_eigvals(herm_components(matcore.inverse(W))[0])[::-1]
    r = inv_re[a - 1:b] * lam[a - 1:b]
    level = {"N": int(W.shape[0]), "ratios": r, "rmin": float(r.min()), "rmax": float(r.max())}
    return RatioReport((a, b), r, level["rmin"], level["rmax"], 0.0, [level])


# --------------------------------------------------------------------------
# classical inequalities
# --------------------------------------------------------------------------

@dataclass
class WeylResult:
    lhs_partials: np.ndarray
    rhs_partials: np.ndarray
    holds: bool


def weyl_imag_inequality(L, p, tol=1e-10):
    """Partial sums of ``|Im λ_m(L)|^p`` against those of ``|λ_m(Im L)|^p``."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    L = as_cmatrix(L)
    lhs = np.sort(np.abs(np.linalg.eigvals(L).imag) ** p)[::-1]
    rhs = np.sort(np.abs(matcore.herm_eigvals(herm_components(L)[1])) ** p)[::-1]
    lp, rp = np.cumsum(lhs), np.cumsum(rhs)
    return WeylResult(lp, rp, bool(np.all(lp <= rp + tol)))


def gk_diagonal_inequality(A, Phi, p, tol=1e-10):
    """``Σ |(A φ_i, φ_i)|^p <= Σ s_i(A)^p`` for an orthonormal system Φ (columns)."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    A = as_cmatrix(A)
    Phi = np.asarray(Phi, dtype=np.complex128)
    gram = adjoint(Phi) @ Phi
    if np.abs(gram - np.eye(Phi.shape[1])).max() > 1e-10:
        raise NotOrthonormal("columns of Phi are not orthonormal to 1e-10")
    diag = np.einsum("ji,jk,ki->i", np.conj(Phi), A, Phi)
    return bool(np.sum(np.abs(diag) ** p) <= np.sum(matcore.singular_values(A) ** p) + tol)


# --------------------------------------------------------------------------
# Schatten index and counting function
# --------------------------------------------------------------------------

@dataclass
class SchattenEstimate:
    mu_hat: float
    inf_p_hat: float
    fit_window: tuple
    residual: float

    def to_dict(self):
        return {"mu_hat": self.mu_hat, "inf_p_hat": self.inf_p_hat,
                "fit_window": list(self.fit_window), "residual": self.residual}


def fit_window(N):
    return max(4, N // 8), N // 2


def schatten_estimate(svals, max_residual=0.1):
    """Fit ``s_n ≈ C n^{-μ}`` on the window [max(4, N/8), N/2]; inf p ≈ 1/μ."""
    s = np.asarray(svals, dtype=float)
    if s.size < 16:
        raise FitFailure(f"need at least 16 singular values, got {s.size}")
    if np.any(s <= 0):
        raise FitFailure("singular values must be positive")
    if np.any(np.diff(s) > 1e-12 * s[0]):
        raise FitFailure("singular values must be in descending order")
    a, b = fit_window(s.size)
    n = np.arange(a, b + 1, dtype=float)
    x, y = np.log(n), np.log(s[a - 1:b])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    if residual > max_residual:
        raise FitFailure(f"power-law fit residual {residual:.3g} exceeds {max_residual}")
    mu = float(-slope)
    if mu <= 0:
        raise FitFailure(f"fitted order {mu:.3g} is not positive")
    return SchattenEstimate(mu, 1.0 / mu, (a, b), residual)


def counting_function(svals, r):
    """Number of inverse singular values strictly below ``r``."""
    s = np.asarray(svals, dtype=float)
    with np.errstate(divide="ignore"):
        return int(np.count_nonzero(1.0 / s < r))


def statement_b_check(W, tau_grid, mu_hat=None):
    """Trend of ``n^τ |λ_n(W^{-1})|`` on the fit window for each τ in ``tau_grid``.

    A non-positive slope is consistent with ``|λ_n(R_W)| = o(n^{-τ})``; at
    finite N this is a diagnostic only.
    """
    W = as_cmatrix(W)
    if mu_hat is None:
        mu_hat = schatten_estimate(_resolvent_singular_values(W)).mu_hat
    mods = np.sort(1.0 / np.abs(np.linalg.eigvals(W)))[::-1]
    a, b = fit_window(mods.size)
    n = np.arange(a, b + 1, dtype=float)
    rows = []
    for tau in tau_grid:
        if not 0.0 < tau < mu_hat:
            raise DomainError(f"tau={tau} must lie in (0, mu_hat={mu_hat:.4g})")
        seq = n**tau * mods[a - 1:b]
        slope = float(np.polyfit(np.log(n), np.log(seq), 1)[0])
        rows.append({"tau": float(tau), "slope": slope, "nonincreasing": slope <= 0.0})
    return {"mu_hat": float(mu_hat), "window": [a, b], "rows": rows}
