"""Abel-Lidskii series for the discretised operator W.

With ``B = W^{-1}`` the grouped projections are::

    P_ν(t) = 1/(2πi) ∮_ν exp(-λ^a t) B (I - λB)^{-1} dλ,

and ``B (I - λB)^{-1} = (W - λI)^{-1}``, so only W is ever factorised. The
contour is traversed so that ``P_ν(0)`` is the Riesz projector onto the
group (positive projector; the textbook counter-clockwise orientation of
the integrand above would produce its negative).

Two exponents are kept apart throughout: ``alpha_rl`` is the spatial
Riemann-Liouville order of the operator (see ``opfactory``) and ``alpha``
here is the series exponent, i.e. the inverse order of the time derivative
``𝔇^{1/α}_-``.
"""
import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matcore, speclab
from .errors import (
    BranchCutCrossing,
    DecayTooSlow,
    DomainError,
    EnclosureFailure,
    NotAccretive,
    NotDiagonalizable,
    QuadratureNotConverged,
    SchattenGateWarning,
    SectorViolation,
)
from .matcore import as_cmatrix
from .quadrature import adaptive_gauss


@dataclass(frozen=True)
class Group:
    indices: tuple       # 0-based positions in the modulus-sorted spectrum
    center: complex
    radius: float


@dataclass
class GroupingPlan:
    boundaries: list     # N_0 = 0 < N_1 < ... = total eigenvalue count
    centers: list
    radii: list
    strategy: dict = field(default_factory=dict)

    @property
    def groups(self):
        return [
            Group(tuple(range(self.boundaries[v], self.boundaries[v + 1])),
                  self.centers[v], self.radii[v])
            for v in range(len(self.boundaries) - 1)
        ]

    def __len__(self):
        return len(self.boundaries) - 1

    def to_dict(self):
        return {
            "boundaries": list(self.boundaries),
            "centers": [[c.real, c.imag] for c in self.centers],
            "radii": list(self.radii),
            "strategy": dict(self.strategy),
        }


@dataclass(frozen=True)
class ContourSpec:
    type: str = "circle_per_group"
    r: float = None
    theta: float = None
    eps: float = None

    def __post_init__(self):
        if self.type not in ("circle_per_group", "global_sector"):
            raise DomainError(f"unknown contour type {self.type!r}")
        if self.type == "global_sector":
            if self.r is None or self.theta is None or self.eps is None:
                raise DomainError("global_sector needs r, theta and eps")
            if not self.theta + self.eps < np.pi / 2:
                raise DomainError("global_sector needs theta + eps < π/2")


def sector_contour_points(spec, R, m=200):
    """Sample the contour {|λ| = r, |arg λ| <= θ+ε} ∪ {|λ| > r, |arg λ| = θ+ε} up to |λ| = R.

    Diagnostic only: finite-dimensional sums use the per-group circles.
    """
    phi = spec.theta + spec.eps
    ray = np.geomspace(spec.r, R, m)
    arc = spec.r * np.exp(1j * np.linspace(phi, -phi, m))
    return np.concatenate([ray[::-1] * np.exp(1j * phi), arc, ray * np.exp(-1j * phi)])


# --------------------------------------------------------------------------
# grouping
# --------------------------------------------------------------------------

def _circle_for(eigs, members, right_half_plane, center):
    inside = eigs[list(members)]
    others = np.delete(eigs, list(members))
    spread = float(np.abs(inside - center).max())
    dist = float(np.abs(others - center).min()) if others.size else math.inf
    if math.isinf(dist):
        dist = max(4.0 * spread, abs(center))
    radius = max(1.5 * spread, 0.4 * dist)
    radius = min(radius, dist / 1.1)
    if right_half_plane:
        radius = min(radius, 0.9 * center.real)
    ok = (
        radius > 0
        and spread <= 0.95 * radius
        and (not others.size or float(np.abs(others - center).min()) - radius >= 0.1 * radius)
    )
    return radius, ok


def _isolate(eigs, lo, hi, right_half_plane):
    """Circles for eigenvalues lo..hi-1, halving the block when no circle isolates it."""
    inside = eigs[lo:hi]
    box_mid = complex(0.5 * (inside.real.min() + inside.real.max()),
                      0.5 * (inside.imag.min() + inside.imag.max()))
    for center in (complex(inside.mean()), box_mid):
        radius, ok = _circle_for(eigs, range(lo, hi), right_half_plane, center)
        if ok:
            return [(lo, center, radius)]
    if hi - lo == 1:
        raise EnclosureFailure(f"no isolating circle for eigenvalue {lo + 1}")
    mid = (lo + hi) // 2
    return _isolate(eigs, lo, mid, right_half_plane) + _isolate(eigs, mid, hi, right_half_plane)


def group_eigenvalues(decomp, gap_rel=0.1, max_group=8, right_half_plane=True):
    """Bracket the modulus-ordered spectrum into groups with isolating circles.

    A new group starts when the relative modulus gap reaches ``gap_rel`` or
    the current group holds ``max_group`` eigenvalues. Circles are centred at
    the group mean with radius max(1.5·spread, 0.4·distance to the nearest
    outside eigenvalue), clamped so outside eigenvalues stay at least 0.1·r
    away and, when ``right_half_plane``, the circle avoids Re λ <= 0. A group
    that no such circle isolates is retried about its bounding-box centre and
    then split in half.
    """
    eigs = np.asarray(decomp.eigenvalues)
    mods = np.abs(eigs)
    bounds = [0]
    for j in range(1, eigs.size):
        size = j - bounds[-1]
        gap = (mods[j] - mods[j - 1]) / mods[j - 1] if mods[j - 1] > 0 else math.inf
        if gap >= gap_rel or size >= max_group:
            bounds.append(j)
    bounds.append(eigs.size)
    pieces = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        pieces += _isolate(eigs, lo, hi, right_half_plane)
    plan = GroupingPlan([p[0] for p in pieces] + [eigs.size],
                        [p[1] for p in pieces], [p[2] for p in pieces],
                        {"name": "modulus_gap", "gap_rel": gap_rel, "max_group": max_group})
    verify_enclosure(plan, eigs)
    return plan


def singleton_plan(decomp, right_half_plane=True):
    return group_eigenvalues(decomp, gap_rel=0.0, max_group=1, right_half_plane=right_half_plane)


def winding_numbers(center, radius, points, m=4096):
    """Winding number of the circle about each point, by summing argument increments."""
    z = center + radius * np.exp(2j * np.pi * np.arange(m + 1) / m)
    pts = np.atleast_1d(points)
    rel = z[None, :] - pts[:, None]
    steps = np.angle(rel[:, 1:] / rel[:, :-1])
    return np.rint(steps.sum(axis=1) / (2 * np.pi)).astype(int)


def verify_enclosure(plan, eigs):
    for v, g in enumerate(plan.groups):
        wn = winding_numbers(g.center, g.radius, eigs)
        expected = np.zeros(len(eigs), dtype=int)
        expected[list(g.indices)] = 1
        if not np.array_equal(wn, expected):
            raise EnclosureFailure(f"contour of group {v} does not enclose exactly its eigenvalues")


# --------------------------------------------------------------------------
# projections
# --------------------------------------------------------------------------

def _sector_theta(W, theta):
    if theta is not None:
        return theta
    try:
        return speclab.sector_angle(W).theta
    except NotAccretive as exc:
        raise SectorViolation("numerical range leaves the closed right half-plane") from exc


def _check_sector(alpha, theta):
    if alpha * theta >= np.pi / 2:
        raise SectorViolation(f"alpha·theta = {alpha * theta:.4g} >= π/2; exp(-λ^α t) would not decay")


def mode_factors(eigenvalues, alpha, t):
    """``exp(-λ^α t)`` with the principal branch of λ^α."""
    lam = np.asarray(eigenvalues, dtype=np.complex128)
    return np.exp(-np.power(lam, alpha) * t)


def _diagonal_form(W, decomp):
    decomp = decomp or matcore.gen_eig(W)
    if not decomp.diagonalizable:
        raise NotDiagonalizable(
            f"eigenvector condition {decomp.condition:.3g} exceeds the residue threshold"
        )
    V = decomp.right_vectors
    return decomp, V, matcore.inverse(V)


def projection_residue(W, group, alpha, t, decomp=None, theta=None):
    """``Σ_{j ∈ group} exp(-λ_j^α t) v_j w_j*`` with biorthogonal w_j* = rows of V^{-1}."""
    W = as_cmatrix(W)
    _check_sector(alpha, _sector_theta(W, theta))
    decomp, V, Vinv = _diagonal_form(W, decomp)
    idx = list(group.indices if isinstance(group, Group) else group)
    f = mode_factors(decomp.eigenvalues[idx], alpha, t)
    return (V[:, idx] * f) @ Vinv[idx, :]


def _contour_sum(W, group, fn, M, rhs=None):
    """Trapezoidal sums of (1/2πi)∮ fn(λ)(λI - W)^{-1} on the group circle at M and 2M nodes."""
    n = W.shape[0]
    c, r = group.center, group.radius
    phis = 2 * np.pi * np.arange(2 * M) / (2 * M)
    z = c + r * np.exp(1j * phis)
    weights = fn(z) * r * np.exp(1j * phis)
    if not np.all(np.isfinite(weights)):
        raise QuadratureNotConverged("integrand overflows on the contour")
    B = np.eye(n, dtype=np.complex128) if rhs is None else np.asarray(rhs, dtype=np.complex128)
    # the distance check in _check_contour keeps every shifted matrix well away from singular
    shifted = z[:, None, None] * np.eye(n) - W[None, :, :]
    B2 = B if B.ndim == 2 else B[:, None]
    terms = np.linalg.solve(shifted, np.broadcast_to(B2, (z.size,) + B2.shape))
    if B.ndim == 1:
        terms = terms[..., 0]
    terms *= weights.reshape((-1,) + (1,) * (terms.ndim - 1))
    coarse = terms[::2].sum(axis=0) / M
    fine = terms.sum(axis=0) / (2 * M)
    return fine, coarse


def _check_contour(W, group):
    c, r = group.center, group.radius
    if c.real - r <= 0:
        raise BranchCutCrossing("contour reaches Re λ <= 0, where λ^α has its branch cut")
    eigs = np.linalg.eigvals(W)
    gap = np.abs(np.abs(eigs - c) - r).min()
    if gap < 0.05 * r:
        raise QuadratureNotConverged(f"contour passes within {gap:.3g} of the spectrum (radius {r:.3g})")


def contour_apply(W, group, fn, M=256, rhs=None, tol=1e-8, max_nodes=8192):
    """Apply ``(1/2πi)∮ fn(λ)(λI - W)^{-1} dλ`` to ``rhs`` (identity when None).

    M is doubled until the M/2M trapezoidal results agree to ``tol``
    (scaled by max(1, ‖result‖)). Returns ``(value, info)``.
    """
    W = as_cmatrix(W)
    _check_contour(W, group)
    while True:
        fine, coarse = _contour_sum(W, group, fn, M, rhs)
        delta = float(np.abs(fine - coarse).max())
        scale = max(1.0, float(np.abs(fine).max()))
        if delta < tol * scale:
            return fine, {"M": 2 * M, "richardson_delta": delta}
        M *= 2
        if 2 * M > max_nodes:
            raise QuadratureNotConverged(
                f"contour quadrature change {delta:.3g} after {M} nodes exceeds {tol:g}"
            )


def projection_quadrature(W, group, alpha, t, M=256, theta=None, full_output=False):
    """Contour-quadrature version of :func:`projection_residue`; works for Jordan blocks."""
    W = as_cmatrix(W)
    _check_sector(alpha, _sector_theta(W, theta))
    P, info = contour_apply(W, group, lambda z: mode_factors(z, alpha, t), M=M)
    return (P, info) if full_output else P


# --------------------------------------------------------------------------
# series, basis property and the Cauchy problem
# --------------------------------------------------------------------------

@dataclass
class AbelSum:
    u: np.ndarray
    terms: np.ndarray        # one row per group: P_ν h
    tail_norms: np.ndarray   # ‖P_ν h‖
    method: str

    @property
    def partial_sums(self):
        return np.cumsum(self.terms, axis=0)


def _plan_for(W, decomp, plan):
    if plan is not None:
        return plan
    return group_eigenvalues(decomp)


def abel_sum(W, alpha, t, h, plan=None, decomp=None, theta=None, method="auto", M=256):
    """``u = Σ_ν P_ν(t) h`` in increasing ν; exact for finite matrices.

    ``method`` is 'residue', 'quadrature' or 'auto' (residue when the
    eigenvector matrix is well conditioned).
    """
    W = as_cmatrix(W)
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    h = np.asarray(h, dtype=np.complex128)
    _check_sector(alpha, _sector_theta(W, theta))
    decomp = decomp or matcore.gen_eig(W)
    plan = _plan_for(W, decomp, plan)
    if method == "auto":
        method = "residue" if decomp.diagonalizable else "quadrature"
    if method == "residue":
        _, V, Vinv = _diagonal_form(W, decomp)
        coef = Vinv @ h
        f = mode_factors(decomp.eigenvalues, alpha, t)
        terms = np.stack([V[:, list(g.indices)] @ (f[list(g.indices)] * coef[list(g.indices)])
                          for g in plan.groups])
    elif method == "quadrature":
        fn = lambda z: mode_factors(z, alpha, t)
        terms = np.stack([contour_apply(W, g, fn, M=M, rhs=h)[0] for g in plan.groups])
    else:
        raise DomainError(f"unknown method {method!r}")
    return AbelSum(terms.sum(axis=0), terms, np.linalg.norm(terms, axis=1), method)


def basis_property_check(W, alpha, h, t_seq, plan=None, decomp=None, theta=None):
    """``‖S(t)h - h‖`` along ``t_seq`` where S(t) = Σ_ν P_ν(t)."""
    W = as_cmatrix(W)
    theta = _sector_theta(W, theta)
    decomp = decomp or matcore.gen_eig(W)
    h = np.asarray(h, dtype=np.complex128)
    return np.array([
        np.linalg.norm(abel_sum(W, alpha, t, h, plan=plan, decomp=decomp, theta=theta).u - h)
        for t in t_seq
    ])


@dataclass
class EvolutionResult:
    times: np.ndarray
    u: np.ndarray              # (T, N) full sums
    partial_sums: np.ndarray   # (T, G, N) cumulative over ν
    tail_norms: np.ndarray     # (T, G)
    residuals: np.ndarray      # (T,)
    alpha: float
    plan: GroupingPlan = None
    gate: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "times": self.times.tolist(),
            "u": {"re": self.u.real.tolist(), "im": self.u.imag.tolist()},
            "tail_norms": self.tail_norms.tolist(),
            "residuals": self.residuals.tolist(),
            "plan": self.plan.to_dict() if self.plan else None,
            "gate": dict(self.gate),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "nu_max", "component_index", "re_u", "im_u", "tail_norm", "residual"])
        g17 = lambda v: format(float(v), ".17g")
        for i, t in enumerate(self.times):
            for nu in range(self.partial_sums.shape[1]):
                for comp, val in enumerate(self.partial_sums[i, nu]):
                    w.writerow([g17(t), nu, comp, g17(val.real), g17(val.imag),
                                g17(self.tail_norms[i, nu]), g17(self.residuals[i])])
        return buf.getvalue()


def schatten_gate(W, alpha):
    """Compare the fitted Schatten exponent of W^{-1} with the series exponent."""
    s = matcore.singular_values(matcore.inverse(W))
    if s.size < 16:
        return {"evaluated": False, "reason": "fewer than 16 singular values"}
    est = speclab.schatten_estimate(s)
    return {"evaluated": True, "inf_p_hat": est.inf_p_hat, "alpha": alpha,
            "ok": bool(est.inf_p_hat < alpha)}


def solve_cauchy(W, alpha, h, times, plan=None, theta=None, check_gate=True):
    """Solve ``𝔇^{1/α}_- u = W u``, ``u(0) = h`` by the grouped series.

    Residuals use the mode identity ``𝔇^{1/α}_- e^{-λ^α t} = λ e^{-λ^α t}``:
    ``‖Σ λ_j e^{-λ_j^α t} c_j v_j - W u(t)‖``.
    """
    W = as_cmatrix(W)
    if alpha <= 1:
        raise DomainError(f"series exponent alpha must exceed 1, got {alpha}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("times must be positive and strictly increasing")
    h = np.asarray(h, dtype=np.complex128)
    theta = _sector_theta(W, theta)
    decomp = matcore.gen_eig(W)
    plan = _plan_for(W, decomp, plan)
    gate = schatten_gate(W, alpha) if check_gate else {"evaluated": False}
    if gate.get("evaluated") and not gate["ok"]:
        warnings.warn(
            f"fitted inf p = {gate['inf_p_hat']:.4g} is not below alpha = {alpha}",
            SchattenGateWarning, stacklevel=2,
        )
    us, partials, tails, resid = [], [], [], []
    for t in times:
        res = abel_sum(W, alpha, t, h, plan=plan, decomp=decomp, theta=theta)
        us.append(res.u)
        partials.append(res.partial_sums)
        tails.append(res.tail_norms)
        if res.method == "residue":
            _, V, Vinv = _diagonal_form(W, decomp)
            lam = decomp.eigenvalues
            mode = V @ (lam * mode_factors(lam, alpha, t) * (Vinv @ h))
        else:
            fn = lambda z: z * mode_factors(z, alpha, t)
            mode = sum(contour_apply(W, g, fn, rhs=h)[0] for g in plan.groups)
        resid.append(np.linalg.norm(mode - W @ res.u))
    return EvolutionResult(times, np.array(us), np.array(partials), np.array(tails),
                           np.array(resid), float(alpha), plan, gate)


# --------------------------------------------------------------------------
# the time derivative 𝔇^{1/α}_-
# --------------------------------------------------------------------------

def _truncation_point(f, s, gamma_, rel=1e-14, x_max=1e3):
    peak = abs(f(np.array([s]))[0])
    x = 1.0 / 64
    while x <= x_max:
        probe = np.array([x, 1.5 * x, 2.0 * x])
        vals = np.abs(f(s + probe)) * probe ** (-gamma_)
        peak = max(peak, float(np.abs(f(s + np.array([0.5 * x]))).max()))
        if np.all(vals < rel * max(peak, 1e-300)):
            return x, peak
        x *= 2.0
    raise DecayTooSlow(f"integrand has not decayed below {rel:g} of its peak by x = {x_max:g}")


def frac_deriv_minus(f, alpha_inv, t, h=1e-3, tol=1e-13):
    """``𝔇^{γ}_- f(t) = -1/Γ(1-γ) d/dt ∫_0^∞ f(t+x) x^{-γ} dx`` with γ = alpha_inv ∈ (0, 1).

    The substitution ``x = u^{1/(1-γ)}`` removes the kernel singularity; the
    outer derivative is a Richardson-extrapolated central difference.
    """
    if not 0.0 < alpha_inv < 1.0:
        raise DomainError(f"alpha_inv must lie in (0, 1), got {alpha_inv}")
    g = alpha_inv
    X, peak = _truncation_point(f, t - h, g)
    U = X ** (1.0 - g)
    p = 1.0 / (1.0 - g)
    scale = max(peak, 1e-300)

    def J(s):
        val, _ = adaptive_gauss(lambda u: f(s + u**p), 0.0, U, tol=tol * scale * max(U, 1.0))
        return val / (1.0 - g)

    d1 = (J(t + h) - J(t - h)) / (2 * h)
    d2 = (J(t + h / 2) - J(t - h / 2)) / h
    return -((4 * d2 - d1) / 3) / math.gamma(1.0 - g)
