"""Declarative experiments: config parsing, execution and report assembly.

A config is a JSON object. ``experiment`` names one experiment, a list of
them, or ``"all"``; every other field is optional::

    {
      "experiment": "theorem1",
      "operator": {"kind": "rl_perturbed", "alpha_rl": 0.25, "xi": 0.2},
      "levels": [64, 128],
      "window": [1, 16],
      "seed": 42
    }

Each experiment returns a list of checks (name, value, bound, tolerance,
verdict) and CSV tables. Randomness comes from ``seed + trial_index`` only,
so a report is a pure function of the config and the seed.
"""
import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ensembles, lidskii, matcore, opfactory, speclab
from .errors import ConfigError, DomainError, LabError, SchattenGateWarning

EXPERIMENTS = (
    "spectrum",
    "lemma1",
    "norm-condition",
    "theorem1",
    "schatten",
    "evolve",
    "kipriyanov-series",
    "property-suite",
)

DEFAULT_TOLERANCES = {
    "lemma1_slack": 1e-10,
    "norm_identity_rel": 1e-8,
    "xi_threshold_target": 0.5075,
    "xi_threshold_abs": 5e-4,
    "condition_12x_max": 0.16,
    "ratio_low": 0.5,
    "ratio_high": 2.0,
    "drift_max": 0.1,
    "mu_operator_target": 2.0,
    "mu_abs": 0.05,
    "inf_p_target": 0.5,
    "inf_p_abs": 0.02,
    "mu_power_target": 4.0,
    "inequality_tol": 1e-10,
    "partition_tol": 1e-8,
    "projector_tol": 1e-9,
    "residue_quadrature_tol": 1e-8,
    "grouping_tol": 1e-9,
    "semigroup_tol": 1e-9,
    "residual_max": 1e-8,
    "mode_identity_tol": 1e-6,
    "kipriyanov_rel_change": 0.05,
    "basel_rel": 0.01,
    "sandwich_slack": -1e-12,
}

TRIAL_KEYS = {"lemma1", "norm_identity", "inequalities", "lidskii"}

# matrix size used when the config leaves operator.N unset
DEFAULT_N = {"spectrum": 32, "norm-condition": 64, "schatten": 128, "evolve": 32}

CONFIG_FIELDS = {
    "experiment", "operator", "alpha_series", "times", "window", "levels",
    "seed", "output_dir", "tolerances", "trials",
}


@dataclass
class ExperimentConfig:
    experiments: list
    operator: dict = field(default_factory=dict)
    alpha_series: float = 4.0
    times: list = field(default_factory=lambda: [0.1, 0.5, 1.0])
    window: tuple = (1, 16)
    levels: tuple = (64, 128)
    seed: int = 42
    output_dir: str = "results"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    trials: dict = field(default_factory=dict)

    def trial_count(self, name, default):
        return int(self.trials.get(name, default))

    def operator_spec(self, N=None, **overrides):
        params = dict(self.operator)
        if N is not None and "N" not in params:
            params["N"] = N
        params.update(overrides)
        return _build_operator(params)

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["levels"] = list(self.levels)
        # where the files go is not part of the result
        del d["output_dir"]
        return d


def _build_operator(params):
    allowed = {"kind", "N", "alpha_rl", "xi", "k", "side"}
    for key in params:
        if key not in allowed:
            raise ConfigError(f"unknown operator field {key!r}", field=f"operator.{key}")
    try:
        return opfactory.OperatorSpec(**params)
    except DomainError as exc:
        # OperatorSpec messages start with the offending field name
        name = str(exc).split()[0]
        raise ConfigError(str(exc), field=f"operator.{name}") from exc
    except TypeError as exc:
        raise ConfigError(str(exc), field="operator") from exc


def _number(value, name, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = ok and int(value) == value
    if not ok or not math.isfinite(value):
        kind = "an integer" if integer else "a finite number"
        raise ConfigError(f"{name} must be {kind}, got {value!r}", field=name)
    return int(value) if integer else float(value)


def parse_config(data, seed=None, output_dir=None):
    """Validate a decoded config object and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    for key in data:
        if key not in CONFIG_FIELDS:
            raise ConfigError(f"unknown config field {key!r}", field=key)
    if "experiment" not in data:
        raise ConfigError("missing required field 'experiment'", field="experiment")
    exp = data["experiment"]
    names = list(EXPERIMENTS) if exp == "all" else ([exp] if isinstance(exp, str) else exp)
    if not isinstance(names, list) or not names:
        raise ConfigError("experiment must be a name, a non-empty list or 'all'", field="experiment")
    for name in names:
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}",
                              field="experiment")
    cfg = ExperimentConfig(experiments=names)

    operator = data.get("operator", {})
    if not isinstance(operator, dict):
        raise ConfigError("operator must be an object", field="operator")
    _build_operator({"N": 32, **operator})
    cfg.operator = dict(operator)

    if "alpha_series" in data:
        cfg.alpha_series = _number(data["alpha_series"], "alpha_series")
        if cfg.alpha_series <= 1:
            raise ConfigError(f"alpha_series must exceed 1, got {cfg.alpha_series}",
                              field="alpha_series")
    if "times" in data:
        times = data["times"]
        if not isinstance(times, list) or not times:
            raise ConfigError("times must be a non-empty list", field="times")
        times = [_number(t, "times") for t in times]
        if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("times must be positive and strictly increasing", field="times")
        cfg.times = times
    if "window" in data:
        w = data["window"]
        if not isinstance(w, list) or len(w) != 2:
            raise ConfigError("window must be a pair [lo, hi]", field="window")
        lo, hi = (_number(v, "window", integer=True) for v in w)
        if not 1 <= lo <= hi:
            raise ConfigError(f"window must satisfy 1 <= lo <= hi, got {w}", field="window")
        cfg.window = (lo, hi)
    if "levels" in data:
        lv = data["levels"]
        if not isinstance(lv, list) or len(lv) != 2:
            raise ConfigError("levels must be a pair [N_small, N_large]", field="levels")
        a, b = (_number(v, "levels", integer=True) for v in lv)
        if not 2 <= a < b:
            raise ConfigError(f"levels must satisfy 2 <= N_small < N_large, got {lv}", field="levels")
        cfg.levels = (a, b)
    if "trials" in data:
        if not isinstance(data["trials"], dict):
            raise ConfigError("trials must be an object", field="trials")
        for key, val in data["trials"].items():
            if key not in TRIAL_KEYS:
                raise ConfigError(f"unknown trial count {key!r}", field=f"trials.{key}")
            if _number(val, f"trials.{key}", integer=True) < 1:
                raise ConfigError("trial counts must be positive", field=f"trials.{key}")
        cfg.trials = dict(data["trials"])
    if "tolerances" in data:
        tol = data["tolerances"]
        if not isinstance(tol, dict):
            raise ConfigError("tolerances must be an object", field="tolerances")
        for key, val in tol.items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}", field=f"tolerances.{key}")
            cfg.tolerances[key] = _number(val, f"tolerances.{key}")
    cfg.seed = _number(data.get("seed", 42) if seed is None else seed, "seed", integer=True)
    out = data.get("output_dir", "results") if output_dir is None else output_dir
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string", field="output_dir")
    cfg.output_dir = out
    return cfg


def load_config(path, seed=None, output_dir=None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", field="<root>") from exc
    return parse_config(data, seed=seed, output_dir=output_dir)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def thread_count():
    raw = os.environ.get("RESOLVENT_LAB_THREADS")
    if raw is None:
        return max(1, min(8, os.cpu_count() or 1))
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"RESOLVENT_LAB_THREADS must be an integer, got {raw!r}",
                          field="RESOLVENT_LAB_THREADS") from exc
    return max(1, n)


def ordered_map(fn, items):
    """Map in parallel (capped by RESOLVENT_LAB_THREADS) and return results in input order."""
    items = list(items)
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def check(name, value, passed, bound=None, tolerance=None, claim=""):
    return {
        "name": name,
        "claim": claim,
        "value": value,
        "bound": bound,
        "tolerance": tolerance,
        "passed": bool(passed),
    }


def within(value, target, tol):
    return abs(value - target) <= tol


class Table:
    """A CSV table with floats written to 17 significant digits."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        self.rows.append(row)

    @staticmethod
    def _cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".17g")
        return str(v)

    def render(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([self._cell(v) for v in row])
        return buf.getvalue()


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def run_spectrum(cfg):
    spec = cfg.operator_spec(N=DEFAULT_N["spectrum"])
    W = opfactory.assemble(spec)
    decomp = matcore.gen_eig(W)
    re_eigs = matcore.herm_eigvals(speclab.herm_components(W)[0])
    svals = matcore.singular_values(matcore.inverse(W))
    table = Table(["index", "re_lambda", "im_lambda", "modulus", "re_part_eig", "s_inverse"])
    for i in range(spec.N):
        lam = decomp.eigenvalues[i]
        table.add(i + 1, lam.real, lam.imag, abs(lam), re_eigs[i], svals[i])
    sector = speclab.sector_angle(W, strict=False)
    checks = [
        check("spectrum_real_part_pd", float(re_eigs[0]), re_eigs[0] > 0, bound=0.0,
              claim="Re W is positive definite"),
        check("spectrum_right_half_plane", float(decomp.eigenvalues.real.min()),
              decomp.eigenvalues.real.min() > 0, bound=0.0,
              claim="eigenvalues lie in the open right half-plane"),
        check("spectrum_diagonalizable", decomp.condition, decomp.diagonalizable,
              bound=matcore.DIAGONALIZABLE_COND, claim="eigenvector matrix is well conditioned"),
        check("spectrum_sector_angle", sector.theta, sector.accretive and sector.theta < np.pi / 2,
              bound=np.pi / 2, claim="numerical range lies in a sector of semi-angle < π/2"),
    ]
    return checks, {"spectrum": table}, {"N": spec.N}


def run_lemma1(cfg):
    trials = cfg.trial_count("lemma1", 200)
    tol = cfg.tolerances["lemma1_slack"]

    def one(i):
        rng = ensembles.trial_rng(cfg.seed, i)
        n = int(rng.integers(2, 17))
        B = ensembles.random_sectorial(n, rng, g_norm=float(rng.uniform(0.1, 3.0)))
        res = speclab.lemma1_check(B, tol=tol)
        return n, res

    results = ordered_map(one, range(trials))
    table = Table(["trial", "n", "theta", "margin", "holds"])
    for i, (n, r) in enumerate(results):
        table.add(i, n, r.theta, r.margin, r.bound_holds)
    worst = min(r.margin for _, r in results)
    checks = [
        check("lemma1_holds", worst, all(r.bound_holds for _, r in results), bound=0.0,
              tolerance=tol, claim="s_{2m-1}, s_{2m} <= √2 secθ λ_m(Re B)"),
    ]
    return checks, {"lemma1": table}, {"trials": trials}


def run_norm_condition(cfg):
    tol = cfg.tolerances
    trials = cfg.trial_count("norm_identity", 100)

    def one(i):
        rng = ensembles.trial_rng(cfg.seed, i)
        n = int(rng.integers(2, 17))
        W = ensembles.random_pd_real_part(n, rng)
        a = speclab.absolute_norm_7c(W) ** 2
        b = speclab.norm_condition_12x(W).value
        return n, a, b, abs(a - b) / max(abs(b), 1e-300)

    rows = ordered_map(one, range(trials))
    table = Table(["trial", "n", "absolute_norm_sq", "condition_value", "rel_diff"])
    for i, row in enumerate(rows):
        table.add(i, *row)
    worst = max(r[3] for r in rows)

    spec = cfg.operator_spec(N=DEFAULT_N["norm-condition"])
    W = opfactory.assemble(spec)
    cond = speclab.norm_condition_12x(W)
    alpha_rl = spec.alpha_rl
    xi_star = opfactory.xi_threshold(0.25)
    xi_own = opfactory.xi_threshold(alpha_rl)
    checks = [
        check("norm_identity", worst, worst <= tol["norm_identity_rel"],
              tolerance=tol["norm_identity_rel"],
              claim="absolute norm squared equals the norm-condition sum"),
        check("xi_threshold", xi_star,
              within(xi_star, tol["xi_threshold_target"], tol["xi_threshold_abs"]),
              bound=tol["xi_threshold_target"], tolerance=tol["xi_threshold_abs"],
              claim="ξ threshold at alpha_rl = 1/4"),
        check("xi_below_threshold", spec.xi, spec.xi < xi_own, bound=xi_own,
              claim=f"ξ lies below the threshold for alpha_rl = {alpha_rl}"),
        check("condition_12x", cond.value,
              cond.satisfied and cond.value < tol["condition_12x_max"],
              bound=tol["condition_12x_max"],
              claim=f"norm-condition sum for L at N = {spec.N}, ξ = {spec.xi}"),
    ]
    extra = {"N": spec.N, "xi": spec.xi, "alpha_rl": alpha_rl, "condition_satisfied": cond.satisfied}
    return checks, {"norm_condition": table}, extra


def run_theorem1(cfg):
    tol = cfg.tolerances
    small, large = cfg.levels
    W_small = opfactory.assemble(_build_operator({**cfg.operator, "N": small}))
    W_large = opfactory.assemble(_build_operator({**cfg.operator, "N": large}))
    rep = speclab.theorem1_ratio(W_small, W_large, window=cfg.window)
    table = Table(["N", "n", "ratio"])
    for level in rep.levels:
        for j, r in enumerate(level["ratios"]):
            table.add(level["N"], cfg.window[0] + j, r)
    in_band = tol["ratio_low"] <= rep.rmin and rep.rmax <= tol["ratio_high"]
    checks = [
        check("theorem1_ratio_band", [rep.rmin, rep.rmax], in_band,
              bound=[tol["ratio_low"], tol["ratio_high"]],
              claim="s_n(W^{-1}) λ_n(Re W) stays in a fixed band"),
        check("theorem1_drift", rep.drift, rep.drift < tol["drift_max"], bound=tol["drift_max"],
              claim=f"extreme-ratio drift between N = {small} and N = {large}"),
    ]
    return checks, {"theorem1": table}, {"levels": [small, large], "lemma2": rep.lemma2}


def run_schatten(cfg):
    tol = cfg.tolerances
    spec = cfg.operator_spec(N=DEFAULT_N["schatten"])
    W = opfactory.assemble(spec)
    s_op = matcore.singular_values(matcore.inverse(W))
    est_op = speclab.schatten_estimate(s_op)
    # inf p = 1/μ is only claimed under the norm condition; otherwise it is reported, not asserted
    cond = speclab.norm_condition_12x(W) if spec.kind == "rl_perturbed" else None
    asserted = cond is None or cond.satisfied
    s_pow = matcore.singular_values(matcore.inverse(opfactory.power_diagonal(spec.N, 2)))
    est_pow = speclab.schatten_estimate(s_pow)
    table = Table(["n", "s_operator_inverse", "s_power_diagonal_inverse"])
    for i in range(spec.N):
        table.add(i + 1, s_op[i], s_pow[i])
    checks = [
        check("schatten_mu_operator", est_op.mu_hat,
              within(est_op.mu_hat, tol["mu_operator_target"], tol["mu_abs"]),
              bound=tol["mu_operator_target"], tolerance=tol["mu_abs"],
              claim="singular values of W^{-1} decay like n^{-2}"),
        check("schatten_inf_p", est_op.inf_p_hat,
              within(est_op.inf_p_hat, tol["inf_p_target"], tol["inf_p_abs"]) or not asserted,
              bound=tol["inf_p_target"], tolerance=tol["inf_p_abs"],
              claim="convergence exponent inf p = 1/2"),
        check("schatten_mu_power_diagonal", est_pow.mu_hat,
              within(est_pow.mu_hat, tol["mu_power_target"], tol["mu_abs"]),
              bound=tol["mu_power_target"], tolerance=tol["mu_abs"],
              claim="diag(n^4) has order 4"),
    ]
    extra = {"operator": est_op.to_dict(), "power_diagonal": est_pow.to_dict(), "N": spec.N,
             "inf_p_asserted": asserted, "two_over_mu": 2.0 / est_op.mu_hat}
    if cond is not None:
        extra["condition_12x"] = cond.to_dict()
    return checks, {"schatten": table}, extra


def mode_identity_grid(lams=(1.0, 2.0, 4.0), alphas=(1.5, 2.0, 4.0), times=(0.5, 1.0)):
    rows = []
    for lam in lams:
        for a in alphas:
            for t in times:
                f = lambda s, lam=lam, a=a: np.exp(-(lam**a) * s)
                got = lidskii.frac_deriv_minus(f, 1.0 / a, t)
                want = lam * math.exp(-(lam**a) * t)
                rows.append((lam, a, t, got, want, abs(got - want)))
    return rows


def run_evolve(cfg):
    tol = cfg.tolerances
    spec = cfg.operator_spec(N=DEFAULT_N["evolve"])
    W = opfactory.assemble(spec)
    rng = ensembles.trial_rng(cfg.seed, 0)
    h = ensembles.complex_gaussian(spec.N, rng, 1)[:, 0]
    h /= np.linalg.norm(h)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SchattenGateWarning)
        res = lidskii.solve_cauchy(W, cfg.alpha_series, h, cfg.times)
    t_seq = [1e-1, 1e-2, 1e-3, 1e-4]
    errs = lidskii.basis_property_check(W, cfg.alpha_series, h, t_seq, plan=res.plan)
    modes = mode_identity_grid()
    mode_table = Table(["lambda", "alpha", "t", "computed", "exact", "abs_err"])
    for row in modes:
        mode_table.add(*row)
    basis_table = Table(["t", "error"])
    for t, e in zip(t_seq, errs):
        basis_table.add(t, e)
    worst_mode = max(r[-1] for r in modes)
    checks = [
        check("evolve_residual", float(res.residuals.max()),
              res.residuals.max() < tol["residual_max"], bound=tol["residual_max"],
              claim="solution satisfies the fractional Cauchy problem mode-wise"),
        check("evolve_basis_property", [float(e) for e in errs],
              bool(np.all(np.diff(errs) < 0)),
              claim="‖S(t)h - h‖ strictly decreases as t → 0"),
        check("evolve_mode_identity", worst_mode, worst_mode < tol["mode_identity_tol"],
              bound=tol["mode_identity_tol"],
              claim="time derivative maps exp(-λ^α t) to λ exp(-λ^α t)"),
    ]
    extra = {
        "N": spec.N, "alpha_series": cfg.alpha_series, "groups": len(res.plan),
        "schatten_gate": res.gate, "gate_warnings": [str(w.message) for w in caught],
    }
    tables = {"evolve": res.to_csv(), "evolve_modes": mode_table, "evolve_basis": basis_table}
    return checks, tables, extra


def run_kipriyanov(cfg):
    tol = cfg.tolerances
    s20 = opfactory.kipriyanov_series(opfactory.KipriyanovParams(5, 2, 20))
    s40 = opfactory.kipriyanov_series(opfactory.KipriyanovParams(5, 2, 40))
    change = abs(s40.partial_sum - s20.partial_sum) / abs(s40.partial_sum)
    basel = opfactory.kipriyanov_series(opfactory.KipriyanovParams(1, 1, 1000))
    basel_rel = abs(basel.partial_sum - math.pi**2 / 6) / (math.pi**2 / 6)
    slack = opfactory.psi_sandwich(5, 2, range(2, 21))
    table = Table(["n", "k", "Lmax", "partial_sum", "tail_bound", "regime_ok"])
    for s in (s20, s40, basel):
        p = s.params
        table.add(p.n, p.k, p.Lmax, s.partial_sum, s.tail_bound, s.regime_ok)
    checks = [
        check("kipriyanov_partial_sum_stability", change, change < tol["kipriyanov_rel_change"],
              bound=tol["kipriyanov_rel_change"],
              claim="n=5, k=2 partial sums at Lmax = 20 and 40 agree"),
        check("kipriyanov_psi_sandwich", slack, slack >= tol["sandwich_slack"], bound=0.0,
              claim="n (t-1)^q <= ψ(l) <= n t^q on sampled multi-indices"),
        check("kipriyanov_basel", basel_rel, basel_rel < tol["basel_rel"], bound=tol["basel_rel"],
              claim="n=1, k=1 partial sum approaches π²/6"),
    ]
    return checks, {"kipriyanov": table}, {"regime_ok_n5_k2": s20.regime_ok}


def _weyl_trial(seed, i):
    rng = ensembles.trial_rng(seed, i)
    n = int(rng.integers(2, 13))
    L = ensembles.complex_gaussian(n, rng)
    return n, {p: speclab.weyl_imag_inequality(L, p).holds for p in (1, 2, 3)}


def _gk_trial(seed, i):
    rng = ensembles.trial_rng(seed, i)
    n = int(rng.integers(2, 13))
    m = int(rng.integers(1, n + 1))
    A = ensembles.complex_gaussian(n, rng)
    Phi = ensembles.random_orthonormal(n, rng)[:, :m]
    return n, {p: speclab.gk_diagonal_inequality(A, Phi, p) for p in (1, 2, 3)}


def lidskii_trial(seed, i, alpha=1.5, t=0.3, s=0.2):
    """Abel-Lidskii algebra on one random diagonalizable sectorial matrix.

    Returns the worst error of each identity on this trial.
    """
    rng = ensembles.trial_rng(seed, i)
    n = int(rng.integers(3, 13))
    while True:
        W = ensembles.random_sectorial(n, rng, g_norm=0.5)
        decomp = matcore.gen_eig(W)
        if decomp.diagonalizable:
            break
    theta = speclab.sector_angle(W).theta
    plan = lidskii.group_eigenvalues(decomp, gap_rel=0.3, max_group=4)
    singles = lidskii.singleton_plan(decomp)
    Q = [lidskii.projection_residue(W, g, alpha, 0.0, decomp=decomp, theta=theta) for g in plan.groups]
    eye = np.eye(n)
    partition = float(np.abs(sum(Q) - eye).max())
    proj = 0.0
    for a, Qa in enumerate(Q):
        proj = max(proj, float(np.abs(Qa @ Qa - Qa).max()))
        for b, Qb in enumerate(Q):
            if a != b:
                proj = max(proj, float(np.abs(Qa @ Qb).max()))
    quad = 0.0
    for g in plan.groups:
        P_res = lidskii.projection_residue(W, g, alpha, t, decomp=decomp, theta=theta)
        P_quad = lidskii.projection_quadrature(W, g, alpha, t, theta=theta)
        quad = max(quad, float(np.abs(P_res - P_quad).max()) / max(1.0, float(np.abs(P_res).max())))
    h = ensembles.complex_gaussian(n, rng, 1)[:, 0]
    u_group = lidskii.abel_sum(W, alpha, t, h, plan=plan, decomp=decomp, theta=theta).u
    u_single = lidskii.abel_sum(W, alpha, t, h, plan=singles, decomp=decomp, theta=theta).u
    grouping = float(np.abs(u_group - u_single).max())
    S = lambda tau: sum(lidskii.projection_residue(W, g, alpha, tau, decomp=decomp, theta=theta)
                        for g in plan.groups)
    semigroup = float(np.abs(S(t + s) - S(t) @ S(s)).max())
    return {"n": n, "groups": len(plan), "partition": partition, "projector": proj,
            "residue_quadrature": quad, "grouping": grouping, "semigroup": semigroup}


def run_property_suite(cfg):
    tol = cfg.tolerances
    n_ineq = cfg.trial_count("inequalities", 200)
    n_lid = cfg.trial_count("lidskii", 100)
    weyl = ordered_map(lambda i: _weyl_trial(cfg.seed, i), range(n_ineq))
    gk = ordered_map(lambda i: _gk_trial(cfg.seed + 100_000, i), range(n_ineq))
    lid = ordered_map(lambda i: lidskii_trial(cfg.seed + 200_000, i), range(n_lid))

    ineq_table = Table(["suite", "trial", "n", "p1", "p2", "p3"])
    for name, rows in (("weyl", weyl), ("gohberg_krein", gk)):
        for i, (n, holds) in enumerate(rows):
            ineq_table.add(name, i, n, holds[1], holds[2], holds[3])
    lid_table = Table(["trial", "n", "groups", "partition", "projector", "residue_quadrature",
                       "grouping", "semigroup"])
    for i, r in enumerate(lid):
        lid_table.add(i, r["n"], r["groups"], r["partition"], r["projector"],
                      r["residue_quadrature"], r["grouping"], r["semigroup"])

    def violations(rows):
        return sum(1 for _, holds in rows for ok in holds.values() if not ok)

    def worst(key):
        return max(r[key] for r in lid)

    checks = [
        check("weyl_violations", violations(weyl), violations(weyl) == 0, bound=0,
              tolerance=tol["inequality_tol"],
              claim="Σ|Im λ_m|^p <= Σ|λ_m(Im L)|^p, p = 1, 2, 3"),
        check("gohberg_krein_violations", violations(gk), violations(gk) == 0, bound=0,
              tolerance=tol["inequality_tol"],
              claim="Σ|(Aφ_i, φ_i)|^p <= Σ s_i(A)^p, p = 1, 2, 3"),
    ]
    for key, tkey, claim in (
        ("partition", "partition_tol", "Σ_ν P_ν(0) = I"),
        ("projector", "projector_tol", "Q_ν² = Q_ν and Q_ν Q_μ = 0"),
        ("residue_quadrature", "residue_quadrature_tol", "residue and contour quadrature agree"),
        ("grouping", "grouping_tol", "abel_sum does not depend on the grouping"),
        ("semigroup", "semigroup_tol", "S(t+s) = S(t) S(s)"),
    ):
        value = worst(key)
        checks.append(check(f"lidskii_{key}", value, value <= tol[tkey], bound=tol[tkey], claim=claim))
    tables = {"property_inequalities": ineq_table, "property_lidskii": lid_table}
    return checks, tables, {"inequality_trials": n_ineq, "lidskii_trials": n_lid}


RUNNERS = {
    "spectrum": run_spectrum,
    "lemma1": run_lemma1,
    "norm-condition": run_norm_condition,
    "theorem1": run_theorem1,
    "schatten": run_schatten,
    "evolve": run_evolve,
    "kipriyanov-series": run_kipriyanov,
    "property-suite": run_property_suite,
}

KNOWN_CHECKS = {
    "spectrum_real_part_pd", "spectrum_right_half_plane", "spectrum_diagonalizable",
    "spectrum_sector_angle", "lemma1_holds", "norm_identity", "xi_threshold",
    "xi_below_threshold", "condition_12x",
    "theorem1_ratio_band", "theorem1_drift", "schatten_mu_operator", "schatten_inf_p",
    "schatten_mu_power_diagonal", "evolve_residual", "evolve_basis_property",
    "evolve_mode_identity", "kipriyanov_partial_sum_stability", "kipriyanov_psi_sandwich",
    "kipriyanov_basel", "weyl_violations", "gohberg_krein_violations", "lidskii_partition",
    "lidskii_projector", "lidskii_residue_quadrature", "lidskii_grouping", "lidskii_semigroup",
}


# --------------------------------------------------------------------------
# orchestration
# --------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def run_experiment(name, cfg):
    """Run one experiment; computation errors become a failed check."""
    try:
        checks, tables, extra = RUNNERS[name](cfg)
    except LabError as exc:
        origin = f"{type(exc).__module__}.{type(exc).__name__}"
        checks = [check(f"{name}_error", f"{origin}: {exc}", False, claim="experiment completed")]
        tables, extra = {}, {"error": origin}
    return {"checks": checks, "tables": tables, "extra": extra}


def csv_name(experiment, table):
    return f"{table}.csv"


def build_report(cfg, results):
    experiments = []
    for name in cfg.experiments:
        res = results[name]
        experiments.append({
            "name": name,
            "checks": res["checks"],
            "summary": res["extra"],
            "csv": sorted(csv_name(name, t) for t in res["tables"]),
        })
    passed = all(c["passed"] for e in experiments for c in e["checks"])
    return _jsonable({
        "tool": "resolvent-lab",
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "experiments": experiments,
        "passed": passed,
    })


def dump_report(report):
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_outputs(cfg, results, report, metadata):
    os.makedirs(cfg.output_dir, exist_ok=True)
    for name in cfg.experiments:
        for tname, table in results[name]["tables"].items():
            text = table if isinstance(table, str) else table.render()
            with open(os.path.join(cfg.output_dir, csv_name(name, tname)), "w",
                      encoding="utf-8", newline="") as fh:
                fh.write(text)
    with open(os.path.join(cfg.output_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_report(report))
    with open(os.path.join(cfg.output_dir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(metadata), fh, sort_keys=True, indent=2)
        fh.write("\n")
