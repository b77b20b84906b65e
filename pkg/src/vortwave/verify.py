"""Numerical audits of the estimates and identities behind the amplitude bounds.

Each audit returns an ``AuditReport`` made of named checks.  A check compares
two numbers under a relation and records a signed margin (positive means the
relation holds).  Strict inequalities use no tolerance.  Identities allow
tol * max(1, size): absolute for small terms, relative for large ones.  A
relation whose hypotheses fail on a flat profile (zero amplitude) is
recorded as ``degenerate-pass`` rather than a failure.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .bounds import BETA_FLOOR, adverse_DEF, beta_half
from .formulation import (
    FINE_FACTOR,
    PhysicalParams,
    K_spectral,
    _f_pieces,
    crest_trough_terms,
    eta_to_f,
    fine_values,
    is_monotone_increasing,
    psi_y_trace,
    decomposition_report,
    slope_and_convexity,
)
from .spectral import Grid, SurfaceProfile, analyze, beta_series, beta_prime_series

STATUSES = ("pass", "fail", "degenerate-pass", "skipped", "inconclusive")
_OK = ("pass", "degenerate-pass", "skipped")


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    relation: str
    margin: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status in _OK


@dataclass(frozen=True)
class AuditReport:
    subject: str
    checks: tuple[Check, ...]

    @property
    def overall(self) -> bool:
        """True unless some check failed; inconclusive checks do not fail a report."""
        return all(c.status != "fail" for c in self.checks)

    @property
    def inconclusive(self) -> bool:
        return any(c.status == "inconclusive" for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status == "fail"]

    def to_dict(self) -> dict:
        return {"subject": self.subject, "overall": self.overall,
                "checks": [dict(asdict(c), passed=c.passed) for c in self.checks]}


def _scale(lhs: float, rhs: float) -> float:
    s = max(abs(lhs), abs(rhs))
    return s if s > 0 else 1.0


def compare(name: str, lhs: float, relation: str, rhs: float, *, tol: float = 0.0,
            degenerate: bool = False, inconclusive: bool = False) -> Check:
    """Build one check.  ``tol`` is relative and only used for '=='."""
    lhs, rhs = float(lhs), float(rhs)
    sc = _scale(lhs, rhs)
    if relation == "<":
        margin, ok = (rhs - lhs) / sc, lhs < rhs
    elif relation == "<=":
        margin, ok = (rhs - lhs) / sc, lhs <= rhs
    elif relation == ">":
        margin, ok = (lhs - rhs) / sc, lhs > rhs
    elif relation == ">=":
        margin, ok = (lhs - rhs) / sc, lhs >= rhs
    elif relation == "==":
        margin = tol - abs(lhs - rhs) / sc
        ok = margin >= 0
    else:
        raise ValueError(f"unknown relation {relation!r}")
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        ok = False
    if inconclusive:
        status = "inconclusive"
    elif ok:
        status = "pass"
    elif degenerate:
        status = "degenerate-pass"
    else:
        status = "fail"
    return Check(name, lhs, rhs, relation, float(margin), status)


def _identity(name: str, defect: float, size: float, tol: float) -> Check:
    """|defect| <= tol * max(1, size); lhs is the defect, rhs the allowance."""
    allow = tol * max(1.0, size)
    return Check(name, float(defect), allow, "<=", (allow - defect) / max(1.0, size),
                 "pass" if defect <= allow else "fail")


def skipped(name: str, relation: str = "n/a") -> Check:
    return Check(name, math.nan, math.nan, relation, math.nan, "skipped")


# ---------------------------------------------------------------------------
# kernel

def audit_kernel(d: float, sample_grid: Sequence[float] | int = 1000, tol: float = 1e-14) -> AuditReport:
    """Positivity, decrease, the β(π/2) floor and the β' envelope on (0, π]."""
    if isinstance(sample_grid, (int, np.integer)):
        s = np.linspace(0.0, math.pi, int(sample_grid) + 1)[1:]
    else:
        s = np.asarray(sample_grid, dtype=float)
    b = np.asarray(beta_series(s, d, tol).value)
    bm = np.asarray(beta_series(-s, d, tol).value)
    bp = np.asarray(beta_prime_series(s, d, tol).value)
    env = 1.0 / d + 2.0 / s**2 + 0.5
    interior = s < math.pi
    bpi = abs(float(beta_series(math.pi, d, tol).value))
    checks = [
        # odd and 2π-periodic forces β(π) = 0, so positivity is for s < π
        compare("beta_positive", float(np.min(b[interior])), ">", 0.0),
        compare("beta_vanishes_at_pi", bpi, "<=", 1e-12 * float(np.max(np.abs(b)))),
        compare("beta_strictly_decreasing", float(np.max(np.diff(b))), "<", 0.0),
        compare("beta_half_floor", beta_half(d), ">=", BETA_FLOOR),
    ]
    i = int(np.argmax(-bp - env))
    checks.append(compare("beta_prime_envelope", float(-bp[i]), "<", float(env[i])))
    odd = float(np.max(np.abs(b + bm)))
    checks.append(compare("beta_odd", odd, "<=", 1e-12 * float(np.max(np.abs(b)))))
    return AuditReport(f"kernel d={d!r}", tuple(checks))


# ---------------------------------------------------------------------------
# synthetic admissible profiles

def random_admissible_profile(rng: np.random.Generator, n_points: int = 64, max_degree: int = 8,
                              max_tries: int = 1000) -> SurfaceProfile:
    """f = c0 + Σ a_k (1 - cos kx), c0 in [0.5, 3], strictly increasing on (0, π).

    Coefficients are drawn and rejected until f' > 0 on the open half period.
    """
    grid = Grid(n_points)
    x = grid.nodes
    deg_cap = min(max_degree, n_points // 4)
    for _ in range(max_tries):
        c0 = rng.uniform(0.5, 3.0)
        K = int(rng.integers(1, deg_cap + 1))
        a = np.zeros(K)
        a[0] = rng.uniform(0.05, 1.0)
        if K > 1:
            a[1:] = a[0] * rng.uniform(-1.0, 1.0, K - 1) * 0.6 ** np.arange(1, K)
        k = np.arange(1, K + 1)
        vals = c0 + np.sum(a[:, None] * (1.0 - np.cos(np.outer(k, x))), axis=0)
        f = analyze(vals, grid)
        if is_monotone_increasing(f) and np.min(vals) > 0:
            return f
    raise RuntimeError("could not draw an admissible profile")


def random_profiles(n: int, seed: int, **kw) -> list[SurfaceProfile]:
    rng = np.random.default_rng(seed)
    return [random_admissible_profile(rng, **kw) for _ in range(n)]


def _admissible(f: SurfaceProfile) -> tuple[bool, bool]:
    return is_monotone_increasing(f), bool(np.min(fine_values(f)) > 0.0)


def _amp(fv: np.ndarray) -> float:
    return float(fv[fv.size // 2] - fv[0])


def _flat(fv: np.ndarray) -> bool:
    return abs(_amp(fv)) <= 1e-14 * max(1.0, float(np.max(np.abs(fv))))


# ---------------------------------------------------------------------------
# the two estimates behind the adverse bound

def audit_quadratic_lower(f: SurfaceProfile, d: float, subject: str = "profile") -> AuditReport:
    """{f H f' + H(f f')} from crest to trough >= β(π/2) A² / 2π."""
    fv, _, h_fp, h_ffp = _f_pieces(f, d)
    t = fv.size // 2
    quad = fv * h_fp + h_ffp
    A = _amp(fv)
    mono, pos = _admissible(f)
    flat = _flat(fv)
    check = compare("quadratic_lower", quad[t] - quad[0], ">=", beta_half(d) / (2 * math.pi) * A * A,
                    degenerate=flat, inconclusive=not flat and not (mono and pos))
    return AuditReport(subject, (check,))


def audit_cubic_upper(f: SurfaceProfile, params: PhysicalParams | float, subject: str = "profile") -> AuditReport:
    """K f from crest to trough < (2/3)(1/d + 1/2) A³ + (8N/3π) A², N = sup|f'|.

    Also checks the intermediate estimate with a free cut-off δ at δ = A/N
    clamped to (0, π].
    """
    d = params.d if isinstance(params, PhysicalParams) else float(params)
    kf = K_spectral(f, d).values
    fv = fine_values(f)
    t = fv.size // 2
    A = _amp(fv)
    N, _ = slope_and_convexity(f)
    lam = 1.0 / d + 0.5
    lhs = kf[t] - kf[0]
    mono, pos = _admissible(f)
    flat = _flat(fv)
    bad = not flat and not (mono and pos)
    final = (2.0 / 3.0) * lam * A**3 + 8.0 * N / (3.0 * math.pi) * A**2
    checks = [compare("cubic_upper", lhs, "<", final, degenerate=flat, inconclusive=bad)]
    if flat or N == 0:
        checks.append(compare("cubic_upper_delta", lhs, "<", 0.0, degenerate=True))
    else:
        delta = min(A / N, math.pi)
        inter = (2.0 / 3.0) * (lam + 2.0 / (math.pi * delta)) * A**3 + 4.0 / (3.0 * math.pi) * N**2 * delta * A
        checks.append(compare("cubic_upper_delta", lhs, "<", inter, inconclusive=bad))
    return AuditReport(subject, tuple(checks))


# ---------------------------------------------------------------------------
# favorable-route decomposition

def audit_decomposition_profile(params: PhysicalParams, f: SurfaceProfile, *, solution: bool = False,
                                subject: str = "profile", identity_tol: float = 1e-10) -> AuditReport:
    """Decomposition audit for any admissible f.

    ``solution=True`` adds the checks that need f to solve the equation:
    L = R, the estimate L <= A and the sign of the ψ_y trace (favorable only).
    """
    rep = decomposition_report(params, f)
    g, d, gam = params.g, params.d, params.gamma
    A = rep.amplitude
    fv = fine_values(f)
    t = fv.size // 2
    flat = _flat(fv)
    bad = not flat and not (rep.monotone and rep.positive)
    wb = abs(rep.W_val) * 2 * g / gam**2 if gam != 0 else 0.0
    Bsum = rep.Bpi.values + rep.B0.values
    target = A * (-fv + 1.5 * fv[t] + 1.5 * fv[0])
    Ssum = rep.Spi.values + rep.S0.values
    c = [
        _identity("V_from_B_identity", rep.v_from_b_defect, abs(rep.V_val), identity_tol),
        _identity("W_from_S_identity", rep.w_from_s_defect, wb, identity_tol),
        _identity("B_sum_identity", float(np.max(np.abs(-Bsum - target))),
                  float(np.max(np.abs(target))), identity_tol),
        _identity("S_sum_identity", float(np.max(np.abs(Ssum + A**3 / 6.0))), A**3 / 6.0, identity_tol),
    ]
    # -(B^π + B^0) > A²/2 away from degenerate profiles
    i = int(np.argmin(-Bsum))
    c.append(compare("B_sum_lower", float(-Bsum[i]), ">", 0.5 * A * A, degenerate=flat, inconclusive=bad))
    for name, prof, zero_at in (("Bpi_nonpositive", rep.Bpi, t), ("B0_nonpositive", rep.B0, 0),
                                ("Spi_nonpositive", rep.Spi, t), ("S0_nonpositive", rep.S0, 0)):
        others = np.delete(np.arange(fv.size), zero_at)
        c.append(compare(name, float(np.max(prof.values[others])), "<", 0.0, degenerate=flat, inconclusive=bad))
    c.append(compare("R_lower", rep.R_val, ">", A * A / (2 * d) + gam**2 * A**3 / (12 * g * d),
                     degenerate=flat, inconclusive=bad))
    for name, val in (("hopf_GBpi", rep.hopf_GBpi), ("hopf_GB0", rep.hopf_GB0),
                      ("hopf_GSpi", rep.hopf_GSpi), ("hopf_GS0", rep.hopf_GS0)):
        c.append(compare(name, val, ">", 0.0, degenerate=flat, inconclusive=bad))
    if solution:
        c.append(compare("L_equals_R", rep.L_val, "==", rep.R_val, tol=1e-9))
        if gam <= 0:
            c.append(compare("L_below_A", rep.L_val, "<=", A, degenerate=flat))
            psi = psi_y_trace(params, f).values
            c.append(compare("psi_y_nonpositive", float(np.max(psi)), "<=", 0.0))
        else:
            c.append(skipped("L_below_A", "<="))
            c.append(skipped("psi_y_nonpositive", "<="))
    return AuditReport(subject, tuple(c))


def audit_decomposition(params: PhysicalParams, point, subject: str | None = None) -> AuditReport:
    """Decomposition audit on a converged branch point."""
    f = eta_to_f(point.eta, params)
    name = subject or f"point s={point.arclength_s!r}"
    return audit_decomposition_profile(params, f, solution=True, subject=name, identity_tol=1e-9)


# ---------------------------------------------------------------------------
# crest-to-trough identity and the adverse inequality chain

def audit_crest_trough(params: PhysicalParams, point, subject: str | None = None,
                       tol: float = 1e-9) -> AuditReport:
    f = eta_to_f(point.eta, params)
    name = subject or f"point s={point.arclength_s!r}"
    terms = crest_trough_terms(params, f)
    defect = abs((terms[0] - terms[1]) - (terms[2] - terms[3]))
    # both sides vanish with the amplitude, so the tolerance is absolute
    # below unit term size and relative above it
    checks = [_identity("crest_trough_identity", defect, max(abs(t) for t in terms), tol)]
    g, d, gam = params.g, params.d, params.gamma
    if gam > 0:
        fv = fine_values(f)
        t = fv.size // 2
        A = _amp(fv)
        flat = _flat(fv)
        f2 = float(np.mean(fv * fv))
        c1 = params.flux_coefficient(f2)
        kf = K_spectral(f, d).values
        N, _ = slope_and_convexity(f)
        bh = beta_half(d)
        lam = 1.0 / d + 0.5
        lead = gam**2 / (2 * g) + bh / (2 * math.pi)
        checks.append(compare("chain_quadratic_estimate", (1 + c1) * A, ">=",
                              lead * A * A - gam**2 / (2 * g) * (kf[t] - kf[0]), degenerate=flat))
        checks.append(compare("chain_divided", 1 + c1, ">=",
                              lead * A - gam**2 / (3 * g) * lam * A * A - 4 * gam**2 * N * A / (3 * math.pi * g)))
        co = adverse_DEF(params, f2, N)
        checks.append(compare("quadratic_inequality", A * A + (co.D - co.E) * A + co.F, ">=", 0.0))
    return AuditReport(name, tuple(checks))


# ---------------------------------------------------------------------------
# batches and output

def audit_point(params: PhysicalParams, point, subject: str | None = None) -> list[AuditReport]:
    return [audit_decomposition(params, point, subject), audit_crest_trough(params, point, subject)]


def audit_synthetic(f: SurfaceProfile, params: PhysicalParams, subject: str) -> list[AuditReport]:
    return [
        audit_quadratic_lower(f, params.d, subject),
        audit_cubic_upper(f, params, subject),
        audit_decomposition_profile(params, f, subject=subject),
    ]


def reports_to_json(reports: Iterable[AuditReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, default=repr)


AUDIT_COLUMNS = ("subject", "check", "lhs", "rhs", "relation", "margin", "status")


def write_audit_csv(reports: Iterable[AuditReport], path, header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUDIT_COLUMNS)
        for r in reports:
            for c in r.checks:
                w.writerow([r.subject, c.name, f"{c.lhs:.17g}", f"{c.rhs:.17g}", c.relation,
                            f"{c.margin:.17g}", c.status])


__all__ = [
    "AuditReport", "Check", "STATUSES", "FINE_FACTOR", "audit_kernel", "audit_quadratic_lower",
    "audit_cubic_upper", "audit_decomposition", "audit_decomposition_profile", "audit_crest_trough",
    "audit_point", "audit_synthetic", "random_admissible_profile", "random_profiles",
    "reports_to_json", "write_audit_csv",
]
