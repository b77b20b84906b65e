"""Surface-equation quantities for a constant-vorticity wave in conformal variables.

The unknown is the surface elevation eta(x) = eta(x, 0) of the conformal map,
or equivalently f(x) = Q/(2g) - eta(x).  Everything nonlinear is evaluated on
a fine grid (``FINE_FACTOR`` times the profile grid) where cubic products of
resolved modes, and means of quartic ones, are exact; results that are
functions come back as profiles on that fine grid.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import (
    Grid,
    ParameterError,
    SurfaceProfile,
    analyze,
    beta_prime_series,
    derivative_values,
    hilbert_values,
    hprime_values,
    second_derivative_values,
    synthesize,
)

FINE_FACTOR = 4


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of one wave problem.  Sign conventions: m < 0, gamma > 0 adverse."""

    g: float
    d: float
    gamma: float
    m: float
    Q: float

    def __post_init__(self):
        if not self.g > 0:
            raise ParameterError(f"gravity must be positive, got {self.g}")
        if not self.d > 0:
            raise ParameterError(f"conformal depth must be positive, got {self.d}")
        if not self.Q > 0:
            raise ParameterError(f"Bernoulli constant must be positive, got {self.Q}")
        if not self.m < 0:
            raise ParameterError(f"mass flux must be negative, got {self.m}")
        for name in ("g", "d", "gamma", "m", "Q"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def favorable(self) -> bool:
        return self.gamma <= 0.0

    def replace(self, **kw) -> "PhysicalParams":
        data = asdict(self)
        data.update(kw)
        return PhysicalParams(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def q(self) -> float:
        """Q/(2g), the height at which the surface speed would vanish."""
        return self.Q / (2.0 * self.g)

    def flux_coefficient(self, f2_avg: float) -> float:
        """-m gamma/(d g) + gamma² Q²/(8 d g³) - gamma² [f²]/(2 d g)."""
        g, d, gam = self.g, self.d, self.gamma
        return (-self.m * gam / (d * g) + gam**2 * self.Q**2 / (8 * d * g**3)
                - gam**2 * f2_avg / (2 * d * g))


@dataclass(frozen=True)
class ResidualReport:
    dynamic_res: float
    babenko_res: float
    averages_res: float
    f_eq_res: float
    no_stagnation_margin: float
    nodal_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecompositionReport:
    L_val: float
    R_val: float
    V_val: float
    W_val: float
    Bpi: SurfaceProfile
    B0: SurfaceProfile
    Spi: SurfaceProfile
    S0: SurfaceProfile
    amplitude: float
    v_from_b_defect: float
    w_from_s_defect: float
    hopf_GBpi: float
    hopf_GB0: float
    hopf_GSpi: float
    hopf_GS0: float
    psi_y_crest: float
    psi_y_trough: float
    monotone: bool
    positive: bool

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, SurfaceProfile):
                out[k] = {"n_points": v.n_points, "values": v.values.tolist()}
            else:
                out[k] = v
        return out


# ---------------------------------------------------------------------------
# fine-grid helpers

def fine_values(p: SurfaceProfile, factor: int = FINE_FACTOR) -> np.ndarray:
    return synthesize(p.cos_coeffs, p.sin_coeffs, factor * p.n_points)


def _fine_profile(values: np.ndarray) -> SurfaceProfile:
    return analyze(values, Grid(values.shape[-1]))


def _mean(v: np.ndarray) -> np.ndarray:
    return np.mean(v, axis=-1)


def _col(x):
    x = np.asarray(x, dtype=float)
    return x[..., None] if x.ndim else x


def surface_terms(eta: np.ndarray, Q, m, g: float, d: float, gamma: float):
    """Babenko residual, equal-averages residual and the psi_y trace.

    ``eta`` holds fine-grid values with the grid on the last axis; ``Q`` and
    ``m`` broadcast against the leading axes, so a whole batch of Jacobian
    columns is evaluated in one call.
    """
    Q = np.asarray(Q, dtype=float)
    m = np.asarray(m, dtype=float)
    Qc, mc = _col(Q), _col(m)
    eta_p = derivative_values(eta)
    h_eta_p = hprime_values(eta, d)
    eta2_avg = _mean(eta * eta)
    w = Qc - 2.0 * g * eta - gamma**2 * eta * eta
    h_eep = hilbert_values(eta * eta_p, d)
    lhs = hilbert_values(w * eta_p, d) + w * h_eta_p + 2.0 * gamma**2 * eta * h_eep
    coef = -2.0 * mc * gamma / d - gamma**2 * _col(eta2_avg) / d + 2.0 * g
    rhs = (eta * coef + gamma**2 * eta * eta + 2.0 * gamma * mc - 2.0 * g * d
           - 2.0 * g * _col(_mean(eta * h_eta_p)))
    psi_y = mc / d + gamma * _col(eta2_avg) / (2.0 * d) + gamma * h_eep - gamma * eta * (1.0 + h_eta_p)
    energy = (Qc - 2.0 * g * eta) * (eta_p**2 + (1.0 + h_eta_p) ** 2)
    averages = _mean(psi_y**2) - _mean(energy)
    return lhs - rhs, averages, psi_y, energy


# ---------------------------------------------------------------------------
# f <-> eta

def eta_to_f(eta: SurfaceProfile, params: PhysicalParams) -> SurfaceProfile:
    return analyze(params.q - eta.values, eta.grid)


def f_to_eta(f: SurfaceProfile, params: PhysicalParams) -> SurfaceProfile:
    return analyze(params.q - f.values, f.grid)


def amplitude_of(p: SurfaceProfile) -> float:
    """Crest-to-trough difference |p(0) - p(π)|, sign taken for eta or f alike."""
    return abs(p.at_crest() - p.at_trough())


# ---------------------------------------------------------------------------
# the f-formulation

def _f_pieces(f: SurfaceProfile, d: float):
    fv = fine_values(f)
    fp = derivative_values(fv)
    h_fp = hprime_values(fv, d)
    h_ffp = hilbert_values(fv * fp, d)
    return fv, fp, h_fp, h_ffp


def compute_b(params: PhysicalParams, f: SurfaceProfile) -> float:
    """Constant term b of the f-equation.

    Obtained by substituting eta = Q/(2g) - f, with [eta] = d, into the
    Babenko equation; see ``compute_b_printed`` for the other reading.
    """
    g, d, gam, m = params.g, params.d, params.gamma, params.m
    q = params.q
    fv, fp, h_fp, _ = _f_pieces(f, d)
    c1 = params.flux_coefficient(float(np.mean(fv * fv)))
    return (q + q * c1 - gam**2 * q * q / (2.0 * g) + gam * m / g - d
            - float(np.mean(fv * h_fp)))


def compute_b_printed(params: PhysicalParams, f: SurfaceProfile) -> float:
    """b exactly as the defining formula is usually typeset.

    Differs from ``compute_b`` by a constant whenever gamma != 0; kept for
    the consistency diagnostic in ``b_discrepancy``.
    """
    g, d, gam, m, Q = params.g, params.d, params.gamma, params.m, params.Q
    fv, _, h_fp, _ = _f_pieces(f, d)
    c1 = params.flux_coefficient(float(np.mean(fv * fv)))
    return (Q / (2 * g) + gam * m / g - d - float(np.mean(fv * h_fp))
            - (gam * Q / (2 * g**2)) * c1 + gam**2 * Q**2 / (8 * g**3))


def b_discrepancy(params: PhysicalParams, f: SurfaceProfile) -> float:
    return compute_b_printed(params, f) - compute_b(params, f)


def K_spectral(f: SurfaceProfile, d: float) -> SurfaceProfile:
    """K f = f² H f' + H(f² f') - 2 f H(f f'), on the fine grid."""
    fv, fp, h_fp, h_ffp = _f_pieces(f, d)
    kf = fv * fv * h_fp + hilbert_values(fv * fv * fp, d) - 2.0 * fv * h_ffp
    return _fine_profile(kf)


def K_integral(f: SurfaceProfile, d: float, tol: float = 1e-14) -> SurfaceProfile:
    """K f(x) = ∫_{-π}^{π} (-beta'(s)/6π) (f(x) - f(x-s))³ ds, on the fine grid.

    The cubed difference cancels the s^-2 pole, leaving a smooth periodic
    integrand; the trapezoid rule on the fine grid uses its limit 0 at s = 0.
    """
    fv = fine_values(f)
    n = fv.size
    h = 2.0 * math.pi / n
    j = np.arange(1, n)
    s = j * h
    kern = -np.asarray(beta_prime_series(s, d, tol).value) / (6.0 * math.pi)
    idx = (np.arange(n)[:, None] - j[None, :]) % n
    diff = fv[:, None] - fv[idx]
    return _fine_profile(h * (diff**3 @ kern))


def psi_y_trace(params: PhysicalParams, f: SurfaceProfile) -> SurfaceProfile:
    """psi_y(x, 0) in terms of f, on the fine grid."""
    g, d, gam, m, Q = params.g, params.d, params.gamma, params.m, params.Q
    fv, _, h_fp, h_ffp = _f_pieces(f, d)
    f2 = float(np.mean(fv * fv))
    vals = (gam * h_ffp - gam * fv * h_fp + gam * fv + m / d
            - gam * Q**2 / (8 * d * g**2) + gam * f2 / (2 * d))
    return _fine_profile(vals)


def dynamic_residual(params: PhysicalParams, eta: SurfaceProfile) -> SurfaceProfile:
    ev = fine_values(eta)
    _, _, psi_y, energy = surface_terms(ev, params.Q, params.m, params.g, params.d, params.gamma)
    return _fine_profile(psi_y**2 - energy)


def check_mean(params: PhysicalParams, eta: SurfaceProfile, tol: float = 1e-12) -> bool:
    return abs(eta.mean - params.d) <= tol * max(1.0, params.d)


def babenko_residual(params: PhysicalParams, eta: SurfaceProfile, *, strict: bool = False) -> SurfaceProfile:
    """Pointwise Babenko residual on the fine grid.

    The equation presumes [eta] = d.  A violation is recorded on the result's
    ``mean_dropped`` flag, or raised with ``strict=True``.
    """
    ok = check_mean(params, eta)
    if strict and not ok:
        raise ParameterError(f"mean of eta is {eta.mean}, expected d = {params.d}")
    ev = fine_values(eta)
    res, _, _, _ = surface_terms(ev, params.Q, params.m, params.g, params.d, params.gamma)
    prof = _fine_profile(res)
    if not ok:
        object.__setattr__(prof, "mean_dropped", True)
    return prof


def averages_residual(params: PhysicalParams, eta: SurfaceProfile) -> float:
    ev = fine_values(eta)
    _, avg, _, _ = surface_terms(ev, params.Q, params.m, params.g, params.d, params.gamma)
    return float(avg)


def f_equation_lhs_minus_rhs(params: PhysicalParams, f: SurfaceProfile) -> np.ndarray:
    """Fine-grid values of the f-equation with b left out (constant on solutions)."""
    g, d, gam = params.g, params.d, params.gamma
    fv, _, h_fp, h_ffp = _f_pieces(f, d)
    c1 = params.flux_coefficient(float(np.mean(fv * fv)))
    kf = K_spectral(f, d).values
    return ((1.0 + c1) * fv - gam**2 / (2 * g) * fv * fv - fv * h_fp - h_ffp
            + gam**2 / (2 * g) * kf)


def f_equation_residual(params: PhysicalParams, f: SurfaceProfile, b: float | None = None) -> SurfaceProfile:
    if b is None:
        b = compute_b(params, f)
    return _fine_profile(f_equation_lhs_minus_rhs(params, f) - b)


def crest_trough_terms(params: PhysicalParams, f: SurfaceProfile) -> tuple[float, float, float, float]:
    """The four crest-to-trough differences making up the f-equation.

    (1 + c1) A, (γ²/2g)(f(π)² - f(0)²), {f H f' + H(f f')} from 0 to π and
    (γ²/2g) K f from 0 to π.  The identity reads t0 - t1 = t2 - t3.
    """
    g, d, gam = params.g, params.d, params.gamma
    fv, _, h_fp, h_ffp = _f_pieces(f, d)
    c1 = params.flux_coefficient(float(np.mean(fv * fv)))
    kf = K_spectral(f, d).values
    t = fv.size // 2
    quad = fv * h_fp + h_ffp
    return (float((1.0 + c1) * (fv[t] - fv[0])), float(gam**2 / (2 * g) * (fv[t] ** 2 - fv[0] ** 2)),
            float(quad[t] - quad[0]), float(gam**2 / (2 * g) * (kf[t] - kf[0])))


def crest_trough_sides(params: PhysicalParams, f: SurfaceProfile) -> tuple[float, float]:
    """Both sides of the f-equation differenced from crest (x=0) to trough (x=π)."""
    t0, t1, t2, t3 = crest_trough_terms(params, f)
    return t0 - t1, t2 - t3


# ---------------------------------------------------------------------------
# admissibility

def nodal_ok(eta: SurfaceProfile, factor: int = FINE_FACTOR) -> bool:
    """eta' < 0 on (0, π) and > 0 on (-π, 0), checked on the fine grid."""
    ev = fine_values(eta, factor)
    ep = derivative_values(ev)
    n = ev.size
    upper = ep[1 : n // 2]
    lower = ep[n // 2 + 1 :]
    return bool(np.all(upper < 0.0) and np.all(lower > 0.0))


def no_stagnation_margin(params: PhysicalParams, eta: SurfaceProfile) -> float:
    ev = fine_values(eta)
    ep = derivative_values(ev)
    hp = hprime_values(ev, params.d)
    return float(np.min((params.Q - 2 * params.g * ev) * (ep**2 + (1.0 + hp) ** 2)))


def residual_report(params: PhysicalParams, eta: SurfaceProfile) -> ResidualReport:
    ev = fine_values(eta)
    res, avg, psi_y, energy = surface_terms(ev, params.Q, params.m, params.g, params.d, params.gamma)
    f = eta_to_f(eta, params)
    feq = f_equation_residual(params, f)
    ep = derivative_values(ev)
    hp = hprime_values(ev, params.d)
    margin = float(np.min((params.Q - 2 * params.g * ev) * (ep**2 + (1.0 + hp) ** 2)))
    return ResidualReport(
        dynamic_res=float(np.max(np.abs(psi_y**2 - energy))),
        babenko_res=float(np.max(np.abs(res))),
        averages_res=float(abs(avg)),
        f_eq_res=float(np.max(np.abs(feq.values))),
        no_stagnation_margin=margin,
        nodal_ok=nodal_ok(eta),
    )


def slope_and_convexity(p: SurfaceProfile, factor: int = FINE_FACTOR) -> tuple[float, float]:
    """sup |p'| and sup |p''| sampled on the fine grid."""
    v = fine_values(p, factor)
    return (float(np.max(np.abs(derivative_values(v)))),
            float(np.max(np.abs(second_derivative_values(v)))))


def is_monotone_increasing(f: SurfaceProfile, factor: int = FINE_FACTOR) -> bool:
    fv = fine_values(f, factor)
    fp = derivative_values(fv)
    n = fv.size
    return bool(np.all(fp[1 : n // 2] > 0.0) and np.all(fp[n // 2 + 1 :] < 0.0))


# ---------------------------------------------------------------------------
# the crest-to-trough decomposition used for favorable vorticity

def decomposition_report(params: PhysicalParams, f: SurfaceProfile) -> DecompositionReport:
    """L, R = V + W and the auxiliary B, S functions for an even profile f.

    Identity defects compare V with H'B^π(π) + H'B^0(0) and (2g/γ²)W with
    H'S^π(π) + H'S^0(0); for γ = 0 the W side is compared unscaled (both 0).
    """
    g, d, gam = params.g, params.d, params.gamma
    fv, _, h_fp, h_ffp = _f_pieces(f, d)
    n = fv.size
    t = n // 2
    f0, fpi = fv[0], fv[t]
    A = fpi - f0
    c1 = params.flux_coefficient(float(np.mean(fv * fv)))
    kf = K_spectral(f, d).values
    T = fv * h_fp - h_ffp
    quad = fv * h_fp + h_ffp
    mix = A * (T[t] + T[0])
    L = (1.0 + c1) * A - gam**2 / (2 * g) * (fpi**2 - f0**2) + gam**2 / (2 * g) * mix
    V = quad[t] - quad[0]
    w_bracket = -(kf[t] - kf[0]) + mix
    W = gam**2 / (2 * g) * w_bracket
    R = V + W

    Bpi = -(fpi - fv) * (1.5 * fpi + 0.5 * fv)
    B0 = -(fv - f0) * (1.5 * f0 + 0.5 * fv)
    Spi = (fpi - fv) ** 2 * (3 * f0 - 2 * fv - fpi) / 6.0
    S0 = (f0 - fv) ** 2 * (2 * fv + f0 - 3 * fpi) / 6.0

    hB = hprime_values(Bpi, d)[t] + hprime_values(B0, d)[0]
    hS = hprime_values(Spi, d)[t] + hprime_values(S0, d)[0]

    def G_at(v, i):
        return float(np.mean(v) / d + hprime_values(v, d)[i])

    psi = psi_y_trace(params, f).values
    return DecompositionReport(
        L_val=float(L), R_val=float(R), V_val=float(V), W_val=float(W),
        Bpi=_fine_profile(Bpi), B0=_fine_profile(B0),
        Spi=_fine_profile(Spi), S0=_fine_profile(S0),
        amplitude=float(A),
        v_from_b_defect=float(abs(V - hB)),
        w_from_s_defect=float(abs(w_bracket - hS)),
        hopf_GBpi=G_at(Bpi, t), hopf_GB0=G_at(B0, 0),
        hopf_GSpi=G_at(Spi, t), hopf_GS0=G_at(S0, 0),
        psi_y_crest=float(psi[0]), psi_y_trough=float(psi[t]),
        monotone=is_monotone_increasing(f),
        positive=bool(np.min(fv) > 0.0),
    )
