"""Closed-form amplitude bounds and the smallness conditions that gate them.

Favorable vorticity (gamma <= 0) has an unconditional bound.  Adverse
vorticity (gamma > 0) goes through either a quadratic inequality in the
amplitude, driven by a slope cap N, or a quartic one in sqrt(A), driven by
a curvature cap M.  Each route reports its conditions with signed relative
margins: positive means satisfied, and the size says by how much.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

from .formulation import PhysicalParams
from .spectral import ParameterError, beta_eval

ROUTES = ("favorable", "adverse_quadratic", "adverse_quartic", "universal_corollary")
BETA_FLOOR = (math.pi - 2.0) / math.pi


class RouteError(ParameterError):
    """A bound was requested for the wrong sign of the vorticity."""


@lru_cache(maxsize=256)
def beta_half(d: float) -> float:
    """beta(pi/2) at conformal depth d."""
    return float(beta_eval(math.pi / 2.0, d))


@dataclass(frozen=True)
class Condition:
    name: str
    satisfied: bool
    margin: float
    lhs: float
    rhs: float


def _below(name: str, lhs: float, rhs: float) -> Condition:
    """Condition lhs < rhs with margin (rhs - lhs)/|rhs|."""
    scale = abs(rhs) if rhs != 0.0 else 1.0
    return Condition(name, bool(lhs < rhs), (rhs - lhs) / scale, float(lhs), float(rhs))


@dataclass(frozen=True)
class AdverseCoefficients:
    route: str
    E: float
    F: float
    D: float | None = None
    D_M: float | None = None

    def __post_init__(self):
        if self.route not in ("slope_N", "convexity_M"):
            raise ValueError(f"unknown coefficient route {self.route!r}")


@dataclass(frozen=True)
class BoundReport:
    route: str
    applicable: bool
    bound_value: float | None
    conditions: tuple[Condition, ...] = ()
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")
        if self.applicable != (self.bound_value is not None):
            raise ValueError("bound_value must be present exactly when applicable")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["conditions"] = [asdict(c) for c in self.conditions]
        return out


# ---------------------------------------------------------------------------
# favorable vorticity

def favorable_bound(g: float, d: float, gamma: float) -> float:
    """min{2d, sqrt(12 g d)/|gamma|}, valid for gamma <= 0."""
    if gamma > 0:
        raise RouteError(f"favorable bound needs gamma <= 0, got {gamma}")
    if not (g > 0 and d > 0):
        raise ParameterError("g and d must be positive")
    if gamma == 0:
        return 2.0 * d
    return min(2.0 * d, math.sqrt(12.0 * g * d) / abs(gamma))


def favorable_report(g: float, d: float, gamma: float, amplitude: float | None = None) -> BoundReport:
    value = favorable_bound(g, d, gamma)
    conds = () if amplitude is None else (_below("amplitude_below_bound", amplitude, value),)
    return BoundReport("favorable", True, value, conds)


# ---------------------------------------------------------------------------
# adverse vorticity: coefficients

def _check_adverse(params: PhysicalParams) -> None:
    if not params.gamma > 0:
        raise RouteError(f"adverse route needs gamma > 0, got {params.gamma}")


def _E_F(params: PhysicalParams, f2_avg: float) -> tuple[float, float]:
    g, d, gam, m, Q = params.g, params.d, params.gamma, params.m, params.Q
    if not 0.0 <= f2_avg < Q**2 / (4 * g**2):
        raise ParameterError(f"[f²] = {f2_avg} outside [0, Q²/4g²)")
    lam = 1.0 / d + 0.5
    E = 3.0 / (2.0 * lam) + 3.0 * g * beta_half(d) / (2.0 * math.pi * gam**2 * lam)
    F = (3.0 * g / lam) * (1.0 / gam**2 - m / (gam * g * d) + (Q**2 / (4 * g**2) - f2_avg) / (2 * d * g))
    return E, F


def adverse_DEF(params: PhysicalParams, f2_avg: float, N: float) -> AdverseCoefficients:
    """Coefficients of A² + (D - E) A + F >= 0 for slope cap N.

    ``f2_avg = 0`` is the a-priori worst case: F decreases in [f²].
    """
    _check_adverse(params)
    if N < 0:
        raise ParameterError("slope cap N must be nonnegative")
    E, F = _E_F(params, f2_avg)
    D = 4.0 * N / (math.pi * (1.0 / params.d + 0.5))
    return AdverseCoefficients("slope_N", E=E, F=F, D=D)


def adverse_DEF_M(params: PhysicalParams, f2_avg: float, M: float) -> AdverseCoefficients:
    """Coefficients of Y⁴ + D_M Y³ - E Y² + F >= 0, Y = sqrt(A), for curvature cap M."""
    _check_adverse(params)
    if M < 0:
        raise ParameterError("curvature cap M must be nonnegative")
    E, F = _E_F(params, f2_avg)
    D_M = 4.0 * math.sqrt(M) / (math.pi * (1.0 / params.d + 0.5))
    return AdverseCoefficients("convexity_M", E=E, F=F, D_M=D_M)


# ---------------------------------------------------------------------------
# adverse vorticity: bounds

def adverse_quadratic_bound(coeffs: AdverseCoefficients) -> BoundReport:
    """Smaller root of A² + (D - E) A + F when it exists."""
    if coeffs.route != "slope_N":
        raise ValueError("quadratic bound needs slope_N coefficients")
    D, E, F = coeffs.D, coeffs.E, coeffs.F
    gap = E - D
    conds = (
        _below("D_below_E", D, E),
        _below("4F_below_gap_squared", 4.0 * F, gap * gap),
    )
    if not all(c.satisfied for c in conds):
        return BoundReport("adverse_quadratic", False, None, conds)
    disc = gap * gap - 4.0 * F
    # 2F/(gap + sqrt(disc)) is the small root without cancellation
    value = 2.0 * F / (gap + math.sqrt(disc))
    return BoundReport("adverse_quadratic", True, value, conds,
                       {"D": D, "E": E, "F": F, "large_root": 0.5 * (gap + math.sqrt(disc))})


def _corollary_value(d: float) -> float:
    return 12.0 * math.pi / beta_half(d)


def _shared_smallness(params: PhysicalParams) -> list[Condition]:
    g, d, gam, m, Q = params.g, params.d, params.gamma, params.m, params.Q
    return [
        _below("gamma_below_gd_over_abs_m", gam, g * d / abs(m)),
        _below("gamma2_below_8dg3_over_Q2", gam**2, 8.0 * d * g**3 / Q**2),
    ]


def smallness_N(params: PhysicalParams, N: float) -> BoundReport:
    """Explicit slope-route conditions; all four give A < 12π/β(π/2)."""
    _check_adverse(params)
    g, d, gam = params.g, params.d, params.gamma
    b = beta_half(d)
    conds = _shared_smallness(params) + [
        _below("N_gamma2_below_g_beta_over_8", N * gam**2, b * g / 8.0),
        _below("gamma2_below_g_beta2_over_77pi2", gam**2, g * b**2 / (77.0 * math.pi**2 * (0.5 + 1.0 / d))),
    ]
    ok = all(c.satisfied for c in conds)
    return BoundReport("universal_corollary", ok, _corollary_value(d) if ok else None, tuple(conds),
                       {"gate": "slope_N", "N": N})


def smallness_M(params: PhysicalParams, M: float) -> BoundReport:
    """Explicit curvature-route conditions; all four give A < 12π/β(π/2)."""
    _check_adverse(params)
    g, d, gam = params.g, params.d, params.gamma
    r = beta_half(d) / (12.0 * math.pi)
    conds = _shared_smallness(params) + [
        _below("sqrtM_gamma2_below", math.sqrt(M) * gam**2, 0.25 * math.pi * g * r**1.5),
        _below("gamma2_below_2g_ratio2", gam**2, 2.0 * g / (0.5 + 1.0 / d) * r**2),
    ]
    ok = all(c.satisfied for c in conds)
    return BoundReport("universal_corollary", ok, _corollary_value(d) if ok else None, tuple(conds),
                       {"gate": "convexity_M", "M": M})


def quartic_P(Y: float, coeffs: AdverseCoefficients) -> float:
    if coeffs.route != "convexity_M":
        raise ValueError("quartic needs convexity_M coefficients")
    return Y**4 + coeffs.D_M * Y**3 - coeffs.E * Y**2 + coeffs.F


def quartic_envelope(params: PhysicalParams, epsilon: float) -> float:
    """2(1+ε)π/β(π/2) (1 + |m|γ/(gd) + γ²Q²/(8dg³))."""
    g, d, gam, m, Q = params.g, params.d, params.gamma, params.m, params.Q
    return (2.0 * (1.0 + epsilon) * math.pi / beta_half(d)
            * (1.0 + abs(m) * gam / (g * d) + gam**2 * Q**2 / (8.0 * d * g**3)))


def adverse_quartic_bound(params: PhysicalParams, M: float, epsilon: float = 0.1,
                          f2_avg: float = 0.0) -> BoundReport:
    """A <= (1+ε)F/E whenever P(sqrt((1+ε)F/E)) < 0."""
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    coeffs = adverse_DEF_M(params, f2_avg, M)
    A1 = (1.0 + epsilon) * coeffs.F / coeffs.E
    P1 = quartic_P(math.sqrt(A1), coeffs)
    cond = Condition("P_at_Y1_negative", bool(P1 < 0.0), -P1 / coeffs.F, float(P1), 0.0)
    extras = {"D_M": coeffs.D_M, "E": coeffs.E, "F": coeffs.F, "Y1": math.sqrt(A1), "P_Y1": P1,
              "epsilon": epsilon}
    if not cond.satisfied:
        return BoundReport("adverse_quartic", False, None, (cond,), extras)
    extras["envelope"] = quartic_envelope(params, epsilon)
    return BoundReport("adverse_quartic", True, A1, (cond,), extras)


def universal_report(d: float) -> BoundReport:
    """12π/β(π/2) at this depth next to the depth-free value from the β floor."""
    b = beta_half(d)
    value = 12.0 * math.pi / b
    conds = (
        _below("beta_floor_below_beta_half", BETA_FLOOR, b),
        _below("bound_below_104", value, 104.0),
    )
    return BoundReport("universal_corollary", True, value, conds,
                       {"beta_half": b, "floor_bound": 12.0 * math.pi / BETA_FLOOR})


def evaluate_all(params: PhysicalParams, *, N: float | None = None, M: float | None = None,
                 f2_avg: float | None = None, epsilon: float = 0.1) -> list[BoundReport]:
    """Every route that applies to the sign of gamma.

    With ``f2_avg`` None the a-priori worst case [f²] = 0 is used.
    """
    if params.gamma <= 0:
        return [favorable_report(params.g, params.d, params.gamma)]
    f2 = 0.0 if f2_avg is None else f2_avg
    out = []
    if N is not None:
        out.append(adverse_quadratic_bound(adverse_DEF(params, f2, N)))
        out.append(smallness_N(params, N))
    if M is not None:
        out.append(adverse_quartic_bound(params, M, epsilon, f2))
        out.append(smallness_M(params, M))
    out.append(universal_report(params.d))
    return out
