"""Bifurcation curve of symmetric periodic waves, traced from laminar flow by continuation.

Unknowns are the cosine coefficients a_1..a_K of eta (K = n/2 - 1, the mean
a_0 = d pinned) together with Q and m.  The equations are the cosine modes
1..K of the Babenko residual plus the scalar equal-averages condition, which
leaves a one-parameter family closed by a pseudo-arclength constraint.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .formulation import (
    FINE_FACTOR,
    PhysicalParams,
    ResidualReport,
    amplitude_of,
    residual_report,
    slope_and_convexity,
    surface_terms,
)
from .spectral import (
    Grid,
    SurfaceProfile,
    derivative_values,
    from_coeffs,
    hilbert_values,
    second_derivative_values,
    synthesize,
)

log = logging.getLogger(__name__)

STOP_KINDS = (
    "norm_blowup",
    "flux_energy_blowup",
    "stagnation_approach",
    "self_intersection",
    "max_points",
    "step_collapse",
    "resolution_limit",
    "schedule_end",
)


class SolverError(RuntimeError):
    pass


class DivergenceError(SolverError):
    def __init__(self, msg, last_residual=float("nan")):
        super().__init__(msg)
        self.last_residual = last_residual


class DegeneracyError(SolverError):
    """The iterate lost admissibility (f = Q/2g - eta no longer positive)."""


class ResolutionError(SolverError):
    """Resolved modes converged but the unresolved residual exceeds tolerance."""

    def __init__(self, msg, full_residual):
        super().__init__(msg)
        self.full_residual = full_residual


class BifurcationNotFound(SolverError):
    def __init__(self, msg, scan):
        super().__init__(msg)
        self.scan = scan


@dataclass
class ContinuationConfig:
    step: float = 1e-3
    step_min: float = 1e-6
    step_max: float = 0.05
    newton_tol: float = 1e-10
    newton_max_iters: int = 15
    max_points: int = 500
    fd_step: float = 1e-7
    norm_blowup: float = 1e3
    flux_energy_blowup: float = 1e4
    stagnation_fraction: float = 1e-3

    def __post_init__(self):
        if not (0 < self.step_min <= self.step <= self.step_max):
            raise ValueError("need 0 < step_min <= step <= step_max")
        if self.newton_tol < 1e-13:
            raise ValueError("newton_tol below 1e-13 is not attainable in double precision")


@dataclass(frozen=True)
class StoppingReason:
    kind: str
    evidence: float
    detail: str = ""

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stopping reason {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "evidence": self.evidence, "detail": self.detail}


@dataclass
class BranchPoint:
    params: PhysicalParams
    eta: SurfaceProfile
    arclength_s: float
    amplitude: float
    slope_N: float
    convexity_M: float
    residuals: ResidualReport
    tangent: Optional[np.ndarray] = field(default=None, repr=False)
    newton_iters: int = 0

    @property
    def n_points(self) -> int:
        return self.eta.n_points

    def unknowns(self) -> np.ndarray:
        K = self.eta.n_points // 2 - 1
        return np.concatenate([self.eta.cos_coeffs[1 : K + 1], [self.params.Q, self.params.m]])

    def min_stagnation_margin(self) -> float:
        """min over the surface of Q - 2 g eta."""
        return float(np.min(self.params.Q - 2 * self.params.g * _fine(self.eta)))


def _fine(p: SurfaceProfile) -> np.ndarray:
    return synthesize(p.cos_coeffs, p.sin_coeffs, FINE_FACTOR * p.n_points)


# ---------------------------------------------------------------------------
# laminar flow

def laminar_state(g: float, d: float, gamma: float, m: float, n_points: int = 64):
    """Bernoulli constant making the flat surface eta = d an exact solution."""
    Q = (m / d - gamma * d / 2.0) ** 2 + 2.0 * g * d
    params = PhysicalParams(g=g, d=d, gamma=gamma, m=m, Q=Q)
    eta = from_coeffs(Grid(n_points), [d])
    return params, eta


# ---------------------------------------------------------------------------
# discretized system

class WaveSystem:
    """F(x) for x = (a_1..a_K, Q, m) at fixed (g, d, gamma)."""

    def __init__(self, g: float, d: float, gamma: float, n_points: int):
        Grid(n_points)
        self.g, self.d, self.gamma = float(g), float(d), float(gamma)
        self.n_points = n_points
        self.K = n_points // 2 - 1
        self.M = FINE_FACTOR * n_points
        self.size = self.K + 2

    def eta_fine(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.atleast_2d(coeffs)
        hat = np.zeros(coeffs.shape[:-1] + (self.M // 2 + 1,), dtype=complex)
        hat[..., 0] = self.M * self.d
        hat[..., 1 : self.K + 1] = (self.M / 2.0) * coeffs
        return np.fft.irfft(hat, self.M, axis=-1)

    def evaluate(self, x: np.ndarray):
        """Projected residual vector(s), full fine-grid sup-norm(s) and min(Q - 2 g eta)."""
        x = np.atleast_2d(x)
        eta = self.eta_fine(x[:, : self.K])
        Q, m = x[:, self.K], x[:, self.K + 1]
        res, avg, _, _ = surface_terms(eta, Q, m, self.g, self.d, self.gamma)
        hat = np.fft.rfft(res, axis=-1)
        proj = (2.0 / self.M) * hat[:, 1 : self.K + 1].real
        F = np.concatenate([proj, avg[:, None]], axis=1)
        sup = np.max(np.abs(res), axis=1)
        stag = np.min(Q[:, None] - 2.0 * self.g * eta, axis=1)
        return F, sup, np.abs(avg), stag

    def jacobian(self, x: np.ndarray, free: np.ndarray, F0: np.ndarray, fd_step: float) -> np.ndarray:
        """Forward-difference Jacobian columns for the ``free`` unknowns."""
        h = fd_step * (1.0 + np.abs(x[free]))
        X = np.repeat(x[None, :], len(free), axis=0)
        X[np.arange(len(free)), free] += h
        F, _, _, _ = self.evaluate(X)
        return ((F - F0[None, :]) / h[:, None]).T

    def pack(self, params: PhysicalParams, eta: SurfaceProfile) -> np.ndarray:
        c = np.zeros(self.K)
        k = min(self.K, len(eta.cos_coeffs) - 1)
        c[:k] = eta.cos_coeffs[1 : k + 1]
        return np.concatenate([c, [params.Q, params.m]])

    def unpack(self, x: np.ndarray) -> tuple[PhysicalParams, SurfaceProfile]:
        params = PhysicalParams(g=self.g, d=self.d, gamma=self.gamma, m=float(x[self.K + 1]),
                                Q=float(x[self.K]))
        eta = from_coeffs(Grid(self.n_points), np.concatenate([[self.d], x[: self.K]]))
        return params, eta


@dataclass
class _NewtonResult:
    x: np.ndarray
    iterations: int
    jacobian: np.ndarray
    sup: float
    avg: float


def _newton(system: WaveSystem, x0: np.ndarray, free: np.ndarray,
            extra: Sequence[tuple[np.ndarray, float]], config: ContinuationConfig) -> _NewtonResult:
    """Newton with forward-difference Jacobians and linear side constraints.

    ``extra`` holds rows (c, v) imposing c . x = v.  The Jacobian is reused
    while the residual contracts by at least a factor 10 per iteration.
    """
    tol = config.newton_tol
    x = np.array(x0, dtype=float)
    rows = np.array([c for c, _ in extra]).reshape(len(extra), system.size)
    vals = np.array([v for _, v in extra], dtype=float)
    J = None
    prev_norm = math.inf
    last = math.nan
    fresh = False
    for it in range(config.newton_max_iters + 1):
        F, sup, avg, stag = system.evaluate(x)
        F, sup, avg, stag = F[0], float(sup[0]), float(avg[0]), float(stag[0])
        if not np.all(np.isfinite(F)):
            raise DivergenceError("non-finite residual", last)
        if stag <= 0.0:
            raise DegeneracyError(f"Q - 2 g eta reached {stag:.3e}; f is no longer positive")
        lin = rows @ x - vals if len(extra) else np.zeros(0)
        norm = max(float(np.max(np.abs(F))), float(np.max(np.abs(lin), initial=0.0)))
        last = max(sup, avg)
        if sup < tol and avg < tol and np.all(np.abs(lin) < tol):
            if J is None:
                J = system.jacobian(x, free, F, config.fd_step)
            return _NewtonResult(x, it, J, sup, avg)
        # The projected system is solved but modes above K still leave a
        # full-grid residual: more unknowns are needed, not more iterations.
        resolved = norm < 1e-2 * tol or (fresh and norm < tol and norm > 0.5 * prev_norm and norm < 0.1 * sup)
        if resolved and sup >= tol:
            raise ResolutionError(
                f"resolved residual {norm:.2e} but full residual {sup:.2e}", sup)
        if it == config.newton_max_iters:
            break
        if norm > 1e6 * max(prev_norm, 1.0) and it > 0:
            raise DivergenceError("residual blew up", last)
        fresh = J is None or norm > 0.1 * prev_norm
        if fresh:
            J = system.jacobian(x, free, F, config.fd_step)
        A = np.vstack([J, rows[:, free]]) if len(extra) else J
        rhs = -np.concatenate([F, lin])
        try:
            dx = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise DivergenceError(f"singular Newton matrix: {exc}", last) from exc
        x[free] += dx
        prev_norm = norm
    raise DivergenceError(f"no convergence in {config.newton_max_iters} iterations", last)


# ---------------------------------------------------------------------------
# branch points and Newton front end

def make_point(system: WaveSystem, x: np.ndarray, s: float, tangent=None, iters=0) -> BranchPoint:
    params, eta = system.unpack(x)
    N, M = slope_and_convexity(eta)
    return BranchPoint(
        params=params,
        eta=eta,
        arclength_s=float(s),
        amplitude=amplitude_of(eta),
        slope_N=N,
        convexity_M=M,
        residuals=residual_report(params, eta),
        tangent=None if tangent is None else np.array(tangent, dtype=float),
        newton_iters=iters,
    )


def newton_solve(initial: BranchPoint, free_params: Sequence[str] = ("Q",),
                 config: ContinuationConfig | None = None,
                 constraint: tuple[np.ndarray, float] | None = None) -> BranchPoint:
    """Converge ``initial`` onto a solution.

    The cosine modes are always free.  ``free_params`` picks which of Q and m
    are released; releasing both requires one linear ``constraint`` (c, v)
    with c . x = v on the unknown vector.
    """
    config = config or ContinuationConfig()
    p = initial.params
    system = WaveSystem(p.g, p.d, p.gamma, initial.eta.n_points)
    x0 = system.pack(p, initial.eta)
    free = list(range(system.K))
    names = {"Q": system.K, "m": system.K + 1}
    for name in free_params:
        if name not in names:
            raise ValueError(f"free parameter must be 'Q' or 'm', got {name!r}")
        free.append(names[name])
    extra = [constraint] if constraint is not None else []
    if len(free) != system.K + 1 + len(extra):
        raise ValueError("system is not square: release one parameter per constraint")
    res = _newton(system, x0, np.array(free), extra, config)
    return make_point(system, res.x, initial.arclength_s, initial.tangent, res.iterations)


# ---------------------------------------------------------------------------
# bifurcation from laminar flow

@dataclass(frozen=True)
class Bifurcation:
    m: float
    Q: float
    k: int
    sigma_min: float
    sigma_max: float
    scan: list


def _laminar_jacobian(g, d, gamma, m, n_points, h=1e-6):
    system = WaveSystem(g, d, gamma, n_points)
    params, eta = laminar_state(g, d, gamma, m, n_points)
    x0 = system.pack(params, eta)
    K = system.K
    X = np.repeat(x0[None, :], 2 * K, axis=0)
    X[np.arange(K), np.arange(K)] += h
    X[K + np.arange(K), np.arange(K)] -= h
    F, _, _, _ = system.evaluate(X)
    return ((F[:K, :K] - F[K:, :K]) / (2 * h)).T


def mode_singular_values(g, d, gamma, m, n_points=32):
    """Signed singular values of the laminar Jacobian keyed by dominant mode.

    The sign is that of u . v for the singular triplet, so it changes when
    the corresponding eigen-direction passes through zero.
    """
    J = _laminar_jacobian(g, d, gamma, m, n_points)
    U, S, Vt = np.linalg.svd(J)
    out = {}
    for j in range(len(S)):
        k = int(np.argmax(np.abs(Vt[j]))) + 1
        signed = S[j] * np.sign(U[:, j] @ Vt[j])
        if k not in out or abs(signed) < abs(out[k]):
            out[k] = float(signed)
    return out, S


def find_bifurcation(g: float, d: float, gamma: float, k: int = 1,
                     n_points: int = 32, m_window: tuple[float, float] | None = None,
                     n_scan: int = 400) -> Bifurcation:
    """Locate the mass flux where the laminar Jacobian loses rank in mode ``k``."""
    if m_window is None:
        scale = d * (math.sqrt(g * d) + abs(gamma) * d) + 1.0
        m_window = (-1e-4 * scale, -50.0 * scale)
    lo, hi = sorted(abs(v) for v in m_window)
    grid = -np.geomspace(lo, hi, n_scan)

    def phi(m):
        vals, _ = mode_singular_values(g, d, gamma, m, n_points)
        return vals.get(k, math.nan)

    scan = [(float(m), phi(m)) for m in grid]
    for (m1, v1), (m2, v2) in zip(scan, scan[1:]):
        if math.isfinite(v1) and math.isfinite(v2) and v1 * v2 < 0:
            m_star = brentq(phi, m2, m1, xtol=1e-15 * abs(m1), rtol=1e-15, maxiter=200)
            break
    else:
        raise BifurcationNotFound(
            f"no sign change of mode-{k} singular value for m in [{-hi:g}, {-lo:g}]", scan)
    params, _ = laminar_state(g, d, gamma, m_star)
    _, S = mode_singular_values(g, d, gamma, m_star, n_points)
    return Bifurcation(m=float(m_star), Q=params.Q, k=k, sigma_min=float(S.min()),
                       sigma_max=float(S.max()), scan=scan)


# ---------------------------------------------------------------------------
# termination alternatives

def polyline_self_intersects(xi: np.ndarray, eta: np.ndarray) -> int:
    """Number of proper crossings between non-adjacent segments of a polyline."""
    p = np.stack([xi, eta], axis=1)
    a, b = p[:-1], p[1:]
    n = len(a)
    count = 0
    for i in range(n - 2):
        c, dd = a[i + 2 :], b[i + 2 :]
        if i == 0 and np.allclose(p[0], p[-1]):
            c, dd = c[:-1], dd[:-1]
        if not len(c):
            continue
        r = b[i] - a[i]
        s = dd - c
        den = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = c - a[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / den
            u = (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / den
        hit = (den != 0) & (t > 0) & (t < 1) & (u > 0) & (u < 1)
        count += int(np.count_nonzero(hit))
    return count


def surface_curve(eta: SurfaceProfile, d: float, factor: int = 8):
    """(xi_0, eta_0) on a fine grid, with xi_0' = 1 + H(eta_0')."""
    n = factor * eta.n_points
    ev = synthesize(eta.cos_coeffs, eta.sin_coeffs, n)
    x = 2 * math.pi * np.arange(n) / n
    xi = x + hilbert_values(ev, d)
    return x, xi, ev


def self_intersection_evidence(eta: SurfaceProfile, d: float, factor: int = 8) -> tuple[float, int]:
    """min xi_0' and, when it is not positive, the polyline crossing count."""
    n = factor * eta.n_points
    ev = synthesize(eta.cos_coeffs, eta.sin_coeffs, n)
    xip = 1.0 + hilbert_values(derivative_values(ev), d)
    min_xip = float(np.min(xip))
    if min_xip > 0.0:
        return min_xip, 0
    _, xi, _ = surface_curve(eta, d, factor)
    # one period plus its right neighbour, so crossings across the period seam count too
    XI = np.concatenate([xi, xi + 2 * math.pi, [xi[0] + 4 * math.pi]])
    ET = np.concatenate([ev, ev, [ev[0]]])
    return min_xip, polyline_self_intersects(XI, ET)


def detect_termination(point: BranchPoint, history: Sequence[BranchPoint] = (),
                       config: ContinuationConfig | None = None) -> Optional[StoppingReason]:
    config = config or ContinuationConfig()
    p = point.params
    ev = _fine(point.eta)
    c2 = float(np.max(np.abs(ev) + np.abs(derivative_values(ev)) + np.abs(second_derivative_values(ev))))
    if c2 > config.norm_blowup:
        return StoppingReason("norm_blowup", c2, f"max |eta|+|eta'|+|eta''| = {c2:.6g}")
    fe = abs(p.m) + p.Q
    if fe > config.flux_energy_blowup:
        return StoppingReason("flux_energy_blowup", fe, f"|m| + Q = {fe:.6g}")
    stag = float(np.min(p.Q - 2.0 * p.g * ev))
    if stag < config.stagnation_fraction * p.Q:
        return StoppingReason("stagnation_approach", stag, f"min(Q - 2 g eta) = {stag:.6g}")
    min_xip, crossings = self_intersection_evidence(point.eta, p.d)
    if crossings:
        return StoppingReason("self_intersection", float(crossings),
                              f"min xi' = {min_xip:.6g}, {crossings} crossings")
    return None


# ---------------------------------------------------------------------------
# continuation

@dataclass
class BranchResult:
    points: list
    stop: StoppingReason
    bifurcation: Bifurcation

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([pt.amplitude for pt in self.points])


def _tangent(J: np.ndarray, t_prev: np.ndarray) -> np.ndarray:
    A = np.vstack([J, t_prev[None, :]])
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    t = np.linalg.solve(A, rhs)
    return t / np.linalg.norm(t)


def continue_branch(g: float, d: float, gamma: float, config: ContinuationConfig | None = None,
                    n_points: int = 256, bifurcation: Bifurcation | None = None,
                    callback: Callable[[BranchPoint], None] | None = None,
                    schedule: Sequence[float] | None = None) -> BranchResult:
    """Trace the branch from its laminar bifurcation point until a stop fires.

    With ``schedule`` the arclength values are prescribed instead of
    adapted; a failed step then ends the run.  Used to compare runs on
    different grids at identical arclengths.
    """
    config = config or ContinuationConfig()
    bif = bifurcation or find_bifurcation(g, d, gamma)
    system = WaveSystem(g, d, gamma, n_points)
    params, eta = laminar_state(g, d, gamma, bif.m, n_points)
    x_prev = system.pack(params, eta)
    t_prev = np.zeros(system.size)
    t_prev[0] = 1.0
    free = np.arange(system.size)
    points = [make_point(system, x_prev, 0.0, t_prev)]
    if callback:
        callback(points[0])
    s = 0.0
    ds = config.step
    targets = None if schedule is None else [float(v) for v in schedule if v > 0.0]
    stop = None
    while stop is None:
        if targets is not None:
            if len(points) > len(targets):
                stop = StoppingReason("schedule_end", float(len(points)))
                break
            ds = targets[len(points) - 1] - s
        if len(points) >= config.max_points:
            stop = StoppingReason("max_points", float(len(points)))
            break
        x_pred = x_prev + ds * t_prev
        try:
            res = _newton(system, x_pred, free, [(t_prev, t_prev @ x_prev + ds)], config)
            step_norm = float(np.linalg.norm(res.x - x_prev))
            if step_norm >= 3.0 * ds:
                raise DivergenceError(f"jumped {step_norm:.3e} for step {ds:.3e}")
        except ResolutionError as exc:
            stop = StoppingReason("resolution_limit", exc.full_residual, str(exc))
            break
        except SolverError as exc:
            log.debug("step %.3e failed: %s", ds, exc)
            ds *= 0.5
            if ds < config.step_min or targets is not None:
                stop = StoppingReason("step_collapse", ds, str(exc))
            continue
        t_new = _tangent(res.jacobian, t_prev)
        s = targets[len(points) - 1] if targets is not None else s + ds
        pt = make_point(system, res.x, s, t_new, res.iterations)
        if not pt.residuals.nodal_ok:
            ds *= 0.5
            if ds < config.step_min or targets is not None:
                stop = StoppingReason("step_collapse", ds, "nodal property lost")
            continue
        points.append(pt)
        if callback:
            callback(pt)
        stop = detect_termination(pt, points, config)
        x_prev, t_prev = res.x, t_new
        if res.iterations <= 3:
            ds = min(1.5 * ds, config.step_max)
        elif res.iterations >= 7:
            ds = max(0.7 * ds, config.step_min)
    return BranchResult(points, stop, bif)


def refine_point(point: BranchPoint, n_points: int, config: ContinuationConfig | None = None) -> BranchPoint:
    """Re-solve a branch point on another grid at the same arclength position.

    The constraint t . (x - x_point) = 0 holds the new solution on the
    hyperplane through the original point normal to its branch tangent.
    """
    config = config or ContinuationConfig()
    if point.tangent is None:
        raise ValueError("point has no stored tangent")
    p = point.params
    old = WaveSystem(p.g, p.d, p.gamma, point.n_points)
    new = WaveSystem(p.g, p.d, p.gamma, n_points)
    x_old = old.pack(p, point.eta)

    def embed(v):
        out = np.zeros(new.size)
        k = min(old.K, new.K)
        out[:k] = v[:k]
        out[new.K :] = v[old.K :]
        return out

    t = embed(point.tangent)
    x0 = embed(x_old)
    res = _newton(new, x0, np.arange(new.size), [(t, float(t @ x0))], config)
    return make_point(new, res.x, point.arclength_s, None, res.iterations)


class _Reached(Exception):
    pass


def solve_amplitude(g: float, d: float, gamma: float, amplitude: float, n_points: int = 256,
                    config: ContinuationConfig | None = None,
                    bifurcation: Bifurcation | None = None) -> BranchPoint:
    """The branch point with prescribed crest-to-trough amplitude.

    Continues until the amplitude is bracketed, then solves with Q and m
    free under the linear constraint sum_k a_k (1 - (-1)^k) = amplitude.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    config = config or ContinuationConfig()
    seen: list[BranchPoint] = []

    def watch(pt):
        seen.append(pt)
        if pt.amplitude >= amplitude:
            raise _Reached

    try:
        res = continue_branch(g, d, gamma, config, n_points, bifurcation, callback=watch)
    except _Reached:
        pass
    else:
        raise SolverError(f"branch stopped ({res.stop.kind}) at amplitude "
                          f"{res.points[-1].amplitude:.6g} below the target {amplitude:.6g}")
    lo, hi = seen[-2], seen[-1]
    w = (amplitude - lo.amplitude) / (hi.amplitude - lo.amplitude)
    system = WaveSystem(g, d, gamma, n_points)
    x0 = (1 - w) * system.pack(lo.params, lo.eta) + w * system.pack(hi.params, hi.eta)
    k = np.arange(1, system.K + 1)
    c = np.concatenate([1.0 - (-1.0) ** k, [0.0, 0.0]])
    out = _newton(system, x0, np.arange(system.size), [(c, amplitude)], config)
    t = _tangent(out.jacobian, hi.tangent) if hi.tangent is not None else None
    s = lo.arclength_s + w * (hi.arclength_s - lo.arclength_s)
    return make_point(system, out.x, s, t, out.iterations)
