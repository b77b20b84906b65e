"""Periodic surface functions and the linear nonlocal operators of a strip.

A 2π-periodic real function is stored both as values on a uniform grid and
as real Fourier coefficients

    f(x) = a_0 + sum_{k>=1} (a_k cos kx + b_k sin kx).

Every operator here is a Fourier multiplier:

    hilbert         cos kx -> coth(kd) sin kx,   sin kx -> -coth(kd) cos kx
    hilbert_prime   cos kx -> k coth(kd) cos kx, sin kx -> k coth(kd) sin kx
    dirichlet_G     1 -> 1/d, otherwise as hilbert_prime

The Nyquist mode of a grid carries no sine information, so all odd-order
operators (derivative, hilbert) map it to zero.  The kernel ``beta`` of the
hilbert transform is evaluated from its image-sum series and used by
``pv_convolve`` as an independent principal-value quadrature route.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "Grid",
    "SurfaceProfile",
    "KernelTable",
    "analyze",
    "from_coeffs",
    "synthesize",
    "resample",
    "evaluate",
    "differentiate",
    "multiply",
    "hilbert",
    "hilbert_prime",
    "dirichlet_G",
    "beta_eval",
    "beta_prime_eval",
    "beta_series",
    "beta_prime_series",
    "kernel_table",
    "pv_convolve",
    "write_kernel_csv",
    "read_kernel_csv",
    "hilbert_values",
    "derivative_values",
    "hprime_values",
    "coth_multiplier",
]

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class SingularityError(ValueError):
    """The kernel was evaluated at one of its poles."""


def _check_depth(d: float) -> None:
    if not (d > 0.0) or not math.isfinite(d):
        raise ParameterError(f"conformal depth must be positive and finite, got {d!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform collocation grid x_j = 2πj/n on [0, 2π)."""

    n_points: int

    def __post_init__(self):
        n = self.n_points
        if int(n) != n or n < 16 or n % 2:
            raise ParameterError(f"n_points must be an even integer >= 16, got {n!r}")

    @property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_points) / self.n_points

    @property
    def n_modes(self) -> int:
        return self.n_points // 2

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_points

    @property
    def trough_index(self) -> int:
        return self.n_points // 2


@dataclass(frozen=True, eq=False)
class SurfaceProfile:
    """Grid values of a periodic function together with its Fourier coefficients.

    ``cos_coeffs`` and ``sin_coeffs`` have length ``n_points // 2 + 1``;
    ``sin_coeffs[0]`` and the Nyquist sine entry are always zero.
    ``mean_dropped`` records that an operator discarded a nonzero mean.
    """

    grid: Grid
    values: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    parity: str = "general"
    mean_dropped: bool = field(default=False)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    @property
    def mean(self) -> float:
        return float(self.cos_coeffs[0])

    def at_crest(self) -> float:
        return float(self.values[0])

    def at_trough(self) -> float:
        return float(self.values[self.grid.trough_index])

    def __add__(self, other):
        if isinstance(other, SurfaceProfile):
            _same_grid(self, other)
            return analyze(self.values + other.values, self.grid)
        return analyze(self.values + float(other), self.grid)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SurfaceProfile):
            _same_grid(self, other)
            return analyze(self.values - other.values, self.grid)
        return analyze(self.values - float(other), self.grid)

    def __rsub__(self, other):
        return analyze(float(other) - self.values, self.grid)

    def __mul__(self, c):
        if isinstance(c, SurfaceProfile):
            return multiply(self, c)
        return analyze(self.values * float(c), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return analyze(-self.values, self.grid)


def _same_grid(p: SurfaceProfile, q: SurfaceProfile) -> None:
    if p.grid != q.grid:
        raise ParameterError("profiles live on different grids")


# ---------------------------------------------------------------------------
# coefficient <-> value conversion

def _hat_to_coeffs(hat: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    a = 2.0 * hat.real / n
    b = -2.0 * hat.imag / n
    a[..., 0] *= 0.5
    b[..., 0] = 0.0
    a[..., n // 2] *= 0.5
    b[..., n // 2] = 0.0
    return a, b


def _coeffs_to_hat(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    hat = (n / 2.0) * (np.asarray(a, dtype=float) - 1j * np.asarray(b, dtype=float))
    hat[..., 0] *= 2.0
    hat[..., n // 2] = n * np.asarray(a)[..., n // 2]
    return hat


def _is_even(values: np.ndarray) -> bool:
    mirrored = np.roll(values[::-1], 1)
    scale = max(1.0, float(np.max(np.abs(values))))
    return bool(np.max(np.abs(values - mirrored)) <= 1e-13 * scale)


def analyze(values, grid: Grid | None = None) -> SurfaceProfile:
    """Fourier-analyze node values into a profile.

    Raises ``ParameterError`` if the length does not match ``grid``.
    """
    values = np.array(values, dtype=float)
    if values.ndim != 1:
        raise ParameterError("values must be a one-dimensional array")
    if grid is None:
        grid = Grid(len(values))
    if len(values) != grid.n_points:
        raise ParameterError(
            f"expected {grid.n_points} node values, got {len(values)}"
        )
    a, b = _hat_to_coeffs(np.fft.rfft(values), grid.n_points)
    parity = "even" if _is_even(values) else "general"
    if parity == "even":
        b = np.zeros_like(b)
    values.setflags(write=False)
    a.setflags(write=False)
    b.setflags(write=False)
    return SurfaceProfile(grid, values, a, b, parity)


def from_coeffs(grid: Grid, cos_coeffs, sin_coeffs=None, *, mean_dropped=False) -> SurfaceProfile:
    """Build a profile from (possibly truncated) coefficient vectors."""
    m = grid.n_modes + 1
    a = np.zeros(m)
    b = np.zeros(m)
    ca = np.asarray(cos_coeffs, dtype=float)
    if len(ca) > m:
        raise ParameterError(f"at most {m} cosine coefficients fit on this grid")
    a[: len(ca)] = ca
    if sin_coeffs is not None:
        sb = np.asarray(sin_coeffs, dtype=float)
        if len(sb) > m:
            raise ParameterError(f"at most {m} sine coefficients fit on this grid")
        b[: len(sb)] = sb
    b[0] = 0.0
    b[-1] = 0.0
    values = synthesize(a, b, grid.n_points)
    parity = "even" if not np.any(b) else "general"
    for arr in (values, a, b):
        arr.setflags(write=False)
    return SurfaceProfile(grid, values, a, b, parity, mean_dropped)


def synthesize(cos_coeffs, sin_coeffs=None, n_points: int | None = None) -> np.ndarray:
    """Node values of a trigonometric polynomial on ``n_points`` nodes.

    Modes above ``n_points // 2`` are rejected; pass a larger grid to
    evaluate without truncation.
    """
    a = np.asarray(cos_coeffs, dtype=float)
    b = np.zeros_like(a) if sin_coeffs is None else np.asarray(sin_coeffs, dtype=float)
    if n_points is None:
        n_points = 2 * (len(a) - 1)
    m = n_points // 2 + 1
    if len(a) > m and np.any(a[m:]) or len(b) > m and np.any(b[m:]):
        raise ParameterError("coefficients exceed the Nyquist mode of the target grid")
    aa = np.zeros(m)
    bb = np.zeros(m)
    aa[: min(m, len(a))] = a[:m]
    bb[: min(m, len(b))] = b[:m]
    return np.fft.irfft(_coeffs_to_hat(aa, bb, n_points), n_points)


def resample(p: SurfaceProfile, n_points: int) -> SurfaceProfile:
    """Spectral interpolation (or truncation) of ``p`` onto another grid."""
    grid = Grid(n_points)
    m = grid.n_modes + 1
    a = np.zeros(m)
    b = np.zeros(m)
    k = min(m, len(p.cos_coeffs))
    a[:k] = p.cos_coeffs[:k]
    b[:k] = p.sin_coeffs[:k]
    b[-1] = 0.0
    return from_coeffs(grid, a, b, mean_dropped=p.mean_dropped)


def evaluate(p: SurfaceProfile, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``p`` at arbitrary points."""
    x = np.asarray(x, dtype=float)
    k = np.arange(len(p.cos_coeffs))
    kx = np.multiply.outer(x, k)
    return np.cos(kx) @ p.cos_coeffs + np.sin(kx) @ p.sin_coeffs


# ---------------------------------------------------------------------------
# array-level multipliers (batched along leading axes, grid on the last axis)

def coth_multiplier(n_points: int, d: float) -> np.ndarray:
    """coth(kd) for k = 0..n/2, with the mean and Nyquist entries set to zero."""
    _check_depth(d)
    k = np.arange(n_points // 2 + 1, dtype=float)
    mult = np.zeros_like(k)
    mult[1:] = 1.0 / np.tanh(k[1:] * d)
    mult[-1] = 0.0
    return mult


def _wavenumbers(n_points: int) -> np.ndarray:
    k = np.arange(n_points // 2 + 1, dtype=float)
    k[-1] = 0.0
    return k


def hilbert_values(values: np.ndarray, d: float) -> np.ndarray:
    n = values.shape[-1]
    hat = np.fft.rfft(values, axis=-1)
    return np.fft.irfft(-1j * coth_multiplier(n, d) * hat, n, axis=-1)


def derivative_values(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    hat = np.fft.rfft(values, axis=-1)
    return np.fft.irfft(1j * _wavenumbers(n) * hat, n, axis=-1)


def second_derivative_values(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    hat = np.fft.rfft(values, axis=-1)
    k = _wavenumbers(n)
    return np.fft.irfft(-(k**2) * hat, n, axis=-1)


def hprime_values(values: np.ndarray, d: float) -> np.ndarray:
    n = values.shape[-1]
    hat = np.fft.rfft(values, axis=-1)
    return np.fft.irfft(_wavenumbers(n) * coth_multiplier(n, d) * hat, n, axis=-1)


# ---------------------------------------------------------------------------
# profile-level operators

def _apply_multiplier(p: SurfaceProfile, cos_to_cos, sin_to_sin, cos_to_sin, sin_to_cos,
                      mean_dropped=False) -> SurfaceProfile:
    a, b = p.cos_coeffs, p.sin_coeffs
    new_a = cos_to_cos * a + sin_to_cos * b
    new_b = cos_to_sin * a + sin_to_sin * b
    return from_coeffs(p.grid, new_a, new_b, mean_dropped=mean_dropped)


def differentiate(p: SurfaceProfile) -> SurfaceProfile:
    k = _wavenumbers(p.n_points)
    zero = np.zeros_like(k)
    return _apply_multiplier(p, zero, zero, -k, k)


def hilbert(p: SurfaceProfile, d: float) -> SurfaceProfile:
    """Strip hilbert transform of depth ``d``.

    A nonzero mean (above roundoff) is discarded and flagged through ``mean_dropped``.
    """
    c = coth_multiplier(p.n_points, d)
    zero = np.zeros_like(c)
    scale = float(np.max(np.abs(p.values))) if p.values.size else 0.0
    dropped = abs(p.mean) > 1e-14 * max(scale, 1e-300)
    return _apply_multiplier(p, zero, zero, c, -c, mean_dropped=dropped)


def hilbert_prime(p: SurfaceProfile, d: float) -> SurfaceProfile:
    """H' = H d/dx = d/dx H, the symmetric multiplier k coth(kd)."""
    c = _wavenumbers(p.n_points) * coth_multiplier(p.n_points, d)
    zero = np.zeros_like(c)
    return _apply_multiplier(p, c, c, zero, zero)


def dirichlet_G(p: SurfaceProfile, d: float) -> SurfaceProfile:
    """Normal derivative at y=0 of the harmonic extension vanishing at y=-d."""
    c = _wavenumbers(p.n_points) * coth_multiplier(p.n_points, d)
    c[0] = 1.0 / d
    zero = np.zeros_like(c)
    return _apply_multiplier(p, c, c, zero, zero)


def multiply(p: SurfaceProfile, q: SurfaceProfile, n_out: int | None = None) -> SurfaceProfile:
    """Pointwise product computed on a 2x zero-padded grid.

    The product is returned on ``n_out`` nodes (default: the input grid), so
    modes above the output Nyquist are truncated rather than aliased.
    """
    _same_grid(p, q)
    n = p.n_points
    fine = 2 * n
    pv = synthesize(p.cos_coeffs, p.sin_coeffs, fine)
    qv = synthesize(q.cos_coeffs, q.sin_coeffs, fine)
    prod = analyze(pv * qv, Grid(fine))
    return resample(prod, n_out or n)


# ---------------------------------------------------------------------------
# the kernel beta

@dataclass(frozen=True)
class _SeriesResult:
    value: np.ndarray
    terms: int
    tail_bound: float


def _reduce(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    r = np.mod(s, TWO_PI)
    if np.any(r == 0.0):
        raise SingularityError("beta is singular at integer multiples of 2π")
    return r


def beta_series(s, d: float, tol: float = 1e-14, max_terms: int = 100_000) -> _SeriesResult:
    """Evaluate beta(s) by the symmetric image series.

    Images n and -n are paired; summation stops once a rigorous geometric
    bound on the remaining pairs falls below ``tol`` times the current
    magnitude.  Returns value, number of pairs used and the final tail bound.
    """
    _check_depth(d)
    s = np.asarray(s, dtype=float)
    r = _reduce(s)
    a = math.pi / (2.0 * d)
    total = 1.0 / np.tanh(a * r)
    ratio = math.exp(-4.0 * math.pi * a) if 4.0 * math.pi * a < 700 else 0.0
    n = 0
    tail = 0.0
    while True:
        n += 1
        plus = 2.0 * a * (r + TWO_PI * n)
        minus = 2.0 * a * (TWO_PI * n - r)
        with np.errstate(over="ignore"):
            total = total + 2.0 / np.expm1(plus) - 2.0 / np.expm1(minus)
        # sum over j > n of 4/expm1(2a(2πj - r)), a decreasing geometric-type tail
        y = 2.0 * a * (TWO_PI * (n + 1) - r)
        with np.errstate(over="ignore"):
            tail_terms = 4.0 * np.exp(-y) / (-np.expm1(-y)) / (1.0 - ratio)
        value = -r / d + (math.pi / d) * total
        tail = float(np.max((math.pi / d) * tail_terms)) if tail_terms.size else 0.0
        scale = np.maximum(np.abs(value), 1e-300)
        if np.all((math.pi / d) * tail_terms <= tol * scale) or n >= max_terms:
            break
    return _SeriesResult(value, n, tail)


def beta_prime_series(s, d: float, tol: float = 1e-14, max_terms: int = 100_000) -> _SeriesResult:
    """Evaluate beta'(s) from -beta'(s) = 1/d + (π²/2d²) Σ csch²(π(s - 2πn)/2d)."""
    _check_depth(d)
    r = _reduce(s)
    a = math.pi / (2.0 * d)

    def csch2(y):
        y = np.abs(y)
        with np.errstate(over="ignore"):
            return 4.0 * np.exp(-2.0 * y) / np.expm1(-2.0 * y) ** 2

    total = csch2(a * r)
    ratio = math.exp(-4.0 * math.pi * a) if 4.0 * math.pi * a < 700 else 0.0
    n = 0
    while True:
        n += 1
        total = total + csch2(a * (r + TWO_PI * n)) + csch2(a * (TWO_PI * n - r))
        y = a * (TWO_PI * (n + 1) - r)
        tail_terms = 2.0 * csch2(y) / (1.0 - ratio)
        value = -(1.0 / d + (math.pi**2 / (2.0 * d * d)) * total)
        tail_abs = (math.pi**2 / (2.0 * d * d)) * tail_terms
        tail = float(np.max(tail_abs)) if np.size(tail_abs) else 0.0
        if np.all(tail_abs <= tol * np.abs(value)) or n >= max_terms:
            break
    return _SeriesResult(value, n, tail)


def beta_eval(s, d: float, tol: float = 1e-14):
    """beta(s); scalar in, scalar out."""
    res = beta_series(s, d, tol)
    return float(res.value) if np.ndim(res.value) == 0 else res.value


def beta_prime_eval(s, d: float, tol: float = 1e-14):
    res = beta_prime_series(s, d, tol)
    return float(res.value) if np.ndim(res.value) == 0 else res.value


@dataclass(frozen=True)
class KernelTable:
    depth: float
    s: np.ndarray
    beta: np.ndarray
    beta_prime: np.ndarray
    truncation_terms: int
    tail_bound: float

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.s.tolist(), self.beta.tolist(), self.beta_prime.tolist()))


def kernel_table(d: float, s, tol: float = 1e-14) -> KernelTable:
    s = np.asarray(s, dtype=float)
    b = beta_series(s, d, tol)
    bp = beta_prime_series(s, d, tol)
    return KernelTable(
        depth=float(d),
        s=s,
        beta=np.asarray(b.value, dtype=float),
        beta_prime=np.asarray(bp.value, dtype=float),
        truncation_terms=max(b.terms, bp.terms),
        tail_bound=max(b.tail_bound, bp.tail_bound),
    )


KERNEL_COLUMNS = ("s", "beta", "beta_prime", "truncation_terms", "tail_bound")


def write_kernel_csv(table: KernelTable, path, header_lines: Iterable[str] = ()) -> None:
    """Write a kernel table; floats use 17 significant digits."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KERNEL_COLUMNS)
        for s, b, bp in zip(table.s, table.beta, table.beta_prime):
            w.writerow([f"{s:.17g}", f"{b:.17g}", f"{bp:.17g}",
                        table.truncation_terms, f"{table.tail_bound:.17g}"])


def read_kernel_csv(path, depth: float) -> KernelTable:
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or tuple(reader.fieldnames) != KERNEL_COLUMNS:
        raise ParameterError(f"unexpected kernel table columns: {reader.fieldnames}")
    for row in reader:
        rows.append(row)
    if not rows:
        raise ParameterError("empty kernel table")
    s = np.array([float(r["s"]) for r in rows])
    return KernelTable(
        depth=float(depth),
        s=s,
        beta=np.array([float(r["beta"]) for r in rows]),
        beta_prime=np.array([float(r["beta_prime"]) for r in rows]),
        truncation_terms=max(int(r["truncation_terms"]) for r in rows),
        tail_bound=max(float(r["tail_bound"]) for r in rows),
    )


# ---------------------------------------------------------------------------
# principal-value route to the hilbert transform

def pv_convolve(p: SurfaceProfile, d: float, n_quad: int | None = None,
                tol: float = 1e-14) -> SurfaceProfile:
    """(1/2π) p.v. ∫ beta(x - s) p(s) ds by a paired midpoint rule.

    With u = x - s, contributions at u and -u are combined as
    beta(u) (p(x-u) - p(x+u)) / 2, which is bounded at u = 0.  The midpoint
    nodes u_j = (j + 1/2) h never touch the pole.  ``n_quad`` must be a
    multiple of the profile grid size; the default is 4x, at least 512.
    """
    _check_depth(d)
    n = p.n_points
    if n_quad is None:
        n_quad = n * max(4, -(-512 // n))
    if n_quad % n:
        raise ParameterError("n_quad must be a multiple of the profile grid size")
    h = TWO_PI / n_quad
    half = n_quad // 2
    u = (np.arange(half) + 0.5) * h
    kern = np.asarray(beta_series(u, d, tol).value)
    # p on the half-shifted fine grid: F[k] = p(k h - h/2)
    k = np.arange(len(p.cos_coeffs))
    phase = np.exp(-0.5j * k * h)
    m = n_quad // 2 + 1
    a = np.zeros(m)
    b = np.zeros(m)
    a[: len(k)] = p.cos_coeffs
    b[: len(k)] = p.sin_coeffs
    hat = _coeffs_to_hat(a, b, n_quad)
    hat[: len(k)] *= phase
    shifted = np.fft.irfft(hat, n_quad)
    stride = n_quad // n
    i = np.arange(n)[:, None] * stride
    j = np.arange(half)[None, :]
    minus = shifted[(i - j) % n_quad]          # p(x_i - u_j)
    plus = shifted[(i + j + 1) % n_quad]       # p(x_i + u_j)
    out = (h / (2.0 * math.pi)) * ((minus - plus) @ kern)
    return analyze(out, p.grid)
