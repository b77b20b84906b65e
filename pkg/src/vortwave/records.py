"""Branch files: JSON lines with a header, one line per point, and a stop line.

Floats go through ``json`` (shortest round-trip repr), so a double read back
is bit-identical to the one written.  CSV summaries use %.17g.  No
timestamps are written, so equal inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
from typing import Iterable, Iterator

import numpy as np

from . import __version__
from .formulation import PhysicalParams, amplitude_of, residual_report, slope_and_convexity
from .solver import BranchPoint, StoppingReason
from .spectral import Grid, from_coeffs

SUMMARY_COLUMNS = ("s", "A", "N", "M", "Q", "m", "min_stag_margin", "residual")


class BranchFileError(ValueError):
    """A branch file could not be parsed or is internally inconsistent."""


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def point_to_dict(p: BranchPoint) -> dict:
    return {
        "kind": "point",
        "arclength_s": p.arclength_s,
        "params": p.params.to_dict(),
        "n_points": p.n_points,
        "cos_coeffs": [float(c) for c in p.eta.cos_coeffs],
        "amplitude": p.amplitude,
        "slope_N": p.slope_N,
        "convexity_M": p.convexity_M,
        "min_stag_margin": p.min_stagnation_margin(),
        "residuals": p.residuals.to_dict(),
        "newton_iters": p.newton_iters,
        "tangent": None if p.tangent is None else [float(v) for v in p.tangent],
    }


def point_from_dict(rec: dict) -> BranchPoint:
    """Rebuild a point from its coefficients; diagnostics are recomputed, not trusted."""
    try:
        params = PhysicalParams(**rec["params"])
        n = int(rec["n_points"])
        coeffs = np.asarray(rec["cos_coeffs"], dtype=float)
        if coeffs.shape != (n // 2 + 1,):
            raise BranchFileError(f"expected {n // 2 + 1} coefficients, got {coeffs.shape}")
        eta = from_coeffs(Grid(n), coeffs)
        N, M = slope_and_convexity(eta)
        tangent = rec.get("tangent")
        return BranchPoint(
            params=params,
            eta=eta,
            arclength_s=float(rec["arclength_s"]),
            amplitude=amplitude_of(eta),
            slope_N=N,
            convexity_M=M,
            residuals=residual_report(params, eta),
            tangent=None if tangent is None else np.asarray(tangent, dtype=float),
            newton_iters=int(rec.get("newton_iters", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BranchFileError):
            raise
        raise BranchFileError(f"bad point record: {exc}") from exc


def header_record(config: dict) -> dict:
    return {"kind": "header", "version": __version__, "config": config}


def write_branch(path, points: Iterable[BranchPoint], stop: StoppingReason | None, config: dict,
                 bifurcation: dict | None = None) -> None:
    with open(path, "w", newline="\n") as fh:
        head = header_record(config)
        if bifurcation is not None:
            head["bifurcation"] = bifurcation
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for p in points:
            fh.write(json.dumps(point_to_dict(p), sort_keys=True) + "\n")
        if stop is not None:
            rec = {"kind": "stop", "reason": stop.kind, "evidence": stop.evidence, "detail": stop.detail}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _records(path) -> Iterator[dict]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BranchFileError(f"{path}:{lineno}: {exc}") from exc
            if not isinstance(rec, dict) or "kind" not in rec:
                raise BranchFileError(f"{path}:{lineno}: record without kind")
            yield rec


def read_branch(path) -> tuple[dict, list[BranchPoint], StoppingReason | None]:
    header: dict = {}
    points: list[BranchPoint] = []
    stop = None
    for rec in _records(path):
        kind = rec["kind"]
        if kind == "header":
            header = rec
        elif kind == "point":
            points.append(point_from_dict(rec))
        elif kind == "stop":
            try:
                stop = StoppingReason(rec["reason"], float(rec["evidence"]), rec.get("detail", ""))
            except (KeyError, ValueError) as exc:
                raise BranchFileError(f"bad stop record: {exc}") from exc
        else:
            raise BranchFileError(f"unknown record kind {kind!r}")
    if not header:
        raise BranchFileError(f"{path}: missing header line")
    return header, points, stop


def write_summary(path, points: Iterable[BranchPoint], header_lines: Iterable[str] = (),
                  extra: dict[str, list[float]] | None = None) -> None:
    """One row per point: arclength, amplitude, slope, curvature, Q, m, margin, residual.

    ``extra`` maps further column names to per-point values (NaN for none).
    """
    points = list(points)
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(SUMMARY_COLUMNS) + list(extra))
        for i, p in enumerate(points):
            r = p.residuals
            row = [p.arclength_s, p.amplitude, p.slope_N, p.convexity_M, p.params.Q, p.params.m,
                   p.min_stagnation_margin(), max(r.babenko_res, r.averages_res)]
            row += [col[i] for col in extra.values()]
            w.writerow([fmt(v) for v in row])


def read_summary(path) -> list[dict]:
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(rows)]


def config_lines(config: dict) -> list[str]:
    """Header comment lines echoing the resolved configuration."""
    return [f"vortwave {__version__}", "config " + json.dumps(config, sort_keys=True)]
