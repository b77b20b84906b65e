"""Command-line front end.

    vortwave kernel  --depth 1 --from 0.01 --to 3.14 --samples 500
    vortwave solve   --gamma -1 --depth 1 --amplitude 0.2
    vortwave branch  --gamma -1 --depth 1 --grid 256
    vortwave bounds  --gamma 0.01 --depth 1 --flux -2.7 --slope 0.5
    vortwave bounds  --mode aposteriori --branch out/branch.jsonl
    vortwave verify  --synthetic 1000 --seed 7
    vortwave sweep   --gammas 0.005,0.01,0.02 --depths 0.5,1

Settings come from an optional INI file (``--config``); flags override it.
Exit codes: 0 success, 2 usage, 3 solver failure, 4 audit failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as B
from . import records
from . import verify as V
from .formulation import PhysicalParams, eta_to_f, fine_values
from .solver import (
    BifurcationNotFound,
    ContinuationConfig,
    SolverError,
    continue_branch,
    find_bifurcation,
    laminar_state,
    solve_amplitude,
)
from .spectral import ParameterError, kernel_table, write_kernel_csv

log = logging.getLogger("vortwave")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_AUDIT = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration

# flag dest -> (section, key, type)
_CONFIG_KEYS = {
    "gravity": ("physics", "gravity", float),
    "depth": ("physics", "depth", float),
    "gamma": ("physics", "gamma", float),
    "flux": ("physics", "flux", float),
    "bernoulli": ("physics", "bernoulli", float),
    "grid": ("grid", "points", int),
    "out": ("run", "out", str),
    "seed": ("run", "seed", int),
    "workers": ("run", "workers", int),
    "eps": ("run", "eps", float),
    "mode": ("run", "mode", str),
    "slope": ("bounds", "slope", float),
    "curvature": ("bounds", "curvature", float),
    "s_from": ("kernel", "from", float),
    "s_to": ("kernel", "to", float),
    "samples": ("kernel", "samples", int),
    "tol": ("kernel", "tol", float),
    "gammas": ("sweep", "gammas", str),
    "depths": ("sweep", "depths", str),
}

DEFAULTS = {
    "gravity": 9.81, "depth": 1.0, "gamma": 0.0, "flux": None, "bernoulli": None, "grid": 256,
    "out": "vortwave_out", "seed": 7, "workers": 1, "eps": 0.1, "mode": "apriori",
    "slope": None, "curvature": None, "s_from": 0.01, "s_to": math.pi, "samples": 500, "tol": 1e-14,
    "gammas": None, "depths": None,
}


def load_config(path: str | None) -> tuple[dict, dict]:
    """Settings and continuation overrides from an INI file."""
    if path is None:
        return {}, {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path}")
    known = {(sec, key) for sec, key, _ in _CONFIG_KEYS.values()}
    cont_types = {f.name: f.type for f in fields(ContinuationConfig)}
    settings, cont = {}, {}
    for dest, (sec, key, typ) in _CONFIG_KEYS.items():
        if cp.has_option(sec, key):
            try:
                settings[dest] = typ(cp.get(sec, key))
            except ValueError as exc:
                raise UsageError(f"[{sec}] {key}: {exc}") from exc
    if cp.has_section("continuation"):
        for key, raw in cp.items("continuation"):
            if key not in cont_types:
                raise UsageError(f"unknown continuation setting {key!r}")
            cont[key] = int(raw) if cont_types[key] in (int, "int") else float(raw)
    for sec in cp.sections():
        for key in cp.options(sec):
            if sec != "continuation" and (sec, key) not in known:
                raise UsageError(f"unknown setting [{sec}] {key}")
    return settings, cont


def resolve(args: argparse.Namespace) -> tuple[dict, ContinuationConfig]:
    file_settings, cont = load_config(args.config)
    cfg = dict(DEFAULTS)
    cfg.update(file_settings)
    for dest in DEFAULTS:
        val = getattr(args, dest, None)
        if val is not None:
            cfg[dest] = val
    try:
        cc = ContinuationConfig(**cont)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"continuation settings: {exc}") from exc
    cfg["continuation"] = asdict(cc)
    cfg["command"] = args.command
    return cfg, cc


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(text: str | None, name: str) -> list[float]:
    if not text:
        raise UsageError(f"--{name} needs a comma-separated list")
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: {exc}") from exc


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return repr(o)


def _params(cfg: dict) -> PhysicalParams:
    """Physical params from flags: Q defaults to the laminar value for the flux."""
    g, d, gam, m, Q = cfg["gravity"], cfg["depth"], cfg["gamma"], cfg["flux"], cfg["bernoulli"]
    if m is None:
        bif = find_bifurcation(g, d, gam)
        m = bif.m
        if Q is None:
            Q = bif.Q
    if Q is None:
        Q = laminar_state(g, d, gam, m)[0].Q
    return PhysicalParams(g=g, d=d, gamma=gam, m=m, Q=Q)


# ---------------------------------------------------------------------------
# subcommands

def cmd_kernel(cfg: dict, cc: ContinuationConfig) -> int:
    d, a, b, n = cfg["depth"], cfg["s_from"], cfg["s_to"], cfg["samples"]
    if not (0 < a < b < 2 * math.pi):
        raise UsageError(f"need 0 < from < to < 2π, got from={a} to={b}")
    if n < 2:
        raise UsageError("need at least 2 samples")
    table = kernel_table(d, np.linspace(a, b, n), cfg["tol"])
    path = _outdir(cfg) / "kernel.csv"
    write_kernel_csv(table, path, records.config_lines(cfg))
    print(f"wrote {n} rows to {path}; truncation terms {table.truncation_terms}, tail {table.tail_bound:.3g}")
    return EXIT_OK


def cmd_solve(cfg: dict, cc: ContinuationConfig) -> int:
    amp = cfg.get("amplitude")
    if amp is None or not amp > 0:
        raise UsageError("solve needs --amplitude > 0")
    pt = solve_amplitude(cfg["gravity"], cfg["depth"], cfg["gamma"], amp, cfg["grid"], cc)
    out = _outdir(cfg)
    records.write_branch(out / "solution.jsonl", [pt], None, cfg)
    rec = records.point_to_dict(pt)
    rec.pop("tangent")
    rec.pop("cos_coeffs")
    print(json.dumps(rec, indent=1, sort_keys=True))
    return EXIT_OK


def _bound_column(points) -> list[float]:
    col = []
    for p in points:
        if p.params.gamma <= 0:
            col.append(B.favorable_bound(p.params.g, p.params.d, p.params.gamma))
        else:
            col.append(_aposteriori_quadratic(p).bound_value or math.nan)
    return col


def _aposteriori_quadratic(p) -> B.BoundReport:
    f2 = float(np.mean(fine_values(eta_to_f(p.eta, p.params)) ** 2))
    return B.adverse_quadratic_bound(B.adverse_DEF(p.params, f2, p.slope_N))


def cmd_branch(cfg: dict, cc: ContinuationConfig) -> int:
    g, d, gam = cfg["gravity"], cfg["depth"], cfg["gamma"]
    out = _outdir(cfg)
    try:
        bif = find_bifurcation(g, d, gam)
    except BifurcationNotFound as exc:
        with open(out / "bifurcation_scan.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "sigma"])
            for m, sig in exc.scan:
                w.writerow([records.fmt(m), records.fmt(sig)])
        print(f"bifurcation not found: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    res = continue_branch(g, d, gam, cc, cfg["grid"], bif)
    bif_rec = {"m": bif.m, "Q": bif.Q, "k": bif.k, "sigma_min": bif.sigma_min, "sigma_max": bif.sigma_max}
    records.write_branch(out / "branch.jsonl", res.points, res.stop, cfg, bif_rec)
    records.write_summary(out / "summary.csv", res.points, records.config_lines(cfg),
                          {"bound": _bound_column(res.points)})
    _dump(out / "stop.json", res.stop.to_dict())
    print(f"{len(res.points)} points, max amplitude {res.amplitudes.max():.6g}, stop: {res.stop.kind}"
          f" ({res.stop.detail})")
    return EXIT_OK


def _report_row(idx, label, rep: B.BoundReport) -> dict:
    row = {"index": idx, "subject": label, "route": rep.route, "applicable": rep.applicable,
           "bound": rep.bound_value}
    for c in rep.conditions:
        row[f"{c.name}_margin"] = c.margin
    return row


def cmd_bounds(cfg: dict, cc: ContinuationConfig) -> int:
    out = _outdir(cfg)
    reports = []
    if cfg["mode"] == "aposteriori":
        path = cfg.get("branch")
        if not path:
            raise UsageError("aposteriori mode needs --branch FILE")
        _, points, _ = records.read_branch(path)
        worst = math.inf
        for i, p in enumerate(points):
            f2 = float(np.mean(fine_values(eta_to_f(p.eta, p.params)) ** 2))
            label = f"s={p.arclength_s!r}"
            if p.params.gamma <= 0:
                reps = [B.favorable_report(p.params.g, p.params.d, p.params.gamma, p.amplitude)]
            else:
                reps = B.evaluate_all(p.params, N=p.slope_N, M=p.convexity_M, f2_avg=f2, epsilon=cfg["eps"])
            for r in reps:
                row = _report_row(i, label, r)
                row["amplitude"] = p.amplitude
                # the bare universal report is not tied to this point; gated ones are
                tied = r.route != "universal_corollary" or "gate" in r.extras
                if r.applicable and tied:
                    row["amplitude_margin"] = (r.bound_value - p.amplitude) / r.bound_value
                    worst = min(worst, row["amplitude_margin"])
                reports.append((row, r))
        print(f"{len(points)} points; smallest relative margin of amplitude below an applicable bound: {worst:.6g}")
    else:
        if cfg.get("route") == "adverse" and cfg["gamma"] <= 0:
            raise UsageError("adverse route needs --gamma > 0")
        if cfg.get("route") == "favorable" and cfg["gamma"] > 0:
            raise UsageError("favorable route needs --gamma <= 0")
        params = _params(cfg)
        reps = B.evaluate_all(params, N=cfg["slope"], M=cfg["curvature"], epsilon=cfg["eps"])
        for r in reps:
            reports.append((_report_row(0, "apriori", r), r))
            label = r.route + (f"[{r.extras['gate']}]" if "gate" in r.extras else "")
            print(f"{label:32s} applicable={r.applicable!s:5s} bound={r.bound_value}")
    _dump(out / "bounds.json", {"version": __version__, "config": cfg,
                                "reports": [dict(r.to_dict(), subject=row["subject"]) for row, r in reports]})
    _write_rows(out / "bounds.csv", [row for row, _ in reports], cfg)
    return EXIT_OK


def _write_rows(path: Path, rows: list[dict], cfg: dict) -> None:
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        for line in records.config_lines(cfg):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in cols])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return records.fmt(v)
    return str(v)


def cmd_verify(cfg: dict, cc: ContinuationConfig) -> int:
    out = _outdir(cfg)
    reports: list[V.AuditReport] = []
    if cfg.get("branch"):
        try:
            _, points, _ = records.read_branch(cfg["branch"])
        except (records.BranchFileError, OSError) as exc:
            print(f"audit failure: unreadable branch file: {exc}", file=sys.stderr)
            return EXIT_AUDIT
        if not points:
            print("audit failure: branch file has no points", file=sys.stderr)
            return EXIT_AUDIT
        for p in points:
            name = f"s={p.arclength_s!r}"
            reports.append(V.AuditReport(name, (
                V.compare("babenko_residual", p.residuals.babenko_res, "<", 10 * cc.newton_tol),
                V.compare("averages_residual", p.residuals.averages_res, "<", 10 * cc.newton_tol),
            )))
            reports.extend(V.audit_point(p.params, p, name))
    n = cfg.get("synthetic") or 0
    if n:
        profiles = V.random_profiles(n, cfg["seed"])
        # synthetic audits use only g, d and gamma; m and Q are placeholders
        params = PhysicalParams(g=cfg["gravity"], d=cfg["depth"], gamma=cfg["gamma"], m=-1.0, Q=1.0)
        for i, f in enumerate(profiles):
            reports.extend(V.audit_synthetic(f, params, f"synthetic#{i}"))
    if not reports:
        reports.append(V.audit_kernel(cfg["depth"]))
    V.write_audit_csv(reports, out / "audit.csv", records.config_lines(cfg))
    (out / "audit.json").write_text(V.reports_to_json(reports) + "\n")
    failed = [(r.subject, c) for r in reports for c in r.failures()]
    checks = sum(len(r.checks) for r in reports)
    if failed:
        for subject, c in failed[:50]:
            print(f"FAIL {subject} {c.name}: {c.lhs!r} {c.relation} {c.rhs!r}", file=sys.stderr)
        print(f"{len(failed)} of {checks} checks failed", file=sys.stderr)
        return EXIT_AUDIT
    print(f"{len(reports)} reports, {checks} checks, no failures")
    return EXIT_OK


def _sweep_one(task: tuple) -> dict:
    idx, g, d, gam, slope, curv, eps, do_branch, grid, cont = task
    row: dict = {"index": idx, "gamma": gam, "depth": d}
    try:
        bif = find_bifurcation(g, d, gam)
    except BifurcationNotFound as exc:
        row["error"] = str(exc)
        return row
    params = PhysicalParams(g=g, d=d, gamma=gam, m=bif.m, Q=bif.Q)
    row.update(m=bif.m, Q=bif.Q, beta_half=B.beta_half(d))
    for rep in B.evaluate_all(params, N=slope, M=curv, epsilon=eps):
        tag = rep.route if not rep.extras.get("gate") else f"corollary_{rep.extras['gate']}"
        row[f"{tag}_bound"] = rep.bound_value
        for c in rep.conditions:
            row[f"{tag}_{c.name}_margin"] = c.margin
    if do_branch:
        res = continue_branch(g, d, gam, ContinuationConfig(**cont), grid, bif)
        row.update(points=len(res.points), max_amplitude=float(res.amplitudes.max()), stop=res.stop.kind)
    return row


def cmd_sweep(cfg: dict, cc: ContinuationConfig) -> int:
    gammas = _floats(cfg["gammas"], "gammas") if cfg["gammas"] else [cfg["gamma"]]
    depths = _floats(cfg["depths"], "depths") if cfg["depths"] else [cfg["depth"]]
    tasks = []
    for gam in gammas:
        for d in depths:
            tasks.append((len(tasks), cfg["gravity"], d, gam, cfg["slope"], cfg["curvature"], cfg["eps"],
                          bool(cfg.get("with_branch")), cfg["grid"], asdict(cc)))
    workers = max(1, int(cfg["workers"]))
    if workers == 1:
        rows = [_sweep_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    rows.sort(key=lambda r: r["index"])
    _write_rows(_outdir(cfg) / "sweep.csv", rows, cfg)
    print(f"{len(rows)} tuples written")
    return EXIT_OK


COMMANDS = {"kernel": cmd_kernel, "solve": cmd_solve, "branch": cmd_branch, "bounds": cmd_bounds,
            "verify": cmd_verify, "sweep": cmd_sweep}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [physics], [grid], [continuation], [run] ...")
    common.add_argument("--depth", type=float, help="conformal depth d")
    common.add_argument("--gamma", type=float, help="vorticity (negative = favorable)")
    common.add_argument("--gravity", type=float, help="g")
    common.add_argument("--flux", type=float, help="mass flux m (< 0)")
    common.add_argument("--bernoulli", type=float, help="Bernoulli constant Q")
    common.add_argument("--grid", type=int, help="collocation points")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--eps", type=float, help="epsilon of the quartic route")
    common.add_argument("--mode", choices=["apriori", "aposteriori"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vortwave", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="tabulate beta and beta'")
    k.add_argument("--from", dest="s_from", type=float)
    k.add_argument("--to", dest="s_to", type=float)
    k.add_argument("--samples", type=int)
    k.add_argument("--tol", type=float)

    s = sub.add_parser("solve", parents=[common], help="one wave of given amplitude")
    s.add_argument("--amplitude", type=float, required=True)

    sub.add_parser("branch", parents=[common], help="trace the bifurcation branch")

    b = sub.add_parser("bounds", parents=[common], help="amplitude bounds")
    b.add_argument("--branch", help="branch JSONL for aposteriori mode")
    b.add_argument("--slope", type=float, help="slope cap N")
    b.add_argument("--curvature", type=float, help="curvature cap M")
    b.add_argument("--route", choices=["auto", "favorable", "adverse"], default="auto")

    v = sub.add_parser("verify", parents=[common], help="audit estimates and identities")
    v.add_argument("--branch", help="branch JSONL to audit")
    v.add_argument("--synthetic", type=int, help="number of random admissible profiles")

    w = sub.add_parser("sweep", parents=[common], help="bounds and conditions over a parameter grid")
    w.add_argument("--gammas", help="comma-separated vorticities")
    w.add_argument("--depths", help="comma-separated depths")
    w.add_argument("--slope", type=float)
    w.add_argument("--curvature", type=float)
    w.add_argument("--with-branch", action="store_true", help="also trace each branch")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, cc = resolve(args)
        for extra in ("amplitude", "branch", "synthetic", "route", "with_branch"):
            if hasattr(args, extra):
                cfg[extra] = getattr(args, extra)
        return COMMANDS[args.command](cfg, cc)
    except (UsageError, ParameterError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except records.BranchFileError as exc:
        print(f"bad branch file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
