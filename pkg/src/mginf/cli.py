"""Command-line front end.

    mginf eval     --lambda 1 --dist det:alpha=1 --grid 0:10:0.5
    mginf simulate --lambda 1 --dist exp:mean=1 --grid 0:10:1 --reps 100000 --seed 42
    mginf compare  --lambda 1 --dist exp:mean=1 --grid 0:10:1 --reps 100000
    mginf bounds   --class nbue --lambda 1 --mean 1 --grid 0:5:0.5
    mginf moments  --lambda 1 --dist det:alpha=1

Exit codes: 0 success, 2 usage or validation error, 3 accuracy or
consistency failure (including a failed ``compare``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import classbounds as cb
from .dist import QueueModel, parse_dist
from .errors import AccuracyError, ConsistencyError, MGInfError, NumericError
from .mc import estimate_curve, z_scores
from .numerics import DEFAULT_ABS_TOL
from .renewal import cycle_moments, default_grid, renewal_curve

Z_THRESHOLD = 3.5


class UsageError(Exception):
    def __init__(self, flag, message):
        self.flag = flag
        super().__init__(f"{flag}: {message}")


@dataclass
class RunConfig:
    command: str
    lam: float | None = None
    dist: str | None = None
    grid: str | None = None
    method: str = "auto"
    tol: float = DEFAULT_ABS_TOL
    reps: int = 10000
    seed: int = 0
    jobs: int = 1
    format: str = "csv"
    out: str | None = None
    bound_class: str | None = None
    mean: float | None = None
    cv2: float | None = None
    mu2: float | None = None
    mu3: float | None = None
    imrl_form: str = "rate"


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included when it lies on the lattice) or ``t1,t2,...``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("expected start:stop:step")
        a, b, h = (float(p) for p in parts)
        if not h > 0:
            raise ValueError("step must be > 0")
        if b < a:
            raise ValueError("stop must be >= start")
        ratio = (b - a) / h
        n = int(math.floor(ratio + 1e-12))
        grid = a + h * np.arange(n + 1)
        if abs(ratio - round(ratio)) <= 1e-12:
            grid[-1] = b
    else:
        grid = np.array([float(p) for p in text.split(",") if p.strip()])
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(~np.isfinite(grid)) or np.any(grid < 0):
        raise ValueError("grid times must be finite and >= 0")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be ascending")
    return grid


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def emit(columns, rows, config: RunConfig, stream, extra=None):
    if config.format == "json":
        doc = {
            "config": asdict(config),
            "columns": list(columns),
            "rows": [{c: (float(v) if isinstance(v, (float, np.floating)) else v) for c, v in zip(columns, r)} for r in rows],
        }
        if extra:
            doc.update(extra)
        json.dump(doc, stream, indent=2, default=_json_default)
        stream.write("\n")
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(type(o))


# -- argument handling ---------------------------------------------------------

_CONFIG_KEYS = {
    "lambda": "lam", "dist": "dist", "grid": "grid", "tol": "tol", "method": "method",
    "reps": "reps", "seed": "seed", "format": "format", "out": "out", "jobs": "jobs",
    "class": "bound_class", "mean": "mean", "cv2": "cv2", "mu2": "mu2", "mu3": "mu3",
    "imrl-form": "imrl_form",
}


def read_config_file(path) -> dict:
    """Plain ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError("--config", f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-")
            if key not in _CONFIG_KEYS:
                raise UsageError("--config", f"{path}:{lineno}: unknown key {key!r}")
            out[_CONFIG_KEYS[key]] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags override it")
    common.add_argument("--lambda", dest="lam", help="arrival rate (> 0)")
    common.add_argument("--dist", help="service distribution, e.g. det:alpha=1 or exp:mean=2")
    common.add_argument("--grid", help="start:stop:step or t1,t2,...")
    common.add_argument("--tol", help=f"absolute tolerance (default {DEFAULT_ABS_TOL:g})")
    common.add_argument("--method", help="auto | closed | quadrature")
    common.add_argument("--reps", help="Monte Carlo replications")
    common.add_argument("--seed", help="64-bit seed")
    common.add_argument("--jobs", help="worker processes for simulation (-1 = all CPUs)")
    common.add_argument("--format", help="csv | json")
    common.add_argument("--out", help="output path (default: standard output)")

    parser = argparse.ArgumentParser(prog="mginf", description="M|G|inf busy-cycle renewal function")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate R(t) on a grid")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate of R(t)")
    sub.add_parser("compare", parents=[common], help="analytic R(t) against Monte Carlo")
    sub.add_parser("moments", parents=[common], help="busy-cycle moments and asymptotic intercept")
    b = sub.add_parser("bounds", parents=[common], help="reliability-class bounds on R(t)")
    b.add_argument("--class", dest="bound_class", help="nbue | nwue | dfr | imrl")
    b.add_argument("--mean", help="mean service time (default: from --dist)")
    b.add_argument("--cv2", help="squared coefficient of variation, dfr only")
    b.add_argument("--mu2", help="second raw moment, imrl only")
    b.add_argument("--mu3", help="third raw moment, imrl only")
    b.add_argument("--imrl-form", dest="imrl_form", help="rate | shifted (imrl envelope form)")
    return parser


def _conv(flag, value, kind, check=None, what=""):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise UsageError(flag, f"expected {kind.__name__}, got {value!r}") from None
    if check is not None and not check(v):
        raise UsageError(flag, f"must be {what}, got {value!r}")
    return v


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    raw = {}
    if getattr(ns, "config", None):
        try:
            raw.update(read_config_file(ns.config))
        except OSError as exc:
            raise UsageError("--config", str(exc)) from None
    for key in set(_CONFIG_KEYS.values()):
        v = getattr(ns, key, None)
        if v is not None:
            raw[key] = v

    cfg = RunConfig(command=ns.command)
    if "lam" in raw:
        cfg.lam = _conv("--lambda", raw["lam"], float, lambda x: math.isfinite(x) and x > 0, "> 0")
    cfg.dist = raw.get("dist")
    cfg.grid = raw.get("grid")
    if "tol" in raw:
        cfg.tol = _conv("--tol", raw["tol"], float, lambda x: 0 < x < 1, "in (0, 1)")
    if "method" in raw:
        cfg.method = _conv("--method", raw["method"], str, lambda x: x in ("auto", "closed", "quadrature"), "auto, closed or quadrature")
    if "reps" in raw:
        cfg.reps = _conv("--reps", raw["reps"], int, lambda x: x >= 2, ">= 2")
    if "seed" in raw:
        cfg.seed = _conv("--seed", raw["seed"], int, lambda x: 0 <= x < 2**64, "a 64-bit unsigned integer")
    if "jobs" in raw:
        cfg.jobs = _conv("--jobs", raw["jobs"], int, lambda x: x != 0, "nonzero")
    if "format" in raw:
        cfg.format = _conv("--format", raw["format"], str, lambda x: x in ("csv", "json"), "csv or json")
    cfg.out = raw.get("out")
    cfg.bound_class = raw.get("bound_class")
    for key in ("mean", "cv2", "mu2", "mu3"):
        if key in raw:
            setattr(cfg, key, _conv(f"--{key}", raw[key], float, lambda x: math.isfinite(x) and x >= 0, ">= 0"))
    if "imrl_form" in raw:
        cfg.imrl_form = _conv("--imrl-form", raw["imrl_form"], str, lambda x: x in ("rate", "shifted"), "rate or shifted")
    return cfg


def _model(cfg: RunConfig) -> QueueModel:
    if cfg.lam is None:
        raise UsageError("--lambda", "required")
    if not cfg.dist:
        raise UsageError("--dist", "required")
    try:
        return QueueModel(cfg.lam, parse_dist(cfg.dist, lam=cfg.lam))
    except (MGInfError, ValueError) as exc:
        raise UsageError("--dist", str(exc)) from None


def _grid(cfg: RunConfig, fallback):
    if cfg.grid is None:
        return fallback()
    try:
        return parse_grid(cfg.grid)
    except ValueError as exc:
        raise UsageError("--grid", str(exc)) from None


# -- commands --------------------------------------------------------------------


def cmd_eval(cfg: RunConfig, out) -> int:
    m = _model(cfg)
    grid = _grid(cfg, lambda: default_grid(m))
    try:
        curve = renewal_curve(m, grid, method=cfg.method, tol=cfg.tol)
    except NotImplementedError as exc:
        raise UsageError("--method", str(exc)) from None
    rows = zip(curve.grid, curve.values, curve.method, curve.abs_error)
    emit(("t", "R", "method", "abs_err"), rows, cfg, out)
    return 0


def cmd_simulate(cfg: RunConfig, out) -> int:
    m = _model(cfg)
    grid = _grid(cfg, lambda: default_grid(m))
    est = estimate_curve(m, grid, cfg.reps, cfg.seed, n_jobs=cfg.jobs)
    rows = ((t, mu, se, est.reps, est.seed) for t, mu, se in zip(est.grid, est.mean, est.stderr))
    emit(("t", "mean", "stderr", "reps", "seed"), rows, cfg, out)
    return 0


def cmd_compare(cfg: RunConfig, out, err) -> int:
    m = _model(cfg)
    grid = _grid(cfg, lambda: default_grid(m))
    curve = renewal_curve(m, grid, method=cfg.method, tol=cfg.tol)
    est = estimate_curve(m, grid, cfg.reps, cfg.seed, n_jobs=cfg.jobs)
    z = z_scores(curve.values, est)
    status = np.where(est.stderr == 0, np.where(np.isfinite(z), "exact", "fail"),
                      np.where(np.abs(z) <= Z_THRESHOLD, "ok", "fail"))
    max_z = float(np.max(np.abs(z))) if z.size else 0.0
    passed = bool(np.all(status != "fail"))
    summary = f"max |z| = {max_z:.4g}; {'PASS' if passed else 'FAIL'} (threshold {Z_THRESHOLD})"
    rows = zip(est.grid, curve.values, est.mean, est.stderr, z, status)
    emit(("t", "R", "mean", "stderr", "z", "status"), rows, cfg, out,
         extra={"summary": {"max_abs_z": max_z, "threshold": Z_THRESHOLD, "pass": passed}})
    print(summary, file=err)
    return 0 if passed else 3


def cmd_moments(cfg: RunConfig, out) -> int:
    m = _model(cfg)
    cm = cycle_moments(m, cfg.tol)
    row = (cm.mean, cm.second_moment, cm.variance, cm.intercept, cm.intercept_discrepancy)
    emit(("mean", "second_moment", "variance", "intercept", "intercept_discrepancy"), [row], cfg, out)
    return 0


def cmd_bounds(cfg: RunConfig, out, err) -> int:
    if cfg.lam is None:
        raise UsageError("--lambda", "required")
    kind = cfg.bound_class
    if kind not in ("nbue", "nwue", "dfr", "imrl"):
        raise UsageError("--class", f"must be nbue, nwue, dfr or imrl, got {kind!r}")
    d = None
    if cfg.dist:
        d = _model(cfg).service

    def param(name, from_dist):
        v = getattr(cfg, name)
        if v is None:
            if d is None:
                raise UsageError(f"--{name}", f"required for --class {kind} without --dist")
            v = from_dist(d)
        return v

    alpha = param("mean", lambda s: s.mean)
    if not alpha > 0:
        raise UsageError("--mean", "must be > 0")
    try:
        if kind in ("nbue", "nwue"):
            env = cb.exponential_envelope(alpha, "upper" if kind == "nbue" else "lower", kind)
        elif kind == "dfr":
            env = cb.dfr_envelope(alpha, param("cv2", lambda s: s.cv_squared()))
        else:
            env = cb.imrl_envelope(alpha, param("mu2", lambda s: s.moment(2)), param("mu3", lambda s: s.moment(3)), cfg.imrl_form)
    except MGInfError as exc:
        raise UsageError(f"--class {kind}", str(exc)) from None

    rho = cfg.lam * alpha
    grid = _grid(cfg, lambda: np.linspace(0.0, 10.0 * math.exp(rho) / cfg.lam, 513))
    vals, abs_err = cb.renewal_from_envelope(cfg.lam, env, grid, cfg.tol)
    label = f"{env.direction} bound"
    if d is None:
        verdict = "bound (premise not checked: no --dist given)"
        premise = None
    else:
        scan = np.union1d(grid, np.linspace(0.0, float(grid[-1]), 4097))
        report = cb.envelope_premise_check(d, env, scan)
        verdict = report.verdict()
        premise = {"holds": report.holds, "max_violation": report.max_violation,
                   "violations": report.violations.tolist(),
                   # bound values at t >= this are not backed by the premise
                   "first_violation": None if report.holds else float(report.violations.min())}
    rows = ((t, v, e, label) for t, v, e in zip(grid, vals, abs_err))
    emit(("t", "bound", "abs_err", "label"), rows, cfg, out,
         extra={"class": kind, "direction": env.direction, "verdict": verdict, "premise": premise})
    print(f"{kind} {label}: {verdict}", file=err)
    return 0


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        buf = io.StringIO()
        if cfg.command == "eval":
            code = cmd_eval(cfg, buf)
        elif cfg.command == "simulate":
            code = cmd_simulate(cfg, buf)
        elif cfg.command == "compare":
            code = cmd_compare(cfg, buf, stderr)
        elif cfg.command == "moments":
            code = cmd_moments(cfg, buf)
        else:
            code = cmd_bounds(cfg, buf, stderr)
    except UsageError as exc:
        print(f"mginf {ns.command}: error: {exc}", file=stderr)
        return 2
    except (AccuracyError, ConsistencyError, NumericError) as exc:
        print(f"mginf {ns.command}: numerical failure: {exc}", file=stderr)
        return 3
    except MGInfError as exc:
        print(f"mginf {ns.command}: error: {exc}", file=stderr)
        return 2
    text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
