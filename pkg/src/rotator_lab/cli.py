"""rotator-lab command line.

Exit codes: 0 success, 1 check failure, 2 usage or config error,
3 halted on a degenerate velocity Hessian.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .chart import ChartState
from .errors import DegenerateHessian, InvariantViolation, RotatorError, SingularDerivative, StepFailure
from .hessian import DEGENERACY_THRESHOLD, format_float

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    profile: str = "fundamental"
    m: float = 1.0
    ell: float = 1.0
    seed: int = 0
    out: str = "rotator-out"
    tol_residual: float = 1e-9
    tol_conservation: float = 1e-7
    tol_degeneracy: float = DEGENERACY_THRESHOLD
    tol_ode: float = 1e-8
    # integrate
    T: float | None = None
    dt: float = 1e-3
    stride: int = 100
    initial_state: str | None = None
    # hessian
    n_states: int = 100
    # indeterminism
    omega: float = 1.0
    eps: float = 0.2
    nu: float = 1.5
    n_grid: int = 101
    # casimir
    n_q: int = 100
    # ode-f
    Q0: float = 1.0
    Q_end: float = 10.0
    f0: float | None = None
    f0p: float | None = None
    steps: int = 10_000

    def validate(self):
        for name in ("tol_residual", "tol_conservation", "tol_degeneracy", "tol_ode", "m", "ell", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.T is not None:
            if not self.T > 0:
                raise ConfigError("T must be positive")
            if not self.dt < self.T:
                raise ConfigError("dt must be smaller than T")
        if self.n_states < 1 or self.n_grid < 2 or self.n_q < 2 or self.steps < 1 or self.stride < 1:
            raise ConfigError("counts must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        from .profiles import parse_profile

        try:
            parse_profile(self.profile)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TYPES = {"profile": str, "out": str, "initial_state": str, "seed": int, "stride": int, "n_states": int,
          "n_grid": int, "n_q": int, "steps": int}


def resolve_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - set(FIELDS)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    for name in FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    try:
        cfg = ExperimentConfig(**data)
        for name, typ in _TYPES.items():
            value = getattr(cfg, name)
            if value is not None:
                setattr(cfg, name, typ(value))
        for name in FIELDS:
            value = getattr(cfg, name)
            if name not in _TYPES and value is not None:
                setattr(cfg, name, float(value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def _write_outputs(cfg, command, csv_text, summary, started):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command}.csv").write_text(csv_text)
    meta = {
        "command": command,
        "config": dataclasses.asdict(cfg),
        "version": __version__,
        "duration_s": time.perf_counter() - started,
        "summary": summary,
    }
    (out / f"{command}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def _csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    return buf.getvalue()


def cmd_casimir(cfg: ExperimentConfig):
    from .profiles import casimir_mass_sq, casimir_spin_sq, parse_profile

    profile = parse_profile(cfg.profile)
    lo, hi = profile.domain()
    q_max = 1e2 if math.isinf(hi) else 0.99 * hi
    Qs = np.logspace(-2, math.log10(q_max), cfg.n_q)
    PP = np.array([casimir_mass_sq(profile, Q, cfg.m) for Q in Qs])
    WW = np.array([casimir_spin_sq(profile, Q, cfg.m, cfg.ell) for Q in Qs])
    pp_var = float(np.max(np.abs(PP - PP[0])) / abs(PP[0]))
    ww_var = float(np.max(np.abs(WW - WW[0])) / abs(WW[0]))
    constant = pp_var < 1e-10 and ww_var < 1e-10
    verdict = "fundamental: PP and WW constant" if constant else "not fundamental: Casimirs depend on Q"
    print(f"{profile.spec} -> {verdict} (PP variation {pp_var:.3e}, WW variation {ww_var:.3e})")
    summary = {"verdict": verdict, "pp_variation": pp_var, "ww_variation": ww_var,
               "PP": float(PP[0]) if constant else None, "WW": float(WW[0]) if constant else None}
    return EXIT_OK, _csv(("Q", "PP", "WW"), zip(Qs, PP, WW)), summary


def cmd_hessian(cfg: ExperimentConfig):
    from .hessian import degeneracy_scan, scan_csv
    from .profiles import parse_profile

    profile = parse_profile(cfg.profile)
    report = degeneracy_scan(profile, cfg.n_states, cfg.seed)
    if report["max_sigma_ratio"] < cfg.tol_degeneracy:
        verdict = "DEGENERATE"
    elif report["min_sigma_ratio"] >= cfg.tol_degeneracy:
        verdict = "REGULAR"
    else:
        verdict = "MIXED"
    expected = "DEGENERATE" if profile.degenerate_family else "REGULAR"
    det_errors = [abs(r["det_closed"] - r["det_numeric"]) / abs(r["det_numeric"]) for r in report["rows"]
                  if verdict == "REGULAR"]
    det_ok = all(e < 1e-6 for e in det_errors)
    ok = verdict == expected and det_ok
    print(f"{profile.spec}: {verdict} (sigma_min/sigma_max in [{report['min_sigma_ratio']:.3e}, "
          f"{report['max_sigma_ratio']:.3e}], expected {expected})")
    if not det_ok:
        print("closed-form determinant disagrees with the LU determinant", file=sys.stderr)
    summary = {k: v for k, v in report.items() if k != "rows"}
    summary.update(verdict=verdict, expected=expected, det_check=det_ok)
    return (EXIT_OK if ok else EXIT_CHECK), scan_csv(report), summary


def cmd_integrate(cfg: ExperimentConfig):
    from .dynamics import default_initial_state, integrate
    from .profiles import parse_profile

    profile = parse_profile(cfg.profile)
    T = 100.0 if cfg.T is None else cfg.T
    if not cfg.dt < T:
        raise ConfigError("dt must be smaller than T")
    if cfg.initial_state:
        try:
            initial = ChartState.from_dict(json.loads(Path(cfg.initial_state).read_text()))
        except (OSError, KeyError, json.JSONDecodeError, RotatorError) as exc:
            raise ConfigError(f"bad initial state: {exc}") from exc
    else:
        initial = default_initial_state()
    try:
        traj = integrate(profile, initial, T, cfg.dt, cfg.m, cfg.ell, stride=cfg.stride)
    except DegenerateHessian as exc:
        print(f"halted: {exc}", file=sys.stderr)
        print("the Euler-Lagrange equations cannot be brought to the form ydot = F(y) for this profile",
              file=sys.stderr)
        return EXIT_DEGENERATE, None, {"halted": str(exc)}
    except InvariantViolation as exc:
        print(f"halted: {exc}", file=sys.stderr)
        return EXIT_CHECK, None, {"halted": str(exc)}
    drift = traj.drift()
    ok = drift["p"] < cfg.tol_conservation and drift["M"] < cfg.tol_conservation
    print(f"{profile.spec}: T={T:g} dt={cfg.dt:g} samples={len(traj.t)}")
    for key, value in drift.items():
        print(f"  drift {key:>2}: {value:.3e}")
    print("conservation OK" if ok else "conservation FAILED")
    summary = {"drift": drift, "initial_state": initial.to_dict(), "T": T, "ok": ok}
    return (EXIT_OK if ok else EXIT_CHECK), traj.to_csv(), summary


def cmd_indeterminism(cfg: ExperimentConfig):
    from .exact import DIVERGENCE_THRESHOLD, PhaseProfile, indeterminism_pair, pair_csv
    from .minkowski import build_solution_frame
    from .profiles import parse_profile

    profile = parse_profile(cfg.profile)
    T = 10.0 * cfg.ell if cfg.T is None else cfg.T
    frame = build_solution_frame(cfg.m, cfg.ell, cfg.seed)
    phase1 = PhaseProfile.linear(cfg.omega / cfg.ell)
    phase2 = PhaseProfile.modulated(cfg.omega / cfg.ell, cfg.eps, cfg.nu / cfg.ell)
    try:
        report = indeterminism_pair(frame, phase1, phase2, T, np.linspace(0.0, T, cfg.n_grid), profile)
    except RotatorError as exc:
        raise ConfigError(str(exc)) from exc
    res_ok = report["max_residual1"] < cfg.tol_residual and report["max_residual2"] < cfg.tol_residual
    diverged = report["max_delta"] > DIVERGENCE_THRESHOLD
    ok = res_ok and diverged
    if ok:
        verdict = "NON-UNIQUE CAUCHY DATA REPRODUCED"
    elif not res_ok:
        verdict = "NOT BOTH SOLUTIONS: residual check failed"
    else:
        verdict = "NO DIVERGENCE: the two solutions coincide"
    print(f"{profile.spec}: initial data match {report['jet_match']:.3e}")
    print(f"  residual 1: {report['max_residual1']:.3e}")
    print(f"  residual 2: {report['max_residual2']:.3e}")
    print(f"  max divergence: {report['max_delta']:.6f} ell (threshold {DIVERGENCE_THRESHOLD} ell)")
    print(verdict)
    summary = {k: report[k] for k in ("jet_match", "max_residual1", "max_residual2", "max_delta")}
    summary.update(verdict=verdict, threshold=DIVERGENCE_THRESHOLD, T=T)
    return (EXIT_OK if ok else EXIT_CHECK), pair_csv(report), summary


def cmd_ode_f(cfg: ExperimentConfig):
    from .profiles import fit_sqrt_family, parse_profile, solve_degeneracy_ode, sqrt_family

    if cfg.f0 is None or cfg.f0p is None:
        profile = parse_profile(cfg.profile)
        f0, f0p, _ = profile.eval(cfg.Q0)
        f0 = f0 if cfg.f0 is None else cfg.f0
        f0p = f0p if cfg.f0p is None else cfg.f0p
    else:
        f0, f0p = cfg.f0, cfg.f0p
    try:
        c1, c2 = fit_sqrt_family(cfg.Q0, f0, f0p)
        Q, f, _ = solve_degeneracy_ode(cfg.Q0, f0, f0p, cfg.Q_end, cfg.steps)
    except SingularDerivative as exc:
        raise ConfigError(str(exc)) from exc
    except StepFailure as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_CHECK, None, {"failed": str(exc)}
    with np.errstate(invalid="ignore"):
        closed = sqrt_family(c1, c2, Q)
    err = np.abs(f - closed) / np.abs(closed)
    max_err = float(np.max(err))
    ok = bool(np.isfinite(max_err) and max_err < cfg.tol_ode)
    print(f"fitted c1={c1:.12g} c2={c2:.12g}; max relative error {max_err:.3e}")
    summary = {"c1": c1, "c2": c2, "max_error": max_err, "ok": ok}
    return (EXIT_OK if ok else EXIT_CHECK), _csv(("Q", "f_numeric", "f_closed", "error"), zip(Q, f, closed, err)), summary


COMMANDS = {
    "casimir": cmd_casimir,
    "hessian": cmd_hessian,
    "integrate": cmd_integrate,
    "indeterminism": cmd_indeterminism,
    "ode-f": cmd_ode_f,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    for name, f in FIELDS.items():
        flag = "--" + name.replace("_", "-")
        typ = _TYPES.get(name, float)
        common.add_argument(flag, dest=name, type=typ, default=None)
    parser = argparse.ArgumentParser(prog="rotator-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        code, csv_text, summary = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if csv_text is not None:
        _write_outputs(cfg, args.command, csv_text, summary, started)
    return code


if __name__ == "__main__":
    sys.exit(main())
