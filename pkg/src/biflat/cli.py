"""Command-line driver.

    biflat <command> --config <path> [--out <dir>] [--seed N] [--tol X]

Commands: verify-epsilon, painleve, reconstruct, hierarchy, dim2.
Exit codes: 0 pass, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .darboux_egorov import d1_in_spectrum, lax_residual, spectrum_invariance
from .dim2 import build_dim2, dim2_fields
from .epsilon import (
    EpsilonConfig, build_hierarchy, epsilon_fields, flat_coordinate_fields, flat_form_residual,
    euler_residuals,
)
from .errors import BiflatError, ConfigError, DegenerateCoupling, InconsistentSystem
from .geometry import sample_ordered_points, verify_biflat
from .painleve3 import (
    FSystemState, epsilon_to_fstate, f_from_state, factorization_residual, gauge_align,
    integrate_fsystem, parameters_of, polynomial_f, reconstruct_path, shift_to_sigma,
    canonical_sigma_residual, sigma_residual, solve_Cij, trajectory_rows, write_trajectory_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _num(x):
    x = float(x)
    return x if not math.isfinite(x) else float(f"{x:.17g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def dump_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _check(name, value, tol):
    value = float(value)
    return {"name": name, "value": value, "tol": tol, "passed": bool(value < tol)}


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != 1:
        raise ConfigError("config needs \"schema\": 1")
    return cfg


def _real(cfg, key, default=None):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing field {key!r}")
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r} is not a number") from exc
    if not math.isfinite(v):
        raise ConfigError(f"field {key!r} is not finite")
    return v


def _int(cfg, key, default):
    v = cfg.get(key, default)
    if isinstance(v, bool) or int(v) != float(v) or int(v) < 1:
        raise ConfigError(f"field {key!r} must be a positive integer")
    return int(v)


def _eps(cfg, n_required=None) -> EpsilonConfig:
    raw = cfg.get("eps")
    if not isinstance(raw, list):
        raise ConfigError("field 'eps' must be a list")
    try:
        eps = [float(e) for e in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError("eps entries must be numbers") from exc
    if "n" in cfg and int(cfg["n"]) != len(eps):
        raise ConfigError("n does not match the length of eps")
    if len(eps) < 2:
        raise ConfigError("n must be at least 2")
    if n_required is not None and len(eps) != n_required:
        raise ConfigError(f"this command needs n = {n_required}")
    return EpsilonConfig(tuple(eps))


def _sample(cfg, n, seed):
    rng = np.random.default_rng(seed)
    box = tuple(cfg.get("box", (1.0, 6.0)))
    return sample_ordered_points(n, _int(cfg, "points", 20), rng, box=box, min_gap=_real(cfg, "min_gap", 0.5))


def _interval(cfg):
    z0, z1 = _real(cfg, "z_start", 2.0), _real(cfg, "z_end", 5.0)
    lo, hi = sorted((z0, z1))
    if lo <= 0 <= hi or lo <= 1 <= hi:
        raise ConfigError(f"interval [{lo}, {hi}] touches a fixed singularity")
    return z0, z1


def _initial_state(cfg, z0) -> FSystemState:
    if "initial_state" in cfg:
        st = cfg["initial_state"]
        F = [float(x) for x in st["F"]]
        if len(F) != 6:
            raise ConfigError("initial_state.F needs six values")
        return FSystemState(z0, np.array(F), tuple(float(d) for d in st.get("degrees", (0, 0, 0))))
    state = epsilon_to_fstate(_eps(cfg, 3).eps, z0)
    scale = float(cfg.get("perturb", 0.0))
    if scale:
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        state = FSystemState(z0, state.F + scale * rng.standard_normal(6), state.degrees)
    return state


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_verify_epsilon(cfg, out: Path, tol):
    ecfg = _eps(cfg)
    flat = bool(cfg.get("flat_checks", False))
    if flat and abs(ecfg.total - 1.0) < 1e-12:
        raise ConfigError("flat-coordinate checks need sum(eps) != 1")
    pts = _sample(cfg, ecfg.n, cfg["seed"])
    beta, H = epsilon_fields(ecfg)
    ctol = tol if tol is not None else _real(cfg, "curvature_tol", 1e-6)
    atol = _real(cfg, "algebraic_tol", 1e-8)
    report = verify_biflat(beta, H, pts, ctol, atol)
    checks = [c.to_dict() for c in report.checks]
    lax = max(lax_residual(beta, u, k) for u in pts for k in range(ecfg.n))
    checks.append(_check("lax_residual", lax, 1e-6))
    checks.append(_check("spectrum_invariance", spectrum_invariance(beta, pts[:10]), 1e-7))
    checks.append(_check("d1_in_spectrum", max(d1_in_spectrum(beta, u) for u in pts), 1e-7))
    if flat:
        if ecfg.n != 3:
            raise ConfigError("flat-coordinate checks are available for n = 3")
        fr, er = 0.0, 0.0
        for f in flat_coordinate_fields(ecfg):
            for u in pts:
                fr = max(fr, flat_form_residual(f.grad, ecfg, u))
                e, E = euler_residuals(f, u)
                er = max(er, abs(E), abs(e) if f.label != "f1" else 0.0)
        checks.append(_check("flat_form", fr, 1e-6))
        checks.append(_check("flat_homogeneity", er, 1e-6))
    ok = all(c["passed"] for c in checks)
    dump_json(out / "report.json", {"command": "verify-epsilon", "eps": ecfg.eps, "seed": cfg["seed"],
                                    "points": len(pts), "passed": ok, "checks": checks})
    return ok


def cmd_painleve(cfg, out: Path, tol):
    z0, z1 = _interval(cfg)
    state = _initial_state(cfg, z0)
    traj = integrate_fsystem(state, z1)
    sol = f_from_state(traj)
    params = parameters_of(sol)
    phi = shift_to_sigma(sol, params.d21, params.d23)
    rtol = tol if tol is not None else _real(cfg, "residual_tol", 1e-6)
    zs = np.linspace(z0, z1, _int(cfg, "grid", 50))
    rows = trajectory_rows(traj, sol, params, zs)
    write_trajectory_csv(out / "trajectory.csv", rows)
    dump_json(out / "sigma.json", params.to_dict())
    drift = traj.conserved_drift()
    checks = [
        _check("drift_R2", drift[0], 1e-8),
        _check("drift_D", drift[1], 1e-8),
        _check("sigma_residual", max(abs(r[-1]) for r in rows), rtol),
        _check("factorization", max(abs(factorization_residual(sol, z)) for z in zs), rtol),
        _check("canonical_sigma", max(abs(canonical_sigma_residual(phi, params, z)) for z in zs), rtol),
        _check("vieta", max(params.vieta_residuals()), 1e-9),
    ]
    ok = all(c["passed"] for c in checks)
    dump_json(out / "report.json", {"command": "painleve", "z_start": z0, "z_end": z1,
                                    "steps": len(traj.z) - 1, "passed": ok, "checks": checks})
    return ok


def cmd_reconstruct(cfg, out: Path, tol):
    z0, z1 = _interval(cfg)
    rtol = tol if tol is not None else _real(cfg, "roundtrip_tol", 1e-5)
    zs = list(np.linspace(z0, z1, _int(cfg, "grid", 11)))
    report = {"command": "reconstruct", "z_start": z0, "z_end": z1}
    if "f_polynomial" in cfg:
        p = cfg["f_polynomial"]
        sol = polynomial_f([float(c) for c in p["coeffs"]], _real(p, "R2", 0.0), _real(p, "D", 0.0),
                           _real(p, "d13", 0.0), _real(p, "d23", 0.0))
        ref = None
    else:
        traj = integrate_fsystem(_initial_state(cfg, z0), z1)
        sol = f_from_state(traj)
        ref = traj
    try:
        C = solve_Cij(sol, z0)
    except InconsistentSystem as exc:
        report.update(passed=False, error=f"InconsistentSystem: {exc}")
        dump_json(out / "report.json", report)
        return False
    report["cij_residual"] = C.residual
    report["C"] = C.C
    report["signs"] = C.signs
    rec = reconstruct_path(sol, z0, zs, C)
    checks = [_check("cij_residual", C.residual, 1e-10)]
    if ref is not None:
        aligned = gauge_align(rec, ref.state(zs[0]))
        err = max(float(np.max(np.abs(a.F - ref.state(a.z).F) / np.abs(ref.state(a.z).F))) for a in aligned)
        checks.append(_check("roundtrip_relative_error", err, rtol))
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    dump_json(out / "report.json", report)
    return report["passed"]


def cmd_hierarchy(cfg, out: Path, tol):
    ecfg = _eps(cfg)
    depth = int(cfg.get("depth", 3))
    if depth < 0:
        raise ConfigError("depth must be >= 0")
    if any(e == 0 for e in ecfg.eps):
        raise ConfigError("flow fields need every eps_i != 0")
    for j in range(1, depth + 1):
        if abs(ecfg.total - j) < 1e-12:
            raise ConfigError(f"sum(eps) = {j} is a resonance of the normalization")
    if ecfg.n == 3 and abs(ecfg.total + 1.0) < 1e-12:
        raise ConfigError("sum(eps) = -1 is excluded")
    table = build_hierarchy(ecfg, depth)
    pts = _sample(cfg, ecfg.n, cfg["seed"])
    rtol = tol if tol is not None else _real(cfg, "residual_tol", 1e-6)
    worst = {}
    for u in pts:
        for key, res in table.residuals(u).items():
            for name, v in res.items():
                worst[(key, name)] = max(worst.get((key, name), 0.0), v)
    checks = [_check(f"K({p},{a}).{name}", v, rtol) for ((p, a), name), v in sorted(worst.items())]
    ok = all(c["passed"] for c in checks)
    dump_json(out / "hierarchy.json", table.to_dict(pts[: min(5, len(pts))]))
    dump_json(out / "report.json", {"command": "hierarchy", "eps": ecfg.eps, "depth": depth,
                                    "passed": ok, "checks": checks})
    return ok


def cmd_dim2(cfg, out: Path, tol):
    try:
        fam = build_dim2(_real(cfg, "C1"), _real(cfg, "C2"), _real(cfg, "d1"), _real(cfg, "D1", 1.0))
    except DegenerateCoupling as exc:
        raise ConfigError(str(exc)) from exc
    beta, H = dim2_fields(fam)
    pts = _sample(cfg, 2, cfg["seed"])
    ctol = tol if tol is not None else _real(cfg, "curvature_tol", 1e-6)
    report = verify_biflat(beta, H, pts, ctol, _real(cfg, "algebraic_tol", 1e-6))
    checks = [c.to_dict() for c in report.checks]
    checks.append(_check("constraint", max(abs(r) for r in fam.constraint_residuals()), 1e-12))
    ok = all(c["passed"] for c in checks)
    dump_json(out / "report.json", {"command": "dim2", "family": vars(fam), "passed": ok, "checks": checks})
    return ok


COMMANDS = {
    "verify-epsilon": cmd_verify_epsilon,
    "painleve": cmd_painleve,
    "reconstruct": cmd_reconstruct,
    "hierarchy": cmd_hierarchy,
    "dim2": cmd_dim2,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="biflat", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--tol", type=float, default=None, help="overrides the main tolerance")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        cfg["seed"] = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ok = COMMANDS[args.command](cfg, out, args.tol)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BiflatError as exc:
        print(f"verification failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
