"""Command line entry point: ``evofam {solve,converge,verify,modulus}``.

Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 numerical
failure (e.g. the reference propagator did not converge).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import RunConfig
from .examples import RobinProblem, SchrodingerProblem, build_robin, build_schrodinger, random_problem
from .forms import FormError, NotCoerciveError, check_dini, kato_constants, shift, verify_uniformity
from .gelfand import GelfandError
from .matfile import load_problem
from .propagator import ConvergenceError, Propagator, Subdivision, convergence_study
from .properties import (
    MODULUS_SPACES,
    check_axioms,
    check_duality,
    check_rescaling,
    modulus_tables,
    pair_grid,
    random_pairs,
    random_triples,
    vprime_extension_bound,
)

log = logging.getLogger("evofam")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def build_problem(cfg: RunConfig, base: Path = Path(".")):
    p = cfg.problem
    if p.kind == "robin":
        triple, form = build_robin(
            RobinProblem(p.n_elems, p.beta_base, p.beta_amp, p.holder, p.horizon, p.gamma)
        )
    elif p.kind == "schrodinger":
        triple, form = build_schrodinger(
            SchrodingerProblem(
                p.n_elems, p.half_width, p.mu_base, p.mu_amp, p.mu_freq, p.horizon, p.sobolev_index
            )
        )
    elif p.kind == "random":
        triple, form = random_problem(p.n, p.seed, p.smoothness, p.holder, p.horizon, p.stiffness)
    else:
        path = Path(p.path)
        triple, form = load_problem(path if path.is_absolute() else base / path)
    if p.shift:
        form = shift(form, p.shift)
    return triple, form


def build_subdivision(cfg: RunConfig, horizon: float) -> Subdivision:
    sc = cfg.subdivision
    if sc.points is not None:
        return Subdivision(sc.points)
    if sc.kind == "uniform":
        return Subdivision.uniform(horizon, sc.cells)
    return Subdivision.random(horizon, sc.cells, cfg.seed)


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "nan")


def _complex_str(z) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def _header(command: str, cfg: RunConfig) -> dict:
    return {"command": command, "version": __version__, "config_hash": cfg.digest()}


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_solve(cfg: RunConfig, out: Path, triple, form, workers: int) -> int:
    T = form.horizon
    n = form.dim
    times = cfg.solve.times if cfg.solve.times is not None else list(np.linspace(0, T, cfg.solve.samples))
    if any(not 0 <= t <= T for t in times):
        raise ConfigError(f"solve.times must lie in [0, {T}]")
    if cfg.solve.x0 is None:
        x0 = np.zeros(n)
        x0[0] = 1.0
    else:
        x0 = np.asarray(cfg.solve.x0, dtype=float)
        if x0.shape != (n,):
            raise ConfigError(f"solve.x0 must have length {n}")
    prop = Propagator(form, build_subdivision(cfg, T), cfg.tolerances.exp)
    states = [prop.matrix(float(t), 0.0) @ x0 for t in times]
    rows = [[repr(float(t))] + [_complex_str(c) for c in u] for t, u in zip(times, states)]
    _write_csv(out / "trajectory.csv", ["t"] + [f"u{i}" for i in range(n)], rows)
    summary = _header("solve", cfg)
    summary["samples"] = [
        {"t": float(t), "norm_H": triple.norm(u, "H"), "norm_V": triple.norm(u, "V")} for t, u in zip(times, states)
    ]
    _write_json(out / "solve.json", summary)
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: Path, triple, form, workers: int) -> int:
    cc = cfg.converge
    t = form.horizon if cc.t is None else cc.t
    if not 0 <= cc.s < t <= form.horizon:
        raise ConfigError("converge needs 0 <= s < t <= T")
    table = convergence_study(form, t, cc.s, cc.levels, cfg.tolerances.ref, cfg.tolerances.exp, max_level=cc.max_level)
    orders = table.orders_so_far()
    rows = [[c, repr(h), repr(e), repr(o) if math.isfinite(o) else ""]
            for c, h, e, o in zip(table.cells, table.mesh, table.errors, orders)]
    _write_csv(out / "convergence.csv", ["cells", "mesh", "error", "order_so_far"], rows)
    summary = _header("converge", cfg)
    summary.update(
        {
            "t": t,
            "s": cc.s,
            "metric": table.metric,
            "order": _num(table.order),
            "reference_difference": table.reference.difference,
            "reference_cells": 2**table.reference.level,
            "errors": table.errors,
        }
    )
    _write_json(out / "converge.json", summary)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, triple, form, workers: int) -> int:
    vc, thr = cfg.verify, cfg.verify.thresholds
    T = form.horizon
    sub = build_subdivision(cfg, T)
    tol = cfg.tolerances.exp
    checks = {}

    uni = verify_uniformity(form)
    checks["uniformity"] = {**uni.to_dict(), "passed": uni.passed}

    dini = check_dini(form.modulus, form.gamma, T)
    checks["dini"] = {**dini.to_dict(), "modulus": form.modulus.to_dict(), "gamma": form.gamma}

    lows, highs = [], []
    for t in np.linspace(0, T, vc.kato_times):
        lo, hi = kato_constants(form, float(t))
        lows.append(lo)
        highs.append(hi)
    checks["kato"] = {"c_low": min(lows), "c_high": max(highs), "samples": len(lows),
                      "passed": min(lows) > 0 and math.isfinite(max(highs))}

    ax = check_axioms(form, sub, random_triples(T, vc.triples, cfg.seed), tol, workers)
    checks["axioms"] = {**ax.to_dict(), "passed": ax.max_identity_defect <= thr.identity
                        and ax.max_cocycle_defect <= thr.cocycle}

    pairs = random_pairs(T, vc.pairs, cfg.seed + 1)
    du = check_duality(form, sub, pairs, tol, vc.duality_partition == "reversed", workers)
    checks["duality"] = {**du.to_dict(), "passed": du.max_defect <= thr.duality}

    resc = []
    for om in vc.shifts:
        try:
            r = check_rescaling(form, sub, pairs, om, tol, workers).to_dict()
            r["passed"] = r["max_defect"] <= thr.rescaling
        except NotCoerciveError as exc:
            r = {"omega_s": om, "passed": False, "reason": str(exc)}
        resc.append(r)
    checks["rescaling"] = {"shifts": resc, "passed": all(r["passed"] for r in resc)}

    ext = vprime_extension_bound(form, sub, pairs, tol, workers)
    checks["vprime_extension"] = {**ext.to_dict(), "passed": ext.agreement_defect <= thr.agreement
                                  and math.isfinite(ext.bound_vprime)}

    report = _header("verify", cfg)
    report["subdivision"] = [float(x) for x in sub.points]
    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks.values())
    report["note"] = "uniformity and Dini conditions are certified on finite grids only"
    _write_json(out / "verify.json", report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_modulus(cfg: RunConfig, out: Path, triple, form, workers: int) -> int:
    mc = cfg.modulus
    T = form.horizon
    eps = T / 10 if mc.epsilon is None else mc.epsilon
    if not 0 < eps < T:
        raise ConfigError("modulus.epsilon must lie in (0, T)")
    sub = build_subdivision(cfg, T)
    grid = pair_grid(T, eps, mc.pairs, cfg.seed, mc.decades)
    tables = modulus_tables(form, sub, eps, grid, cfg.tolerances.exp, workers)
    for sp, tab in tables.items():
        rows = [[repr(a[0]), repr(a[1]), repr(b[0]), repr(b[1]), repr(d), repr(inc)] for a, b, d, inc in tab.entries]
        _write_csv(out / f"modulus_{sp}.csv", ["t", "s", "t2", "s2", "delta", "increment"], rows)
    h, v, vp = (tables[sp].increments for sp in ("H", "V", "Vprime"))
    ratio = float(np.max(h / np.sqrt(v * vp))) if len(h) else 0.0
    summary = _header("modulus", cfg)
    summary["epsilon"] = eps
    summary["spaces"] = {sp: tables[sp].to_dict() for sp in MODULUS_SPACES}
    summary["interpolation_max_ratio"] = ratio
    exps = [tables[sp].fitted_exponent for sp in MODULUS_SPACES]
    summary["passed"] = all(math.isfinite(e) and e > 0 for e in exps) and ratio <= 1 + 1e-6
    _write_json(out / "modulus.json", summary)
    return EXIT_OK if summary["passed"] else EXIT_FAIL


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "verify": cmd_verify, "modulus": cmd_modulus}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evofam", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        raw = json.loads(args.config.read_text())
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = RunConfig.model_validate(raw)
        out = args.out if args.out is not None else Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        triple, form = build_problem(cfg, args.config.parent)
        form.require_coercive()
    except (OSError, json.JSONDecodeError, ValidationError, ConfigError, FormError, GelfandError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out, triple, form, args.threads)
    except (ConfigError, FormError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
