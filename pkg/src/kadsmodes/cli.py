"""Batch front end: ``kadsmodes --config job.yaml --out-dir results``.

A job file (YAML or JSON) names one command and its inputs; every run writes
CSV tables and JSON summaries carrying the config hash and tool version.
Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema
import numpy as np
import yaml

from . import __version__
from .angular import solve_angular
from .errors import KadsError
from .geometry import BlackHoleParams, ParameterPath, derive_geometry, tortoise
from .potentials import RadialPotential, certificate_grid, eval_potentials, positivity_certificates
from .radial import RadialNumerics
from .shooter import (REFERENCE_PATH, ShootNumerics, accumulation_scan, find_threshold,
                      mode_stability_scan, shoot)
from .wkb import WkbNumerics, negativity_scan, wkb_basis, wkb_frequency_from_potential

__all__ = ["JobConfig", "ConfigError", "load_config", "run_job", "main", "read_csv"]

log = logging.getLogger("kadsmodes")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ["geom", "angular", "potentials", "shoot", "find-mode", "wkb", "scan", "stability"]

_POS = {"type": "number", "exclusiveMinimum": 0}
_PARAMS = {
    "type": "object",
    "properties": {"M": _POS, "a": {"type": "number", "minimum": 0}, "k": _POS},
    "required": ["M", "a", "k"],
    "additionalProperties": False,
}
SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": COMMANDS},
        "params": _PARAMS,
        "path": {
            "oneOf": [
                {"const": "reference"},
                {"type": "object", "properties": {"waypoints": {"type": "array", "items": _PARAMS, "minItems": 2}},
                 "required": ["waypoints"], "additionalProperties": False},
            ]
        },
        "m": {"type": "integer"},
        "m_list": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "s": {"type": "number", "minimum": 0, "maximum": 1},
        "eps": {"type": "number"},
        "n_eigs": {"type": "integer", "minimum": 1},
        "ell_extra": {"type": "integer", "minimum": 0},
        "phases": {"type": "array", "items": {"type": "number"}},
        "numerics": {
            "type": "object",
            "properties": {
                "rtol": _POS, "atol": _POS, "n_out": {"type": "integer", "minimum": 16}, "kh_max": _POS,
                "seed_order": {"type": "integer", "minimum": 10},
                "seed_delta": {"type": "number", "minimum": 1e-8, "maximum": 1e-2},
                "angular_resolution": {"type": "integer", "minimum": 16},
                "coarse_samples": {"type": "integer", "minimum": 2},
                "s_tol": _POS, "p_tol": _POS, "zero_tol": _POS,
                "n_grid": {"type": "integer", "minimum": 10},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}},
            "additionalProperties": False,
        },
    },
    "required": ["command"],
    "additionalProperties": False,
}

_NEEDS = {
    "geom": ["params"], "angular": ["params", "m"], "potentials": ["params", "m"],
    "shoot": ["path", "s", "m"], "find-mode": ["path", "m"], "wkb": ["m"],
    "scan": ["path", "m_list"], "stability": ["params", "m_list"],
}


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    raw: Dict[str, Any]
    digest: str

    @property
    def command(self) -> str:
        return self.raw["command"]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def numerics(self) -> Dict[str, Any]:
        return self.raw.get("numerics", {})

    @property
    def prefix(self) -> str:
        return self.raw.get("output", {}).get("prefix", self.command)

    def params(self) -> BlackHoleParams:
        p = self.raw["params"]
        return BlackHoleParams(float(p["M"]), float(p["a"]), float(p["k"]))

    def path(self) -> ParameterPath:
        p = self.raw.get("path", "reference")
        if p == "reference":
            return REFERENCE_PATH
        return ParameterPath([BlackHoleParams(float(w["M"]), float(w["a"]), float(w["k"])) for w in p["waypoints"]])

    def radial_numerics(self) -> RadialNumerics:
        n = self.numerics
        keys = ("rtol", "atol", "n_out", "kh_max", "seed_order", "seed_delta")
        return RadialNumerics(**{k: n[k] for k in keys if k in n})

    def shoot_numerics(self) -> ShootNumerics:
        n = self.numerics
        keys = ("coarse_samples", "s_tol", "p_tol", "zero_tol", "angular_resolution")
        return ShootNumerics(radial=self.radial_numerics(), **{k: n[k] for k in keys if k in n})


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def load_config(text: str) -> JobConfig:
    """Parse YAML/JSON text and validate it against the job schema.

    Raises
    ------
    ConfigError
        On parse errors, schema violations or missing command inputs.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    missing = [k for k in _NEEDS[raw["command"]] if k not in raw and not (k == "path" and raw["command"] != "wkb")]
    if raw["command"] == "wkb" and "params" not in raw and "eps" not in raw:
        missing.append("params or eps")
    if missing:
        raise ConfigError(f"command {raw['command']!r} needs: {', '.join(missing)}")
    return JobConfig(raw, hashlib.sha256(_canonical(raw).encode()).hexdigest())


# --------------------------------------------------------------------------
# output


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


class Writer:
    """Collects artifacts in memory; files are written together at the end."""

    def __init__(self, cfg: JobConfig):
        self.cfg = cfg
        self.files: Dict[str, str] = {}

    def meta(self):
        return {"tool": "kadsmodes", "version": __version__, "config_sha256": self.cfg.digest,
                "command": self.cfg.command}

    def table(self, name: str, columns: List[str], rows):
        lines = [f"# {k}: {v}" for k, v in self.meta().items()]
        from io import StringIO
        buf = StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        self.files[f"{self.cfg.prefix}_{name}.csv"] = "\n".join(lines) + "\n" + buf.getvalue()

    def json(self, name: str, payload):
        doc = {"meta": self.meta(), "result": _jsonable(payload)}
        self.files[f"{self.cfg.prefix}_{name}.json"] = json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def flush(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            (out_dir / name).write_text(self.files[name])
        return sorted(self.files)


def _parse(cell: str):
    if cell in ("true", "false"):
        return cell == "true"
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            pass
    return cell


def read_csv(path):
    """Read a CSV written by the CLI.

    Returns
    -------
    (meta, columns, rows)
        ``meta`` is the ``# key: value`` header block; cells are parsed back
        to int, float or bool where possible (floats round-trip exactly).
    """
    meta, body = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition(": ")
                meta[k] = v
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], [[_parse(c) for c in row] for row in rows[1:]]


# --------------------------------------------------------------------------
# commands

_SOLUTION_COLUMNS = ["r", "r_star", "re_R", "im_R", "re_dR", "im_dR", "pomega", "im_W"]


def _solution_rows(sol):
    r = sol.r
    return zip(r, sol.r_star, sol.R.real, sol.R.imag, sol.dR.real, sol.dR.imag, sol.pomega, sol.W_im)


def _cmd_geom(cfg, out, jobs):
    g = derive_geometry(cfg.params())
    out.json("summary", {"M": g.params.M, "a": g.params.a, "k": g.params.k, "r_plus": g.r_plus,
                         "r_minus": g.r_minus, "Xi": g.Xi, "omega_plus": g.omega_plus, "eps": g.eps,
                         "surface_gravity": g.surface_gravity, "limit_ratio": g.limit_ratio})


def _cmd_angular(cfg, out, jobs):
    g = derive_geometry(cfg.params())
    m = cfg.get("m")
    res = cfg.numerics.get("angular_resolution", 1024)
    pairs = solve_angular(g, m, cfg.get("n_eigs", 1), resolution=res)
    out.table("eigenvalues", ["m", "ell", "lambda", "lambda_error"], [(p.m, p.ell, p.lam, p.lam_error) for p in pairs])
    out.table("eigenfunctions", ["ell", "theta", "S"],
              [(p.ell, t, s) for p in pairs for t, s in zip(p.theta_grid, p.S)])
    out.json("summary", {"m": m, "limit_target": g.limit_ratio, "lambda": [p.lam for p in pairs]})


def _cmd_potentials(cfg, out, jobs):
    g = derive_geometry(cfg.params())
    m = cfg.get("m")
    n_grid = cfg.numerics.get("n_grid", 10_000)
    lam = solve_angular(g, m, 1, resolution=cfg.numerics.get("angular_resolution", 1024))[0].lam
    pot = RadialPotential(g, m, lam)
    r, _ = certificate_grid(g, n_grid)
    v0, v00, v1, _ = eval_potentials(pot, r)
    out.table("potentials", ["r", "r_star", "V0", "V00", "V1"], zip(r, tortoise(g, r), v0, v00, v1))
    rep = positivity_certificates(g.params, m, n_grid, strict=False)
    out.json("certificates", {"passed": rep.passed, "failures": rep.failures(), "p_derivs": list(rep.p_derivs),
                              "lambda": lam, "lambda_tilde": pot.lam_tilde})
    if not rep.passed:
        raise KadsError("positivity certificate failed: " + "; ".join(rep.failures()))


def _cmd_shoot(cfg, out, jobs):
    shot = shoot(cfg.path(), float(cfg.get("s")), cfg.get("m"), cfg.shoot_numerics())
    out.table("profile", _SOLUTION_COLUMNS, _solution_rows(shot.solution))
    out.json("summary", {"s": shot.s, "params": shot.params.__dict__, "lambda": shot.lam, "g": shot.g,
                         "argmin": shot.argmin, "pomega0": shot.endpoint,
                         "near_horizon_positive": shot.near_horizon_positive})


def _cmd_find_mode(cfg, out, jobs):
    path, num = cfg.path(), cfg.shoot_numerics()
    cert = find_threshold(path, cfg.get("m"), numerics=num)
    shot = shoot(path, cert.s_m, cert.m, num)
    out.table("profile", _SOLUTION_COLUMNS, _solution_rows(shot.solution))
    out.json("certificate", cert.to_dict())


def _cmd_wkb(cfg, out, jobs):
    if "params" in cfg.raw:
        g = derive_geometry(cfg.params())
    else:
        path = cfg.path()
        g = path.geometry(path.find_eps(float(cfg.get("eps"))))
    m = cfg.get("m")
    lam = solve_angular(g, m, 1, resolution=cfg.numerics.get("angular_resolution", 1024))[0].lam
    pot = RadialPotential(g, m, lam)
    w = wkb_frequency_from_potential(pot)
    b = wkb_basis(pot, w, WkbNumerics(**{k: cfg.numerics[k] for k in ("rtol", "atol") if k in cfg.numerics}))
    p1 = 2 * np.real(b.R1 * np.conj(b.dR1))
    p2 = 2 * np.real(b.R2 * np.conj(b.dR2))
    out.table("basis", ["r_star", "F", "re_R1", "im_R1", "re_R2", "im_R2", "pomega1", "pomega2", "envelope_margin"],
              zip(b.r_star, b.F, b.R1.real, b.R1.imag, b.R2.real, b.R2.imag, p1, p2, b.envelope_margin()))
    phases = cfg.get("phases", [j * np.pi / 4 for j in range(8)])
    dips = [negativity_scan(b, np.exp(1j * th), 1.0) for th in phases]
    n1, n2 = negativity_scan(b, 1, 0), negativity_scan(b, 0, 1)
    out.json("summary", {"params": g.params.__dict__, "eps": g.eps, "m": m, "varpi": w,
                         "max_pomega1": n1.max_open, "max_pomega2": n2.max_open,
                         "q_at_dip": [d.q_at_dip for d in dips], "phases": list(phases)})


def _cmd_scan(cfg, out, jobs):
    rows, trend = accumulation_scan(cfg.path(), cfg.get("m_list"), cfg.shoot_numerics(), jobs=jobs)
    cols = ["m", "s_m", "eps", "residual_value", "residual_deriv", "pomega0", "bracket_width", "status"]
    table = []
    for r in rows:
        c = r["certificate"]
        if c is None:
            table.append((r["m"], float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), "failed"))
        else:
            table.append((c.m, c.s_m, c.eps_at_sm, c.residual_value, c.residual_deriv, c.pomega0, c.bracket_width, "ok"))
    out.table("accumulation", cols, table)
    out.json("certificates", {"trend_ok": trend, "rows": [
        {"m": r["m"], "error": r["error"], "certificate": r["certificate"].to_dict() if r["certificate"] else None}
        for r in rows]})
    failed = [r for r in rows if r["certificate"] is None]
    if failed:
        raise KadsError("; ".join(f"m={r['m']}: {r['error']}" for r in failed))


def _cmd_stability(cfg, out, jobs):
    rep = mode_stability_scan(cfg.params(), cfg.get("m_list"), cfg.get("ell_extra", 5),
                              cfg.numerics.get("n_grid", 10_000), cfg.numerics.get("angular_resolution", 1024))
    rows = []
    for row in rep.rows:
        m = row["m"]
        for j, (lam, lt, mn) in enumerate(zip(row["lam"], row["lam_tilde"], row["min_potential"])):
            rows.append((m, max(2, abs(m)) + j, lam, lt, mn, mn > 0))
    out.table("stability", ["m", "ell", "lambda", "lambda_tilde", "min_potential", "positive"], rows)
    out.json("summary", {"smallest_certified_m": rep.smallest_certified_m,
                         "certified": {str(r["m"]): r["certified"] for r in rep.rows}})


_DISPATCH = {
    "geom": _cmd_geom, "angular": _cmd_angular, "potentials": _cmd_potentials, "shoot": _cmd_shoot,
    "find-mode": _cmd_find_mode, "wkb": _cmd_wkb, "scan": _cmd_scan, "stability": _cmd_stability,
}


def run_job(cfg: JobConfig, out_dir, jobs: int = 1) -> int:
    """Execute one job and write its artifacts to ``out_dir``; returns the exit code."""
    out = Writer(cfg)
    out_dir = Path(out_dir)
    try:
        _DISPATCH[cfg.command](cfg, out, jobs)
    except (KadsError, ArithmeticError, ValueError) as exc:
        log.error("numerical failure: %s", exc)
        out.json("error", {"type": type(exc).__name__, "message": str(exc)})
        out.flush(out_dir)
        return EXIT_NUMERIC
    out.flush(out_dir)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="kadsmodes", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="YAML or JSON job file")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers for scans")
    ap.add_argument("--out-dir", default=".", help="directory for CSV/JSON artifacts")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    args = ap.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
        cfg = load_config(text)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return run_job(cfg, args.out_dir, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
