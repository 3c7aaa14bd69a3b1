"""Config-driven experiment runner.

    orbifold-yamabe <experiment> [--config PATH] [--out DIR] [--threads N] [--verbose]

The config is one JSON document (see ``schemas/config.schema.json``). Each run
writes ``report.json`` plus experiment-specific CSV files into the output
directory. Exit status: 0 success, 2 configuration error, 3 numeric failure
(including partial failures in sweeps); failures also write ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import _io, __version__
from . import asymptotics as asy
from . import bubble_energy as be
from . import pohozaev as ph
from . import solver as sv
from .geometry import Coordinate, Kind, RadialGeometry, numeric_scalar_curvature, scalar_curvature
from .kfamily import KFamily, KFamilyError

log = logging.getLogger("orbifold_yamabe")

EXPERIMENTS = ("curvature", "mass", "green", "solve", "continue", "count", "transform", "pohozaev", "energy",
               "classify", "sweep")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# config


def _need(d, key, kind, where):
    if key not in d:
        raise ConfigError(f"{where}: missing '{key}'")
    if not isinstance(d[key], kind):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return d[key]


def _geometry(cfg) -> RadialGeometry:
    g = _need(cfg, "geometry", dict, "config")
    kind = _need(g, "kind", str, "geometry")
    n = _need(g, "n_or_gamma", int, "geometry")
    try:
        return RadialGeometry(Kind(kind), n)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def _k_family(cfg, default=None) -> KFamily:
    k = cfg.get("k_family", default)
    if k is None:
        raise ConfigError("config: missing 'k_family'")
    if not isinstance(k, dict):
        raise ConfigError("k_family: expected object")
    try:
        return KFamily.from_dict(k)
    except (KeyError, ValueError, KFamilyError) as exc:
        raise ConfigError(f"k_family: {exc}") from exc


def _solver_cfg(cfg) -> dict:
    s = cfg.get("solver", {})
    if not isinstance(s, dict):
        raise ConfigError("solver: expected object")
    return s


def _p(cfg) -> float:
    p = float(_solver_cfg(cfg).get("p", 3.0))
    if not 1.0 < p <= 3.0:
        raise ConfigError(f"solver.p must lie in (1, 3], got {p}")
    return p


def _slopes(cfg, geom):
    scan = _solver_cfg(cfg).get("slope_scan")
    if scan is None:
        return sv.default_parameters(geom)
    try:
        lo, hi, count = float(scan["min"]), float(scan["max"]), int(scan["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("solver.slope_scan needs numeric min, max, count") from exc
    if not 0 < lo < hi or count < 2:
        raise ConfigError("solver.slope_scan must satisfy 0 < min < max and count >= 2")
    return np.geomspace(lo, hi, count)


def _far_end(cfg) -> float:
    T = float(_solver_cfg(cfg).get("far_end_T", sv.FAR_END_T))
    if T <= 1.0:
        raise ConfigError("solver.far_end_T must exceed 1")
    return T


def _range(spec, where):
    """A list of values, or ``{start, stop, count}`` (inclusive linear range)."""
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        try:
            start, stop, count = float(spec["start"]), float(spec["stop"]), int(spec["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: needs start, stop, count") from exc
        if count < 0:
            raise ConfigError(f"{where}: count must be nonnegative")
        return [float(v) for v in np.linspace(start, stop, count)]
    raise ConfigError(f"{where}: expected a list or a range object")


def _lebrun_compact(geom, experiment):
    if geom.kind is not Kind.LEBRUN_COMPACT:
        raise ConfigError(f"{experiment} requires a LebrunCompact geometry")
    return geom


def _solve_geometry(geom):
    if geom.kind is Kind.FOOTBALL:
        return geom
    return RadialGeometry(Kind.LEBRUN_COMPACT, geom.n, Coordinate.T)


def validate(cfg: dict, experiment: str | None = None) -> str:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    exp = cfg.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config experiment '{exp}' does not match subcommand '{experiment}'")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    if exp == "transform":
        geom = _geometry(cfg)
        if geom.kind is Kind.FOOTBALL:
            raise ConfigError("transform applies to LeBrun geometries, not the Football")
    return exp


# ---------------------------------------------------------------------------
# experiments; each returns (results dict, {filename: (header, rows)}, ok flag)


def _curvature(cfg, out, threads):
    geom = _geometry(cfg)
    exp = cfg.get("curvature", {})
    pts = exp.get("points")
    if pts is None:
        if geom.kind is Kind.FOOTBALL:
            pts = list(np.linspace(0.1, math.pi - 0.1, 50))
        else:
            pts = list(np.geomspace(0.1, 50.0, 50))
    step = float(exp.get("step", 5e-3))
    rows = []
    for x in pts:
        closed = float(scalar_curvature(geom, x))
        num = numeric_scalar_curvature(geom, x, step)
        err = abs(num - closed) / max(abs(closed), 1.0)
        rows.append((x, closed, num, err))
    worst = max((r[3] for r in rows), default=0.0)
    res = {"coordinate": geom.coordinate.value, "points": len(rows), "max_error": worst, "step": step}
    return res, {"curvature.csv": (("x", "closed_form", "numeric", "error"), rows)}, True


def _mass(cfg, out, threads):
    geom = _geometry(cfg)
    exp = cfg.get("mass", {})
    radii = exp.get("radii")
    nodes = int(exp.get("nodes", 32))
    if geom.kind is Kind.LEBRUN_ALE:
        est = asy.adm_mass(geom, radii=radii, nodes=nodes)
        res = {"expected": -2.0 * (geom.n - 2), **est.to_dict()}
    elif geom.kind is Kind.LEBRUN_COMPACT:
        chk = asy.mass_regular_term_check(geom, radii=radii, nodes=nodes)
        est = chk.estimate
        res = {"expected": -2.0 * (geom.n - 2), "implied_A": chk.implied_A, "twelve_A": chk.twelve_A,
               "regular_term_s": chk.regular_term_s, **est.to_dict()}
    else:
        raise ConfigError("mass needs a LeBrun geometry")
    return res, {"mass.csv": (("r", "flux", "residual"), est.csv_rows())}, est.converged


def _green(cfg, out, threads):
    geom = _lebrun_compact(_geometry(cfg), "green")
    g = asy.green_function_radial(geom)
    exact = g.s**-2 + geom.n
    err = np.abs(g.samples - exact) / exact
    rows = list(zip(g.s, g.samples, exact, err))
    res = {"leading_coefficient": g.leading_coefficient, "regular_term_s": g.regular_term_s,
           "max_relative_error": float(np.max(err))}
    return res, {"green.csv": (("s", "psi", "exact", "relative_error"), rows)}, True


def _solve(cfg, out, threads):
    geom = _solve_geometry(_geometry(cfg))
    K = _k_family(cfg)
    try:
        sol = sv.solve_bvp(geom, K, _p(cfg), _slopes(cfg, geom), _far_end(cfg))
    except sv.NotFound as exc:
        raise NumericFailure(str(exc), exc.scan.to_dict() if exc.scan is not None else {}) from exc
    header = ("coordinate", "t", "s", "u", "v", "residual")
    res = sol.metadata()
    res["min_u"] = float(np.min(sol.u_values))
    return res, {"solution.csv": (header, sol.csv_rows())}, sol.accepted


def _continue(cfg, out, threads):
    geom = _solve_geometry(_geometry(cfg))
    K = _k_family(cfg)
    p_grid = _solver_cfg(cfg).get("p_grid")
    if p_grid is None:
        raise ConfigError("continue needs solver.p_grid")
    p_grid = _range(p_grid, "solver.p_grid")
    try:
        cont = sv.continuation_in_p(geom, K, p_grid, _slopes(cfg, geom), _far_end(cfg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = cont.to_dict()
    res["argmax_on_orbifold_side"] = cont.argmax_on_orbifold_side(geom)
    rows = cont.to_rows()
    return res, {"continuation.csv": (("p", "max_u", "argmax", "slope", "residual_sup"), rows)}, not cont.failures


def _scan_rows(sc):
    return [(a, v, dv, F, c, x, d) for a, v, dv, F, c, x, d in sc.to_rows()]


_SCAN_HEADER = ("parameter", "terminal_value", "terminal_slope", "shooting_function", "crossed", "crossing",
                "diverged")


def _count(cfg, out, threads):
    geom = _solve_geometry(_geometry(cfg))
    K = _k_family(cfg)
    try:
        count, sols, sc = sv.multi_start_count(geom, K, _p(cfg), _slopes(cfg, geom), _far_end(cfg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = {"count": count, "brackets": len(sc.brackets), "slopes": [s.shooting_parameter for s in sols],
           "max_u": [s.max_u for s in sols], "terminations": sorted(set(sc.terminations()))}
    return res, {"scan.csv": (_SCAN_HEADER, _scan_rows(sc))}, True


def _random_identity_check(n, samples, seed):
    """Residual equality of the two transform forms on random smooth ``w(t)`` and random K."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.05, 10.0, 400)
    worst = 0.0
    rows = []
    for i in range(samples):
        a, b, c = rng.uniform(0.1, 2.0, 3)
        w = a * np.sin(b * t) + c * t * np.exp(-t)
        w2 = -a * b * b * np.sin(b * t) + c * (t - 2.0) * np.exp(-t)
        K = _random_family(rng)
        kn = K.value(sv.s_of_t(n, t))
        r1 = sv.residual_on_form(n, t, w, w2, kn)
        r2 = sv.residual_o2_form(t, w, w2, sv.k2_from_kn(n, t, kn))
        rel = float(np.max(np.abs(r1 - r2) / np.maximum(np.abs(r1), 1e-300)))
        worst = max(worst, rel)
        rows.append((i, rel))
    return worst, rows


def _random_family(rng) -> KFamily:
    kind = rng.integers(0, 3)
    if kind == 0:
        return KFamily.from_dict({"kind": "Constant", "params": {"c": float(rng.uniform(0.2, 5.0))}})
    amp = float(rng.uniform(-0.8, 2.0))
    name = "Bump" if kind == 1 else "RationalDecay"
    return KFamily.from_dict({"kind": name, "params": {"amplitude": amp, "base": 1.0,
                                                         "width": float(rng.uniform(0.3, 3.0))}})


def _transform(cfg, out, threads):
    geom = _geometry(cfg)
    exp = cfg.get("transform", {})
    seed = int(cfg.get("output", {}).get("seed", 0))
    worst, rows = _random_identity_check(geom.n, int(exp.get("samples", 20)), seed)
    res = {"identity_max_relative_difference": worst, "samples": len(rows)}
    files = {"identity.csv": (("sample", "relative_difference"), rows)}
    if "k_family" in cfg:
        K = _k_family(cfg)
        try:
            sol = sv.solve_bvp(_solve_geometry(geom), K, 3.0, _slopes(cfg, geom), _far_end(cfg))
            tr = sv.transform_n_to_2(sol, K)
            res.update({"residual_in": tr.residual_in, "residual_out": tr.residual_out})
            files["transformed.csv"] = (("s2", "v2"), list(zip(tr.s2, tr.v2)))
        except sv.NotFound as exc:
            res["solution"] = f"not found: {exc}"
    return res, files, worst <= 1e-12


def _pohozaev(cfg, out, threads):
    geom = _geometry(cfg)
    if geom.kind is Kind.LEBRUN_ALE:
        raise ConfigError("pohozaev runs on the compact LeBrun geometry or the Football")
    K = _k_family(cfg)
    p = _p(cfg)
    exp = cfg.get("pohozaev", {})
    try:
        sol = sv.solve_bvp(_solve_geometry(geom), K, p, _slopes(cfg, geom), _far_end(cfg))
    except sv.NotFound as exc:
        raise NumericFailure(str(exc), exc.scan.to_dict() if exc.scan is not None else {}) from exc
    r_max = float(exp.get("r_max", 1.0 if geom.is_lebrun else 0.5 * math.pi))
    points = int(exp.get("points", 321))
    radii = _range(exp.get("radii", {"start": 0.1 * r_max, "stop": r_max, "count": 10}), "pohozaev.radii")
    coeffs = ph.lebrun_coefficients(geom.n, K, p) if geom.is_lebrun else ph.football_coefficients(K, p)
    data = ph.RadialSamples.from_solution(sol, points, r_max)
    reports = [ph.pohozaev_report(data, coeffs, r, geom.group_order) for r in radii]
    header = ("r", "boundary_P") + ph.TERM_NAMES + ("residual", "scale")
    rows = [(rep.r, rep.boundary_P, *[rep.volume_terms[k] for k in ph.TERM_NAMES], rep.residual, rep.scale)
            for rep in reports]
    tol = float(exp.get("tolerance", 1e-4))
    worst = max((rep.relative_residual for rep in reports), default=0.0)
    res = {"max_relative_residual": worst, "tolerance": tol, "reports": [rep.to_dict() for rep in reports]}
    return res, {"pohozaev.csv": (header, rows)}, worst <= tol


def _energy(cfg, out, threads):
    geom = _lebrun_compact(_geometry(cfg), "energy")
    K = _k_family(cfg, {"kind": "Constant", "params": {"c": 1.0}})
    lams = _range(cfg.get("energy", {}).get("lambdas", [20.0, 40.0, 80.0, 160.0]), "energy.lambdas")
    try:
        exp = be.energy_expansion_check(geom, K, lams, p=_p(cfg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = exp.to_dict()
    res["threshold"] = be.sobolev_quotient(4) / math.sqrt(geom.group_order * K.at_zero)
    res["B_K"] = be.modified_max_BK(K, geom)
    return res, {"energy.csv": (("lambda", "J", "fitted"), exp.to_rows())}, True


def _classify(cfg, out, threads):
    geom = _geometry(cfg)
    K = _k_family(cfg)
    w = sv.classify_wall(K, geom.n)
    return {"label": w.label.value, "margin": w.margin, "n": geom.n}, {}, True


_SWEEP_HEADER = ("value", "margin", "label", "count", "max_u", "residual_sup", "status", "error")


def _sweep_row(cfg, geom, base, name, value):
    params = dict(base.get("params", {}))
    params[name] = value
    try:
        K = KFamily.from_dict({**base, "params": params})
    except (KeyError, ValueError, KFamilyError) as exc:
        return (value, math.nan, "", -1, math.nan, math.nan, "failed", str(exc))
    w = sv.classify_wall(K, geom.n)
    try:
        count, sols, _ = sv.multi_start_count(geom, K, _p(cfg), _slopes(cfg, geom), _far_end(cfg))
    except (ValueError, ArithmeticError) as exc:
        return (value, w.margin, w.label.value, -1, math.nan, math.nan, "failed", str(exc))
    mx = max((s.max_u for s in sols), default=math.nan)
    rs = max((s.residual_sup for s in sols), default=math.nan)
    return (value, w.margin, w.label.value, count, mx, rs, "ok", "")


def _sweep(cfg, out, threads):
    geom = _solve_geometry(_geometry(cfg))
    spec = cfg.get("sweep")
    if not isinstance(spec, dict):
        raise ConfigError("sweep needs a 'sweep' object with 'parameter' and 'values'")
    name = _need(spec, "parameter", str, "sweep")
    values = _range(spec.get("values", []), "sweep.values")
    base = cfg.get("k_family")
    if not isinstance(base, dict) or base.get("kind") not in ("Bump", "RationalDecay", "Constant"):
        raise ConfigError("sweep needs a Constant, Bump or RationalDecay k_family")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        # map keeps parameter order regardless of completion order
        rows = list(pool.map(lambda v: _sweep_row(cfg, geom, base, name, v), values))
    failed = [r[0] for r in rows if r[6] != "ok"]
    res = {"parameter": name, "rows": len(rows), "failed_values": failed}
    return res, {"sweep.csv": (_SWEEP_HEADER, rows)}, not failed


RUNNERS = {
    "curvature": _curvature, "mass": _mass, "green": _green, "solve": _solve, "continue": _continue,
    "count": _count, "transform": _transform, "pohozaev": _pohozaev, "energy": _energy,
    "classify": _classify, "sweep": _sweep,
}


# ---------------------------------------------------------------------------
# driver


def versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "orbifold_yamabe": __version__}


def _write_error(out: Path, kind: str, message: str, chash, diagnostics=None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _io.write_json(out / "error.json", {"status": "error", "error": {"type": kind, "message": message,
                                                                     "diagnostics": diagnostics or {}},
                                        "config_hash": chash, "versions": versions()})


def run(cfg: dict, out, experiment: str | None = None, threads: int = 1) -> int:
    """Run one experiment; returns the exit status."""
    out = Path(out)
    chash = None
    try:
        chash = _io.config_hash(cfg)
        exp = validate(cfg, experiment)
    except (ConfigError, TypeError) as exc:
        _write_error(out, "config", str(exc), chash)
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        results, files, ok = RUNNERS[exp](cfg, out, threads)
    except ConfigError as exc:
        _write_error(out, "config", str(exc), chash)
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericFailure as exc:
        _write_error(out, "numeric", str(exc), chash, exc.diagnostics)
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        _write_error(out, "numeric", f"{type(exc).__name__}: {exc}", chash)
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    elapsed = time.perf_counter() - t0
    for name, (header, rows) in files.items():
        _io.write_csv(out / name, header, rows)
    report = {
        "experiment": exp,
        "status": "ok" if ok else "failed",
        "config": cfg,
        "config_hash": chash,
        "versions": versions(),
        "results": results,
        "files": sorted(files),
        "timings": {"total_seconds": elapsed},
    }
    _io.write_json(out / "report.json", report)
    if not ok:
        _write_error(out, "numeric", "experiment completed with failed checks or rows", chash)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbifold-yamabe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        _write_error(args.out, "config", "--threads must be at least 1", None)
        return EXIT_CONFIG
    cfg = {"experiment": args.experiment}
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            _write_error(args.out, "config", f"cannot read config: {exc}", None)
            return EXIT_CONFIG
        if isinstance(cfg, dict):
            cfg.setdefault("experiment", args.experiment)
    out = args.out
    if isinstance(cfg, dict) and "output" in cfg and args.out == Path("out"):
        out = Path(cfg["output"].get("directory", out))
    status = run(cfg, out, args.experiment, args.threads)
    print(json.dumps({"status": status, "out": str(out)}))
    return status


if __name__ == "__main__":
    sys.exit(main())
