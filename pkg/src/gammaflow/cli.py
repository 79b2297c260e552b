"""Command line entry point: ``gammaflow <kind> --config cfg.json --out DIR``.

Exit codes: 0 success, 1 usage error (bad arguments, schema or input), 2 a
scientific invariant failed on the computed output.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .currents import BoxDomain, OneCurrent, ZeroCurrent, boundary_one, mass_zero
from .io import (current_from_json, current_to_json, json_text, sha256, write_csv, write_json)

KINDS = ("energy", "jacobian", "decompose", "flatnorm", "deform", "recover", "minimize", "sweep", "selftest")
FIXTURES = ("dipole", "three_atoms", "square_loop", "boundary_d1", "boundary_d2")


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


def fixtures() -> dict:
    """Names of the bundled fixtures mapped to their paths."""
    root = resources.files("gammaflow") / "fixtures"
    return {p.name: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name)
            if p.name.endswith((".json", ".csv"))}


def load_fixture(name: str) -> dict:
    return json.loads(fixtures()[f"{name}.json"].read_text())


# --- schema ----------------------------------------------------------------

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 3}
_CURRENT = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "atoms": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["x", "m"],
            "properties": {"x": _POINT, "m": {"type": "integer"}}}},
        "segments": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["a", "b", "m"],
            "properties": {"a": _POINT, "b": _POINT, "m": {"type": "integer"}}}},
        "source": {"type": "string"},
    },
    "additionalProperties": False,
}
_CURRENT_REF = {"oneOf": [
    _CURRENT,
    {"type": "object", "required": ["fixture"], "additionalProperties": False,
     "properties": {"fixture": {"enum": ["dipole", "three_atoms", "square_loop"]}}},
    {"type": "object", "required": ["path"], "additionalProperties": False,
     "properties": {"path": {"type": "string"}}},
]}
_DOMAIN = {"type": "object", "required": ["lo", "hi"], "additionalProperties": False,
           "properties": {"lo": _POINT, "hi": _POINT}}
_P = {"type": "number", "exclusiveMinimum": 1, "exclusiveMaximum": 2}
_PLIST = {"type": "array", "items": _P, "minItems": 1}

PARAMS = {
    "energy": {"field": {"type": "string"}, "current": _CURRENT_REF, "domain": _DOMAIN,
               "h": {"type": "number", "exclusiveMinimum": 0}, "p": _P, "variant": {"type": "boolean"}},
    "jacobian": {"field": {"type": "string"}, "current": _CURRENT_REF, "domain": _DOMAIN,
                 "h": {"type": "number", "exclusiveMinimum": 0}},
    "decompose": {"current": _CURRENT_REF, "domain": _DOMAIN, "n": {"type": "integer", "minimum": 2},
                  "p": _P, "alpha": {"type": "number"}, "check_bounds": {"type": "boolean"}},
    "flatnorm": {"current": _CURRENT_REF, "other": _CURRENT_REF, "domain": _DOMAIN},
    "deform": {"current": _CURRENT_REF, "domain": _DOMAIN, "ell": {"type": "number", "exclusiveMinimum": 0},
               "delta": {"type": "number", "exclusiveMinimum": 0}, "shift": _POINT},
    "recover": {"current": _CURRENT_REF, "domain": _DOMAIN, "h": {"type": "number", "exclusiveMinimum": 0},
                "p_values": _PLIST, "delta_tube": {"type": "number", "exclusiveMinimum": 0},
                "gamma_tube": {"type": "number", "exclusiveMinimum": 0}},
    "sweep": {"current": _CURRENT_REF, "domain": _DOMAIN, "p_values": _PLIST,
              "h_values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
              "delta_tube": {"type": "number", "exclusiveMinimum": 0},
              "check_monotone": {"type": "boolean"}},
    "minimize": {"degree": {"type": "integer"}, "p": _P, "grid": {"type": "integer", "minimum": 32},
                 "shape": {"enum": ["disk", "box"]}, "variant": {"type": "boolean"},
                 "tol": {"type": "number", "exclusiveMinimum": 0},
                 "max_sweeps": {"type": "integer", "minimum": 1}, "warm_from": {"type": "string"}},
    "selftest": {},
}

DEFAULTS = {
    "energy": {"variant": False},
    "jacobian": {},
    "decompose": {"n": 2, "check_bounds": False},
    "flatnorm": {},
    "deform": {"delta": 0.5},
    "recover": {"delta_tube": 0.2, "gamma_tube": 1.0},
    "sweep": {"delta_tube": 0.1, "check_monotone": True},
    "minimize": {"degree": 1, "p": 1.5, "grid": 128, "shape": "disk", "variant": False,
                 "tol": 1e-7, "max_sweeps": 3000},
    "selftest": {},
}

REQUIRED = {
    "energy": ["p"], "jacobian": [], "decompose": ["current", "p", "alpha"],
    "flatnorm": ["current"], "deform": ["current", "ell"],
    "recover": ["current", "h", "p_values"], "sweep": ["current", "p_values"],
    "minimize": [], "selftest": [],
}

UNITS = {
    "ledger.csv": {"k": "index", "alpha_k": "length", "e_k": "count", "e_prime_k": "count"},
    "intersections.csv": {"cell_ix": "index", "cell_iy": "index", "cell_iz": "index",
                          "normal_axis": "index", "count": "signed count"},
    "rows.csv": {"p": "1", "h": "length", "rescaled_energy": "energy*(n-p)", "target": "energy*(n-p)",
                 "ratio": "1", "flat_distance": "length", "tube_part": "energy*(n-p)",
                 "skeleton_part": "energy*(n-p)", "exterior_part": "energy*(n-p)"},
    "vortices.csv": {"x": "length", "y": "length", "multiplicity": "signed count"},
}


def config_schema(kind: str) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "kind": {"const": kind},
            "seed": {"type": "integer", "minimum": 0},
            "threads": {"type": "integer", "minimum": 1},
            "params": {"type": "object", "additionalProperties": False, "properties": PARAMS[kind],
                       "required": REQUIRED[kind]},
        },
    }


def resolve_config(kind: str, cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, config_schema(kind))
    except jsonschema.ValidationError as e:
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise UsageError(f"config invalid at {where}: {e.message}") from None
    out = copy.deepcopy(cfg)
    out["kind"] = kind
    out.setdefault("seed", 0)
    out["params"] = {**DEFAULTS[kind], **out.get("params", {})}
    return out


# --- helpers ---------------------------------------------------------------

def _current(ref, base: Path):
    if ref is None:
        return None
    if "fixture" in ref:
        return current_from_json(load_fixture(ref["fixture"])["current"])
    if "path" in ref:
        obj = json.loads((base / ref["path"]).read_text())
        return current_from_json(obj.get("current", obj))
    return current_from_json(ref)


def _domain(params, ref, base: Path):
    if "domain" in params:
        return BoxDomain.from_json(params["domain"])
    if ref and "fixture" in ref:
        fx = load_fixture(ref["fixture"])
        if "domain" in fx:
            return BoxDomain.from_json(fx["domain"])
    if ref and "path" in ref:
        obj = json.loads((base / ref["path"]).read_text())
        if "domain" in obj:
            return BoxDomain.from_json(obj["domain"])
    raise UsageError("params.domain is required")


def _check(cond: bool, predicate: str, **values):
    if not cond:
        detail = ", ".join(f"{k}={v!r}" for k, v in values.items())
        raise InvariantError(f"invariant failed: {predicate}" + (f" ({detail})" if detail else ""))


def _parallel_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --- commands --------------------------------------------------------------

def _field_from_params(P, base, dim_hint=None):
    from .fields import box_lattice, product_vortex, read_field, solid_angle_vortex
    if "field" in P:
        return read_field(base / P["field"])
    T = _current(P.get("current"), base)
    if T is None or "h" not in P:
        raise UsageError("give params.field, or params.current with params.domain and params.h")
    D = _domain(P, P.get("current"), base)
    D = box_lattice(D.lo, D.hi, P["h"])
    if isinstance(T, ZeroCurrent):
        return product_vortex([(x, m) for x, m in T], D, P["h"])
    return solid_angle_vortex(T, D, P["h"])


def cmd_energy(cfg, out: Path, base: Path, threads: int) -> dict:
    from .fields import p_energy
    P = cfg["params"]
    fld = _field_from_params(P, base)
    rep = p_energy(fld, P["p"], variant=P["variant"])
    obj = {"p": rep.p, "total": rep.total, "rescaled": rep.rescaled, "variant": rep.variant,
           "h": fld.h, "dims": list(fld.dims)}
    write_json(out / "energy.json", obj)
    return {"energy.json": None}


def cmd_jacobian(cfg, out, base, threads):
    from .jacobian import SOURCE_TAG, face_vorticity_3d, plaquette_vorticity
    P = cfg["params"]
    fld = _field_from_params(P, base)
    if fld.dim == 2:
        T = plaquette_vorticity(fld)
    else:
        T = face_vorticity_3d(fld)
        _check(not boundary_one(T, fld.domain), "extracted 1-current is boundary-free in the box")
    write_json(out / "jacobian.json", current_to_json(T, source=SOURCE_TAG))
    return {"jacobian.json": None}


def cmd_decompose(cfg, out, base, threads):
    from .decomposition import DecompParams, decompose, verify_bounds
    from .vortex_energy import product_vortex_energy
    P = cfg["params"]
    T = _current(P["current"], base)
    if not isinstance(T, ZeroCurrent):
        raise UsageError("decompose takes a 0-current")
    D = _domain(P, P["current"], base)
    params = DecompParams(P["n"], P["p"], P["alpha"])
    res = decompose(T, D, params)
    Tin = T.restrict(D)
    _check(res.X + boundary_one(res.S, D) == Tin, "X + boundary(S) == T")
    longest = max((pc.distance for pc in res.pairs), default=0.0)
    _check(longest <= params.alpha_1, "segment length <= alpha_1", longest=longest, alpha_1=params.alpha_1)
    obj = res.to_json()
    if P["check_bounds"]:
        if T.dim != 2 or set(np.abs(T.multiplicities).tolist()) - {1}:
            raise UsageError("bounds need unit atoms in 2-D")
        E = (2 - P["p"]) * product_vortex_energy(Tin.points, Tin.multiplicities, D, P["p"])
        rep = verify_bounds(res, mass_zero(Tin), E, params)
        obj["bounds"] = rep.to_json()
        obj["rescaled_energy"] = E
        _check(rep.all_ok, "decomposition bounds hold", **rep.to_json())
    write_json(out / "decomposition.json", obj)
    write_csv(out / "ledger.csv", ["k", "alpha_k", "e_k", "e_prime_k"], res.ledger.rows())
    return {"decomposition.json": None, "ledger.csv": UNITS["ledger.csv"]}


def cmd_flatnorm(cfg, out, base, threads):
    from .flatnorm import flat_norm_zero
    P = cfg["params"]
    T = _current(P["current"], base)
    D = _domain(P, P["current"], base)
    if "other" in P:
        T = T - _current(P["other"], base)
    val, W = flat_norm_zero(T, D)
    _check(boundary_one(W, D) == T.restrict(D), "boundary of the witness equals the input")
    write_json(out / "flatnorm.json", {"value": val, "witness": current_to_json(W)})
    return {"flatnorm.json": None}


def cmd_deform(cfg, out, base, threads):
    from .grids import GridSpec, deform_to_dual, dual_edge_multiplicities, intersection_numbers, select_shift
    P = cfg["params"]
    C = _current(P["current"], base)
    if not isinstance(C, OneCurrent) or C.dim != 3:
        raise UsageError("deform takes a closed polygon in R^3")
    try:
        D = _domain(P, P["current"], base)
    except UsageError:
        D = None
    diag = None
    if "shift" in P:
        a = tuple(P["shift"])
    else:
        a, diag = select_shift(C, D, P["ell"], P["delta"], seed=cfg["seed"])
    G = GridSpec(P["ell"], a)
    S = deform_to_dual(C, G, D)
    I = intersection_numbers(C, G)
    _check(not boundary_one(S), "deformed chain is closed")
    _check(dual_edge_multiplicities(S, G) == I, "dual-edge multiplicities equal intersection numbers")
    write_json(out / "deformed.json", {"shift": list(a), "ell": P["ell"], "current": current_to_json(S),
                                       "shift_diagnostics": diag.to_json() if diag else None})
    write_csv(out / "intersections.csv", ["cell_ix", "cell_iy", "cell_iz", "normal_axis", "count"],
              [(*k, v) for k, v in I.items()])
    return {"deformed.json": None, "intersections.csv": UNITS["intersections.csv"]}


def _write_rows(out, stem, rows):
    from .recovery import CSV_FIELDS
    write_csv(out / f"{stem}.csv", CSV_FIELDS, [r.csv_values() for r in rows])
    write_json(out / f"{stem}.json", {"rows": [r.to_json() for r in rows]})


def cmd_recover(cfg, out, base, threads):
    from .recovery import RecoveryPlan, limsup_sweep_3d
    P = cfg["params"]
    C = _current(P["current"], base)
    if not isinstance(C, OneCurrent):
        raise UsageError("recover takes a closed polygon in R^3")
    from .grids import _polygon_vertices
    V = _polygon_vertices(C)
    D = _domain(P, P["current"], base)
    plan = RecoveryPlan(P["p_values"], delta_tube=P["delta_tube"], gamma_tube=P["gamma_tube"])
    rows = limsup_sweep_3d(V, D, plan, P["h"])
    for r in rows:
        parts = r.tube_part + r.skeleton_part + r.exterior_part
        _check(abs(parts - r.rescaled_energy) <= 1e-9 * abs(r.rescaled_energy), "energy split sums to total",
               p=r.p, parts=parts, total=r.rescaled_energy)
        _check(r.extra["extracted_closed"], "extracted 1-current is closed", p=r.p)
    _write_rows(out, "recover", rows)
    return {"recover.csv": UNITS["rows.csv"], "recover.json": None}


def cmd_sweep(cfg, out, base, threads):
    from .recovery import RecoveryPlan, default_h, limsup_sweep_2d
    P = cfg["params"]
    T = _current(P["current"], base)
    if not isinstance(T, ZeroCurrent) or T.dim != 2:
        raise UsageError("sweep takes a 0-current in 2-D")
    D = _domain(P, P["current"], base)
    ps = list(P["p_values"])
    hs = P.get("h_values")
    if hs is not None and len(hs) != len(ps):
        raise UsageError("h_values must match p_values")

    def one(k):
        rule = (lambda p, _h=hs[k]: _h) if hs else default_h
        plan = RecoveryPlan([ps[k]], h_rule=rule, delta_tube=P["delta_tube"])
        return limsup_sweep_2d(T, D, plan)[0]

    rows = _parallel_map(one, range(len(ps)), threads)
    for r in rows:
        _check(r.flat_distance == 0.0, "extracted Jacobian equals the target", p=r.p, flat=r.flat_distance)
    if P["check_monotone"] and len(rows) > 1:
        order = sorted(rows, key=lambda r: r.p)
        gaps = [abs(r.ratio - 1) for r in order]
        _check(all(gaps[i] <= gaps[i + 1] for i in range(len(gaps) - 1)),
               "|ratio - 1| non-increasing as p decreases", gaps=gaps)
    _write_rows(out, "sweep", rows)
    return {"sweep.csv": UNITS["rows.csv"], "sweep.json": None}


def cmd_minimize(cfg, out, base, threads):
    from .fields import read_field, write_field
    from .minimizer import BoundaryDatum, SolveOptions, minimize, vortices
    P = cfg["params"]
    datum = BoundaryDatum(P["degree"], P["grid"], P["shape"])
    if not 1.2 <= P["p"] <= 1.9:
        raise UsageError("minimize needs p in [1.2, 1.9]")
    opts = SolveOptions(P["p"], variant=P["variant"], tol=P["tol"], max_sweeps=P["max_sweeps"], seed=cfg["seed"])
    init = None
    if "warm_from" in P:
        w = read_field(base / P["warm_from"])
        if w.dims != (P["grid"], P["grid"]):
            raise UsageError("warm-start field has the wrong grid")
        init = w.values
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(datum, opts, init)
    T = vortices(res.field, res.active)
    _check(T.total() == P["degree"], "total vorticity equals the boundary degree",
           total=T.total(), degree=P["degree"])
    _check(res.energy <= res.initial_energy, "minimized energy <= initial energy")
    write_field(out / "field.sphf", res.field, {"p": P["p"], "degree": P["degree"]})
    write_json(out / "energy.json", {"p": res.report.p, "total": res.report.total,
                                     "rescaled": res.report.rescaled, "variant": res.report.variant,
                                     "initial_energy": res.initial_energy, "iterations": res.iterations,
                                     "converged": res.converged})
    write_csv(out / "vortices.csv", ["x", "y", "multiplicity"], [(x[0], x[1], m) for x, m in T])
    return {"field.sphf": None, "field.sphf.json": None, "energy.json": None,
            "vortices.csv": UNITS["vortices.csv"]}


def selftest_cases():
    """The simplest example of every module, as (name, zero-argument predicate)."""
    from . import decomposition as dec, fields as fl, flatnorm as fn, grids as gr
    from . import jacobian as jac, minimizer as mn, recovery as rc
    from .currents import Constants, pair_min
    U2 = BoxDomain((0.0, 0.0), (1.0, 1.0))
    dip = ZeroCurrent([((0.4, 0.5), 1), ((0.6, 0.5), -1)])
    h = 1 / 16
    D2 = fl.box_lattice((-1, -1), (1, 1), h)
    return [
        ("core_currents: omega_1 = 2 pi", lambda: abs(Constants(2).omega - 2 * math.pi) < 1e-15),
        ("core_currents: pair_min of a dipole is the pair",
         lambda: abs(pair_min(dip, U2).distance - 0.2) < 1e-15),
        ("core_currents: flat norm of zero is zero", lambda: fn.flat_norm_zero(ZeroCurrent(dim=2), U2).value == 0),
        ("lattice_fields: constant field has zero energy",
         lambda: fl.p_energy(fl.LatticeField(D2, h, np.zeros((33, 33))), 1.5).total == 0),
        ("lattice_fields: flat vortex energy n=2 p=1.5 is 4 pi",
         lambda: abs(fl.flat_vortex_energy(2, 0, 1.5, 1.0) - 4 * math.pi) < 1e-12),
        ("jacobian: constant field is vorticity free",
         lambda: not jac.plaquette_vorticity(fl.LatticeField(D2, h, np.full((33, 33), 0.3)))),
        ("decomposition: empty input gives empty output",
         lambda: not dec.decompose(ZeroCurrent(dim=2), U2, dec.DecompParams(2, 1.9, 0.9)).S),
        ("decomposition: dipole pairs into one segment",
         lambda: len(dec.decompose(dip, U2, dec.DecompParams(2, 1.9, 0.9)).S) == 1),
        ("grid_deformation: cube center is ell/2 from the 2-skeleton",
         lambda: gr.skeleton_distance((0.5, 0.5, 0.5), gr.GridSpec(1.0, (0, 0, 0)), 2) == 0.5),
        ("grid_deformation: vertex lies on the 0-skeleton",
         lambda: gr.skeleton_distance((1.0, 2.0, 3.0), gr.GridSpec(1.0, (0, 0, 0)), 0) == 0.0),
        ("recovery: empty target has zero energy",
         lambda: rc.limsup_sweep_2d(ZeroCurrent(dim=2), U2, rc.RecoveryPlan([1.5]))[0].rescaled_energy == 0),
        ("minimizer: constant datum stays constant with zero energy",
         lambda: mn.minimize(mn.BoundaryDatum(0, 32), mn.SolveOptions(1.5)).energy == 0.0),
    ]


def cmd_selftest(cfg, out, base, threads):
    results = []
    for name, fn in selftest_cases():
        try:
            ok = bool(fn())
        except Exception as e:  # a crash is a failed case
            ok = False
            name = f"{name} [{type(e).__name__}: {e}]"
        results.append({"name": name, "ok": ok})
    write_json(out / "selftest.json", {"cases": results})
    bad = [r["name"] for r in results if not r["ok"]]
    _check(not bad, "selftest cases pass", failed=bad)
    return {"selftest.json": None}


COMMANDS = {
    "energy": cmd_energy, "jacobian": cmd_jacobian, "decompose": cmd_decompose, "flatnorm": cmd_flatnorm,
    "deform": cmd_deform, "recover": cmd_recover, "minimize": cmd_minimize, "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gammaflow", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", type=Path, help="experiment config JSON (optional for selftest/minimize)")
    ap.add_argument("--out", type=Path, required=True, help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    g = ap.add_argument_group("minimize")
    g.add_argument("--degree", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--grid", type=int)
    g.add_argument("--variant", action="store_true", default=None)
    g.add_argument("--tol", type=float)
    g.add_argument("--warm-from", dest="warm_from")
    return ap


def run(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise UsageError(f"cannot read config: {e}") from None
            base = args.config.parent
        elif args.kind in ("selftest", "minimize"):
            raw, base = {}, Path.cwd()
        else:
            raise UsageError(f"{args.kind} needs --config")
        if args.kind == "minimize":
            over = {k: getattr(args, k) for k in ("degree", "p", "grid", "variant", "tol", "warm_from")
                    if getattr(args, k) is not None}
            if over:
                raw = {**raw, "params": {**raw.get("params", {}), **over}}
        elif any(getattr(args, k) is not None for k in ("degree", "p", "grid", "variant", "tol", "warm_from")):
            raise UsageError("--degree/--p/--grid/--variant/--tol/--warm-from only apply to minimize")
        if args.seed is not None:
            raw = {**raw, "seed": args.seed}
        cfg = resolve_config(args.kind, raw)
        threads = args.threads or cfg.get("threads") or int(os.environ.get("GAMMAFLOW_THREADS", "1") or 1)
        if threads < 1:
            raise UsageError("thread budget must be positive")
        cfg["threads"] = threads
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.kind](cfg, args.out, base, threads)
        status, message = 0, "ok"
    except UsageError as e:
        print(f"gammaflow: error: {e}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"gammaflow: error: {e}", file=sys.stderr)
        return 1
    except (InvariantError, AssertionError) as e:
        print(f"gammaflow: {e}", file=sys.stderr)
        outputs, status, message = {}, 2, str(e)
        args.out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "artifact": "gammaflow",
        "version": __version__,
        "kind": args.kind,
        "config": cfg,
        "status": status,
        "message": message,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": {name: sha256(args.out / name) for name in sorted(outputs)},
        "units": {name: u for name, u in sorted(outputs.items()) if u},
    }
    (args.out / "manifest.json").write_text(json_text(manifest))
    return status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
