"""Command line front end: ``bcpatch <command> ...``.

Every command writes its outputs plus a manifest ``<out>.manifest.json``.
Exit codes: 0 success, 1 usage error, 2 nonconvergence, 3 resolution or
precondition failure.  Errors also print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy.fft

from . import __version__
from .errors import BcpatchError, DomainError, UsageError

# flag defaults; argparse itself defaults everything to None so that
# flags > config file > these values can be resolved afterwards
DEFAULTS = {
    "psi0": {"modes": 1024, "grid": None, "out": "psi0.bin"},
    "barrier": {"s": 0.5, "K": 4096, "out": "profile.json"},
    "steady": {"s": 0.5, "eps": 1e-3, "grid": 1024, "omega": 0.5, "tol": 1e-8, "max_iter": 5000,
               "init": "psi0", "init_file": None, "corner": "barrier", "profile": None,
               "out": "phi.bin", "report": "report.json"},
    "sandwich": {"field": None, "s": None, "eps": None, "profile": None, "out": "sandwich.json"},
    "ratio": {"field": None, "s": None, "eps": None, "profile": None, "r_min": None, "out": "ratio.json"},
    "holder": {"field": None, "s": None, "eps": None, "profile": None, "radii": 24, "r_hi": None,
               "absolute": False, "out": "holder.json"},
    "sweep": {"s": 0.5, "eps": [1e-2, 1e-3, 1e-4], "grid": 1024, "pairs": 4000, "omega": 0.5, "tol": 1e-8,
              "max_iter": 5000, "profile": None, "out": "sweep.json", "csv": None},
    "lab": {"id": "sobolev_h1", "trials": 500, "grid": 64, "s": 0.5, "delta": 0.1, "profile": None,
            "out": "lab.json"},
    "green": {"x": None, "y": None, "terms": 16, "out": None},
}
COMMON = {"seed": 0, "threads": 1, "config": None}


# ------------------------------------------------------------------ output

def _fmt(obj) -> str:
    """JSON with every float at 17 significant digits; NaN and inf become null."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return "null" if not math.isfinite(v) else "%.17g" % v
    if isinstance(obj, np.ndarray):
        return _fmt(obj.tolist())
    return json.dumps(str(obj))


def dumps(obj) -> str:
    return _fmt(obj) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(primary, argv, config, inputs, outputs, seed, wall):
    m = {
        "tool": "bcpatch",
        "version": __version__,
        "command": list(argv),
        "config": config,
        "config_hash": hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest(),
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "wall_time": wall,
    }
    path = Path(str(primary) + ".manifest.json")
    write_json(path, m)
    return path


# ------------------------------------------------------------------ parser

class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, usage=self.format_usage())


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for transforms")
    p.add_argument("--config", default=None, help="flat JSON file with flag values")


def _field_args(p):
    p.add_argument("--field", help="binary field file")
    p.add_argument("--s", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--profile", help="angular profile JSON (solved when omitted)")


def build_parser() -> argparse.ArgumentParser:
    top = Parser(prog="bcpatch", description="Singular steady Euler states near a vortex-patch corner.")
    top.add_argument("--version", action="version", version=f"bcpatch {__version__}")
    sub = top.add_subparsers(dest="command", parser_class=Parser)

    p = sub.add_parser("psi0", help="stream function of the four-patch data")
    p.add_argument("--modes", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--out")
    _common(p)

    p = sub.add_parser("barrier", help="angular profile of the self-similar barrier")
    p.add_argument("--s", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--out")
    _common(p)

    p = sub.add_parser("steady", help="steady-state solver")
    ss = p.add_subparsers(dest="action", parser_class=Parser)
    q = ss.add_parser("solve")
    q.add_argument("--s", type=float)
    q.add_argument("--eps", type=float)
    q.add_argument("--grid", type=int)
    q.add_argument("--omega", type=float)
    q.add_argument("--tol", type=float)
    q.add_argument("--max-iter", type=int, dest="max_iter")
    q.add_argument("--init", choices=("psi0", "barrier-blend", "file", "psi0-discrete"))
    q.add_argument("--init-file", dest="init_file")
    q.add_argument("--corner", choices=("barrier", "none"))
    q.add_argument("--profile")
    q.add_argument("--out")
    q.add_argument("--report")
    _common(q)

    p = sub.add_parser("analyze", help="diagnostics on solved fields")
    sa = p.add_subparsers(dest="action", parser_class=Parser)
    q = sa.add_parser("sandwich")
    _field_args(q)
    q.add_argument("--out")
    _common(q)
    q = sa.add_parser("ratio")
    _field_args(q)
    q.add_argument("--r-min", type=float, dest="r_min")
    q.add_argument("--out")
    _common(q)
    q = sa.add_parser("holder")
    _field_args(q)
    q.add_argument("--radii", type=int)
    q.add_argument("--r-hi", type=float, dest="r_hi")
    q.add_argument("--absolute", action="store_const", const=True)
    q.add_argument("--out")
    _common(q)
    for name, adder in (("sweep", _sweep_args), ("lab", _lab_args)):
        q = sa.add_parser(name)
        adder(q)
        _common(q)

    p = sub.add_parser("sweep", help="convergence sweep in eps")
    _sweep_args(p)
    _common(p)

    p = sub.add_parser("lab", help="weighted inequality lab")
    _lab_args(p)
    _common(p)

    p = sub.add_parser("green", help="torus Green's function with the log split off")
    p.add_argument("--x", type=float, nargs=2)
    p.add_argument("--y", type=float, nargs=2)
    p.add_argument("--terms", type=int)
    p.add_argument("--out")
    _common(p)
    return top


def _sweep_args(p):
    p.add_argument("--s", type=float)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--grid", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--profile")
    p.add_argument("--out")
    p.add_argument("--csv")


def _lab_args(p):
    p.add_argument("--id", choices=("caccioppoli", "sobolev_h1", "sobolev_w11", "isoperimetric", "linf_rescale"))
    p.add_argument("--trials", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--profile")
    p.add_argument("--out")


def resolve(args, key: str) -> dict:
    """Merge flags over the config file over defaults for one command."""
    defaults = dict(DEFAULTS[key])
    defaults.update(COMMON)
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a flat JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for k, d in defaults.items():
        if k == "config":
            continue
        v = getattr(args, k, None)
        out[k] = v if v is not None else cfg.get(k, d)
    return out


# ------------------------------------------------------------------ commands

def _profile(path, s):
    from .barrier import AngularProfile, solve_profile

    if path:
        prof = AngularProfile.load(path)
        if s is not None and abs(prof.s - s) > 1e-15:
            raise DomainError(f"profile file has s={prof.s}, asked for s={s}")
        return prof
    if s is None:
        raise UsageError("need --s or --profile")
    return solve_profile(s)


def _load_field(c):
    from .grid import QuarterGrid, SymmetricField, read_field

    if not c.get("field"):
        raise UsageError("--field is required")
    v, meta = read_field(c["field"])
    s = c["s"] if c["s"] is not None else meta.get("s")
    eps = c["eps"] if c["eps"] is not None else meta.get("eps")
    if s is None or eps is None:
        raise UsageError("field sidecar lacks s/eps; pass --s and --eps")
    return SymmetricField(QuarterGrid.from_shape(v.shape), v), float(s), float(eps)


def cmd_psi0(c, argv):
    from .grid import write_field
    from .poisson import compute_psi0

    t0 = time.perf_counter()
    f = compute_psi0(c["modes"], c["grid"])
    outs = write_field(c["out"], f, kind="psi0", generator=f"bcpatch {__version__} psi0 modes={c['modes']}")
    return c["out"], [], list(outs), time.perf_counter() - t0


def cmd_barrier(c, argv):
    from .barrier import profile_residual, solve_profile

    t0 = time.perf_counter()
    prof = solve_profile(c["s"], K=c["K"])
    prof.save(c["out"])
    report = {"schema_version": 1, "s": prof.s, "beta": prof.beta, "slope_at_zero": prof.a,
              "midpoint_value": prof.midpoint_value, "K": prof.K, "ode_residual": profile_residual(prof)}
    rpath = str(c["out"]) + ".report.json"
    write_json(rpath, report)
    return c["out"], [], [c["out"], rpath], time.perf_counter() - t0


def cmd_steady(c, argv):
    from .grid import write_field
    from .steady import SolveConfig, solve_steady

    t0 = time.perf_counter()
    cfg = SolveConfig(eps=c["eps"], s=c["s"], n=c["grid"], omega=c["omega"], tol=c["tol"],
                      max_iter=c["max_iter"], init=c["init"], init_file=c["init_file"], corner=c["corner"])
    prof = None
    if c["corner"] == "barrier" or c["init"] == "barrier-blend" or c["profile"]:
        prof = _profile(c["profile"], c["s"])
    rep = solve_steady(cfg, profile=prof)
    outs = list(write_field(c["out"], rep.field, s=c["s"], eps=c["eps"], kind="phi",
                            generator=f"bcpatch {__version__} steady solve"))
    write_json(c["report"], rep.to_json())
    outs.append(c["report"])
    return c["out"], [c["init_file"], c["profile"]], outs, time.perf_counter() - t0


def cmd_sandwich(c, argv):
    from .analysis.sandwich import sandwich_check

    t0 = time.perf_counter()
    phi, s, eps = _load_field(c)
    rep = sandwich_check(phi, _profile(c["profile"], s), eps)
    write_json(c["out"], rep.to_json())
    return c["out"], [c["field"], c["profile"]], [c["out"]], time.perf_counter() - t0


def cmd_ratio(c, argv):
    from .analysis.sandwich import ratio_field, ratio_l2_check

    t0 = time.perf_counter()
    phi, s, eps = _load_field(c)
    prof = _profile(c["profile"], s)
    W = ratio_field(phi, prof, eps, c["r_min"])
    vals = W.W[~W.mask]
    out = {"schema_version": 1, "eps": eps, "s": s, "n": phi.grid.n, "r_min": W.r_min,
           "W_min": float(vals.min()), "W_max": float(vals.max()),
           "l2": ratio_l2_check(phi, prof, eps)}
    write_json(c["out"], out)
    return c["out"], [c["field"], c["profile"]], [c["out"]], time.perf_counter() - t0


def cmd_holder(c, argv):
    from .analysis.holder import origin_holder_fit
    from .analysis.sandwich import ratio_field
    from .steady import grid_resolves, sandwich_radius
    from .errors import ResolutionError

    t0 = time.perf_counter()
    phi, s, eps = _load_field(c)
    h = phi.grid.h
    r_hi = c["r_hi"] if c["r_hi"] is not None else sandwich_radius(eps)
    if c["r_hi"] is None and not grid_resolves(eps, phi.grid.n):
        raise ResolutionError(f"grid n={phi.grid.n} does not resolve eps={eps}; pass --r-hi", eps=eps)
    radii = np.geomspace(8 * h, r_hi, c["radii"])
    est = origin_holder_fit(ratio_field(phi, _profile(c["profile"], s), eps), radii, absolute=bool(c["absolute"]))
    out = {"schema_version": 1, "eps": eps, "s": s, "n": phi.grid.n, "absolute": bool(c["absolute"])}
    out.update(est.to_json())
    write_json(c["out"], out)
    return c["out"], [c["field"], c["profile"]], [c["out"]], time.perf_counter() - t0


def cmd_sweep(c, argv):
    from .analysis.sweep import convergence_sweep
    from .steady import SolveConfig

    t0 = time.perf_counter()
    eps = [float(e) for e in c["eps"]]
    prof = _profile(c["profile"], c["s"])
    cfg = SolveConfig(eps=eps[0], s=c["s"], n=c["grid"], omega=c["omega"], tol=c["tol"], max_iter=c["max_iter"])
    table = convergence_sweep(c["s"], eps, cfg, pairs=c["pairs"], seed=c["seed"], profile=prof)
    write_json(c["out"], table.to_json())
    outs = [c["out"]]
    csv_path = c["csv"] or str(Path(c["out"]).with_suffix(".csv"))
    Path(csv_path).write_text(table.to_csv())
    outs.append(csv_path)
    return c["out"], [c["profile"]], outs, time.perf_counter() - t0


def cmd_lab(c, argv):
    from .analysis.lab import inequality_lab

    t0 = time.perf_counter()
    prof = _profile(c["profile"], c["s"])
    rep = inequality_lab(c["id"], c["trials"], c["seed"], c["grid"], profile=prof, delta=c["delta"])
    write_json(c["out"], rep.to_json())
    return c["out"], [c["profile"]], [c["out"]], time.perf_counter() - t0


def cmd_green(c, argv):
    from .poisson import torus_green

    if c["x"] is None or c["y"] is None:
        raise UsageError("--x and --y are required")
    t0 = time.perf_counter()
    g = torus_green(c["x"], c["y"], c["terms"])
    out = {"schema_version": 1, "x": list(g.x), "y": list(g.y), "distance": g.distance, "total": g.total,
           "log_part": g.log_part, "regular_part": g.regular_part, "terms": c["terms"]}
    if c["out"]:
        write_json(c["out"], out)
        return c["out"], [], [c["out"]], time.perf_counter() - t0
    sys.stdout.write(dumps(out))
    return None, [], [], time.perf_counter() - t0


COMMANDS = {
    "psi0": cmd_psi0, "barrier": cmd_barrier, "steady": cmd_steady, "sandwich": cmd_sandwich,
    "ratio": cmd_ratio, "holder": cmd_holder, "sweep": cmd_sweep, "lab": cmd_lab, "green": cmd_green,
}


class FileProblem(BcpatchError):
    """Missing or unreadable input, a failed precondition of the command."""
    exit_code = 3
    kind = "io"


def _emit_error(exc: BcpatchError):
    diag = {"error": exc.kind, "exit_code": exc.exit_code, "message": str(exc)}
    safe = {}
    for k, v in exc.details.items():
        if k == "usage":
            continue
        if isinstance(v, tuple):
            v = list(v)
        if k == "residual_history":
            v = [float(x) for x in v][-5:]
            k = "residual_tail"
        safe[k] = v if isinstance(v, (int, float, str, bool, list, type(None))) else str(v)
    diag.update(safe)
    if isinstance(exc, UsageError) and "usage" in exc.details:
        sys.stderr.write(exc.details["usage"])
    sys.stderr.write(_fmt(diag) + "\n")


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command", usage=parser.format_usage())
        key = args.command
        if key in ("steady", "analyze"):
            if getattr(args, "action", None) is None:
                raise UsageError(f"{key} needs an action", usage=parser.format_usage())
            key = "steady" if key == "steady" else args.action
        c = resolve(args, key)
        threads = int(c["threads"])
        if threads < 1:
            raise UsageError("--threads must be at least 1")
        with scipy.fft.set_workers(threads):
            primary, inputs, outputs, wall = COMMANDS[key](c, argv)
        if primary is not None:
            write_manifest(primary, argv, c, inputs, outputs, c["seed"], wall)
    except BcpatchError as exc:
        _emit_error(exc)
        return exc.exit_code
    except OSError as exc:
        _emit_error(FileProblem(str(exc), path=str(getattr(exc, "filename", "") or "")))
        return FileProblem.exit_code
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
