"""Batch front end: ``flrdt run <config>``.

A job is one TOML (or JSON) file. It is validated against SCHEMA before any
computation, defaults are filled in, the task runs, and the results plus a
manifest land in the output directory. Exit status: 0 clean, 2 completed
with flags, 1 error (nothing written).

Result files are byte-stable: floats use repr, JSON keys are sorted, and all
randomness comes from the job seed. The manifest carries the resolved config,
so ``flrdt run <dir>/manifest.json`` regenerates the same result files.
"""
import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConfigError, FlrdtError

TASKS = ("capacity", "curve", "dual_eval", "stationary_solve", "finite_check", "empirical")
CAPACITY_COLUMNS = ("kappa", "r", "alpha_star", "lo", "hi", "method", "seed")
EMPIRICAL_COLUMNS = ("alpha", "feasible_count", "trials", "wilson_lo", "wilson_hi")
THREADS_ENV = "FLRDT_THREADS"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_counts = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}


def _section(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _section({
    "task": {"enum": list(TASKS)},
    "seed": {"type": ["integer", "null"], "minimum": 0},
    "r": {"type": "integer", "minimum": 1, "maximum": 6},
    "model": _section({
        "x": {"enum": ["sphere", "binary"]},
        "kappa": _num,
        "alpha": _pos,
        "n": {"type": "integer", "minimum": 1},
    }),
    "solver": _section({
        "mode": {"enum": ["full", "partial", "nonlifted"]},
        "tol": _pos,
        "max_iter": {"type": "integer", "minimum": 1},
        "nodes": {"type": "integer", "minimum": 8},
        "c_min": _pos,
        "c_max": _pos,
    }),
    "params": {"oneOf": [{"type": "null"}, _section({
        "p": {"type": "array", "items": _num},
        "q": {"type": "array", "items": _num},
        "c": {"type": "array", "items": _num},
    }, ("p", "q", "c"))]},
    "sampling": _section({
        "method": {"enum": ["quadrature", "monte_carlo"]},
        "n": {"type": "integer", "minimum": 2},
        "samples": _counts,
    }),
    "capacity": _section({"bracket": _pair, "tol_alpha": _pos}),
    "curve": _section({"kappas": {"type": "array", "items": _num, "minItems": 1},
                       "bracket": _pair, "tol_alpha": _pos}),
    "empirical": _section({
        "alphas": {"type": "array", "items": _pos, "minItems": 2},
        "n": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 50},
    }),
    "finite": _section({"fixture": {"type": "string"}, "samples": _counts}),
    "output": _section({"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}}),
}, ("task",))

DEFAULTS = {
    "seed": None,
    "r": 2,
    "model": {"x": "binary", "kappa": 0.0, "alpha": 1.0, "n": 100},
    "solver": {"mode": "full", "tol": 1e-6, "max_iter": 500, "nodes": 60,
               "c_min": 1e-4, "c_max": 1e3},
    "params": None,
    "sampling": {"method": "quadrature", "n": 400, "samples": [200, 200]},
    "capacity": {"bracket": [0.5, 1.5], "tol_alpha": 1e-3},
    "curve": {"kappas": [0.0], "bracket": [0.5, 1.5], "tol_alpha": 1e-3},
    "empirical": {"alphas": [0.6, 0.8, 1.0, 1.2], "n": 20, "trials": 50},
    "finite": {"fixture": "tiny", "samples": [20, 10000]},
    "output": {"dir": "out", "format": "csv"},
}


# -- config ------------------------------------------------------------------

def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def load_config(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        cfg = json.loads(text)
    else:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        cfg = tomllib.loads(text)
    if isinstance(cfg, dict) and "config" in cfg and "versions" in cfg:
        cfg = cfg["config"]  # a manifest
    return cfg


def parse_override(item):
    """'a.b=value' -> (['a', 'b'], value); value is JSON when it parses."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value", "")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(cfg, overrides):
    cfg = copy.deepcopy(cfg)
    for keys, value in overrides:
        node = cfg
        for k in keys[:-1]:
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"cannot descend into non-table {k!r}", _pointer(keys))
            node = nxt
        node[keys[-1]] = value
    return cfg


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def is_stochastic(cfg):
    return (cfg["task"] in ("finite_check", "empirical")
            or cfg["sampling"]["method"] == "monte_carlo")


def resolve_config(raw):
    """Validate, fill defaults and check the seed rule; raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table", "")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _pointer(e.absolute_path))
    cfg = _merge(DEFAULTS, raw)
    if is_stochastic(cfg) and cfg["seed"] is None:
        raise ConfigError(f"task {cfg['task']!r} is stochastic and needs a seed", "/seed")
    for name in ("capacity", "curve"):
        lo, hi = cfg[name]["bracket"]
        if not lo < hi:
            raise ConfigError("bracket must be increasing", f"/{name}/bracket")
    return cfg


# -- serialization -----------------------------------------------------------

def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays unwrapped, non-finite floats as None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


# -- tasks -------------------------------------------------------------------
# each returns (files: {name: text}, flags: [str])

def _model(cfg, alpha=None, kappa=None):
    from .dual.ground import ModelSpec
    m = cfg["model"]
    return ModelSpec.perceptron(m["x"], m["kappa"] if kappa is None else kappa,
                                m["alpha"] if alpha is None else alpha, m["n"])


def _solver(cfg):
    from .saddle import SolverConfig
    return SolverConfig(**cfg["solver"])


def _params(cfg):
    from .lifting import LiftingParams
    if cfg["params"] is None:
        return None
    d = dict(cfg["params"])
    return LiftingParams.from_dict({"r": cfg["r"], **d})


def _sampling(cfg):
    s = cfg["sampling"]
    return {"method": s["method"], "n": s["n"], "samples": tuple(s["samples"]),
            "seed": cfg["seed"] if cfg["seed"] is not None else 0}


def _capacity_rows(results, kappas):
    return [(k, res.r, res.alpha_star, res.bracket[0], res.bracket[1], res.method, res.seed)
            for k, res in zip(kappas, results)]


def _capacity_files(cfg, results, kappas):
    name = cfg["task"]
    doc = {"columns": list(CAPACITY_COLUMNS),
           "rows": [list(r) for r in _capacity_rows(results, kappas)],
           "results": [r.to_dict() for r in results]}
    files = {f"{name}.json": dumps(doc)}
    if cfg["output"]["format"] == "csv":
        files[f"{name}.csv"] = to_csv(CAPACITY_COLUMNS, _capacity_rows(results, kappas))
    flags = [f"kappa={k}: {f}" for k, r in zip(kappas, results) for f in r.flags]
    flags += [f"kappa={k}: no capacity" for k, r in zip(kappas, results)
              if not math.isfinite(r.alpha_star)]
    return files, flags


def task_capacity(cfg):
    from .capacity import CapacityResult, capacity_bisect
    from .errors import NoisyBoundary
    model = _model(cfg)
    c = cfg["capacity"]
    try:
        res = capacity_bisect(model, cfg["r"], c["bracket"], c["tol_alpha"], _solver(cfg),
                              init=_params(cfg), **_sampling(cfg))
    except NoisyBoundary as exc:
        res = CapacityResult(math.nan, tuple(c["bracket"]), cfg["r"], model.to_dict(), [],
                             None, [f"NoisyBoundary: {exc}"], cfg["sampling"]["method"],
                             cfg["seed"])
    return _capacity_files(cfg, [res], [model.kappa])


def task_curve(cfg):
    from .capacity import capacity_curve
    c = cfg["curve"]
    results = capacity_curve(_model(cfg), cfg["r"], c["kappas"], c["bracket"], c["tol_alpha"],
                             _solver(cfg), **_sampling(cfg))
    return _capacity_files(cfg, results, [float(k) for k in c["kappas"]])


def task_dual_eval(cfg):
    from .capacity import dual_value_at_alpha
    model = _model(cfg)
    ev = dual_value_at_alpha(model, cfg["r"], model.alpha, _solver(cfg), _params(cfg),
                             **_sampling(cfg))
    sol = ev.meta.pop("solution")
    ev.meta["solution_trace"] = sol.trace
    if cfg["sampling"]["method"] == "monte_carlo":
        ev.seed = cfg["seed"]
    flags = [] if ev.meta["usable"] else [f"solver status {ev.meta['status']}"]
    return {"dual_eval.json": dumps(ev)}, flags


def task_stationary_solve(cfg):
    from .saddle import default_starts, solve_stationary
    model = _model(cfg)
    solver = _solver(cfg)
    init = _params(cfg) or default_starts(cfg["r"], solver.mode)[0]
    sol = solve_stationary(model, init, config=solver)
    flags = [] if sol.converged else [f"solver status {sol.status}"]
    return {"stationary_solve.json": dumps(sol)}, flags


def _load_fixture(name):
    from .dual.finite import FiniteInstance
    if name == "tiny":
        text = resources.files("flrdt").joinpath("data/tiny_finite.json").read_text()
    else:
        text = Path(name).read_text()
    return FiniteInstance.from_json(text)


def task_finite_check(cfg):
    """t=0 identity (bitwise) and the t=1 endpoint against exhaustive min-max."""
    import numpy as np
    from ._rng import stream
    from .dual.finite import finite_psi, finite_psi_S
    from .oracle import exhaustive_primal

    inst = _load_fixture(cfg["finite"]["fixture"])
    samples = list(cfg["finite"]["samples"])
    if len(samples) != inst.r + 1:
        raise ConfigError(f"fixture has r={inst.r}; need {inst.r + 1} sample counts",
                          "/finite/samples")
    seed = cfg["seed"]
    t0 = inst.replace(t=0.0)
    a, b = finite_psi(t0, samples, seed), finite_psi_S(t0, samples, seed)
    ident = {"psi": a, "psi_S": b, "equal": a.value == b.value and a.std_error == b.std_error}

    end = finite_psi_S(inst.replace(t=1.0), samples, seed)
    # independent draws for the primal side
    G = stream(seed, 1).standard_normal((samples[-1], inst.m, inst.n))
    f, g = inst.f, inst.g
    prim = np.array([exhaustive_primal(inst.X, inst.Y, Gi, g, f) for Gi in G])
    prim = -prim / np.sqrt(inst.n)
    p_mean, p_se = float(prim.mean()), float(prim.std(ddof=1) / np.sqrt(prim.size))
    comb = math.hypot(end.std_error, p_se)
    gap = abs(end.value - p_mean)
    endpoint = {"psi_S": end, "primal": p_mean, "primal_std_error": p_se, "gap": gap,
                "combined_std_error": comb, "agree": gap <= 3.0 * comb}
    report = {"fixture": cfg["finite"]["fixture"], "identity_t0": ident, "endpoint_t1": endpoint}
    flags = []
    if not ident["equal"]:
        flags.append("t=0 identity failed")
    if not endpoint["agree"]:
        flags.append("t=1 endpoint outside 3 combined std errors")
    return {"finite_check.json": dumps(report)}, flags


def task_empirical(cfg):
    from .oracle import empirical_transition
    e = cfg["empirical"]
    res = empirical_transition(cfg["model"]["x"], e["n"], e["alphas"], e["trials"],
                               cfg["seed"], cfg["model"]["kappa"], require_crossing=False)
    files = {"empirical.json": dumps(res),
             "empirical_curve.dat": "".join(f"{a!r} {f!r}\n"
                                            for a, f in zip(res.alphas, res.frequencies))}
    if cfg["output"]["format"] == "csv":
        files["empirical.csv"] = to_csv(EMPIRICAL_COLUMNS, res.rows())
    flags = []
    if not res.monotone:
        flags.append("feasibility frequency not monotone within Wilson intervals")
    if not math.isfinite(res.crossing):
        flags.append("no 50% crossing on the grid")
    return files, flags


RUNNERS = {"capacity": task_capacity, "curve": task_curve, "dual_eval": task_dual_eval,
           "stationary_solve": task_stationary_solve, "finite_check": task_finite_check,
           "empirical": task_empirical}


# -- orchestration -----------------------------------------------------------

def _versions():
    import numpy
    import scipy
    return {"flrdt": __version__, "python": platform.python_version(),
            "numpy": numpy.__version__, "scipy": scipy.__version__,
            "jsonschema": _dist_version("jsonschema")}


def _dist_version(name):
    from importlib.metadata import version
    return version(name)


def run_job(cfg, log=print):
    """Run a resolved config; returns the exit status. Writes only on success."""
    start = time.perf_counter()
    files, flags = RUNNERS[cfg["task"]](cfg)
    wall = time.perf_counter() - start
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        (out / name).write_text(text)
    manifest = {"config": cfg, "versions": _versions(), "seeds": {"job": cfg["seed"]},
                "wall_time_s": wall, "flags": flags,
                "files": {name: hashlib.sha256(text.encode()).hexdigest()
                          for name, text in sorted(files.items())}}
    (out / "manifest.json").write_text(dumps(manifest))
    for f in flags:
        log(f"flag: {f}")
    log(f"{cfg['task']}: wrote {len(files) + 1} files to {out}")
    return 2 if flags else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="flrdt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one job from a TOML or JSON config")
    run.add_argument("config")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a dotted config key; VALUE is parsed as JSON if possible")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--format", choices=("csv", "json"))
    return ap


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def main(argv=None):
    _limit_threads()
    args = build_parser().parse_args(argv)
    err = lambda msg: print(msg, file=sys.stderr)
    try:
        raw = load_config(args.config)
        overrides = [parse_override(s) for s in args.set]
        if args.seed is not None:
            overrides.append((["seed"], args.seed))
        if args.out is not None:
            overrides.append((["output", "dir"], args.out))
        if args.format is not None:
            overrides.append((["output", "format"], args.format))
        cfg = resolve_config(apply_overrides(raw, overrides))
    except ConfigError as exc:
        err(f"config error at {exc}")
        return 1
    except (OSError, ValueError) as exc:
        err(f"cannot read config: {exc}")
        return 1
    try:
        return run_job(cfg)
    except ConfigError as exc:
        err(f"config error at {exc}")
    except (FlrdtError, ValueError, ArithmeticError) as exc:
        err(f"{cfg['task']} failed: {type(exc).__name__}: {exc}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
