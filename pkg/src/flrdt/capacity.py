"""Feasibility verdicts from the dual and capacity thresholds in alpha.

Sign convention. ``dual_value_at_alpha`` returns the stationary psi_rd on the
per-sqrt(n) scale. psi_rd already carries the single sign flip of the
feasibility reduction (it is the lead term minus psi_S, i.e. minus the
limit of the s = -1 free energy), so

    value > 0   <=>  predicted infeasible (alpha above capacity)
    value <= 0  <=>  predicted feasible.

Everything downstream (bisection, curves, the CLI) only sees this convention.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .dual.ground import ModelSpec, psi_rd
from .dual.montecarlo import psi_s_inf_mc
from .errors import BadBracket, NoisyBoundary
from .lifting import LiftingParams, embed, non_lifted, partial_lift
from .saddle import SolverConfig, default_starts, solve_stationary
from .sets import YFamily

# solver outcomes whose value is a valid sign witness
USABLE = ("converged", "boundary_c0", "boundary_cinf")
NOISE_SIGMAS = 3.0


@dataclass
class CapacityResult:
    alpha_star: float
    bracket: tuple
    r: int
    model: dict
    evaluations: list = field(default_factory=list)
    oracle_alpha: float | None = None
    flags: list = field(default_factory=list)
    method: str = "quadrature"
    seed: int | None = None

    @property
    def ok(self):
        return not self.flags and np.isfinite(self.alpha_star)

    def to_dict(self):
        return {"alpha_star": self.alpha_star, "bracket": list(self.bracket), "r": self.r,
                "model": self.model, "evaluations": self.evaluations,
                "oracle_alpha": self.oracle_alpha, "flags": self.flags,
                "method": self.method, "seed": self.seed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_perceptron(model):
    if not model.fixed_norms or model.objective != "zero":
        raise ValueError("capacity needs a fixed-norm feasibility model")
    if model.y_set.family is YFamily.SPHERE:
        raise ValueError("capacity needs a cone-constrained y block")


def _starts(r, mode, init):
    starts = []
    if init is not None:
        while init.r < r:
            init = embed(init)
        if init.is_limit and mode != "nonlifted":
            # a c -> 0 boundary solution restarts the exponents at 1
            init = init.replace(c=partial_lift(r, 1.0).c)
        starts.append(init)
    for s in default_starts(r, mode):
        if not any(s == t for t in starts):
            starts.append(s)
    return starts


def dual_value_at_alpha(model, r, alpha, config=None, init=None, method="quadrature",
                        n=400, samples=(200, 200), seed=0):
    """Stationary dual value at ``alpha``; positive means infeasible.

    ``method`` "quadrature" uses the separable path throughout; "monte_carlo"
    solves stationarity on the separable path and re-evaluates psi_S by
    nested Monte Carlo at dimension ``n`` (the value then carries a std error).
    ``meta["usable"]`` is False when the solve did not converge; such values
    are reported but never used as sign evidence.
    """
    from .dual.ground import DualEvaluation

    _check_perceptron(model)
    cfg = config or SolverConfig()
    m = model.with_alpha(alpha)
    if cfg.mode == "nonlifted":
        starts = [non_lifted(r)]
    else:
        starts = _starts(r, cfg.mode, init)
    sub = SolverConfig(**{**cfg.__dict__, "starts": starts[1:]})
    sol = solve_stationary(m, starts[0], config=sub)
    usable = bool(sol.status in USABLE and np.isfinite(sol.value))
    meta = {"alpha": float(alpha), "r": r, "mode": cfg.mode, "status": sol.status,
            "converged": sol.converged, "usable": usable,
            "residual_norm": sol.residual_norm, "params": sol.params.to_dict(),
            "aux": sol.aux.to_dict()}
    if method == "quadrature":
        ev = DualEvaluation(float(sol.value), 0.0, "separable_quadrature", cfg.nodes, None, meta)
    elif method == "monte_carlo":
        mc = psi_s_inf_mc(m, sol.params, n, samples, seed, sol.aux)
        ev = psi_rd(m, sol.params, sol.aux, psi_s=mc)
        ev.meta = {**meta, "n": n}
    else:
        raise ValueError(f"unknown method {method!r}")
    ev.meta["solution"] = sol
    return ev


def _record(ev):
    d = {k: v for k, v in ev.meta.items() if k != "solution"}
    d.update(value=ev.value, std_error=ev.std_error)
    return d


def _sign(ev):
    """+1 infeasible, -1 feasible, 0 when the noise hides the sign."""
    if ev.std_error > 0 and abs(ev.value) <= NOISE_SIGMAS * ev.std_error:
        return 0
    return 1 if ev.value > 0 else -1


def capacity_bisect(model, r, bracket, tol_alpha=1e-3, config=None, method="quadrature",
                    n=400, samples=(200, 200), seed=0, init=None):
    """Bisection for the alpha where the stationary dual changes sign.

    The dual must be feasible (<= 0) at ``bracket[0]`` and infeasible (> 0)
    at ``bracket[1]``. Each evaluation warm-starts from the solution at the
    nearest bracket end. A sign test inside the error bars escalates the
    Monte Carlo budget four-fold once before NoisyBoundary is raised.
    A midpoint whose solve does not converge is nudged once to a third of
    the bracket; if that fails too the search stops and the result is flagged.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi - lo <= 0:
        raise BadBracket(f"degenerate bracket ({lo}, {hi})")
    cfg = config or SolverConfig()
    evals = []

    def evaluate(alpha, warm):
        ev = dual_value_at_alpha(model, r, alpha, cfg, warm, method, n, samples, seed)
        if method == "monte_carlo" and ev.meta["usable"] and _sign(ev) == 0:
            big = tuple(4 * s for s in samples)
            ev = dual_value_at_alpha(model, r, alpha, cfg, ev.meta["solution"].params,
                                     method, n, big, seed)
            ev.meta["escalated"] = True
        evals.append(_record(ev))
        if ev.meta["usable"] and _sign(ev) == 0:
            raise NoisyBoundary(f"sign of {ev.value:.3g} +- {ev.std_error:.2g} "
                                f"undecided at alpha={alpha:.6g}")
        return ev

    e_lo = evaluate(lo, init)
    e_hi = evaluate(hi, e_lo.meta["solution"].params)
    for e, want, name in ((e_lo, -1, "lower"), (e_hi, 1, "upper")):
        if not e.meta["usable"]:
            raise BadBracket(f"solver failed at the {name} end ({e.meta['status']})")
        if _sign(e) != want:
            raise BadBracket(f"dual value {e.value:.4g} at the {name} end alpha="
                             f"{e.meta['alpha']:.6g} has the wrong sign")
    warm = {lo: e_lo.meta["solution"].params, hi: e_hi.meta["solution"].params}
    flags = []
    while hi - lo > tol_alpha:
        mid = 0.5 * (lo + hi)
        ev = evaluate(mid, warm[lo])
        if not ev.meta["usable"]:
            mid = lo + (hi - lo) / 3.0
            ev = evaluate(mid, warm[lo])
        if not ev.meta["usable"]:
            flags.append(f"nonconvergence at alpha={mid:.6g}")
            break
        if _sign(ev) > 0:
            hi = mid
            warm[hi] = ev.meta["solution"].params
        else:
            lo = mid
            warm[lo] = ev.meta["solution"].params
    vals = sorted((e["alpha"], e["value"]) for e in evals if e["usable"])
    if any(b[1] < a[1] - NOISE_SIGMAS * max(e["std_error"] for e in evals) - 1e-9
           for a, b in zip(vals, vals[1:])):
        flags.append("dual value not monotone in alpha along the trace")
    return CapacityResult(0.5 * (lo + hi), (lo, hi), r, model.to_dict(), evals, None, flags,
                          method, seed if method == "monte_carlo" else None)


def capacity_curve(model, r, kappa_grid, bracket, tol_alpha=1e-3, config=None,
                   method="quadrature", n=400, samples=(200, 200), seed=0):
    """One capacity per kappa, warm-started from the neighbor's solution.

    ``bracket`` is either a fixed pair or a callable kappa -> pair. Points
    that fail carry alpha_star = nan and a flag; the curve is never dropped.
    """
    grid = [float(k) for k in kappa_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])) and any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("kappa grid must be monotone")
    out = []
    warm = None
    for kappa in grid:
        m = ModelSpec(model.x_set, model.y_set.__class__.perceptron(model.y_set.m, kappa,
                                                                    model.y_set.radius),
                      model.alpha, model.objective, model.n_scale, model.fixed_norms)
        br = bracket(kappa) if callable(bracket) else bracket
        try:
            res = capacity_bisect(m, r, br, tol_alpha, config, method, n, samples, seed, warm)
        except (BadBracket, NoisyBoundary) as exc:
            res = CapacityResult(math.nan, tuple(br), r, m.to_dict(), [], None,
                                 [f"{type(exc).__name__}: {exc}"], method, seed)
        else:
            last = [e for e in res.evaluations if e["usable"]]
            if last:
                warm = LiftingParams.from_dict(last[-1]["params"])
        out.append(res)
    return out
