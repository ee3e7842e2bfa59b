"""Stationarity solver for the lifted dual and the outer norm search.

Unknowns and their fixed order: p_2..p_r, q_2..q_r, c_2..c_r, gamma_x (sphere
X only), gamma_y. p_1 = q_1 = 1 stay pinned: in the ground state the level-1
fields drop out and the lead term is then stationary only at p_1 = q_1 = 1.

Modes restrict the free set: ``full`` (all of the above), ``partial``
(p = q = [1, 1, 0, ..., 0] pinned, exponents free) and ``nonlifted``
(exponents in the c -> 0 limit, only aux free).

The aux scalars separate from the rest (gamma_x only touches the x-side,
gamma_y only the y-side), so each solver step first extremizes them exactly
by 1-D search and then takes a damped Newton step on the remaining unknowns.
By the envelope theorem the remaining gradient is unchanged by profiling.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .dual.ground import Aux, optimal_aux, psi_rd_value
from .errors import BracketFailure, StepOutOfDomain
from .lifting import LiftingParams, non_lifted, partial_lift, validate_params
from .sets import XFamily

MODES = ("full", "partial", "nonlifted")
STEP_FLOOR = 1e-8
PQ_MARGIN = 1e-2
CONTINUATION_DEPTH = 2
# p, q accepted while tracking a branch in c (log-coordinate residual)
BRANCH_TOL = 1e-5


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 500
    damping: float = 0.3
    mode: str = "full"
    nodes: int = 60
    fd_step: float = 1e-5
    c_min: float = 1e-4
    c_max: float = 1e3
    starts: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("tol", "max_iter", "damping", "mode", "nodes",
                                          "fd_step", "c_min", "c_max")}
        d["starts"] = [s.to_dict() for s in self.starts]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["starts"] = [LiftingParams.from_dict(s) for s in d.get("starts", [])]
        return cls(**d)


@dataclass
class SaddleSolution:
    params: LiftingParams
    aux: Aux
    residual_norm: float
    iterations: int
    trace: list
    converged: bool
    value: float = float("nan")
    status: str = ""
    start: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"params": self.params.to_dict(), "aux": self.aux.to_dict(),
                "residual_norm": self.residual_norm, "iterations": self.iterations,
                "converged": self.converged, "value": self.value, "status": self.status,
                "start": self.start, "meta": self.meta, "trace": self.trace}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# -- packing ----------------------------------------------------------------

def _slices(r, mode):
    k = r - 1
    if mode == "full":
        return slice(0, k), slice(k, 2 * k), slice(2 * k, 3 * k)
    if mode == "partial":
        return slice(0, 0), slice(0, 0), slice(0, k)
    return slice(0, 0), slice(0, 0), slice(0, 0)


def pack(params, mode):
    r = params.r
    if mode == "full":
        return np.r_[params.p[2:r + 1], params.q[2:r + 1], params.c[2:r + 1]]
    if mode == "partial":
        return params.c[2:r + 1].copy()
    return np.zeros(0)


def unpack(theta, base, mode):
    r = params_r = base.r
    sp, sq, sc = _slices(params_r, mode)
    p, q, c = base.p.copy(), base.q.copy(), base.c.copy()
    if mode == "full":
        p[2:r + 1] = theta[sp]
        q[2:r + 1] = theta[sq]
    if mode in ("full", "partial"):
        c[2:r + 1] = theta[sc]
    return LiftingParams(r, p, q, c)


def base_for(params, mode):
    if mode == "partial":
        return partial_lift(params.r, 1.0).replace(c=params.c)
    if mode == "nonlifted":
        return non_lifted(params.r)
    return params


def unknown_names(r, mode, model):
    names = []
    if mode == "full":
        names += [f"p{k}" for k in range(2, r + 1)] + [f"q{k}" for k in range(2, r + 1)]
    if mode in ("full", "partial"):
        names += [f"c{k}" for k in range(2, r + 1)]
    if model.x_set.family is XFamily.SPHERE:
        names.append("gamma_x")
    return names + ["gamma_y"]


def _valid(params):
    try:
        validate_params(params, allow_limit=True)
    except ValueError:
        return False
    return True


# -- residuals --------------------------------------------------------------

def _fd(fun, theta, i, step, floor=1e-2):
    """Central difference in coordinate i with a relative step.

    The step shrinks on domain exits down to STEP_FLOOR; a point sitting on
    the domain edge (for example p_k = 0) falls back to a one-sided difference.
    """
    scale = max(abs(theta[i]), floor)
    h = step * scale
    f0 = None
    while h >= STEP_FLOOR * scale:
        e = np.zeros_like(theta)
        e[i] = h
        fp, fm = fun(theta + e), fun(theta - e)
        if np.isfinite(fp) and np.isfinite(fm):
            return (fp - fm) / (2 * h)
        if np.isfinite(fp) != np.isfinite(fm):
            f0 = fun(theta) if f0 is None else f0
            if np.isfinite(f0):
                return (fp - f0) / h if np.isfinite(fp) else (f0 - fm) / h
        h *= 0.1
    raise StepOutOfDomain(f"no admissible step for unknown {i} at {theta[i]}")


def _value_fn(model, base, mode, aux, x, y, nodes):
    def f(theta):
        pr = unpack(theta, base, mode)
        if not _valid(pr):
            return math.nan
        return psi_rd_value(model, pr, aux, x, y, nodes)
    return f


def residuals(model, params, aux, x=1.0, y=1.0, mode="full", step=1e-5, nodes=60):
    """Central finite-difference partials of psi_rd in the documented order."""
    validate_params(params, allow_limit=(mode == "nonlifted"))
    aux.check(model)
    base = base_for(params, mode)
    theta = pack(params, mode)
    f = _value_fn(model, base, mode, aux, x, y, nodes)
    out = [_fd(f, theta, i, step) for i in range(theta.size)]
    sphere = model.x_set.family is XFamily.SPHERE
    a = np.array(aux.as_list(), dtype=float)

    def g(av):
        ax = Aux(av[0], av[1]) if sphere else Aux(None, av[0])
        if min(av) <= 0:
            return math.nan
        return psi_rd_value(model, params, ax, x, y, nodes)
    out += [_fd(g, a, i, step, floor=0.0) for i in range(a.size)]
    return np.array(out)


# -- solver -----------------------------------------------------------------
#
# The exponents are maximizers (lifting tightens the bound), while p, q only
# need stationarity. A plain root search on the full system happily walks to
# minima in c, so the solve is nested: maximize over log c the value obtained
# after solving the p, q block by damped Newton, then polish the whole system
# with Newton steps from that point.

def _pq_grad(model, pr, aux, x, y, cfg):
    """Partials in p_2..p_r, q_2..q_r at fixed c and aux."""
    f = _value_fn(model, pr, "full", aux, x, y, cfg.nodes)
    theta = pack(pr, "full")
    k = pr.r - 1
    return np.array([_fd(f, theta, i, cfg.fd_step) for i in range(2 * k)])


def _project_pq(v):
    k = v.size // 2
    out = np.empty_like(v)
    for s in (slice(0, k), slice(k, 2 * k)):
        out[s] = np.sort(np.clip(v[s], 1e-12, 1.0 - 1e-12))[::-1]
    return out


def _with_pq(pr, v):
    k = pr.r - 1
    p, q = pr.p.copy(), pr.q.copy()
    p[2:pr.r + 1], q[2:pr.r + 1] = v[:k], v[k:]
    return pr.replace(p=p, q=q)


def _solve_pq(model, pr, x, y, cfg, tol, max_iter=60):
    """Damped Newton for the p, q block at fixed exponents; aux profiled.

    Works in log coordinates: along the branches that matter q_k shrinks like
    c^-2, so the scale-free residual v * dpsi/dv (the partial in log v) is
    what is driven below ``tol`` and returned.
    """
    k = pr.r - 1
    v = _project_pq(np.r_[pr.p[2:pr.r + 1], pr.q[2:pr.r + 1]])
    pr = _with_pq(pr, v)

    def state(u):
        v_ = _project_pq(np.exp(u))
        q_ = _with_pq(pr, v_)
        a = optimal_aux(model, q_, x, y, cfg.nodes)
        return a, v_ * _pq_grad(model, q_, a, x, y, cfg)

    u = np.log(v)
    aux, g = state(u)
    norm = float(np.linalg.norm(g))
    lam, it = cfg.damping, 0
    while norm > tol and it < max_iter:
        it += 1
        H = np.empty((2 * k, 2 * k))
        for i in range(2 * k):
            e = np.zeros(2 * k)
            e[i] = 1e-4
            H[:, i] = (state(u + e)[1] - state(u - e)[1]) / 2e-4
        try:
            d = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(H, g, rcond=None)[0]
        d *= min(1.0, 1.0 / max(float(np.max(np.abs(d))), 1e-300))
        step = lam
        while step >= 1e-3:
            u_new = np.log(_project_pq(np.exp(u + step * d)))
            aux_new, g_new = state(u_new)
            if np.linalg.norm(g_new) < norm:
                break
            step *= 0.5
        else:
            break
        lam = min(1.0, 2 * step) if step == lam else step
        u, aux, g = u_new, aux_new, g_new
        norm = float(np.linalg.norm(g))
    return _with_pq(pr, _project_pq(np.exp(u))), aux, norm, it


def _chain_to_ratios(v):
    """Monotone chain 1 >= v_1 >= v_2 >= ... >= 0 to box coordinates in [0, 1]."""
    out = np.empty_like(v)
    prev = 1.0
    for i, x in enumerate(v):
        out[i] = x / prev if prev > 0 else 0.0
        prev = x
    return np.clip(out, 0.0, 1.0)


def _ratios_to_chain(s):
    return np.cumprod(s)


def _minimize_pq(model, pr, x, y, cfg):
    """Local descent of the aux-profiled value over p, q at fixed exponents.

    The stationary p, q of the lifted dual sit at a local minimum of the
    profiled value at fixed c (the global one is the collapsed p = q = 1
    configuration), so a bounded quasi-Newton descent from the warm start
    lands near the root before the Newton polish. Each monotone chain is
    mapped to a box by successive ratios.
    """
    from scipy.optimize import minimize

    k = pr.r - 1
    s0 = np.r_[_chain_to_ratios(pr.p[2:pr.r + 1]), _chain_to_ratios(pr.q[2:pr.r + 1])]
    s0 = np.clip(s0, PQ_MARGIN, 1 - PQ_MARGIN)

    def to_params(s):
        return _with_pq(pr, np.r_[_ratios_to_chain(s[:k]), _ratios_to_chain(s[k:])])

    def fg(s):
        s = np.clip(s, 0.0, 1.0)
        q_ = to_params(s)
        aux = optimal_aux(model, q_, x, y, cfg.nodes)
        val = psi_rd_value(model, q_, aux, x, y, cfg.nodes)
        if not np.isfinite(val):
            return 1e6, np.zeros_like(s)
        try:
            gv = _pq_grad(model, q_, aux, x, y, cfg)
        except StepOutOfDomain:
            return val, np.zeros_like(s)
        gs = np.zeros_like(s)
        for blk in (slice(0, k), slice(k, 2 * k)):
            sb, vb, gb = s[blk], _ratios_to_chain(s[blk]), gv[blk]
            for i in range(k):
                # d v_j / d s_i = prod_{l <= j, l != i} s_l for j >= i
                jac = np.array([np.prod(np.delete(sb[:j + 1], i)) if j >= i else 0.0
                                for j in range(k)])
                gs[blk][i] = float(np.dot(jac, gb))
        return val, gs

    res = minimize(fg, s0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * (2 * k),
                   options={"maxiter": 200, "ftol": 1e-15, "gtol": 1e-9})
    return to_params(np.clip(res.x, 0.0, 1.0))


class _Outer:
    """Value after solving everything except the exponents, as a function of log c."""

    def __init__(self, model, init, x, y, cfg):
        self.model, self.x, self.y, self.cfg = model, x, y, cfg
        self.current = init
        self.evals = 0
        self.log = []

    def _stationary_pq(self, pr):
        """Solve the p, q block at the exponents of ``pr``; None when it fails."""
        cfg = self.cfg
        tol = max(cfg.tol, BRANCH_TOL)
        pr, aux, norm, _ = _solve_pq(self.model, pr, self.x, self.y, cfg, 0.1 * cfg.tol)
        if norm > tol:
            pr = _minimize_pq(self.model, pr, self.x, self.y, cfg)
            pr, aux, norm, _ = _solve_pq(self.model, pr, self.x, self.y, cfg, 0.1 * cfg.tol)
        return (pr, aux) if norm <= tol else None

    def _at(self, base, logc):
        c = base.c.copy()
        c[2:base.r + 1] = np.exp(logc)
        return base.replace(c=c)

    def __call__(self, logc):
        cfg = self.cfg
        target = np.atleast_1d(np.asarray(logc, dtype=float))
        pr = self._at(self.current, target)
        if cfg.mode == "full":
            got = self._stationary_pq(pr)
            if got is None:
                # continuation: walk to the target in shrinking log c steps
                start = np.log(self.current.c[2:self.current.r + 1])
                for depth in range(1, CONTINUATION_DEPTH + 1):
                    cur = self.current
                    for t in np.linspace(0.0, 1.0, 2 ** depth + 1)[1:]:
                        got = self._stationary_pq(self._at(cur, start + t * (target - start)))
                        if got is None:
                            break
                        cur = got[0]
                    if got is not None:
                        break
            if got is None:
                self.evals += 1
                self.log.append((target.tolist(), float("nan")))
                return -np.inf
            pr, aux = got
        else:
            aux = optimal_aux(self.model, pr, self.x, self.y, cfg.nodes)
        val = psi_rd_value(self.model, pr, aux, self.x, self.y, cfg.nodes)
        self.evals += 1
        if np.isfinite(val):
            self.current = pr
        self.log.append((target.tolist(), float(val)))
        return val if np.isfinite(val) else -np.inf


def _maximize_c(outer, r, cfg):
    """Maximize the outer value over log c. Returns (log c, boundary flag).

    The flag is "low" or "high" when the supremum sits on the c-range edge,
    i.e. the c -> 0 (non-lifted) or c -> infinity limit.
    """
    from scipy.optimize import minimize, minimize_scalar

    lo, hi = np.log(cfg.c_min), np.log(cfg.c_max)
    start = np.log(outer.current.c[2:r + 1])

    def edge(t):
        t = np.atleast_1d(t)
        if np.any(t <= lo + 1e-3):
            return "low"
        if np.any(t >= hi - 1e-3):
            return "high"
        return None

    if r == 2:
        # coarse scan outward from the start keeps the warm starts local
        grid = np.unique(np.r_[np.linspace(lo, hi, 17), np.clip(start, lo, hi)])
        i0 = int(np.argmin(np.abs(grid - np.clip(start[0], lo, hi))))
        vals = np.empty(grid.size)
        snaps = {}
        home = outer.current
        # sweep up then down from the start so each warm start is a neighbor
        vals[:] = -np.inf
        for order in (range(i0, grid.size), range(i0 - 1, -1, -1)):
            outer.current = snaps.get(i0, home)
            misses = 0
            for i in order:
                if misses >= 2:
                    break  # the branch is gone on this side
                vals[i] = outer(grid[i])
                if not np.isfinite(vals[i]):
                    # lost the branch: retry once from the initial point
                    keep, outer.current = outer.current, home.replace(c=outer.current.c)
                    vals[i] = outer(grid[i])
                    if not np.isfinite(vals[i]):
                        outer.current = keep
                misses = 0 if np.isfinite(vals[i]) else misses + 1
                snaps[i] = outer.current
        if not np.any(np.isfinite(vals)):
            outer.current = home
            return start, "lost"
        i = int(np.argmax(vals))
        outer.current = snaps[i]
        if i in (0, grid.size - 1):
            outer(grid[i])
            return np.array([grid[i]]), edge(grid[i])
        a, b = grid[i - 1], grid[i + 1]
        res = minimize_scalar(lambda t: -max(outer(t), -1e6), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-9})
        best = np.array([res.x])
        outer(best[0])
        return best, None
    res = minimize(lambda t: -max(outer(t), -1e6), np.clip(start, lo, hi), method="Nelder-Mead",
                   bounds=[(lo, hi)] * (r - 1),
                   options={"xatol": 1e-8, "fatol": 1e-13, "maxfev": 400})
    outer(res.x)
    return res.x, edge(res.x)


def _block_residual(model, pr, x, y, cfg, with_pq):
    """Residuals of every unknown except the exponents (used on c-range edges)."""
    aux = optimal_aux(model, pr, x, y, cfg.nodes)
    sphere = model.x_set.family is XFamily.SPHERE
    a = np.array(aux.as_list())

    def g(av):
        ax = Aux(av[0], av[1]) if sphere else Aux(None, av[0])
        return psi_rd_value(model, pr, ax, x, y, cfg.nodes) if min(av) > 0 else math.nan
    res = [_fd(g, a, i, cfg.fd_step, floor=0.0) for i in range(a.size)]
    if with_pq:
        res = list(_pq_grad(model, pr, aux, x, y, cfg)) + res
    return np.array(res), aux


def _full_residual(model, pr, x, y, cfg):
    aux = optimal_aux(model, pr, x, y, cfg.nodes)
    return residuals(model, pr, aux, x, y, cfg.mode, cfg.fd_step, cfg.nodes), aux


def _polish(model, pr, x, y, cfg, max_iter=30):
    """Plain Newton on the full system in (p, q, log c) from a nearby point."""
    mode = cfg.mode
    base = base_for(pr, mode)
    sc = _slices(pr.r, mode)[2]
    res, aux = _full_residual(model, pr, x, y, cfg)
    k = pack(pr, mode).size
    norm = float(np.linalg.norm(res))
    it = 0

    def to_u(p_):
        u = pack(p_, mode)
        u[sc] = np.log(u[sc])
        return u

    def from_u(u):
        t = u.copy()
        t[sc] = np.exp(u[sc])
        return unpack(t, base, mode)

    def grad_u(p_):
        r_, a_ = _full_residual(model, p_, x, y, cfg)
        g = r_[:k].copy()
        g[sc] *= p_.c[2:p_.r + 1]
        return g, r_, a_

    while norm > cfg.tol and it < max_iter and k:
        it += 1
        u = to_u(pr)
        g, _, _ = grad_u(pr)
        H = np.empty((k, k))
        for i in range(k):
            h = 1e-4 * (1.0 if sc.start <= i < sc.stop else max(abs(u[i]), 1e-2))
            e = np.zeros(k)
            e[i] = h
            pp, pm = from_u(u + e), from_u(u - e)
            if not (_valid(pp) and _valid(pm)):
                return pr, aux, norm, it
            H[:, i] = (grad_u(pp)[0] - grad_u(pm)[0]) / (2 * h)
        try:
            d = -np.linalg.solve(0.5 * (H + H.T), g)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step >= 1e-3:
            cand = from_u(u + step * d)
            if _valid(cand):
                r_new, a_new = _full_residual(model, cand, x, y, cfg)
                if np.linalg.norm(r_new) < norm:
                    break
            step *= 0.5
        else:
            break
        pr, res, aux = cand, r_new, a_new
        norm = float(np.linalg.norm(res))
    return pr, aux, norm, it


def _solve_one(model, init, x, y, cfg):
    mode = cfg.mode
    base = base_for(init, mode)
    trace = []
    if mode == "nonlifted":
        res, aux = _full_residual(model, base, x, y, cfg)
        norm = float(np.linalg.norm(res))
        val = psi_rd_value(model, base, aux, x, y, cfg.nodes)
        trace.append({"iteration": 0, "params": base.to_dict(), "aux": aux.to_dict(),
                      "residual_norm": norm, "value": float(val)})
        return SaddleSolution(base, aux, norm, 0, trace, norm <= cfg.tol, float(val),
                              "converged" if norm <= cfg.tol else "max_iter")
    pr = base
    if mode == "full":
        # p, q on the chain edges make one-sided derivatives the norm; start inside
        v = np.clip(np.r_[pr.p[2:pr.r + 1], pr.q[2:pr.r + 1]], PQ_MARGIN, 1 - PQ_MARGIN)
        pr = _with_pq(pr, _project_pq(v))
    res, aux = _full_residual(model, pr, x, y, cfg)
    norm = float(np.linalg.norm(res))
    trace.append({"iteration": 0, "params": pr.to_dict(), "aux": aux.to_dict(),
                  "residual_norm": norm,
                  "value": float(psi_rd_value(model, pr, aux, x, y, cfg.nodes))})
    if norm <= cfg.tol:
        return SaddleSolution(pr, aux, norm, 0, trace, True, trace[0]["value"], "converged")
    outer = _Outer(model, pr, x, y, cfg)
    _, boundary = _maximize_c(outer, pr.r, cfg)
    pr = outer.current
    if boundary == "lost":
        trace.append({"iteration": len(trace), "value": float("nan"), "note": "no stationary p, q"})
        return SaddleSolution(pr, aux, float("inf"), outer.evals, trace, False, float("nan"),
                              "no_branch")
    for logc, val in outer.log:
        trace.append({"iteration": len(trace), "log_c": logc, "value": val})
    status = "max_iter"
    its = 0
    if boundary == "low":
        # the supremum is the c -> 0 limit: the non-lifted configuration
        pr = non_lifted(pr.r)
        res, aux = _block_residual(model, pr, x, y, cfg, False)
        status = "boundary_c0"
    elif boundary == "high":
        res, aux = _block_residual(model, pr, x, y, cfg, mode == "full")
        status = "boundary_cinf"
    if boundary:
        norm = float(np.linalg.norm(res))
        val = float(psi_rd_value(model, pr, aux, x, y, cfg.nodes))
        trace.append({"iteration": len(trace), "params": pr.to_dict(), "aux": aux.to_dict(),
                      "residual_norm": norm, "value": val})
        sol = SaddleSolution(pr, aux, norm, outer.evals, trace, False, val, status)
        sol.meta["block_residual_norm"] = norm
        return sol
    pr, aux, norm, its = _polish(model, pr, x, y, cfg)
    val = float(psi_rd_value(model, pr, aux, x, y, cfg.nodes))
    trace.append({"iteration": len(trace), "params": pr.to_dict(), "aux": aux.to_dict(),
                  "residual_norm": norm, "value": val})
    conv = norm <= cfg.tol
    return SaddleSolution(pr, aux, norm, outer.evals + its, trace, conv, val,
                          "converged" if conv else status)


def default_starts(r, mode):
    """Uniform ladder and the pinned partial-lift point."""
    starts = []
    if mode == "full":
        ks = np.arange(r + 2)
        p = 1.0 - ks / (r + 1.0)
        p[1] = 1.0
        c = np.r_[1.0, 1.0, np.ones(r - 1), 0.0]
        starts.append(LiftingParams(r, p, p.copy(), c))
    starts.append(partial_lift(r, 1.0) if mode != "nonlifted" else non_lifted(r))
    return starts


def _rank(sol):
    lex = tuple(np.r_[sol.params.p, sol.params.q, sol.params.c])
    return (0 if sol.converged else 1,
            0.0 if sol.converged else sol.residual_norm,
            -sol.value if np.isfinite(sol.value) else math.inf, lex)


def solve_stationary(model, init, aux_init=None, x=1.0, y=1.0, config=None):
    """Damped Newton on the stationarity system with multi-start.

    ``init`` is tried first, then every entry of ``config.starts``. Converged
    runs beat non-converged ones; among converged runs the larger psi_rd wins,
    otherwise the smaller residual. ``aux_init`` is only checked: the aux
    scalars are re-extremized exactly at every step.
    """
    cfg = config or SolverConfig()
    validate_params(init, allow_limit=(cfg.mode == "nonlifted"))
    if aux_init is not None:
        aux_init.check(model)
    inits = [init] + [s for s in cfg.starts]
    sols = []
    for i, s in enumerate(inits):
        validate_params(s, allow_limit=(cfg.mode == "nonlifted"))
        sol = _solve_one(model, s, x, y, cfg)
        sol.start = i
        sols.append(sol)
    best = min(sols, key=_rank)
    best.meta["selection"] = "converged first, then larger psi_rd, then smaller residual"
    best.meta["starts"] = [{"status": s.status, "residual_norm": s.residual_norm,
                            "value": s.value} for s in sols]
    return best


# -- outer norm search ------------------------------------------------------

_INV_PHI = (math.sqrt(5) - 1) / 2


def _golden(fun, lo, hi, sense, tol=1e-6, iters=200):
    """Golden-section search of sense*fun on [lo, hi] in log space."""
    a, b = math.log(lo), math.log(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = sense * fun(math.exp(c)), sense * fun(math.exp(d))
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = sense * fun(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = sense * fun(math.exp(d))
    t = math.exp(0.5 * (a + b))
    edge = min(t - lo, hi - t) < 1e-4 * t or abs(math.log(t / lo)) < 1e-4 or abs(math.log(hi / t)) < 1e-4
    return t, sense * min(fc, fd), edge


def minmax_norms(model, config=None, dual=None, bracket=(1e-3, 1e3), init=None):
    """min over x of max over y of the stationary psi_rd.

    ``dual(x_eff, y_eff)`` may replace the stationary solve; it receives the
    norms already multiplied by the set radii. Fixed-norm models skip the
    search and return (1, 1, solution).
    """
    cfg = config or SolverConfig()
    init = init or default_starts(2, cfg.mode)[0]
    if model.fixed_norms:
        return 1.0, 1.0, solve_stationary(model, init, None, 1.0, 1.0, cfg)
    rx, ry = model.x_set.radius, model.y_set.radius
    cache = {}

    def value(x, y):
        key = (x, y)
        if key not in cache:
            if dual is not None:
                cache[key] = (float(dual(x * rx, y * ry)), None)
            else:
                sol = solve_stationary(model, init, None, x, y, cfg)
                cache[key] = (sol.value, sol)
        return cache[key][0]

    lo, hi = bracket

    def inner(x):
        y, v, edge = _golden(lambda yy: value(x, yy), lo, hi, -1)
        if edge:
            raise BracketFailure(f"max over y sits on the bracket edge at x={x:.3g}")
        inner.last[x] = y
        return v
    inner.last = {}
    x_star, _, edge = _golden(inner, lo, hi, +1)
    if edge:
        raise BracketFailure("min over x sits on the bracket edge")
    y_star, _, _ = _golden(lambda yy: value(x_star, yy), lo, hi, -1)
    sol = cache.get((x_star, y_star), (None, None))[1]
    if sol is None and dual is None:
        sol = solve_stationary(model, init, None, x_star, y_star, cfg)
    return x_star, y_star, sol
