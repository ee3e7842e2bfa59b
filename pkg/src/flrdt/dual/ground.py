"""Ground-state dual: D, the separable n -> infinity functional and psi_rd.

Normalization. All values are O(1): the nested exponent is e^{c sqrt(n) D}
and the wrapper is 1/(n c_r), so the c -> 0 limit is E[D]/sqrt(n), the
expected primal objective per sqrt(n). The field ``value`` of every
DualEvaluation from this module uses that scale.
"""
from dataclasses import dataclass, field, replace
import json

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import DomainError, NonpositiveAux
from ..lifting import noise_coefficients, validate_params
from ..sets import XFamily, XSet, YFamily, YSet, max_over_y_values, min_over_x_values
from .kernels import AbsKernel, QuadKernel, ReluQuadKernel, nested

GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    x_set: XSet
    y_set: YSet
    alpha: float
    objective: str = "zero"
    n_scale: int | None = None
    fixed_norms: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.objective not in ("zero", "linear_offset_only"):
            raise ValueError(f"unknown objective {self.objective!r}")

    @classmethod
    def perceptron(cls, kind, kappa=0.0, alpha=1.0, n=100):
        """Perceptron with constraints G x >= kappa; kind is 'sphere' or 'binary'."""
        m = max(1, int(round(alpha * n)))
        return cls(XSet(kind, n), YSet.perceptron(m, kappa), float(alpha), n_scale=n)

    @property
    def kappa(self):
        return self.y_set.scalar_offset()

    @property
    def free_fraction(self):
        return self.y_set.m1 / self.y_set.m

    def with_alpha(self, alpha):
        return replace(self, alpha=float(alpha))

    def sized(self, n):
        """Same model at dimension n with m = round(alpha n)."""
        m = max(1, int(round(self.alpha * n)))
        m1 = int(round(self.free_fraction * m))
        return replace(self, x_set=self.x_set.resized(n),
                       y_set=self.y_set.resized(m1, m - m1), n_scale=n)

    def to_dict(self):
        return {"x_set": self.x_set.to_dict(), "y_set": self.y_set.to_dict(),
                "alpha": self.alpha, "objective": self.objective,
                "n_scale": self.n_scale, "fixed_norms": self.fixed_norms}

    @classmethod
    def from_dict(cls, d):
        return cls(XSet.from_dict(d["x_set"]), YSet.from_dict(d["y_set"]),
                   float(d["alpha"]), d.get("objective", "zero"), d.get("n_scale"),
                   bool(d.get("fixed_norms", True)))


@dataclass(frozen=True)
class Aux:
    """Norm-linearization scalars: gamma_x (sphere X only) and gamma_y."""
    gamma_x: float | None
    gamma_y: float

    def check(self, model):
        if model.x_set.family is XFamily.SPHERE:
            if self.gamma_x is None or not self.gamma_x > 0:
                raise NonpositiveAux(f"gamma_x must be positive, got {self.gamma_x}")
        if not self.gamma_y > 0:
            raise NonpositiveAux(f"gamma_y must be positive, got {self.gamma_y}")

    def as_list(self):
        return [g for g in (self.gamma_x, self.gamma_y) if g is not None]

    def to_dict(self):
        return {"gamma_x": self.gamma_x, "gamma_y": self.gamma_y}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("gamma_x"), d["gamma_y"])


@dataclass
class DualEvaluation:
    value: float
    std_error: float
    method: str  # "separable_quadrature" | "monte_carlo" | "closed_form"
    samples_or_nodes: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "method": self.method,
                "samples_or_nodes": self.samples_or_nodes, "seed": self.seed,
                "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _radii(model, x, y):
    return x * model.x_set.radius, y * model.y_set.radius


def ground_state_D(model, coeffs, fields, x=1.0, y=1.0):
    """D = -min_x max_y [y H.x + x y.U + y.g] at the sampled fields.

    Sums over levels start at 2; level 1 never enters the ground state.
    Fields may carry leading batch axes before the level axis.
    """
    xr, yr = _radii(model, x, y)
    H = np.tensordot(coeffs.cc[1:], np.moveaxis(fields.h[..., 1:, :], -2, 0), axes=1)
    U = np.tensordot(coeffs.b[1:], np.moveaxis(fields.u2[..., 1:, :], -2, 0), axes=1)
    xs = XSet(model.x_set.family, model.x_set.n, xr, model.x_set.k)
    ys = YSet(model.y_set.family, model.y_set.m1, model.y_set.m2, yr, model.y_set.g)
    d = -(min_over_x_values(xs, yr * H) + max_over_y_values(ys, xr * U))
    return float(d) if np.ndim(d) == 0 else d


# -- separable evaluation ---------------------------------------------------

def _level_data(params):
    co = noise_coefficients(params)
    r = params.r
    c_int = params.c[2:r + 1]
    if params.is_limit:
        c_int = np.zeros(0)
    return co.cc[1:], co.b[1:], c_int


def x_kernel(model, gamma_x, xr, yr):
    if model.x_set.family is XFamily.BINARY:
        return AbsKernel(xr * yr)
    if model.x_set.family is XFamily.SPHERE:
        return QuadKernel((xr * yr) ** 2 / gamma_x)
    raise DomainError(f"no separable form for {model.x_set.family.value}")


def y_kernels(model, gamma_y, xr, yr):
    g = model.kappa
    wy = yr * yr / gamma_y
    return QuadKernel(-wy, xr, g), ReluQuadKernel(wy, xr, g)


def x_side(model, params, gamma_x, x=1.0, y=1.0, nodes=60, split=False, levels=None):
    """x-side contribution. With ``split`` returns (shift, rest) separately.

    ``levels`` may carry a precomputed ``_level_data(params)``.
    """
    sig_h, _, c_int = levels or _level_data(params)
    xr, yr = _radii(model, x, y)
    kern = x_kernel(model, gamma_x, xr, yr)
    shift, rest = nested(kern, sig_h, c_int, nodes)
    if model.x_set.family is XFamily.SPHERE:
        rest += 0.5 * gamma_x
    return (shift, rest) if split else shift + rest


def y_side(model, params, gamma_y, x=1.0, y=1.0, nodes=60, levels=None):
    _, sig_u, c_int = levels or _level_data(params)
    xr, yr = _radii(model, x, y)
    free, cone = y_kernels(model, gamma_y, xr, yr)
    phi = model.free_fraction
    val = 0.0
    if phi > 0:
        val += phi * nested(free, sig_u, c_int, nodes)[1]
    if phi < 1:
        val += (1 - phi) * nested(cone, sig_u, c_int, nodes)[1]
    return -0.5 * gamma_y + model.alpha * val


def _psi_s_parts(model, params, aux, x, y, nodes):
    gx = aux.gamma_x if model.x_set.family is XFamily.SPHERE else None
    shift, rest = x_side(model, params, gx, x, y, nodes, split=True)
    return shift, rest + y_side(model, params, aux.gamma_y, x, y, nodes)


def psi_s_inf_separable(model, params, aux, quad_nodes=60, x=1.0, y=1.0, check=True):
    """n -> infinity value of the nested functional by per-coordinate quadrature.

    The value is exact at stationary aux; elsewhere it is the linearized bound.
    With ``check`` the node count is doubled until the value moves < 1e-8.
    """
    from ..errors import QuadratureOrderTooLow

    validate_params(params, allow_limit=True)
    aux.check(model)
    nodes = quad_nodes
    val = sum(_psi_s_parts(model, params, aux, x, y, nodes))
    if check and not params.is_limit and params.r >= 2:
        for _ in range(3):
            finer = sum(_psi_s_parts(model, params, aux, x, y, 2 * nodes))
            moved = abs(finer - val)
            nodes, val = 2 * nodes, finer
            if moved <= 1e-8:
                break
        else:
            raise QuadratureOrderTooLow(f"value still moves by {moved:.2e} at {nodes} nodes")
    if not np.isfinite(val):
        raise DomainError("aux outside the domain where the functional is finite")
    method = "closed_form" if params.is_limit else "separable_quadrature"
    return DualEvaluation(float(val), 0.0, method, nodes)


def lead_term(model, params, x=1.0, y=1.0, drop_shift=False):
    """(x^2 y^2 / 2) sum_{k=2}^{r} (p_{k-1} q_{k-1} - p_k q_k) c_k.

    With ``drop_shift`` the binary innermost Gaussian offset
    c_2 (xy)^2 (q_1 - q_2)/2 is subtracted analytically, which removes a large
    cancellation at big c_2.
    """
    if params.is_limit:
        return 0.0
    xr, yr = _radii(model, x, y)
    p, q, c = params.p, params.q, params.c
    total = 0.0
    for k in range(2, params.r + 1):
        if k == 2 and drop_shift:
            total += c[2] * (q[1] * (p[1] - 1.0) + q[2] * (1.0 - p[2]))
        else:
            total += (p[k - 1] * q[k - 1] - p[k] * q[k]) * c[k]
    return 0.5 * (xr * yr) ** 2 * total


def psi_rd_value(model, params, aux, x=1.0, y=1.0, nodes=60):
    """Raw float psi_rd on the separable path; +-inf outside the domain."""
    shift, rest = _psi_s_parts(model, params, aux, x, y, nodes)
    binary = model.x_set.family is XFamily.BINARY
    return lead_term(model, params, x, y, drop_shift=binary) - (0.0 if binary else shift) - rest


def psi_rd(model, params, aux, x=1.0, y=1.0, nodes=60, psi_s=None):
    """Lifted random dual psi_rd = lead term - psi_S.

    ``psi_s`` may be a DualEvaluation (for example from the Monte Carlo path)
    or a callable stub; by default the separable path is used.
    """
    if not (x > 0 and y > 0):
        raise ValueError("norms x and y must be positive")
    validate_params(params, allow_limit=True)
    if psi_s is None:
        aux.check(model)
        val = psi_rd_value(model, params, aux, x, y, nodes)
        if not np.isfinite(val):
            raise DomainError("aux outside the domain where the functional is finite")
        method = "closed_form" if params.is_limit else "separable_quadrature"
        return DualEvaluation(float(val), 0.0, method, nodes)
    if callable(psi_s):
        psi_s = psi_s(model, params, aux, x, y)
    if not isinstance(psi_s, DualEvaluation):
        psi_s = DualEvaluation(float(psi_s), 0.0, "closed_form", 0)
    val = lead_term(model, params, x, y) - psi_s.value
    return DualEvaluation(val, psi_s.std_error, psi_s.method, psi_s.samples_or_nodes, psi_s.seed)


# -- aux profiling ----------------------------------------------------------

def _scan_then_polish(fun, lo, hi, sense, grid=24):
    """Optimize a 1-D function of log(gamma) on [lo, hi]: coarse scan, then Brent."""
    ts = np.linspace(lo, hi, grid)
    vals = np.array([sense * fun(t) for t in ts])
    vals[~np.isfinite(vals)] = np.inf
    i = int(np.argmin(vals))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda t: sense * fun(t), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-11, "maxiter": 200})
    t = res.x if res.fun <= vals[i] else ts[i]
    return float(np.exp(t))


def sphere_gamma_floor(model, params, x=1.0, y=1.0):
    """Smallest gamma_x for which the sphere x-side stays finite."""
    lv = _level_data(params)
    hi = 1.0
    while not np.isfinite(x_side(model, params, hi, x, y, levels=lv)):
        hi *= 4.0
    lo = hi
    while np.isfinite(x_side(model, params, lo, x, y, levels=lv)) and lo > 1e-12:
        lo /= 4.0
    if lo <= 1e-12:
        return 0.0
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        if np.isfinite(x_side(model, params, mid, x, y, levels=lv)):
            hi = mid
        else:
            lo = mid
    return hi


def optimal_gamma_x(model, params, x=1.0, y=1.0, nodes=60):
    if model.x_set.family is not XFamily.SPHERE:
        return None
    floor = sphere_gamma_floor(model, params, x, y)
    lv = _level_data(params)
    g0 = max(2.0 * floor, x * y * model.x_set.radius * model.y_set.radius, 1e-8)
    upper = 2.0 * x_side(model, params, g0, x, y, nodes, levels=lv) + 1e-12
    # search over log(gamma - floor): the optimum can hug the domain edge
    span = upper - floor
    fun = lambda t: x_side(model, params, floor + np.exp(t), x, y, nodes, levels=lv)
    d = _scan_then_polish(fun, np.log(span) - 40.0, np.log(span), +1, grid=41)
    return floor + d


def optimal_gamma_y(model, params, x=1.0, y=1.0, nodes=60):
    lv = _level_data(params)
    y0 = y_side(model, params, 1.0, x, y, nodes, levels=lv)
    upper = max(-2.0 * y0, 1.0)  # y_side(g) <= -g/2, so the maximizer sits below this
    g = _scan_then_polish(lambda t: y_side(model, params, np.exp(t), x, y, nodes, levels=lv),
                          np.log(upper) - 35.0, np.log(upper), -1, grid=36)
    return max(g, GAMMA_FLOOR)


def optimal_aux(model, params, x=1.0, y=1.0, nodes=60):
    """Stationary linearization scalars (min over gamma_x, max over gamma_y)."""
    return Aux(optimal_gamma_x(model, params, x, y, nodes),
               optimal_gamma_y(model, params, x, y, nodes))
