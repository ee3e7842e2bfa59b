"""Finite-instance interpolating functional on small explicit sets X, Y.

For X = {x_1..x_l} in R^n, Y = {y_1..y_l} in R^m the partition function is
Z = sum_{i1} (sum_{i2} e^{beta D0})^s with

    D0 = f_i1 + sqrt(t) y.G x + sqrt(1-t) |x| y.U2 + sqrt(t) |x||y| A4
         + sqrt(1-t) |y| H.x + y.g,

U2 = sum_k b_k u2_k, A4 = sum_k a_k u4_k, H = sum_k cc_k h_k over levels
1..r+1. The levels are averaged by the zeta recursion
zeta_k = E_{U_k} zeta_{k-1}^{m_k/m_{k-1}}, zeta_0 = Z, and the outer level
(with G) carries the wrapper log(zeta_r) / (beta |s| sqrt(n) m_r).
"""
from dataclasses import dataclass
import json

import numpy as np
from scipy.special import logsumexp

from .._rng import stream
from ..errors import BoundaryViolation, NonpositiveExponent, OverflowGuard
from ..lifting import LiftingParams, noise_coefficients, validate_params
from .ground import DualEvaluation

BETA_MAX = 1e6


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    X: np.ndarray  # (l, n)
    Y: np.ndarray  # (l, m)
    beta: float
    s: int
    t: float
    p: np.ndarray
    q: np.ndarray
    m_vec: np.ndarray  # unrescaled exponents m_0..m_{r+1}
    f: np.ndarray | None = None  # objective per x, defaults to zero
    g: np.ndarray | None = None  # Y offset, defaults to zero

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, float))
        Y = np.atleast_2d(np.asarray(self.Y, float))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        for name in ("p", "q", "m_vec"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("instance vectors must be finite")
        if self.s not in (-1, 1):
            raise ValueError("s must be -1 or +1")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        mv = self.m_vec
        if mv[0] != 1.0 or mv[-1] != 0.0:
            raise BoundaryViolation("m vector must start at 1 and end at 0")
        if np.any(mv[1:-1] <= 0):
            raise NonpositiveExponent("interior m entries must be positive",
                                      int(np.argmax(mv[1:-1] <= 0)) + 1)
        # p, q chains are checked with a placeholder exponent vector
        r = self.r
        c = np.ones(r + 2)
        c[-1] = 0.0
        validate_params(LiftingParams(r, self.p, self.q, c))

    @property
    def r(self):
        return len(self.m_vec) - 2

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.Y.shape[1]

    def replace(self, **kw):
        d = {k: getattr(self, k) for k in ("X", "Y", "beta", "s", "t", "p", "q", "m_vec", "f", "g")}
        d.update(kw)
        return FiniteInstance(**d)

    @classmethod
    def from_dict(cls, d):
        m_vec = d["m"]
        r = len(m_vec) - 2
        p = d.get("p", [1.0] + [0.0] * (r + 1))
        q = d.get("q", p)
        return cls(d["X"], d["Y"], float(d["beta"]), int(d["s"]), float(d["t"]),
                   p, q, m_vec, d.get("f"), d.get("g"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _draw(inst, samples, seed):
    """All Gaussian draws, shape (N_out, N_r, ..., N_1, dim) per field.

    Streams are keyed by level so the draws do not depend on call order.
    """
    r, n, m = inst.r, inst.n, inst.m
    outer = int(samples[-1])
    per_level = [int(s) for s in samples[:-1]]
    if len(per_level) != r:
        raise ValueError(f"need {r + 1} sample counts (levels 1..r then outer)")
    shape_full = [outer] + per_level[::-1]  # outer, level r, ..., level 1
    rng = stream(seed, 0)
    G = rng.standard_normal((outer, m, n))
    fields = []
    for k in range(1, r + 2):
        depth = 1 + (r + 1 - k)  # number of leading axes this level varies over
        shp = shape_full[:depth] + [1] * (r + 1 - depth)
        rng = stream(seed, k)
        u4 = rng.standard_normal(shp)
        u2 = rng.standard_normal(shp + [m])
        h = rng.standard_normal(shp + [n])
        fields.append((u4, u2, h))
    return G, fields, shape_full


def _evaluate(inst, samples, seed, with_a):
    beta = float(inst.beta)
    if not np.isfinite(beta) or beta > BETA_MAX:
        raise OverflowGuard("beta too large for the log-domain path; use the max-enumeration path")
    if inst.f is None:
        f = np.zeros(inst.X.shape[0])
    else:
        f = np.asarray(inst.f, float)
    co = noise_coefficients(LiftingParams(inst.r, inst.p, inst.q,
                                          np.r_[1.0, np.ones(inst.r), 0.0]))
    G, fields, shape_full = _draw(inst, samples, seed)
    U2 = sum(co.b[k] * fields[k][1] for k in range(inst.r + 1))
    A4 = sum(co.a[k] * fields[k][0] for k in range(inst.r + 1))
    H = sum(co.cc[k] * fields[k][2] for k in range(inst.r + 1))
    U2 = np.broadcast_to(U2, shape_full + [inst.m])
    H = np.broadcast_to(H, shape_full + [inst.n])
    A4 = np.broadcast_to(A4, shape_full)
    X, Y, t = inst.X, inst.Y, inst.t
    nx, ny = np.linalg.norm(X, axis=1), np.linalg.norm(Y, axis=1)
    extra = (1,) * inst.r
    # D0[..., i1, i2]
    yGx = np.einsum("bj,ojk,ak->oab", Y, G, X).reshape((G.shape[0],) + extra + (len(X), len(Y)))
    yU = np.einsum("...j,bj->...b", U2, Y)[..., None, :] * nx[:, None]
    Hx = np.einsum("...k,ak->...a", H, X)[..., :, None] * ny[None, :]
    d0s = f[:, None] + np.sqrt(t) * yGx + np.sqrt(1 - t) * (yU + Hx)
    if inst.g is not None:
        d0s = d0s + (Y @ np.asarray(inst.g, float))[None, :]
    if with_a:
        d0 = d0s + np.sqrt(t) * (A4[..., None, None] * nx[:, None] * ny[None, :])
    else:
        d0 = d0s
    s = inst.s
    log_z = logsumexp(s * logsumexp(beta * d0, axis=-1), axis=-1)
    mv = inst.m_vec
    lz = log_z
    prev = 1.0
    for k in range(1, inst.r + 1):  # levels 1..r, innermost axis first
        lz = logsumexp((mv[k] / prev) * lz, axis=-1) - np.log(lz.shape[-1])
        prev = mv[k]
    vals = lz / (beta * abs(s) * np.sqrt(inst.n) * mv[inst.r])
    N = vals.size
    se = float(vals.std(ddof=1) / np.sqrt(N)) if N > 1 else float("inf")
    return DualEvaluation(float(vals.mean()), se, "monte_carlo", int(np.prod(samples)), seed)


def finite_psi(instance, mc_samples, seed):
    """Interpolating functional with all five D0 terms.

    ``mc_samples`` gives counts for levels 1..r followed by the outer count.
    """
    return _evaluate(instance, mc_samples, seed, with_a=True)


def finite_psi_S(instance, mc_samples, seed):
    """As ``finite_psi`` without the sqrt(t) a_k u4_k term."""
    return _evaluate(instance, mc_samples, seed, with_a=False)
