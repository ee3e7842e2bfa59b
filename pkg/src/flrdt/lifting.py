"""Lifting parameter vectors and the noise coefficients derived from them.

Indexing follows the math: entry ``k`` of ``p``, ``q``, ``c`` is level k for
k = 0..r+1. Noise coefficient arrays ``a``, ``b``, ``cc`` have length r+1 and
store level k at position k-1.
"""
from dataclasses import dataclass
import json

import numpy as np

from .errors import (
    BoundaryViolation,
    MonotonicityViolation,
    NegativeRadicand,
    NonpositiveExponent,
    ParamsError,
)

# radicands this negative are rounding noise, anything below is a real error
_RADICAND_SLACK = 1e-14


@dataclass(frozen=True, eq=False)
class LiftingParams:
    r: int
    p: np.ndarray
    q: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("p", "q", "c"):
            v = np.array(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "r", int(self.r))

    @property
    def is_limit(self):
        """True when every interior exponent is zero (non-lifted limit mode)."""
        return self.r < 2 or bool(np.all(self.c[2:self.r + 1] == 0.0))

    def replace(self, **kw):
        d = dict(r=self.r, p=self.p, q=self.q, c=self.c)
        d.update(kw)
        return LiftingParams(**d)

    def to_dict(self):
        return {"r": self.r, "p": self.p.tolist(), "q": self.q.tolist(),
                "c": self.c.tolist()}

    @classmethod
    def from_dict(cls, d):
        missing = {"r", "p", "q", "c"} - set(d)
        if missing:
            raise ParamsError(f"missing fields {sorted(missing)}")
        return cls(r=d["r"], p=d["p"], q=d["q"], c=d["c"])

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    def __eq__(self, other):
        if not isinstance(other, LiftingParams):
            return NotImplemented
        return (self.r == other.r and np.array_equal(self.p, other.p)
                and np.array_equal(self.q, other.q)
                and np.array_equal(self.c, other.c))

    def __repr__(self):
        return (f"LiftingParams(r={self.r}, p={self.p.tolist()}, "
                f"q={self.q.tolist()}, c={self.c.tolist()})")


def partial_lift(r, c2=1.0):
    """The pinned configuration p = q = [1, 1, 0, ..., 0] with c_k = c2."""
    p = np.zeros(r + 2)
    p[:2] = 1.0
    c = np.zeros(r + 2)
    c[:2] = 1.0
    c[2:r + 1] = c2
    return LiftingParams(r, p, p.copy(), c)


def non_lifted(r=2):
    """Plain-duality configuration: all interior exponents in the c -> 0 limit."""
    return partial_lift(r, 0.0)


def embed(params):
    """Level-(r+1) parameters with the same value: the last interior level is
    repeated, which adds a level with zero noise and an unchanged exponent."""
    r = params.r
    p = np.r_[params.p[:r + 1], params.p[r], 0.0]
    q = np.r_[params.q[:r + 1], params.q[r], 0.0]
    c = np.r_[params.c[:r + 1], params.c[r], 0.0]
    return LiftingParams(r + 1, p, q, c)


def validate_params(params, allow_limit=False):
    r = params.r
    if r < 1:
        raise ParamsError(f"lifting level must be positive, got {r}")
    for name in ("p", "q", "c"):
        v = getattr(params, name)
        if v.shape != (r + 2,):
            raise ParamsError(f"{name} must have length r+2={r + 2}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParamsError(f"{name} has non-finite entries",
                              int(np.argmin(np.isfinite(v))))
    for name in ("p", "q"):
        v = getattr(params, name)
        if v[0] != 1.0:
            raise BoundaryViolation(f"{name}[0] must be 1", 0)
        if v[r + 1] != 0.0:
            raise BoundaryViolation(f"{name}[{r + 1}] must be 0", r + 1)
        for k in range(1, r + 2):
            if v[k] > v[k - 1]:
                raise MonotonicityViolation(
                    f"{name} increases at index {k}: {v[k - 1]} < {v[k]}", k)
            if v[k] < 0.0:
                raise MonotonicityViolation(f"{name}[{k}] is negative", k)
    c = params.c
    if c[0] != 1.0 or c[1] != 1.0:
        raise BoundaryViolation("c[0] and c[1] must be 1", 0 if c[0] != 1.0 else 1)
    if c[r + 1] != 0.0:
        raise BoundaryViolation(f"c[{r + 1}] must be 0", r + 1)
    interior = c[2:r + 1]
    if allow_limit and interior.size and np.all(interior == 0.0):
        return params
    for k in range(2, r + 1):
        if c[k] <= 0.0:
            raise NonpositiveExponent(f"c[{k}] = {c[k]} must be positive", k)
    return params


@dataclass(frozen=True, eq=False)
class NoiseCoefficients:
    a: np.ndarray
    b: np.ndarray
    cc: np.ndarray

    @property
    def r(self):
        return len(self.a) - 1


def _root(x, k):
    if x < -_RADICAND_SLACK:
        raise NegativeRadicand(f"negative radicand {x} at level {k}", k)
    return np.sqrt(max(x, 0.0))


def noise_coefficients(params):
    p, q, r = params.p, params.q, params.r
    a = np.array([_root(p[k - 1] * q[k - 1] - p[k] * q[k], k) for k in range(1, r + 2)])
    b = np.array([_root(p[k - 1] - p[k], k) for k in range(1, r + 2)])
    cc = np.array([_root(q[k - 1] - q[k], k) for k in range(1, r + 2)])
    return NoiseCoefficients(a, b, cc)


@dataclass(frozen=True, eq=False)
class RandomFields:
    """Standard normal draws per level; row k-1 holds level k."""
    u4: np.ndarray  # (r+1,)
    u2: np.ndarray  # (r+1, m)
    h: np.ndarray   # (r+1, n)

    @classmethod
    def sample(cls, r, m, n, rng):
        return cls(rng.standard_normal(r + 1), rng.standard_normal((r + 1, m)),
                   rng.standard_normal((r + 1, n)))
