"""Constraint-set descriptors, membership tests and closed-form inner optima."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, UnsupportedFamily

NORM_TOL = 1e-10


class XFamily(str, Enum):
    SPHERE = "sphere"
    BINARY = "binary"
    WEAK_L1 = "weak_l1"
    SECTIONAL_L1 = "sectional_l1"


class YFamily(str, Enum):
    SPHERE = "sphere"
    POS_ORTHANT = "pos_orthant_sphere"
    MIXED_CONE = "mixed_cone"


@dataclass(frozen=True)
class XSet:
    family: XFamily
    n: int
    radius: float = 1.0
    k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", XFamily(self.family))
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.family in (XFamily.WEAK_L1, XFamily.SECTIONAL_L1):
            if self.k is None or not 0 <= self.k <= self.n:
                raise ValueError("l1 families need a sparsity 0 <= k <= n")

    def resized(self, n):
        return XSet(self.family, n, self.radius, self.k)

    def to_dict(self):
        d = {"family": self.family.value, "n": self.n, "radius": self.radius}
        if self.k is not None:
            d["k"] = self.k
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], int(d["n"]), float(d.get("radius", 1.0)), d.get("k"))


@dataclass(frozen=True, eq=False)
class YSet:
    """Y family. ``g`` is a scalar (broadcast) or a vector of length m1+m2.

    The first m1 coordinates are sign-free, the last m2 are nonnegative.
    """
    family: YFamily
    m1: int
    m2: int
    radius: float = 1.0
    g: float | np.ndarray = 0.0

    def __post_init__(self):
        fam = YFamily(self.family)
        object.__setattr__(self, "family", fam)
        if fam is YFamily.SPHERE and self.m2:
            raise ValueError("Sphere family has no nonnegative block (m2 must be 0)")
        if fam is YFamily.POS_ORTHANT and self.m1:
            raise ValueError("PosOrthantSphere family has m1 = 0")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        g = self.g
        if np.ndim(g):
            g = np.array(g, dtype=float)
            if g.shape != (self.m,):
                raise DimensionMismatch(f"offset has shape {g.shape}, expected ({self.m},)")
            g.setflags(write=False)
        else:
            g = float(g)
        object.__setattr__(self, "g", g)

    @property
    def m(self):
        return self.m1 + self.m2

    @classmethod
    def perceptron(cls, m, kappa=0.0, radius=1.0):
        """Nonnegative orthant with threshold kappa for constraints G x >= kappa."""
        return cls(YFamily.POS_ORTHANT, 0, m, radius, float(kappa))

    def scalar_offset(self):
        """The offset as one number, if it is uniform."""
        g = np.asarray(self.g)
        if g.ndim == 0:
            return float(g)
        if g.size and np.all(g == g[0]):
            return float(g[0])
        raise UnsupportedFamily("separable evaluation needs a uniform offset")

    def resized(self, m1, m2):
        return YSet(self.family, m1, m2, self.radius, self.scalar_offset())

    def offset_vector(self):
        return np.broadcast_to(np.asarray(self.g, dtype=float), (self.m,))

    def to_dict(self):
        g = self.g.tolist() if np.ndim(self.g) else self.g
        return {"family": self.family.value, "m1": self.m1, "m2": self.m2,
                "radius": self.radius, "g": g}

    @classmethod
    def from_dict(cls, d):
        g = d.get("g", 0.0)
        if "kappa" in d:
            g = float(d["kappa"])
        return cls(d["family"], int(d.get("m1", 0)), int(d.get("m2", 0)),
                   float(d.get("radius", 1.0)), g)

    def __eq__(self, other):
        if not isinstance(other, YSet):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


@dataclass(frozen=True)
class InnerOptResult:
    value: float
    witness: np.ndarray


def _check_x(xs, field):
    if xs.family not in (XFamily.SPHERE, XFamily.BINARY):
        raise UnsupportedFamily(f"{xs.family.value} supports membership only")
    if field.shape[-1] != xs.n:
        raise DimensionMismatch(f"field length {field.shape[-1]} != n={xs.n}")
    if not np.all(np.isfinite(field)):
        raise ValueError("field must be finite")


def min_over_x_values(xs, fields):
    """Vectorized minimum of field . x over the set; rows of ``fields`` are fields."""
    fields = np.asarray(fields, dtype=float)
    _check_x(xs, fields)
    if xs.family is XFamily.SPHERE:
        return -xs.radius * np.linalg.norm(fields, axis=-1)
    return -(xs.radius / np.sqrt(xs.n)) * np.abs(fields).sum(axis=-1)


def min_over_x(xs, field):
    field = np.asarray(field, dtype=float)
    value = float(min_over_x_values(xs, field))
    if xs.family is XFamily.SPHERE:
        nrm = np.linalg.norm(field)
        if nrm == 0.0:
            w = np.zeros(xs.n)
            w[0] = xs.radius
        else:
            w = -xs.radius * field / nrm
    else:
        s = -np.sign(field)
        s[s == 0] = 1.0
        w = s * xs.radius / np.sqrt(xs.n)
    return InnerOptResult(value, w)


def _clipped(ys, v):
    if ys.m2 == 0:
        return v
    out = v.copy()
    out[..., ys.m1:] = np.maximum(out[..., ys.m1:], 0.0)
    return out


def max_over_y_values(ys, fields):
    fields = np.asarray(fields, dtype=float)
    if fields.shape[-1] != ys.m:
        raise DimensionMismatch(f"field length {fields.shape[-1]} != m={ys.m}")
    if not np.all(np.isfinite(fields)):
        raise ValueError("field must be finite")
    v = _clipped(ys, fields + ys.offset_vector())
    return ys.radius * np.linalg.norm(v, axis=-1)


def max_over_y(ys, field):
    field = np.asarray(field, dtype=float)
    value = float(max_over_y_values(ys, field))
    v = _clipped(ys, field + ys.offset_vector())
    nrm = np.linalg.norm(v)
    # fully clipped: the zero vector is the only point attaining the value 0
    w = ys.radius * v / nrm if nrm > 0.0 else np.zeros(ys.m)
    return InnerOptResult(value, w)


def membership(s, point):
    x = np.asarray(point, dtype=float)
    if isinstance(s, XSet):
        if x.shape != (s.n,):
            raise DimensionMismatch(f"point has shape {x.shape}, expected ({s.n},)")
        if s.family is XFamily.BINARY:
            return bool(np.all(np.abs(np.abs(x) - s.radius / np.sqrt(s.n)) <= NORM_TOL))
        if abs(np.linalg.norm(x) - s.radius) > NORM_TOL:
            return False
        if s.family is XFamily.SPHERE:
            return True
        # the last k coordinates carry the support
        head = np.abs(x[:s.n - s.k]).sum()
        tail = x[s.n - s.k:]
        if s.family is XFamily.SECTIONAL_L1:
            tail = np.abs(tail)
        return bool(head <= tail.sum())
    if x.shape != (s.m,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({s.m},)")
    if abs(np.linalg.norm(x) - s.radius) > NORM_TOL:
        return False
    return bool(np.all(x[s.m1:] >= 0.0))
