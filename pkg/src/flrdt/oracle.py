"""Desk-scale ground truth: random instances, direct feasibility, tiny min-max primals.

Instances encode the constraints

    G_1 x + a = 0          (first m1 rows, free y block)
    G_2 x + b >= 0         (last m2 rows, cone y block), b = -kappa by default,

so the perceptron case is m1 = 0, G x >= kappa.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import lsq_linear, nnls
from scipy.stats import norm

from ._rng import stream
from .errors import NoCrossing, SizeLimitExceeded
from .sets import XFamily

BINARY_MAX_N = 25
PRIMAL_MAX_PAIRS = 10 ** 6
MIN_TRIALS = 50
FEAS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class InstanceSample:
    G: np.ndarray
    m1: int
    m2: int
    a: np.ndarray
    b: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))
        if G.shape[0] != self.m1 + self.m2:
            raise ValueError(f"G has {G.shape[0]} rows, expected m1+m2={self.m1 + self.m2}")
        if self.a.size != self.m1 or self.b.size != self.m2:
            raise ValueError("offset lengths must match the row split")

    @property
    def n(self):
        return self.G.shape[1]

    @property
    def m(self):
        return self.G.shape[0]

    @property
    def kappa(self):
        return float(-self.b[0]) if self.m2 and np.all(self.b == self.b[0]) else None


def sample_instance(n, m1, m2, kappa=0.0, seed=0):
    """Seeded Gaussian instance with default offsets a = 0, b = -kappa."""
    if n < 1 or m1 + m2 < 1 or m1 < 0 or m2 < 0:
        raise ValueError("need n >= 1 and m1 + m2 >= 1")
    G = stream(seed, 0).standard_normal((m1 + m2, n))
    return InstanceSample(G, m1, m2, np.zeros(m1), np.full(m2, -float(kappa)), seed)


# -- spherical check ---------------------------------------------------------

def sphere_margin(G, kappa):
    """max over unit x of min_i (G x)_i - kappa, exactly, with a witness x.

    Least-distance form: the shortest x with G x >= 1 has norm 1/d where d is
    the distance from the origin to conv(rows), which is the best margin over
    the unit ball. That problem is solved exactly by non-negative least
    squares (Lawson-Hanson); a zero residual certifies 0 in conv(rows), i.e.
    no unit x has a positive margin.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    m, n = G.shape
    E = np.vstack([G.T, np.ones((1, m))])
    f = np.r_[np.zeros(n), 1.0]
    u, res = _nnls_checked(E, f)
    if res <= 1e-9:
        return -float(kappa), None
    r = E @ u - f
    x = -r[:n] / r[n]
    x /= np.linalg.norm(x)
    return float(np.min(G @ x)) - float(kappa), x


def _nnls_checked(E, f, tol=1e-9):
    """NNLS verified by its KKT conditions; falls back to bounded least squares.

    Some scipy releases return non-optimal Lawson-Hanson iterates (and a
    wrong residual) on badly scaled systems, which would silently flip a
    verdict, so the residual is recomputed and optimality is checked.
    """
    scale = tol * max(1.0, float(np.abs(E).max()))

    def kkt_ok(u):
        w = E.T @ (f - E @ u)
        support = u > 1e-10 * max(1.0, float(u.max()))
        return np.max(w) <= scale and np.all(np.abs(w[support]) <= scale)

    u, _ = nnls(E, f, maxiter=50 * max(E.shape))
    if not kkt_ok(u):
        u = lsq_linear(E, f, bounds=(0, np.inf), method="bvls", tol=1e-13).x
        if not kkt_ok(u):
            raise ArithmeticError("least-distance solve failed its optimality check")
    return u, float(np.linalg.norm(f - E @ u))


def _binary_feasible(inst, kappa_eq_tol=1e-9):
    n = inst.n
    if n > BINARY_MAX_N:
        raise SizeLimitExceeded(f"binary exhaustive search is capped at n={BINARY_MAX_N}")
    G = inst.G  # x = s / sqrt(n): compare G s with offsets scaled by sqrt(n)
    thr_ineq = -inst.b * np.sqrt(n)
    thr_eq = -inst.a * np.sqrt(n)
    low = min(n, 16)
    pats = 1.0 - 2.0 * ((np.arange(2 ** low)[:, None] >> np.arange(low)) & 1)
    base_low = pats @ G[:, :low].T  # (2^low, m)
    high = n - low
    hp = 1.0 - 2.0 * ((np.arange(2 ** high)[:, None] >> np.arange(high)) & 1) if high else np.zeros((1, 0))
    base_high = hp @ G[:, low:].T
    m1 = inst.m1
    for bh in base_high:
        v = base_low + bh
        ok = np.all(v[:, m1:] >= thr_ineq, axis=1)
        if m1:
            ok &= np.all(np.abs(v[:, :m1] - thr_eq) <= kappa_eq_tol * np.sqrt(n), axis=1)
        if ok.any():
            return True
    return False


def feasibility_check(instance, x_family):
    """True/False for feasible/infeasible, None for Unknown.

    Sphere: exact via the least-distance problem on the constraint rows; needs
    kappa >= 0 (otherwise the problem is non-convex and None is returned) and
    zero equality offsets. Binary corners x in {+-1/sqrt(n)}^n: exhaustive.
    """
    fam = XFamily(x_family)
    if fam is XFamily.BINARY:
        return _binary_feasible(instance)
    if fam is not XFamily.SPHERE:
        raise ValueError(f"no feasibility oracle for {fam.value}")
    if np.any(instance.b > 0):
        return None  # negative kappa: non-convex, refuse
    if np.any(instance.a != 0):
        raise ValueError("spherical check supports homogeneous equalities only")
    G2 = instance.G[instance.m1:]
    if instance.m1:
        N = null_space(instance.G[:instance.m1])
        if N.shape[1] == 0:
            return False
        G2 = G2 @ N
    if G2.shape[0] == 0:
        return True
    # rows scaled by the offsets would break homogeneity; kappa is common here
    kap = -instance.b
    if np.all(kap == 0):
        margin, _ = sphere_margin(G2, 0.0)
        return margin > FEAS_TOL
    if not np.allclose(kap, kap[0]):
        raise ValueError("spherical check supports a common kappa only")
    margin, _ = sphere_margin(G2, kap[0])
    return margin >= -FEAS_TOL


# -- transitions ------------------------------------------------------------

def wilson_interval(k, n, level=0.95):
    if n <= 0:
        raise ValueError("need at least one trial")
    z = norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class TransitionResult:
    alphas: list
    feasible: list
    trials: int
    intervals: list
    crossing: float
    monotone: bool
    family: str
    n: int
    kappa: float
    seed: int

    @property
    def frequencies(self):
        return [k / self.trials for k in self.feasible]

    def rows(self):
        """CSV rows (alpha, feasible_count, trials, wilson_lo, wilson_hi)."""
        return [(a, k, self.trials, lo, hi)
                for a, k, (lo, hi) in zip(self.alphas, self.feasible, self.intervals)]

    def to_dict(self):
        return {"alphas": self.alphas, "feasible": self.feasible, "trials": self.trials,
                "intervals": [list(i) for i in self.intervals], "crossing": self.crossing,
                "monotone": self.monotone, "family": self.family, "n": self.n,
                "kappa": self.kappa, "seed": self.seed}


def crossing_point(alphas, freqs, level=0.5):
    """Linear interpolation at the first pair that straddles ``level``."""
    for (a0, f0), (a1, f1) in zip(zip(alphas, freqs), zip(alphas[1:], freqs[1:])):
        if f0 >= level > f1:
            return a0 + (f0 - level) / (f0 - f1) * (a1 - a0)
    raise NoCrossing("feasibility frequencies do not straddle 0.5")


def empirical_transition(x_family, n, alpha_grid, trials, seed=0, kappa=0.0,
                         require_crossing=True):
    """Feasibility frequency per alpha with Wilson intervals and the 50% crossing.

    Trial t at grid point i uses the seed stream (seed, i, t), so results do
    not depend on evaluation order. With ``require_crossing=False`` a grid
    that never straddles 50% gives crossing = nan instead of NoCrossing.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials per grid point")
    fam = XFamily(x_family)
    alphas = [float(a) for a in alpha_grid]
    counts = []
    for i, alpha in enumerate(alphas):
        m = max(1, int(round(alpha * n)))
        k = 0
        for t in range(trials):
            G = stream(seed, i, t).standard_normal((m, n))
            inst = InstanceSample(G, 0, m, np.zeros(0), np.full(m, -float(kappa)), seed)
            verdict = feasibility_check(inst, fam)
            if verdict is None:
                raise ValueError("the oracle has no verdict for this configuration")
            k += bool(verdict)
        counts.append(k)
    ivs = [wilson_interval(k, trials) for k in counts]
    # a later point significantly above an earlier one breaks monotonicity
    monotone = all(ivs[j][0] <= ivs[i][1] for i in range(len(ivs)) for j in range(i + 1, len(ivs)))
    try:
        crossing = crossing_point(alphas, [k / trials for k in counts])
    except NoCrossing:
        if require_crossing:
            raise
        crossing = math.nan
    return TransitionResult(alphas, counts, trials, ivs, crossing, monotone, fam.value, n,
                            float(kappa), seed)


def exhaustive_primal(X, Y, G, g=None, f=None):
    """Exact min over x in X of max over y in Y of f(x) + y.G x + y.g."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] * Y.shape[0] > PRIMAL_MAX_PAIRS:
        raise SizeLimitExceeded(f"{X.shape[0]}x{Y.shape[0]} pairs exceed {PRIMAL_MAX_PAIRS}")
    G = np.atleast_2d(np.asarray(G, dtype=float))
    vals = Y @ G @ X.T  # (|Y|, |X|)
    if g is not None:
        vals = vals + (Y @ np.asarray(g, dtype=float))[:, None]
    inner = vals.max(axis=0)
    if f is not None:
        inner = inner + np.asarray(f, dtype=float)
    return float(inner.min())
