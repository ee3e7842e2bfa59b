"""Per-coordinate exponent kernels and nested Gaussian expectations.

A kernel is a scalar function f of one coordinate of a Gaussian field
v = mu + sigma z. The nested functional

    F = E_{z_{r+1}} (1/c_r) log E_{z_r} ( ... (E_{z_2} e^{c_2 f(v)})^{c_3/c_2} ... )^{c_r/c_{r-1}}

with v = sum_k sigma_k z_k factorizes over coordinates, so the dual only ever
needs F for a handful of kernels. The innermost expectation is closed form
for every kernel here; outer levels use Gauss-Hermite nodes in log space.
"""
from functools import lru_cache

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr
from scipy.stats import truncnorm

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


@lru_cache(maxsize=32)
def gauss_hermite(n):
    """Nodes and log-weights for E over a standard normal."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return np.sqrt(2.0) * x, np.log(w / np.sqrt(np.pi))


def _trunc_normal(lo, hi, rng):
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    return truncnorm.rvs(lo, hi, random_state=rng)


def _choose(logw_a, logw_b, rng):
    """Bernoulli draw picking component a with probability w_a/(w_a+w_b)."""
    prob_a = np.exp(logw_a - np.logaddexp(logw_a, logw_b))
    return rng.random(np.shape(prob_a)) < prob_a


class AbsKernel:
    """f(v) = amp * |v|."""

    def __init__(self, amp):
        self.amp = float(amp)

    def value(self, v):
        return self.amp * np.abs(v)

    def offset(self, sigma, c):
        # the Gaussian shift c^2 amp^2 sigma^2 / 2 pulled out of log E e^{c f}
        return 0.5 * (c * self.amp * sigma) ** 2

    def log_mgf(self, mu, sigma, c):
        """log E e^{c f(mu + sigma z)} minus ``offset(sigma, c)``."""
        lam = c * self.amp
        mu = np.asarray(mu, dtype=float)
        if sigma == 0.0:
            return lam * np.abs(mu)
        t = mu / sigma
        return np.logaddexp(lam * mu + log_ndtr(t + lam * sigma),
                            -lam * mu + log_ndtr(-t + lam * sigma))

    def mean(self, mu, sigma):
        mu = np.asarray(mu, dtype=float)
        if sigma == 0.0:
            return self.amp * np.abs(mu)
        t = mu / sigma
        return self.amp * (sigma * SQRT_2_OVER_PI * np.exp(-0.5 * t * t)
                           + mu * (1.0 - 2.0 * ndtr(-t)))

    def sample_tilted(self, mu, sigma, c, rng):
        """Draw z with density proportional to phi(z) e^{c f(mu + sigma z)}."""
        lam = c * self.amp
        mu = np.asarray(mu, dtype=float)
        if sigma == 0.0:
            return np.zeros(mu.shape)
        t = mu / sigma
        ls = lam * sigma
        pos = _choose(lam * mu + log_ndtr(t + ls), -lam * mu + log_ndtr(-t + ls), rng)
        zp = ls + _trunc_normal(-t - ls, np.inf, rng)
        zn = -ls + _trunc_normal(-np.inf, -t + ls, rng)
        return np.where(pos, zp, zn)


class ReluQuadKernel:
    """f(v) = -(w/2) * max(scale*v + shift, 0)^2 with w >= 0."""

    def __init__(self, w, scale=1.0, shift=0.0):
        self.w, self.scale, self.shift = float(w), float(scale), float(shift)

    def value(self, v):
        return -0.5 * self.w * np.maximum(self.scale * v + self.shift, 0.0) ** 2

    def offset(self, sigma, c):
        return 0.0

    def log_mgf(self, mu, sigma, c):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        s = self.scale * sigma
        t = c * self.w
        if s == 0.0:
            return -0.5 * t * np.maximum(a, 0.0) ** 2
        s2 = 1.0 + t * s * s
        return np.logaddexp(log_ndtr(-a / s),
                            -0.5 * np.log(s2) - 0.5 * t * a * a / s2
                            + log_ndtr(a / (s * np.sqrt(s2))))

    def mean(self, mu, sigma):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        s = self.scale * sigma
        if s == 0.0:
            return -0.5 * self.w * np.maximum(a, 0.0) ** 2
        u = a / s
        m2 = (a * a + s * s) * ndtr(u) + a * s * np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
        return -0.5 * self.w * m2

    def sample_tilted(self, mu, sigma, c, rng):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        s = self.scale * sigma
        if s == 0.0:
            return np.zeros(a.shape)
        t = c * self.w
        s2 = 1.0 + t * s * s
        edge = -a / s
        # below the kink the weight is flat, above it is a narrower Gaussian
        low = _choose(log_ndtr(edge),
                      -0.5 * np.log(s2) - 0.5 * t * a * a / s2 + log_ndtr(a / (s * np.sqrt(s2))),
                      rng)
        z_low = _trunc_normal(-np.inf, edge, rng)
        sd = 1.0 / np.sqrt(s2)
        m = -t * s * a / s2
        z_high = m + sd * _trunc_normal((edge - m) / sd, np.inf, rng)
        return np.where(low, z_low, z_high)


class QuadKernel:
    """f(v) = (w/2) * (scale*v + shift)^2, any sign of w."""

    def __init__(self, w, scale=1.0, shift=0.0):
        self.w, self.scale, self.shift = float(w), float(scale), float(shift)

    def value(self, v):
        return 0.5 * self.w * (self.scale * v + self.shift) ** 2

    def offset(self, sigma, c):
        return 0.0

    def log_mgf(self, mu, sigma, c):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        s = self.scale * sigma
        A = c * self.w
        d = 1.0 - A * s * s
        if d <= 0.0:
            return np.full(a.shape, np.inf)
        return -0.5 * np.log(d) + 0.5 * A * a * a / d

    def mean(self, mu, sigma):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        return 0.5 * self.w * (a * a + (self.scale * sigma) ** 2)

    def nested_exact(self, sig, c):
        """Closed form of the whole nested functional (Gaussian all the way)."""
        A = c[0] * self.w
        const = 0.0
        for k, sk in enumerate(sig[:-1]):
            if k:
                ratio = c[k] / c[k - 1]
                A *= ratio
                const *= ratio
            s2 = (self.scale * sk) ** 2
            d = 1.0 - A * s2
            if d <= 0.0:
                return np.inf
            const -= 0.5 * np.log(d)
            A /= d
        outer = self.shift ** 2 + (self.scale * sig[-1]) ** 2
        return (const + 0.5 * A * outer) / c[-1]

    def sample_tilted(self, mu, sigma, c, rng):
        a = self.scale * np.asarray(mu, dtype=float) + self.shift
        s = self.scale * sigma
        A = c * self.w
        d = 1.0 - A * s * s
        return A * s * a / d + rng.standard_normal(a.shape) / np.sqrt(d)


def nested(kernel, sig, c, nodes=60):
    """Nested per-coordinate functional F for ``kernel``.

    ``sig`` holds the field standard deviations of levels 2..r+1 and ``c``
    the exponents c_2..c_r. Returns ``(shift, rest)`` with F = shift + rest;
    ``shift`` is the analytic Gaussian offset of the innermost level divided
    by c_2, kept apart so callers can cancel it against other terms exactly.
    With no positive exponent the functional is the plain mean.
    """
    sig = np.asarray(sig, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.size == 0 or np.all(c == 0.0):
        return 0.0, float(kernel.mean(0.0, float(np.sqrt(np.sum(sig ** 2)))))
    if hasattr(kernel, "nested_exact"):
        return 0.0, float(kernel.nested_exact(sig, c))
    r = sig.size
    z, logw = gauss_hermite(nodes)
    grids = []
    for k in range(r - 1, 0, -1):  # levels r+1 down to 3, one axis each
        if sig[k] == 0.0:
            grids.append((np.zeros(1), np.zeros(1)))
        else:
            grids.append((sig[k] * z, logw))
    mu = np.zeros([g[0].size for g in grids])
    for ax, (pts, _) in enumerate(grids):
        shape = [1] * len(grids)
        shape[ax] = pts.size
        mu = mu + pts.reshape(shape)
    L = kernel.log_mgf(mu, float(sig[0]), float(c[0]))
    for k in range(1, r - 1):  # levels 3..r
        _, lw = grids[-1]
        grids.pop()
        L = logsumexp(c[k] / c[k - 1] * L + lw, axis=-1)
    _, lw = grids[0]
    rest = float(np.sum(np.exp(lw) * L) / c[-1])
    return kernel.offset(float(sig[0]), float(c[0])) / c[0], rest
