"""Nested Monte Carlo estimate of the ground-state functional at finite n.

The innermost noisy level is importance sampled. The proposal is the
per-coordinate tilt by the linearized exponent (the same kernels the
separable path integrates), which factorizes over coordinates and is sampled
exactly; the estimator stays unbiased for the inner expectation because the
correction factor e^{c sqrt(n) (D - D_lin)} is evaluated on the true D.
Without this, e^{c sqrt(n) D} is dominated by large deviations and plain
sampling is useless beyond n ~ 10.

Outer noisy levels are sampled plainly with log-mean-exp reduction.
Adjacent interior levels with equal exponents are merged (the power ratio is
1, so the two expectations combine) and zero-noise levels are dropped.
"""
import numpy as np
from scipy.special import logsumexp

from .._rng import stream
from ..errors import ExponentUnderflow
from ..lifting import noise_coefficients, validate_params
from ..sets import XFamily, XSet, YSet, max_over_y_values, min_over_x_values
from .ground import DualEvaluation, optimal_aux, x_kernel, y_kernels


def effective_levels(params):
    """Reduced level list [(sigma_h, sigma_u, c), ...] ordered inner to outer.

    The last entry is the outer level r+1 with exponent 0.
    """
    co = noise_coefficients(params)
    r = params.r
    if params.is_limit:
        return [(float(np.sqrt(np.sum(co.cc[1:] ** 2))), float(np.sqrt(np.sum(co.b[1:] ** 2))), 0.0)]
    out = []
    for k in range(2, r + 1):
        sh, su, ck = float(co.cc[k - 1]), float(co.b[k - 1]), float(params.c[k])
        if sh == 0.0 and su == 0.0:
            continue
        if out and out[-1][2] == ck:
            ph, pu, _ = out[-1]
            out[-1] = (float(np.hypot(ph, sh)), float(np.hypot(pu, su)), ck)
        else:
            out.append((sh, su, ck))
    out.append((float(co.cc[r]), float(co.b[r]), 0.0))
    return out


def _logmeanexp(a, axis=0):
    return logsumexp(a, axis=axis) - np.log(a.shape[axis])


class _Sampler:
    def __init__(self, model, n, aux, x, y):
        self.model = model.sized(n)
        self.n, self.m = n, self.model.y_set.m
        self.m1 = self.model.y_set.m1
        self.xr, self.yr = x * model.x_set.radius, y * model.y_set.radius
        self.xs = XSet(model.x_set.family, n, self.xr, model.x_set.k)
        ys = self.model.y_set
        self.ys = YSet(ys.family, ys.m1, ys.m2, self.yr, ys.g)
        self.sphere = model.x_set.family is XFamily.SPHERE
        self.aux = aux
        self.kx = x_kernel(model, aux.gamma_x, self.xr, self.yr)
        self.kfree, self.kcone = y_kernels(model, aux.gamma_y, self.xr, self.yr)

    def sqrt_n_D(self, H, U):
        d = -(min_over_x_values(self.xs, self.yr * H) + max_over_y_values(self.ys, self.xr * U))
        return np.sqrt(self.n) * d

    def lin_const(self):
        g = 0.5 * self.n * (self.aux.gamma_x if self.sphere else 0.0)
        return g - 0.5 * self.n * self.aux.gamma_y

    def sqrt_n_D_lin(self, H, U):
        s = self.kx.value(H).sum(-1) + self.lin_const()
        s = s + self.kfree.value(U[..., :self.m1]).sum(-1)
        return s + self.kcone.value(U[..., self.m1:]).sum(-1)

    def log_z_lin(self, mu_h, mu_u, sh, su, c):
        tot = c * self.lin_const()
        for kern, mu in ((self.kx, mu_h), (self.kfree, mu_u[:self.m1]),
                         (self.kcone, mu_u[self.m1:])):
            if mu.size:
                tot += np.sum(kern.log_mgf(mu, sh if kern is self.kx else su, c))
                tot += mu.size * kern.offset(sh if kern is self.kx else su, c)
        return tot

    def tilted(self, mu_h, mu_u, sh, su, c, count, rng):
        zh = self.kx.sample_tilted(np.broadcast_to(mu_h, (count, self.n)), sh, c, rng)
        zf = self.kfree.sample_tilted(np.broadcast_to(mu_u[:self.m1], (count, self.m1)), su, c, rng)
        zc = self.kcone.sample_tilted(np.broadcast_to(mu_u[self.m1:], (count, self.m - self.m1)),
                                      su, c, rng)
        return mu_h + sh * zh, mu_u + su * np.concatenate([zf, zc], axis=-1)


def _log_zeta(smp, levels, j, mu_h, mu_u, counts, rng):
    """log of the nested expectation through effective level j (0 = innermost)."""
    sh, su, c = levels[j]
    if j == 0:
        H, U = smp.tilted(mu_h, mu_u, sh, su, c, counts[0], rng)
        corr = c * (smp.sqrt_n_D(H, U) - smp.sqrt_n_D_lin(H, U))
        return smp.log_z_lin(mu_h, mu_u, sh, su, c) + _logmeanexp(corr)
    vals = np.empty(counts[j])
    ratio = c / levels[j - 1][2]
    for i in range(counts[j]):
        h = mu_h + sh * rng.standard_normal(smp.n)
        u = mu_u + su * rng.standard_normal(smp.m)
        vals[i] = ratio * _log_zeta(smp, levels, j - 1, h, u, counts, rng)
    if not np.all(np.isfinite(vals)):
        raise ExponentUnderflow(f"non-finite log moment at effective level {j}")
    return _logmeanexp(vals)


def psi_s_inf_mc(model, params, n, samples_per_level=(200, 200), seed=0, aux=None,
                 x=1.0, y=1.0):
    """Monte Carlo estimate of the nested functional at dimension n.

    ``samples_per_level`` lists counts from the outermost level inward; the
    last entry is reused for any deeper level. ``aux`` only shapes the
    importance proposal and defaults to the stationary values.
    """
    validate_params(params, allow_limit=True)
    if n < 2:
        raise ValueError("n must be at least 2")
    levels = effective_levels(params)
    inner, (sh_o, su_o, _) = levels[:-1], levels[-1]
    counts_outer = int(samples_per_level[0])
    per = list(samples_per_level[1:]) or [200]
    counts = [int(per[min(i, len(per) - 1)]) for i in range(len(inner))][::-1]
    if aux is None:
        aux = optimal_aux(model, params, x, y)
    smp = _Sampler(model, n, aux, x, y)
    vals = np.empty(counts_outer)
    for o in range(counts_outer):
        rng = stream(seed, o)
        h = sh_o * rng.standard_normal(n)
        u = su_o * rng.standard_normal(smp.m)
        if not inner:
            vals[o] = smp.sqrt_n_D(h, u) / n
            continue
        lz = _log_zeta(smp, inner, len(inner) - 1, h, u, counts, rng)
        if not np.isfinite(lz):
            raise ExponentUnderflow("inner expectation underflowed")
        vals[o] = lz / (n * inner[-1][2])
    se = float(vals.std(ddof=1) / np.sqrt(counts_outer)) if counts_outer > 1 else float("inf")
    total = counts_outer * int(np.prod(counts)) if counts else counts_outer
    return DualEvaluation(float(vals.mean()), se, "monte_carlo", total, seed,
                          {"n": n, "levels": len(levels)})
