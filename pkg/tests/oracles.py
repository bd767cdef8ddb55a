"""Independent reference implementations used only by the tests.

Nothing here imports from ``sapaug``: each oracle reaches its answer by a
different route (quadrature, enumeration, direct formula evaluation).
"""
import math

import numpy as np
from scipy.special import xlog1py, xlogy


def adaptive_simpson(f, a, b, tol=1e-13, n_init=64, max_depth=48):
    """Adaptive Simpson quadrature of a vectorized ``f`` on ``[a, b]``.

    All pending sub-intervals are refined together, so each pass is a handful
    of numpy calls rather than one Python call per panel.
    """
    if b <= a:
        return 0.0
    edges = np.linspace(a, b, n_init + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    eps = np.full(lo.shape, tol / n_init)
    total = 0.0
    for depth in range(max_depth + 1):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * eps
        if depth == max_depth:
            done[:] = True
        total += float(np.sum((left + right + delta / 15.0)[done]))
        keep = ~done
        if not keep.any():
            break
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        flo, fmid, fhi, flm, frm = flo[keep], fmid[keep], fhi[keep], flm[keep], frm[keep]
        left, right, eps = left[keep], right[keep], eps[keep]
        lm, rm = lm[keep], rm[keep]
        # children: [lo, mid] with midpoint lm, and [mid, hi] with midpoint rm
        lo, mid, hi = np.concatenate([lo, mid]), np.concatenate([lm, rm]), np.concatenate([mid, hi])
        flo, fmid, fhi = (
            np.concatenate([flo, fmid]),
            np.concatenate([flm, frm]),
            np.concatenate([fmid, fhi]),
        )
        whole = np.concatenate([left, right])
        eps = np.maximum(np.concatenate([eps, eps]) / 2.0, 1e-20)
    return total


def beta_cdf_quadrature(alpha, beta, x, tol=1e-13):
    """``I_x(alpha, beta)`` by quadrature of ``t^(alpha-1) (1-t)^(beta-1) / B``.

    The integral is split at 1/2. A shape below one puts an integrable
    singularity at that end; it is removed by substituting ``u = t^alpha``
    (or ``w = (1-t)^beta`` on the upper half).
    """
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_norm = math.lgamma(alpha) + math.lgamma(beta) - math.lgamma(alpha + beta)

    def half(p, q, upper):
        # integral over t in [0, upper] of t^(p-1) (1-t)^(q-1) / B, upper <= 0.5
        if p < 1.0:
            def g(u):
                t = u ** (1.0 / p)
                return np.exp((q - 1.0) * np.log1p(-t) - log_norm) / p
            return adaptive_simpson(g, 0.0, upper**p, tol)

        def g(t):
            return np.exp(xlogy(p - 1.0, t) + xlog1py(q - 1.0, -t) - log_norm)
        return adaptive_simpson(g, 0.0, upper, tol)

    if x <= 0.5:
        return half(alpha, beta, x)
    # I_x(a, b) = P(t <= 1/2) + P(1/2 < t <= x); the second term in v = 1 - t
    return half(alpha, beta, 0.5) + (half(beta, alpha, 0.5) - half(beta, alpha, 1.0 - x))


def beta_cdf_integer(alpha, beta, x):
    """Exact CDF for integer shapes via the binomial-sum identity."""
    n = alpha + beta - 1
    return sum(math.comb(n, j) * x**j * (1 - x) ** (n - j) for j in range(alpha, n + 1))


def time_stretch_indices(T, rho):
    """Enumerate source indices of the stretched sequence one by one."""
    out = []
    i = 0
    while i <= math.floor((1.0 + rho) * T) - 1:
        out.append(math.floor(i / (1.0 + rho)))
        i += 1
    return out
