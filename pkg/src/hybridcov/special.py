"""Numerical kernels: Lambert W (principal branch), adaptive Gauss-Kronrod
quadrature on finite and semi-infinite intervals, and gamma-series helpers.

Integrands are evaluated on whole node arrays at once, so ``f`` must accept a
1-d numpy array.  ``integrate`` also accepts vector-valued integrands returning
an array of shape ``(..., len(x))``; the tolerance then applies per component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_E = math.exp(-1.0)


# ---------------------------------------------------------------- Lambert W

def _halley(w, x, iters=60):
    for _ in range(iters):
        ew = np.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = np.where(np.isfinite(denom) & (denom != 0), f / denom, 0.0)
        w_new = np.maximum(w - step, -1.0)
        if np.all(np.abs(w_new - w) <= 4e-16 * (1.0 + np.abs(w_new))):
            return w_new
        w = w_new
    return w


def _bisect_w(x, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = mid * np.exp(mid) > x
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def lambert_w0(x):
    """Principal branch W0 of the Lambert W function for real ``x >= -1/e``.

    Halley iteration seeded by a branch-point series near -1/e and by the
    asymptotic ``log x - log log x`` for large x; any point that fails the
    residual check is finished by bisection.
    """
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(np.isnan(xa)):
        raise ValueError("lambert_w0 got NaN")
    if np.any(xa < -INV_E - 1e-15):
        raise ValueError("lambert_w0 is only real for x >= -1/e")
    xa = np.maximum(xa, -INV_E)

    w = np.empty_like(xa)
    near = xa < -0.25
    mid = (~near) & (xa < 3.0)
    big = xa >= 3.0
    p = np.sqrt(np.maximum(2.0 * (math.e * xa[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    w[mid] = np.log1p(xa[mid]) * (1.0 - np.log1p(np.log1p(xa[mid])) / (2.0 + np.log1p(xa[mid])))
    l1 = np.log(xa[big])
    l2 = np.log(l1)
    w[big] = l1 - l2 + l2 / l1

    w = _halley(w, xa)
    w[xa == -INV_E] = -1.0
    inf = np.isinf(xa)
    w[inf] = np.inf

    resid = np.abs(w * np.exp(w) - xa)
    bad = ~inf & ~(resid <= 1e-12 * np.maximum(1.0, np.abs(xa)))
    if np.any(bad):
        xb = xa[bad]
        hi = np.maximum(1.0, np.log1p(np.maximum(xb, 0.0)) + 1.0)
        w[bad] = _bisect_w(xb, np.full_like(xb, -1.0), hi)
    return float(w[0]) if scalar else w


def lambert_w0_exp(log_x):
    """W0(exp(log_x)) without forming exp(log_x); safe for huge arguments."""
    L = np.asarray(log_x, dtype=float)
    scalar = L.ndim == 0
    L = np.atleast_1d(L)
    out = np.empty_like(L)
    small = L < 600.0
    if np.any(small):
        out[small] = lambert_w0(np.exp(L[small]))
    if np.any(~small):
        Lb = L[~small]
        w = Lb - np.log(Lb)
        for _ in range(50):
            g = w + np.log(w) - Lb
            w_new = w - g / (1.0 + 1.0 / w)
            if np.all(np.abs(w_new - w) <= 1e-15 * w_new):
                w = w_new
                break
            w = w_new
        out[~small] = w
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_subdivisions >= 1):
            raise ValueError("tolerances must be positive and max_subdivisions >= 1")


DEFAULT_QUAD = QuadratureSpec()


class IntegrationError(RuntimeError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


# Gauss-Kronrod 7/15 abscissae on [-1, 1] (positive half, Kronrod ordering)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_gauss_idx = np.array([1, 3, 5, 7, 9, 11, 13])
WG = np.concatenate([_WG[:-1], _WG[::-1]])


def _panel(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    y = np.asarray(f(c + h * NODES), dtype=float)
    k = h * (y @ WK)
    g = h * (y[..., _gauss_idx] @ WG)
    return k, np.abs(k - g)


def integrate(f, a, b, spec: QuadratureSpec = DEFAULT_QUAD, breakpoints=()):
    """Adaptive G7-K15 integral of ``f`` over ``[a, b]``.

    Converges when, per component, the summed error estimate is at most
    ``max(abs_tol, rel_tol * |result|)``.  Raises :class:`IntegrationError`
    (carrying the partial estimate) after ``max_subdivisions`` bisections.
    """
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError("integrate requires a <= b")
    edges = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            k, e = _panel(f, lo, hi)
            panels.append([lo, hi, k, e])
    if not panels:
        y = np.asarray(f(np.array([a])), dtype=float)
        zero = np.zeros(y.shape[:-1])
        return float(zero) if zero.ndim == 0 else zero

    splits = 0
    while True:
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(err <= tol):
            break
        if splits >= spec.max_subdivisions:
            raise IntegrationError(
                f"no convergence after {splits} subdivisions", total, err)
        scores = [np.max(p[3] / tol) for p in panels]
        i = int(np.argmax(scores))
        lo, hi, _, _ = panels[i]
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # interval exhausted at double precision; accept what we have
            break
        k1, e1 = _panel(f, lo, mid)
        k2, e2 = _panel(f, mid, hi)
        panels[i] = [lo, mid, k1, e1]
        panels.insert(i + 1, [mid, hi, k2, e2])
        splits += 1
    total = sum(p[2] for p in panels)
    return float(total) if np.ndim(total) == 0 else total


def integrate_semi_infinite(f, a, spec: QuadratureSpec = DEFAULT_QUAD, scale=1.0):
    """Integral of ``f`` over ``[a, inf)`` via ``x = a + scale * t / (1 - t)``."""
    a = float(a)

    def g(t):
        one_minus = 1.0 - t
        x = a + scale * t / one_minus
        return np.asarray(f(x), dtype=float) * (scale / one_minus ** 2)

    return integrate(g, 0.0, 1.0, spec)


# ---------------------------------------------------------------- gamma series

def eta(shape: int) -> float:
    """Alzer constant ``shape * (shape!)^(-1/shape)`` for the gamma CDF bound."""
    if shape < 1:
        raise ValueError("shape must be >= 1")
    return shape * math.exp(-math.lgamma(shape + 1) / shape)


def binomial(n: int, k: int) -> int:
    if not (0 <= k <= n <= 64):
        raise ValueError(f"binomial({n}, {k}) outside 0 <= k <= n <= 64")
    return math.comb(n, k)
