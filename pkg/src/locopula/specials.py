"""Self-contained special functions and numeric kernels.

Everything here is implemented from first principles (power series,
continued fractions, Gauss-Legendre panels) so the package carries no
dependency beyond numpy.  All functions accept scalars or arrays and are
pure, hence safe for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BracketError, DomainError

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Phi saturates to exactly 0/1 beyond this point to avoid log-domain NaNs.
NORM_TAIL_CUTOFF = 40.0


def _maybe_scalar(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes/weights on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if len(nodes) != self.order or len(weights) != self.order:
            raise DomainError("rule arrays must have length equal to order")
        if not np.all(np.diff(nodes) > 0):
            raise DomainError("nodes must be strictly increasing")
        if np.any(weights <= 0) or abs(weights.sum() - 2.0) > 1e-12:
            raise DomainError("weights must be positive and sum to 2")


@lru_cache(maxsize=None)
def gauss_legendre(order: int = 64) -> QuadratureRule:
    """Gauss-Legendre rule of the given order on (-1, 1)."""
    if order < 1:
        raise DomainError("order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(nodes=x, weights=w, order=order)


@dataclass(frozen=True)
class RootBracket:
    """An interval [lo, hi] with f changing sign between its endpoints."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError("bracket requires lo < hi")
        if self.f_lo * self.f_hi > 0:
            raise BracketError("f(lo) and f(hi) must not share a sign")


def brent_root(f, bracket: RootBracket, tol: float = 1e-10,
               max_iter: int = 200) -> float:
    """Brent's method with guaranteed bisection fallback.

    Terminates when |f(root)| <= tol or the bracket width falls below tol.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    a, b = bracket.lo, bracket.hi
    fa, fb = bracket.f_lo, bracket.f_hi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or abs(fb) <= tol:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b = b + (d if abs(d) > tol1 else math.copysign(tol1, xm))
        fb = f(b)
    return b


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

def _erfc_taylor(x):
    # erf(x) = 2/sqrt(pi) sum_n (-1)^n x^(2n+1)/(n! (2n+1)), for x <= 2.5
    term = x.copy()
    acc = x.copy()
    x2 = x * x
    for n in range(1, 75):
        term = term * (-x2) / n
        acc = acc + term / (2 * n + 1)
    return 1.0 - (2.0 / math.sqrt(math.pi)) * acc


def _erfc_cf(x):
    # Laplace continued fraction, x >= 2.5:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tiny = 1e-300
    b = x
    c = np.full_like(x, 1e308)
    d = 1.0 / np.where(b == 0, tiny, b)
    h = d.copy()
    for k in range(1, 120):
        d = 1.0 / (b + (k / 2.0) * d)
        c = b + (k / 2.0) / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-17):
            break
    return np.exp(-x * x) / math.sqrt(math.pi) * h


def _erfc(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    small = ax <= 2.5
    out = np.empty_like(ax)
    if np.any(small):
        out[small] = _erfc_taylor(ax[small])
    if np.any(~small):
        out[~small] = _erfc_cf(ax[~small])
    return np.where(x >= 0, out, 2.0 - out)


def std_norm_cdf(z):
    """Standard normal CDF; saturates to exact 0/1 for |z| > 40."""
    za = np.asarray(z, dtype=float)
    p = 0.5 * _erfc(-np.clip(za, -NORM_TAIL_CUTOFF, NORM_TAIL_CUTOFF) / SQRT2)
    p = np.where(za > NORM_TAIL_CUTOFF, 1.0, np.where(za < -NORM_TAIL_CUTOFF, 0.0, p))
    return _maybe_scalar(p, z)


def std_norm_pdf(z):
    """Standard normal density."""
    za = np.asarray(z, dtype=float)
    return _maybe_scalar(INV_SQRT_2PI * np.exp(-0.5 * za * za), z)


def std_norm_quantile(p):
    """Inverse standard normal CDF via Newton refinement of a rational guess."""
    pa = np.asarray(p, dtype=float)
    if np.any(~((pa > 0.0) & (pa < 1.0))):
        raise DomainError("std_norm_quantile requires 0 < p < 1")
    q = np.minimum(pa, 1.0 - pa)
    t = np.sqrt(-2.0 * np.log(q))
    z = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t * t)
    z = np.where(pa < 0.5, -z, z)
    for _ in range(12):
        step = (std_norm_cdf(np.atleast_1d(z)) - pa) / np.maximum(
            INV_SQRT_2PI * np.exp(-0.5 * z * z), 1e-300)
        z = z - step
        if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(z))):
            break
    return _maybe_scalar(z, p)


# ---------------------------------------------------------------------------
# log-gamma and the regularized incomplete beta
# ---------------------------------------------------------------------------

_LANCZOS = (
    0.99999999999980993, 676.5203681218851, -1259.1392167224028,
    771.32342877765313, -176.61502916214059, 12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
)


def log_gamma(x):
    """log Gamma(x) for x > 0 (Lanczos approximation, g = 7)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0.0):
        raise DomainError("log_gamma requires x > 0")
    refl = xa < 0.5
    xx = np.where(refl, 1.0 - xa, xa)
    a = np.full_like(xx, _LANCZOS[0])
    for i in range(1, 9):
        a = a + _LANCZOS[i] / (xx + i - 1.0)
    t = xx + 6.5
    out = 0.5 * math.log(2.0 * math.pi) + (xx - 0.5) * np.log(t) - t + np.log(a)
    if np.any(refl):
        out = np.where(refl, np.log(np.pi / np.abs(np.sin(np.pi * xa))) - out, out)
    return _maybe_scalar(out, x)


def _betacf(a, b, x):
    # continued fraction for the incomplete beta (modified Lentz); converged
    # elements are retired from the working set so stragglers do not force
    # full-array iterations
    a = a.reshape(-1).astype(float)
    b = b.reshape(-1).astype(float)
    x = x.reshape(-1).astype(float)
    out = np.empty_like(x)
    idx = np.arange(len(x))
    c = np.ones_like(x)
    d = 1.0 - (a + b) * x / (a + 1.0)
    d = 1.0 / np.where(np.abs(d) < 1e-300, 1e-300, d)
    h = d.copy()
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / np.where(np.abs(d) < 1e-300, 1e-300, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < 1e-300, 1e-300, c)
        h = h * d * c
        aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))
        d = 1.0 + aa * d
        d = 1.0 / np.where(np.abs(d) < 1e-300, 1e-300, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < 1e-300, 1e-300, c)
        delta = d * c
        h = h * delta
        done = np.abs(delta - 1.0) < 1e-15
        if np.any(done):
            out[idx[done]] = h[done]
            if np.all(done):
                return out
            keep = ~done
            idx, a, b, x = idx[keep], a[keep], b[keep], x[keep]
            c, d, h = c[keep], d[keep], h[keep]
    out[idx] = h
    return out


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b), vectorized over x."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    a, b, x = np.broadcast_arrays(a, b, x)
    x = np.clip(x, 0.0, 1.0)
    lbeta = log_gamma(a + b) - log_gamma(a) - log_gamma(b)
    interior = (x > 0.0) & (x < 1.0)
    lbt = np.where(interior,
                   lbeta + a * np.log(np.where(interior, x, 0.5))
                   + b * np.log1p(-np.where(interior, x, 0.5)),
                   -np.inf)
    bt = np.exp(lbt)
    direct = x < (a + 1.0) / (a + b + 2.0)
    xa = np.where(direct, x, 1.0 - x)
    aa = np.where(direct, a, b)
    bb = np.where(direct, b, a)
    cf = _betacf(aa, bb, xa).reshape(x.shape)
    res = bt * cf / aa
    res = np.where(direct, res, 1.0 - res)
    return np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, res))


# ---------------------------------------------------------------------------
# Student-t distribution
# ---------------------------------------------------------------------------

def _check_nu(nu):
    if np.ndim(nu) != 0 or not nu > 0:
        raise DomainError("nu must be a positive scalar")
    return float(nu)


def student_t_cdf(z, nu):
    """Student-t CDF via the incomplete beta relation."""
    nu = _check_nu(nu)
    za = np.asarray(z, dtype=float)
    x = nu / (nu + za * za)
    tail = 0.5 * betainc(0.5 * nu, 0.5, x)
    return _maybe_scalar(np.where(za >= 0, 1.0 - tail, tail), z)


def student_t_pdf(z, nu):
    """Student-t density."""
    nu = _check_nu(nu)
    za = np.asarray(z, dtype=float)
    lg = (log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu)
          - 0.5 * math.log(nu * math.pi))
    return _maybe_scalar(np.exp(lg - 0.5 * (nu + 1.0) * np.log1p(za * za / nu)), z)


def student_t_quantile(p, nu):
    """Inverse Student-t CDF via bracketed Newton iteration."""
    nu = _check_nu(nu)
    pa = np.asarray(p, dtype=float)
    if np.any(~((pa > 0.0) & (pa < 1.0))):
        raise DomainError("student_t_quantile requires 0 < p < 1")
    pw = np.atleast_1d(pa).astype(float)
    zn = np.atleast_1d(std_norm_quantile(pw))
    scale = math.sqrt(nu / (nu - 2.0)) if nu > 2.2 else 1.0
    z = zn * scale
    lo = -np.ones_like(z)
    hi = np.ones_like(z)
    for _ in range(1100):
        bad = student_t_cdf(lo, nu) - pw > 0
        if not np.any(bad):
            break
        lo = np.where(bad, lo * 2.0, lo)
    for _ in range(1100):
        bad = student_t_cdf(hi, nu) - pw < 0
        if not np.any(bad):
            break
        hi = np.where(bad, hi * 2.0, hi)
    z = np.clip(z, lo, hi)
    for _ in range(120):
        f = student_t_cdf(z, nu) - pw
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        zn = z - f / np.maximum(student_t_pdf(z, nu), 1e-300)
        off = ~np.isfinite(zn) | (zn <= lo) | (zn >= hi)
        zn = np.where(off, 0.5 * (lo + hi), zn)
        done = np.abs(zn - z) <= 1e-13 * (1.0 + np.abs(zn))
        z = zn
        if np.all(done):
            break
    return _maybe_scalar(z.reshape(np.shape(pa)), p)


# ---------------------------------------------------------------------------
# Debye function D1
# ---------------------------------------------------------------------------

_PI2_OVER_6 = math.pi * math.pi / 6.0


def debye1(x):
    """First Debye function D1(x) = (1/x) * integral_0^x t/(e^t - 1) dt.

    Gauss-Legendre on [0, x] for |x| <= 5, exponential-series tail formula
    beyond; absolute error well below 1e-10.  Negative arguments use
    D1(-x) = D1(x) + x/2.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa == 0.0) or np.any(~np.isfinite(xa)):
        raise DomainError("debye1 requires finite nonzero x")
    ax = np.atleast_1d(np.abs(xa)).astype(float)
    out = np.empty_like(ax)
    rule = gauss_legendre(64)
    small = ax <= 5.0
    if np.any(small):
        xs = ax[small]
        t = 0.5 * xs[:, None] * (rule.nodes[None, :] + 1.0)
        integrand = t / np.expm1(t)
        out[small] = 0.5 * integrand @ rule.weights
    if np.any(~small):
        xl = ax[~small]
        k = np.arange(1, 41)[None, :]
        tail = np.exp(-k * xl[:, None]) * (xl[:, None] / k + 1.0 / (k * k))
        out[~small] = (_PI2_OVER_6 - tail.sum(axis=1)) / xl
    out = np.where(np.atleast_1d(xa) < 0, out + ax / 2.0, out)
    return _maybe_scalar(out.reshape(np.shape(xa)), x)


# ---------------------------------------------------------------------------
# bivariate normal / Student-t CDFs (conditional-decomposition quadrature)
# ---------------------------------------------------------------------------

_PANEL_RULE_N = 24

# dyadic panel offsets measured leftward from z1
_NORMAL_OFFSETS = np.array(
    [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 34.0, 46.0])
_HEAVY_OFFSETS = np.concatenate(
    [[0.0, 0.25, 0.5, 1.0], 2.0 ** np.arange(1, 35, dtype=float)])


def _panel_quad(z1, offsets, integrand):
    """Integrate integrand(s) over s in (-inf, z1] on translated dyadic panels.

    z1 is an array of lane anchors; returns one value per lane plus the
    per-lane left edge (for the analytic tail correction).
    """
    edges = z1[:, None] - offsets[None, :]
    a = edges[:, 1:]
    b = edges[:, :-1]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    rule = gauss_legendre(_PANEL_RULE_N)
    s = mid[:, :, None] + half[:, :, None] * rule.nodes[None, None, :]
    vals = integrand(s.reshape(-1)).reshape(s.shape)
    per_panel = (vals * rule.weights[None, None, :]).sum(axis=2) * half
    return per_panel.sum(axis=1), edges[:, -1]


def _bvn_core(z1, z2, rho):
    # requires z1 <= 0, z2 <= 0 lane-wise; scalar rho
    rr = math.sqrt((1.0 - rho) * (1.0 + rho))

    out = np.zeros_like(z1)
    live = z1 > -NORM_TAIL_CUTOFF
    if not np.any(live):
        return out
    zz1 = z1[live]
    zz2 = z2[live]
    n = len(zz1)

    def integrand(s):
        ss = s.reshape(n, -1)
        cond = std_norm_cdf((zz2[:, None] - rho * ss) / rr)
        return (cond * INV_SQRT_2PI * np.exp(-0.5 * ss * ss)).reshape(-1)

    total, _ = _panel_quad(zz1, _NORMAL_OFFSETS, lambda s: integrand(s))
    out[live] = total
    return out


def _bvt_core(z1, z2, rho, nu):
    # requires z1 <= 0, z2 <= 0 lane-wise; scalar rho, nu
    rr = math.sqrt((1.0 - rho) * (1.0 + rho))
    n = len(z1)

    def cond_cdf(s_flat):
        ss = s_flat.reshape(n, -1)
        sig = np.sqrt((nu + ss * ss) / (nu + 1.0)) * rr
        return student_t_cdf((z2[:, None] - rho * ss) / sig, nu + 1.0)

    def integrand(s_flat):
        cond = cond_cdf(s_flat).reshape(n, -1)
        ss = s_flat.reshape(n, -1)
        return (cond * student_t_pdf(ss, nu)).reshape(-1)

    total, left = _panel_quad(z1, _HEAVY_OFFSETS, integrand)
    # conditional CDF flattens to a constant as s -> -inf
    lim = student_t_cdf(rho * math.sqrt(nu + 1.0) / rr, nu + 1.0)
    total = total + lim * student_t_cdf(left, nu)
    return total


def _bivar_cdf(z1, z2, rho, marg_cdf, core):
    # reduce every point to a core evaluation with both coordinates <= 0
    z1b, z2b = np.broadcast_arrays(np.asarray(z1, dtype=float),
                                   np.asarray(z2, dtype=float))
    shape = z1b.shape
    a = z1b.reshape(-1).astype(float)
    b = z2b.reshape(-1).astype(float)
    out = np.empty_like(a)

    inf1 = np.isposinf(a)
    inf2 = np.isposinf(b)
    if np.any(inf1):
        out[inf1] = marg_cdf(np.where(inf2[inf1], 0.0, b[inf1]))
        out[inf1 & inf2] = 1.0
    if np.any(inf2 & ~inf1):
        out[inf2 & ~inf1] = marg_cdf(a[inf2 & ~inf1])
    rest = ~(inf1 | inf2)

    p1 = a > 0
    p2 = b > 0
    m = (~p1) & (~p2) & rest
    if np.any(m):
        out[m] = core(a[m], b[m], rho)
    m = (~p1) & p2 & rest
    if np.any(m):
        out[m] = marg_cdf(a[m]) - core(a[m], -b[m], -rho)
    m = p1 & (~p2) & rest
    if np.any(m):
        out[m] = marg_cdf(b[m]) - core(-a[m], b[m], -rho)
    m = p1 & p2 & rest
    if np.any(m):
        # survival symmetry of centrally symmetric elliptical pairs
        out[m] = marg_cdf(a[m]) + marg_cdf(b[m]) - 1.0 + core(-a[m], -b[m], rho)
    return np.clip(out, 0.0, 1.0).reshape(shape)


def bivariate_normal_cdf(z1, z2, rho):
    """P(Z1 <= z1, Z2 <= z2) for standard bivariate normal with correlation rho.

    One-dimensional Gauss-Legendre panels of the conditional decomposition
    integral Phi((z2 - rho*s)/sqrt(1-rho^2)) phi(s) ds; absolute error < 1e-12.
    """
    if np.ndim(rho) != 0 or not abs(rho) < 1.0:
        raise DomainError("bivariate_normal_cdf requires |rho| < 1")
    rho = float(rho)
    if abs(rho) < 1e-14:
        out = np.asarray(std_norm_cdf(z1)) * np.asarray(std_norm_cdf(z2))
        return _maybe_scalar(out, z1, z2)
    out = _bivar_cdf(z1, z2, rho, lambda z: np.asarray(std_norm_cdf(z)), _bvn_core)
    return _maybe_scalar(out, z1, z2)


def bivariate_t_cdf(z1, z2, rho, nu):
    """P(T1 <= z1, T2 <= z2) for a standard bivariate Student-t.

    Same conditional-decomposition quadrature as the normal case with a
    t(nu+1) conditional and an analytic far-tail correction.
    """
    if np.ndim(rho) != 0 or not abs(rho) < 1.0:
        raise DomainError("bivariate_t_cdf requires |rho| < 1")
    nu = _check_nu(nu)
    rho = float(rho)
    out = _bivar_cdf(z1, z2, rho,
                     lambda z: np.asarray(student_t_cdf(z, nu)),
                     lambda a, b, r: _bvt_core(a, b, r, nu))
    return _maybe_scalar(out, z1, z2)
