"""The five parametric bivariate copula families.

Provides CDFs, log-densities, conditional distributions (h-functions) and
their inverses, canonical link functions between the unconstrained
calibration scale and the dependence parameter, and Kendall-tau
conversions.  Family coding: 1=Gaussian, 2=Student-t, 3=Clayton,
4=Gumbel, 5=Frank.

Inputs on the unit square are clamped to [UNIT_EPS, 1 - UNIT_EPS] so that
pseudo-observations at machine boundaries never produce infinities.
Everything is vectorized over observations and, where noted, over the
dependence parameter as well (one theta per observation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DomainError
from .specials import (
    bivariate_normal_cdf,
    bivariate_t_cdf,
    debye1,
    std_norm_cdf,
    std_norm_quantile,
    student_t_cdf,
    student_t_quantile,
    log_gamma,
)

UNIT_EPS = 1e-10

# |theta| below this is treated as the (removable) independence limit of the
# Frank family, which the identity link cannot avoid crossing.
FRANK_INDEP_TOL = 1e-8

# tanh saturates to exactly +-1 in double precision near |eta| = 19; keep the
# Gaussian/Student-t parameter strictly inside (-1, 1)
_RHO_CAP = 1.0 - 1e-15
_ETA_CAP = 690.0


class Family(IntEnum):
    GAUSSIAN = 1
    STUDENT_T = 2
    CLAYTON = 3
    GUMBEL = 4
    FRANK = 5


_FAMILY_NAMES = {
    "gaussian": Family.GAUSSIAN,
    "t": Family.STUDENT_T,
    "student-t": Family.STUDENT_T,
    "student_t": Family.STUDENT_T,
    "clayton": Family.CLAYTON,
    "gumbel": Family.GUMBEL,
    "frank": Family.FRANK,
}


def parse_family(value) -> Family:
    """Coerce a family code (1-5) or name to a Family."""
    if isinstance(value, Family):
        return value
    if isinstance(value, str):
        name = value.strip().lower()
        if name in _FAMILY_NAMES:
            return _FAMILY_NAMES[name]
        if name.isdigit():
            value = int(name)
        else:
            raise DomainError(f"unknown copula family {value!r}")
    try:
        return Family(int(value))
    except ValueError:
        raise DomainError(f"unknown copula family code {value!r}") from None


@dataclass(frozen=True)
class CopulaParams:
    """Dependence parameter theta plus optional degrees of freedom nu."""

    theta: float
    nu: float | None = None

    def validate(self, family) -> "CopulaParams":
        family = parse_family(family)
        validate_theta(family, self.theta, self.nu)
        return self


def clamp_unit(u):
    """Clamp values into the open unit interval used throughout."""
    ua = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(ua)) or np.any(ua < 0.0) or np.any(ua > 1.0):
        raise DomainError("unit-square inputs must lie in [0, 1]")
    return np.clip(ua, UNIT_EPS, 1.0 - UNIT_EPS)


def validate_theta(family, theta, nu=None):
    family = parse_family(family)
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)):
        raise DomainError("theta must be finite")
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        if np.any(np.abs(th) >= 1.0):
            raise DomainError("Gaussian/Student-t require |theta| < 1")
    elif family == Family.CLAYTON:
        if np.any(th <= 0.0):
            raise DomainError("Clayton requires theta > 0")
    elif family == Family.GUMBEL:
        if np.any(th < 1.0):
            raise DomainError("Gumbel requires theta >= 1")
    elif family == Family.FRANK:
        if np.any(th == 0.0):
            raise DomainError("Frank requires theta != 0")
    if family == Family.STUDENT_T:
        if nu is None or np.ndim(nu) != 0 or not nu > 0:
            raise DomainError("Student-t requires a positive scalar nu")


# ---------------------------------------------------------------------------
# link functions and Kendall-tau conversions (Table-style canonical choices)
# ---------------------------------------------------------------------------

def eta_to_par(family, eta):
    """Map the unconstrained calibration value eta into the parameter space."""
    family = parse_family(family)
    ea = np.asarray(eta, dtype=float)
    if np.any(~np.isfinite(ea)):
        raise DomainError("eta must be finite")
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        out = np.clip(np.tanh(ea), -_RHO_CAP, _RHO_CAP)
    elif family == Family.CLAYTON:
        out = np.exp(np.clip(ea, -_ETA_CAP, _ETA_CAP))
    elif family == Family.GUMBEL:
        out = np.exp(np.clip(ea, -_ETA_CAP, _ETA_CAP)) + 1.0
    else:
        out = ea + 0.0
    return _scalar_like(out, eta)


def par_to_eta(family, theta):
    """Inverse of eta_to_par; theta must lie strictly inside the open range."""
    family = parse_family(family)
    th = np.asarray(theta, dtype=float)
    validate_theta(family, th, nu=1.0 if family == Family.STUDENT_T else None)
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        out = np.arctanh(th)
    elif family == Family.CLAYTON:
        out = np.log(th)
    elif family == Family.GUMBEL:
        if np.any(th <= 1.0):
            raise DomainError("Gumbel link inverse requires theta > 1")
        out = np.log(th - 1.0)
    else:
        out = th + 0.0
    return _scalar_like(out, theta)


def inv_link_deriv(family, theta):
    """d theta / d eta expressed through theta (exact chain-rule factor)."""
    family = parse_family(family)
    th = np.asarray(theta, dtype=float)
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        return (1.0 - th) * (1.0 + th)
    if family == Family.CLAYTON:
        return th
    if family == Family.GUMBEL:
        return th - 1.0
    return np.ones_like(th)


def par_to_tau(family, theta):
    """Kendall's tau as a function of the dependence parameter."""
    family = parse_family(family)
    th = np.asarray(theta, dtype=float)
    validate_theta(family, th, nu=1.0 if family == Family.STUDENT_T else None)
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        out = 2.0 / math.pi * np.arcsin(th)
    elif family == Family.CLAYTON:
        out = th / (th + 2.0)
    elif family == Family.GUMBEL:
        out = 1.0 - 1.0 / th
    else:
        out = np.empty_like(th, dtype=float)
        tiny = np.abs(th) < 1e-5
        if np.any(tiny):
            out[tiny] = th[tiny] / 9.0
        if np.any(~tiny):
            tt = th[~tiny]
            out[~tiny] = 1.0 - (4.0 / tt) * (1.0 - np.asarray(debye1(tt)))
    return _scalar_like(out, theta)


_TAU_RANGE = {
    Family.GAUSSIAN: (-1.0, 1.0),
    Family.STUDENT_T: (-1.0, 1.0),
    Family.CLAYTON: (0.0, 1.0),
    Family.GUMBEL: (0.0, 1.0),
    Family.FRANK: (-1.0, 1.0),
}


def tau_to_par(family, tau):
    """Invert the tau map; tau must lie in the family's attainable range."""
    family = parse_family(family)
    ta = np.asarray(tau, dtype=float)
    lo, hi = _TAU_RANGE[family]
    if np.any(~np.isfinite(ta)) or np.any(ta <= lo) or np.any(ta >= hi):
        raise DomainError(f"tau outside attainable range ({lo}, {hi})")
    if family == Family.FRANK and np.any(ta == 0.0):
        raise DomainError("Frank tau must be nonzero")
    if family in (Family.GAUSSIAN, Family.STUDENT_T):
        out = np.sin(0.5 * math.pi * ta)
    elif family == Family.CLAYTON:
        out = 2.0 * ta / (1.0 - ta)
    elif family == Family.GUMBEL:
        out = 1.0 / (1.0 - ta)
    else:
        out = np.array([_frank_tau_inv(t) for t in np.atleast_1d(ta)])
        out = out.reshape(np.shape(ta))
    return _scalar_like(out, tau)


def _frank_tau_inv(tau):
    from .specials import RootBracket, brent_root

    sign = 1.0 if tau > 0 else -1.0
    t = abs(tau)
    if t < 1e-7:
        return sign * 9.0 * t
    lo = 1e-9
    hi = max(9.0 * t, 1.0)
    for _ in range(600):
        if par_to_tau(Family.FRANK, hi) >= t or hi > 1e300:
            break
        hi *= 2.0
    f = lambda th: par_to_tau(Family.FRANK, th) - t
    root = brent_root(f, RootBracket(lo, hi, f(lo), f(hi)), tol=1e-12)
    return sign * root


def _scalar_like(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


# ---------------------------------------------------------------------------
# per-family log-density kernels (vectorized over observations AND theta)
# ---------------------------------------------------------------------------

def prepare_loglik_inputs(family, u, v, nu=None):
    """Precompute per-observation transforms reused across theta evaluations."""
    family = parse_family(family)
    uc = clamp_unit(u)
    vc = clamp_unit(v)
    uc, vc = np.broadcast_arrays(np.atleast_1d(uc), np.atleast_1d(vc))
    if family == Family.GAUSSIAN:
        z1 = np.asarray(std_norm_quantile(uc))
        z2 = np.asarray(std_norm_quantile(vc))
        return (z1, z2)
    if family == Family.STUDENT_T:
        z1 = np.asarray(student_t_quantile(uc, nu))
        z2 = np.asarray(student_t_quantile(vc, nu))
        return (z1, z2, np.log1p(z1 * z1 / nu), np.log1p(z2 * z2 / nu))
    if family == Family.CLAYTON:
        return (np.log(uc), np.log(vc))
    if family == Family.GUMBEL:
        lu, lv = np.log(uc), np.log(vc)
        return (np.log(-lu), np.log(-lv), lu, lv)
    return (uc, vc)


def loglik_terms(family, prep, theta, nu=None, need_score=False):
    """Log-density values (and optionally d/d theta) at per-observation theta.

    theta broadcasts against the prepared observation arrays.  No domain
    validation happens here: callers on the optimizer path guarantee theta
    comes from eta_to_par.
    """
    family = parse_family(family)
    th = np.asarray(theta, dtype=float)
    if family == Family.GAUSSIAN:
        return _gaussian_terms(prep, th, need_score)
    if family == Family.STUDENT_T:
        return _student_terms(prep, th, float(nu), need_score)
    if family == Family.CLAYTON:
        return _clayton_terms(prep, th, need_score)
    if family == Family.GUMBEL:
        return _gumbel_terms(prep, th, need_score)
    return _frank_terms(prep, th, need_score)


def _gaussian_terms(prep, th, need_score):
    z1, z2 = prep
    r = (1.0 - th) * (1.0 + th)
    s = z1 * z1 + z2 * z2
    m = z1 * z2
    logc = -0.5 * np.log(r) - (th * th * s - 2.0 * th * m) / (2.0 * r)
    if not need_score:
        return logc, None
    dlogc = (th * r - th * s + m * (1.0 + th * th)) / (r * r)
    return logc, dlogc


def _student_terms(prep, th, nu, need_score):
    z1, z2, l1, l2 = prep
    r = (1.0 - th) * (1.0 + th)
    m = z1 * z2
    Q = z1 * z1 - 2.0 * th * m + z2 * z2
    const = (log_gamma(0.5 * (nu + 2.0)) + log_gamma(0.5 * nu)
             - 2.0 * log_gamma(0.5 * (nu + 1.0)))
    logc = (const - 0.5 * np.log(r) - 0.5 * (nu + 2.0) * np.log1p(Q / (nu * r))
            + 0.5 * (nu + 1.0) * (l1 + l2))
    if not need_score:
        return logc, None
    dlogc = (nu + 2.0) * (nu * th + m) / (nu * r + Q) - (nu + 1.0) * th / r
    return logc, dlogc


def _clayton_terms(prep, th, need_score):
    lu, lv = prep
    a = -th * lu
    b = -th * lv
    M = np.maximum(a, b)
    ea = np.exp(a - M)
    eb = np.exp(b - M)
    em = np.exp(-M)
    lS = np.where(M <= 30.0,
                  np.log1p(np.expm1(np.minimum(a, 30.0)) + np.expm1(np.minimum(b, 30.0))),
                  M + np.log(ea + eb - em))
    logc = np.log1p(th) - (th + 1.0) * (lu + lv) - (2.0 + 1.0 / th) * lS
    if not need_score:
        return logc, None
    SpS = -(ea * lu + eb * lv) / (ea + eb - em)
    dlogc = (1.0 / (1.0 + th) - (lu + lv) + lS / (th * th)
             - (2.0 + 1.0 / th) * SpS)
    return logc, dlogc


def _gumbel_terms(prep, th, need_score):
    la, lb, lu, lv = prep
    lS = np.logaddexp(th * la, th * lb)
    T = np.exp(lS / th)
    logc = (-T + (th - 1.0) * (la + lb) - (lu + lv)
            + (1.0 / th - 2.0) * lS + np.log(T + th - 1.0))
    if not need_score:
        return logc, None
    w1 = 1.0 / (1.0 + np.exp(np.clip(th * (lb - la), -700.0, 700.0)))
    SpS = w1 * la + (1.0 - w1) * lb
    dT = T * (SpS / th - lS / (th * th))
    dlogc = (-dT + (la + lb) - lS / (th * th) + (1.0 / th - 2.0) * SpS
             + (dT + 1.0) / (T + th - 1.0))
    return logc, dlogc


def _frank_terms(prep, th, need_score):
    u, v = prep
    u, v, th = np.broadcast_arrays(u, v, th)
    logc = np.empty(th.shape, dtype=float)
    dlogc = np.empty(th.shape, dtype=float) if need_score else None

    s1 = 0.5 * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
    tiny = np.abs(th) < FRANK_INDEP_TOL
    if np.any(tiny):
        logc[tiny] = th[tiny] * s1[tiny]
        if need_score:
            dlogc[tiny] = s1[tiny]

    neg = (th < 0) & ~tiny
    if np.any(neg):
        lc, dc = _frank_terms_pos(1.0 - u[neg], v[neg], -th[neg], need_score)
        logc[neg] = lc
        if need_score:
            dlogc[neg] = -dc

    pos = (th > 0) & ~tiny
    if np.any(pos):
        lc, dc = _frank_terms_pos(u[pos], v[pos], th[pos], need_score)
        logc[pos] = lc
        if need_score:
            dlogc[pos] = dc
    return logc, dlogc


def _frank_terms_pos(u, v, th, need_score):
    # theta > 0 strictly; direct expm1 forms for moderate theta, a factored
    # log form beyond (the direct D cancels catastrophically for large theta)
    big = th > 15.0
    lnD = np.empty_like(th)
    DpD = np.empty_like(th) if need_score else None
    if np.any(~big):
        tm, um, vm = th[~big], u[~big], v[~big]
        E = -np.expm1(-tm)
        D = E - np.expm1(-tm * um) * np.expm1(-tm * vm)
        lnD[~big] = np.log(D)
        if need_score:
            dD = (np.exp(-tm) + (um + vm) * np.exp(-tm * (um + vm))
                  - um * np.exp(-tm * um) - vm * np.exp(-tm * vm))
            DpD[~big] = dD / D
    if np.any(big):
        tb, ub, vb = th[big], u[big], v[big]
        mn = np.minimum(ub, vb)
        mx = np.maximum(ub, vb)
        d = mx - mn
        G = 1.0 + np.exp(-tb * d) - np.exp(-tb * mx) - np.exp(-tb * (1.0 - mn))
        lnD[big] = -tb * mn + np.log(G)
        if need_score:
            # numerator of D'/D scaled by exp(theta*mn)
            num = (np.exp(-tb * (1.0 - mn)) + (ub + vb) * np.exp(-tb * mx)
                   - ub * np.exp(-tb * (ub - mn)) - vb * np.exp(-tb * (vb - mn)))
            DpD[big] = num / G
    E_all = -np.expm1(-th)
    logc = np.log(th) + np.log(E_all) - th * (u + v) - 2.0 * lnD
    if not need_score:
        return logc, None
    dlogc = 1.0 / th + np.exp(-th) / E_all - (u + v) - 2.0 * DpD
    return logc, dlogc


# ---------------------------------------------------------------------------
# public copula surface: cdf, log_pdf, h-function and inverse
# ---------------------------------------------------------------------------

def cdf(family, u, v, theta, nu=None):
    """Copula CDF C(u, v | theta, nu)."""
    family = parse_family(family)
    validate_theta(family, theta, nu)
    uc = clamp_unit(u)
    vc = clamp_unit(v)
    th = np.asarray(theta, dtype=float)
    if family == Family.GAUSSIAN:
        if np.ndim(th) != 0:
            raise DomainError("elliptical cdf requires scalar theta")
        out = bivariate_normal_cdf(np.asarray(std_norm_quantile(uc)),
                                   np.asarray(std_norm_quantile(vc)), float(th))
    elif family == Family.STUDENT_T:
        if np.ndim(th) != 0:
            raise DomainError("elliptical cdf requires scalar theta")
        out = bivariate_t_cdf(np.asarray(student_t_quantile(uc, nu)),
                              np.asarray(student_t_quantile(vc, nu)),
                              float(th), nu)
    elif family == Family.CLAYTON:
        a = -th * np.log(uc)
        b = -th * np.log(vc)
        M = np.maximum(a, b)
        lS = np.where(M <= 30.0,
                      np.log1p(np.expm1(np.minimum(a, 30.0))
                               + np.expm1(np.minimum(b, 30.0))),
                      np.logaddexp(a, b))
        out = np.exp(-lS / th)
    elif family == Family.GUMBEL:
        la = np.log(-np.log(uc))
        lb = np.log(-np.log(vc))
        out = np.exp(-np.exp(np.logaddexp(th * la, th * lb) / th))
    else:
        out = _frank_cdf(uc, vc, th)
    return _scalar_like(out, u, v, theta)


def _frank_cdf(u, v, th):
    u, v, th = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float),
                                   np.asarray(th, float))
    out = np.empty_like(th)
    neg = th < 0
    if np.any(neg):
        # (1-U, V) has parameter -theta
        out[neg] = v[neg] - _frank_cdf_pos(1.0 - u[neg], v[neg], -th[neg])
    if np.any(~neg):
        out[~neg] = _frank_cdf_pos(u[~neg], v[~neg], th[~neg])
    return out


def _frank_cdf_pos(u, v, th):
    big = th > 15.0
    out = np.empty_like(th)
    if np.any(~big):
        tm, um, vm = th[~big], u[~big], v[~big]
        E = -np.expm1(-tm)
        ratio = np.expm1(-tm * um) * np.expm1(-tm * vm) / E
        out[~big] = -np.log1p(-ratio) / tm
    if np.any(big):
        tb, ub, vb = th[big], u[big], v[big]
        mn = np.minimum(ub, vb)
        mx = np.maximum(ub, vb)
        G = (1.0 + np.exp(-tb * (mx - mn)) - np.exp(-tb * mx)
             - np.exp(-tb * (1.0 - mn)))
        lnE = np.log1p(-np.exp(-tb))
        out[big] = mn - (np.log(G) - lnE) / tb
    return out


def log_pdf(family, u, v, theta, nu=None):
    """Copula log-density log c(u, v | theta, nu)."""
    family = parse_family(family)
    validate_theta(family, theta, nu)
    prep = prepare_loglik_inputs(family, u, v, nu)
    logc, _ = loglik_terms(family, prep, theta, nu)
    return _scalar_like(logc, u, v, theta)


def h_fun(family, v, u, theta, nu=None):
    """Conditional distribution h(v | u) = dC/du at the clamped arguments."""
    family = parse_family(family)
    validate_theta(family, theta, nu)
    uc = clamp_unit(u)
    vc = clamp_unit(v)
    uc, vc = np.broadcast_arrays(np.atleast_1d(uc), np.atleast_1d(vc))
    th = np.asarray(theta, dtype=float)
    out = _h_fun_raw(family, vc, uc, th, nu)
    return _scalar_like(np.clip(out, 0.0, 1.0), v, u, theta)


def _h_fun_raw(family, v, u, th, nu):
    if family == Family.GAUSSIAN:
        z1 = np.asarray(std_norm_quantile(u))
        z2 = np.asarray(std_norm_quantile(v))
        rr = np.sqrt((1.0 - th) * (1.0 + th))
        return np.asarray(std_norm_cdf((z2 - th * z1) / rr))
    if family == Family.STUDENT_T:
        z1 = np.asarray(student_t_quantile(u, nu))
        z2 = np.asarray(student_t_quantile(v, nu))
        sig = np.sqrt((nu + z1 * z1) * (1.0 - th) * (1.0 + th) / (nu + 1.0))
        return np.asarray(student_t_cdf((z2 - th * z1) / sig, nu + 1.0))
    if family == Family.CLAYTON:
        lu, lv = np.log(u), np.log(v)
        a = -th * lu
        b = -th * lv
        M = np.maximum(a, b)
        lS = np.where(M <= 30.0,
                      np.log1p(np.expm1(np.minimum(a, 30.0))
                               + np.expm1(np.minimum(b, 30.0))),
                      np.logaddexp(a, b))
        return np.exp(-(th + 1.0) * lu - (1.0 + 1.0 / th) * lS)
    if family == Family.GUMBEL:
        la = np.log(-np.log(u))
        lb = np.log(-np.log(v))
        lS = np.logaddexp(th * la, th * lb)
        T = np.exp(lS / th)
        return np.exp(-T + (th - 1.0) * la + (1.0 / th - 1.0) * lS - np.log(u))
    return _frank_h(v, u, th)


def _frank_h(v, u, th):
    v, u, th = np.broadcast_arrays(v, u, np.asarray(th, float))
    out = np.empty_like(th)
    tiny = np.abs(th) < FRANK_INDEP_TOL
    out[tiny] = v[tiny]
    neg = (th < 0) & ~tiny
    if np.any(neg):
        out[neg] = _frank_h_pos(v[neg], 1.0 - u[neg], -th[neg])
    pos = (th > 0) & ~tiny
    if np.any(pos):
        out[pos] = _frank_h_pos(v[pos], u[pos], th[pos])
    return out


def _frank_h_pos(v, u, th):
    # h = e^{-theta u} Ev / D; same moderate/large split as the density
    big = th > 15.0
    out = np.empty_like(th)
    if np.any(~big):
        tm, um, vm = th[~big], u[~big], v[~big]
        E = -np.expm1(-tm)
        Ev = -np.expm1(-tm * vm)
        D = E - np.expm1(-tm * um) * np.expm1(-tm * vm)
        out[~big] = np.exp(-tm * um) * Ev / D
    if np.any(big):
        tb, ub, vb = th[big], u[big], v[big]
        mn = np.minimum(ub, vb)
        mx = np.maximum(ub, vb)
        G = (1.0 + np.exp(-tb * (mx - mn)) - np.exp(-tb * mx)
             - np.exp(-tb * (1.0 - mn)))
        Ev = -np.expm1(-tb * vb)
        # log h = -theta(u - mn) + log Ev - log G
        out[big] = np.exp(-tb * (ub - mn)) * Ev / G
    return out


def h_inv(family, p, u, theta, nu=None):
    """Inverse of h_fun in its first argument: v with h(v | u) = p."""
    family = parse_family(family)
    validate_theta(family, theta, nu)
    pa = np.asarray(p, dtype=float)
    if np.any(~((pa > 0.0) & (pa < 1.0))):
        raise DomainError("h_inv requires 0 < p < 1")
    uc = clamp_unit(u)
    pa, uc = np.broadcast_arrays(np.atleast_1d(pa), np.atleast_1d(uc))
    th = np.asarray(theta, dtype=float)
    out = _h_inv_raw(family, pa, uc, th, nu)
    out = np.clip(out, UNIT_EPS, 1.0 - UNIT_EPS)
    return _scalar_like(out, p, u, theta)


def _h_inv_raw(family, p, u, th, nu):
    if family == Family.GAUSSIAN:
        z1 = np.asarray(std_norm_quantile(u))
        q = np.asarray(std_norm_quantile(p))
        rr = np.sqrt((1.0 - th) * (1.0 + th))
        return np.asarray(std_norm_cdf(q * rr + th * z1))
    if family == Family.STUDENT_T:
        z1 = np.asarray(student_t_quantile(u, nu))
        q = np.asarray(student_t_quantile(p, nu + 1.0))
        sig = np.sqrt((nu + z1 * z1) * (1.0 - th) * (1.0 + th) / (nu + 1.0))
        return np.asarray(student_t_cdf(q * sig + th * z1, nu))
    if family == Family.CLAYTON:
        return _clayton_h_inv(p, u, th)
    if family == Family.GUMBEL:
        return _gumbel_h_inv(p, u, th)
    return _frank_h_inv(p, u, th)


def _clayton_h_inv(p, u, th):
    p, u, th = np.broadcast_arrays(p, u, np.asarray(th, float))
    lu = np.log(u)
    lp = np.log(p)
    A = -th * lu - th * lp / (1.0 + th)
    # v = (e^A - e^B + 1)^(-1/th) with B = -th*lu; e^A - e^B = e^B expm1(A - B)
    big = A > 30.0
    out = np.empty_like(A)
    if np.any(~big):
        Am, Bm = A[~big], (-th * lu)[~big]
        diff = np.exp(Bm) * np.expm1(Am - Bm)
        out[~big] = np.exp(-np.log1p(diff) / th[~big])
    if np.any(big):
        Ab = A[big]
        Bb = (-th * lu)[big]
        L = Ab + np.log1p(np.exp(-Ab) - np.exp(Bb - Ab))
        out[big] = np.exp(-L / th[big])
    return out


def _frank_h_inv(p, u, th):
    p, u, th = np.broadcast_arrays(p, u, np.asarray(th, float))
    out = np.empty_like(th)
    tiny = np.abs(th) < FRANK_INDEP_TOL
    out[tiny] = p[tiny]
    neg = (th < 0) & ~tiny
    if np.any(neg):
        out[neg] = _frank_h_inv_pos(p[neg], 1.0 - u[neg], -th[neg])
    pos = (th > 0) & ~tiny
    if np.any(pos):
        out[pos] = _frank_h_inv_pos(p[pos], u[pos], th[pos])
    return out


def _frank_h_inv_pos(p, u, th):
    big = th > 15.0
    out = np.empty_like(th)
    if np.any(~big):
        tm, um, pm = th[~big], u[~big], p[~big]
        E = -np.expm1(-tm)
        Eu = -np.expm1(-tm * um)
        Ev = pm * E / (pm * Eu + np.exp(-tm * um))
        out[~big] = -np.log1p(-Ev) / tm
    if np.any(big):
        tb, ub, pb = th[big], u[big], p[big]
        Eu = -np.expm1(-tb * ub)
        # log(1 - Ev) = -theta*u + log((1-p) + p e^{-theta(1-u)}) - log(p Eu + e^{-theta u})
        log1mEv = (-tb * ub + np.log((1.0 - pb) + pb * np.exp(-tb * (1.0 - ub)))
                   - np.log(pb * Eu + np.exp(-tb * ub)))
        out[big] = -log1mEv / tb
    return out


def _gumbel_h_inv(p, u, th):
    # no closed form: bracketed Newton on v (the derivative of h in v is the
    # copula density, available in closed form)
    p, u, th = np.broadcast_arrays(p, u, np.asarray(th, float))
    la = np.log(-np.log(u))
    lu = np.log(u)
    lo = np.full_like(p, 1e-13)
    hi = np.full_like(p, 1.0 - 1e-13)
    v = np.full_like(p, 0.5)
    for it in range(200):
        lb = np.log(-np.log(v))
        lS = np.logaddexp(th * la, th * lb)
        T = np.exp(lS / th)
        h = np.exp(-T + (th - 1.0) * la + (1.0 / th - 1.0) * lS - lu)
        f = h - p
        lo = np.where(f < 0, v, lo)
        hi = np.where(f > 0, v, hi)
        lv = np.log(v)
        logc = (-T + (th - 1.0) * (la + lb) - (lu + lv)
                + (1.0 / th - 2.0) * lS + np.log(T + th - 1.0))
        vn = v - f * np.exp(-logc)
        bad = ~np.isfinite(vn) | (vn <= lo) | (vn >= hi)
        vn = np.where(bad, 0.5 * (lo + hi), vn)
        done = np.abs(vn - v) <= 1e-14 * (1.0 + np.abs(vn))
        v = vn
        if it > 4 and np.all(done):
            break
    return v
