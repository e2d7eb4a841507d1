"""Local polynomial likelihood fitting of the calibration function.

At each grid point x0 the kernel-weighted log-likelihood

    l(beta) = sum_i w_i * log c(u_i, v_i | g^{-1}(x_i^T beta), nu),
    x_i = (1, x_i - x0, ..., (x_i - x0)^p),  w_i = K((x_i - x0)/h)

is maximized over beta by a dense BFGS ascent with Armijo backtracking,
using the analytic score.  The fitted calibration value is beta[0].
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWindowError, DomainError
from .families import (
    Family,
    clamp_unit,
    eta_to_par,
    inv_link_deriv,
    loglik_terms,
    par_to_eta,
    par_to_tau,
    parse_family,
    prepare_loglik_inputs,
    tau_to_par,
    validate_theta,
)
from .kernels import KernelSpec, local_weights
from .simulate import empirical_tau


@dataclass(frozen=True)
class Dataset:
    """Aligned pseudo-observations (u1, u2) and covariate values x."""

    u1: np.ndarray
    u2: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        u1 = clamp_unit(self.u1)
        u2 = clamp_unit(self.u2)
        x = np.asarray(self.x, dtype=float)
        if u1.ndim != 1 or u2.ndim != 1 or x.ndim != 1:
            raise DomainError("dataset columns must be one-dimensional")
        if not (len(u1) == len(u2) == len(x)) or len(x) < 1:
            raise DomainError("dataset columns must share a positive length")
        if np.any(~np.isfinite(x)):
            raise DomainError("covariate values must be finite")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return len(self.x)

    def without(self, i: int) -> "Dataset":
        keep = np.arange(self.n) != i
        return Dataset(self.u1[keep], self.u2[keep], self.x[keep])


@dataclass(frozen=True)
class FitConfig:
    """Family, kernel, polynomial degree and optimizer settings."""

    family: Family
    nu: float | None = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    degree: int = 1
    opt_tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        if not 0 <= int(self.degree) <= 4:
            raise DomainError("degree must lie in 0..4")
        object.__setattr__(self, "degree", int(self.degree))
        if self.family == Family.STUDENT_T:
            nu = 4.0 if self.nu is None else float(self.nu)
            if not nu > 0:
                raise DomainError("nu must be positive")
            object.__setattr__(self, "nu", nu)
        if not self.opt_tol > 0:
            raise DomainError("opt_tol must be positive")
        if not self.max_iter >= 1:
            raise DomainError("max_iter must be positive")


@dataclass(frozen=True)
class LocalFitPoint:
    x0: float
    beta: np.ndarray
    eta: float
    converged: bool
    n_iter: int
    grad_norm: float


@dataclass(frozen=True)
class LocalFitCurve:
    points: tuple
    family: Family
    nu: float | None
    kernel: KernelSpec
    degree: int

    @property
    def x0(self) -> np.ndarray:
        return np.array([p.x0 for p in self.points])

    @property
    def eta(self) -> np.ndarray:
        return np.array([p.eta for p in self.points])


def design_row(xi, x0, degree):
    """Row (1, xi-x0, ..., (xi-x0)^degree) of the local design."""
    if degree < 0:
        raise DomainError("degree must be nonnegative")
    d = float(xi) - float(x0)
    return np.array([d ** k for k in range(degree + 1)])


class _PointProblem:
    """Weighted local likelihood at one x0, on the truncated active window."""

    def __init__(self, data: Dataset, x0: float, cfg: FitConfig, prepared=None):
        self.cfg = cfg
        w = local_weights(data.x, x0, cfg.kernel)
        active = w > 0.0
        self.n_active = int(active.sum())
        self.w = w[active]
        d = data.x[active] - x0
        self.X = np.vander(d, cfg.degree + 1, increasing=True)
        if prepared is None:
            prepared = prepare_loglik_inputs(cfg.family, data.u1, data.u2, cfg.nu)
        self.prep = tuple(arr[active] for arr in prepared)

    def value(self, beta):
        return self.value_and_grad(beta, need_score=False)[0]

    def value_and_grad(self, beta, need_score=True):
        eta = self.X @ np.asarray(beta, dtype=float)
        theta = eta_to_par(self.cfg.family, eta)
        logc, dlogc = loglik_terms(self.cfg.family, self.prep, theta,
                                   self.cfg.nu, need_score=need_score)
        ll = float(np.dot(self.w, logc))
        if not need_score:
            return ll, None
        if not np.isfinite(ll):
            return -np.inf, np.zeros(self.X.shape[1])
        chain = self.w * dlogc * inv_link_deriv(self.cfg.family, theta)
        return ll, self.X.T @ chain


def local_loglik(beta, data: Dataset, x0, cfg: FitConfig):
    """The kernel-weighted local log-likelihood at beta."""
    beta = np.asarray(beta, dtype=float)
    if len(beta) != cfg.degree + 1:
        raise DomainError("beta must have degree+1 entries")
    return _PointProblem(data, x0, cfg).value(beta)


def local_score(beta, data: Dataset, x0, cfg: FitConfig):
    """Gradient of local_loglik with respect to beta (analytic)."""
    beta = np.asarray(beta, dtype=float)
    if len(beta) != cfg.degree + 1:
        raise DomainError("beta must have degree+1 entries")
    return _PointProblem(data, x0, cfg).value_and_grad(beta)[1]


def _maximize_bfgs(problem, beta0, tol, max_iter, trace=None):
    """Quasi-Newton ascent with Armijo backtracking; honest convergence flag."""
    x = np.asarray(beta0, dtype=float).copy()
    f, g = problem.value_and_grad(x)
    if not np.isfinite(f):
        return x, False, 0, np.inf
    if trace is not None:
        trace.append(f)
    n = len(x)
    H = np.eye(n)
    n_iter = 0
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            return x, True, n_iter, gnorm
        d = H @ g  # ascent direction
        slope = float(d @ g)
        if slope <= 0 or not np.all(np.isfinite(d)):
            H = np.eye(n)
            d = g.copy()
            slope = float(g @ g)
        alpha = 1.0
        accepted = False
        while alpha > 1e-14:
            xn = x + alpha * d
            fn, gn = problem.value_and_grad(xn)
            if np.isfinite(fn) and fn >= f + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        if np.isfinite(sy) and -sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            # BFGS update for the maximization problem (y has flipped sign)
            rho = -1.0 / sy
            I = np.eye(n)
            V = I + rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, f, g = xn, fn, gn
        n_iter += 1
        if trace is not None:
            trace.append(f)
    gnorm = float(np.max(np.abs(g)))
    return x, gnorm <= tol, n_iter, gnorm


_TAU_CAP = 0.95
_TAU_FLOOR_POSITIVE = 0.05   # Clayton/Gumbel
_TAU_FLOOR_FRANK = 0.01


def initial_eta(family, tau_emp) -> float:
    """Family-consistent starting value from a clamped empirical Kendall tau."""
    family = parse_family(family)
    tau = float(np.clip(tau_emp, -_TAU_CAP, _TAU_CAP))
    if family in (Family.CLAYTON, Family.GUMBEL):
        tau = max(tau, _TAU_FLOOR_POSITIVE)
    elif family == Family.FRANK and abs(tau) < _TAU_FLOOR_FRANK:
        tau = _TAU_FLOOR_FRANK if tau >= 0 else -_TAU_FLOOR_FRANK
    return float(par_to_eta(family, tau_to_par(family, tau)))


def _default_init(data: Dataset, cfg: FitConfig):
    beta = np.zeros(cfg.degree + 1)
    beta[0] = initial_eta(cfg.family, empirical_tau(data.u1, data.u2))
    return beta


def fit_point(data: Dataset, x0, cfg: FitConfig, init=None,
              prepared=None, trace=None) -> LocalFitPoint:
    """Maximize the local likelihood at a single x0.

    Raises DegenerateWindowError when the truncated window holds fewer than
    degree+1 observations.  Non-convergence within max_iter is reported via
    the converged flag, not an exception.
    """
    problem = _PointProblem(data, x0, cfg, prepared=prepared)
    if problem.n_active < cfg.degree + 1:
        raise DegenerateWindowError(
            f"effective sample {problem.n_active} at x0={x0} cannot identify "
            f"{cfg.degree + 1} coefficients")
    if init is None:
        beta0 = _default_init(data, cfg)
    else:
        beta0 = np.asarray(init, dtype=float)
        if len(beta0) != cfg.degree + 1:
            raise DomainError("init must have degree+1 entries")
    beta, converged, n_iter, gnorm = _maximize_bfgs(
        problem, beta0, cfg.opt_tol, cfg.max_iter, trace=trace)
    return LocalFitPoint(x0=float(x0), beta=beta, eta=float(beta[0]),
                         converged=converged, n_iter=n_iter, grad_norm=gnorm)


def _failed_point(x0, width) -> LocalFitPoint:
    return LocalFitPoint(x0=float(x0), beta=np.full(width, np.nan),
                         eta=float("nan"), converged=False, n_iter=0,
                         grad_norm=float("inf"))


def fit_curve(data: Dataset, x0_grid, cfg: FitConfig,
              init_strategy: str = "global", n_workers: int | None = None) -> LocalFitCurve:
    """Fit the calibration curve over an increasing grid of x0 values.

    init_strategy "global" starts every point from the same whole-sample
    initializer and may evaluate grid points concurrently; results are
    independent of worker count.  "warm" sweeps the sorted grid
    sequentially, reusing each solution as the next starting value.
    Per-point degenerate windows become non-converged NaN points.
    """
    grid = np.asarray(x0_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("x0 grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("x0 grid must be strictly increasing")
    if init_strategy not in ("global", "warm"):
        raise DomainError("init_strategy must be 'global' or 'warm'")
    width = cfg.degree + 1
    prepared = prepare_loglik_inputs(cfg.family, data.u1, data.u2, cfg.nu)
    beta0 = _default_init(data, cfg)

    def solve(x0, init):
        try:
            return fit_point(data, x0, cfg, init=init, prepared=prepared)
        except DegenerateWindowError:
            return _failed_point(x0, width)

    if init_strategy == "warm":
        points = []
        init = beta0
        for x0 in grid:
            pt = solve(x0, init)
            points.append(pt)
            if np.all(np.isfinite(pt.beta)):
                init = pt.beta
        return LocalFitCurve(points=tuple(points), family=cfg.family,
                             nu=cfg.nu, kernel=cfg.kernel, degree=cfg.degree)

    workers = n_workers or os.cpu_count() or 1
    if workers > 1 and grid.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = tuple(pool.map(lambda x0: solve(x0, beta0), grid))
    else:
        points = tuple(solve(x0, beta0) for x0 in grid)
    return LocalFitCurve(points=points, family=cfg.family, nu=cfg.nu,
                         kernel=cfg.kernel, degree=cfg.degree)


def curve_to_tau(curve: LocalFitCurve):
    """(x0, tau) pairs obtained by mapping each fitted eta through the links."""
    out = []
    for pt in curve.points:
        if np.isfinite(pt.eta):
            theta = eta_to_par(curve.family, pt.eta)
            if curve.family == Family.FRANK and abs(theta) < 1e-8:
                tau = theta / 9.0
            else:
                tau = par_to_tau(curve.family, theta)
        else:
            tau = float("nan")
        out.append((pt.x0, float(tau)))
    return out


def curve_thetas(curve: LocalFitCurve):
    """Fitted dependence parameters along the curve (NaN where failed)."""
    return np.array([eta_to_par(curve.family, p.eta) if np.isfinite(p.eta)
                     else np.nan for p in curve.points])
