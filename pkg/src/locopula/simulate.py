"""Seeded generation of conditional-copula datasets.

The pseudo-random stream is produced by xoshiro256** (Blackman & Vigna),
seeded through SplitMix64 expansion of a 64-bit integer; uniform doubles
take the top 53 bits of each output word: u = (word >> 11) * 2^-53, with
an exact 0.0 nudged up to 2^-54 so downstream quantile maps stay in (0, 1).
The same seed therefore yields bit-identical datasets on every platform.

Stream layout for a simulated dataset of size n: the first n uniforms are
the covariates (sorted ascending afterwards in "uniform_sorted" mode and
skipped entirely in "given" mode), followed by one (w1, w2) pair per
observation in order; u_i = w1_i and v_i = h_inv(w2_i | u_i, theta_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from . import families
from .families import Family, eta_to_par, parse_family

_MASK64 = (1 << 64) - 1


class Xoshiro256StarStar:
    """xoshiro256** PRNG with SplitMix64 seeding; 53-bit uniform doubles."""

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)) or int(seed) < 0:
            raise DomainError("seed must be a nonnegative integer")
        self.seed = int(seed) & _MASK64
        s = self.seed
        state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & _MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            state.append((z ^ (z >> 31)) & _MASK64)
        self._state = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._state
        r = (s1 * 5) & _MASK64
        r = ((r << 7) | (r >> 57)) & _MASK64
        r = (r * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._state = [s0, s1, s2, s3]
        return r

    def random(self) -> float:
        return max(self.next_u64() >> 11, 1) * 2.0 ** -53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.random() for _ in range(n)], dtype=float)


RngState = Xoshiro256StarStar


@dataclass(frozen=True)
class EtaSpec:
    """Calibration function: a constant, the usage-example waveform
    sin(5 pi x) + cos(8 pi x^2) on [0, 1], or a linear-interpolation table."""

    kind: str = "paper_dgm"
    value: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "paper_dgm", "table"):
            raise DomainError("EtaSpec kind must be constant|paper_dgm|table")
        if self.kind == "table":
            knots = tuple((float(a), float(b)) for a, b in self.table)
            if len(knots) < 2:
                raise DomainError("table spec needs at least two knots")
            xs = [a for a, _ in knots]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise DomainError("table knots must be strictly increasing in x")
            object.__setattr__(self, "table", knots)


def eta_eval(spec: EtaSpec, x):
    """Evaluate the calibration function at covariate values x."""
    xa = np.asarray(x, dtype=float)
    if spec.kind == "constant":
        out = np.full_like(xa, float(spec.value))
    elif spec.kind == "paper_dgm":
        if np.any((xa < 0.0) | (xa > 1.0)):
            raise DomainError("the built-in waveform is defined on [0, 1]")
        out = np.sin(5.0 * np.pi * xa) + np.cos(8.0 * np.pi * xa * xa)
    else:
        xs = np.array([a for a, _ in spec.table])
        ys = np.array([b for _, b in spec.table])
        if np.any(xa < xs[0]) or np.any(xa > xs[-1]):
            raise DomainError("covariate outside the table range")
        out = np.interp(xa, xs, ys)
    return float(out) if np.ndim(x) == 0 else out


def simulate_dataset(n, family, spec: EtaSpec, nu=None, rng=0,
                     x_mode: str = "uniform_sorted", x=None):
    """Draw a dataset of n (u, v, x) triples with theta_i = g^{-1}(eta(x_i)).

    rng may be a seed or an Xoshiro256StarStar instance.  Returns a
    fitting.Dataset; identical seeds give bit-identical results.
    """
    from .fitting import Dataset

    family = parse_family(family)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError("n must be a positive integer")
    if family == Family.STUDENT_T:
        nu = 4.0 if nu is None else float(nu)
        if not nu > 0:
            raise DomainError("nu must be positive")
    gen = rng if isinstance(rng, Xoshiro256StarStar) else Xoshiro256StarStar(rng)
    if x_mode == "uniform_sorted":
        xs = np.sort(gen.uniforms(n))
    elif x_mode == "given":
        if x is None:
            raise DomainError("x_mode='given' requires covariate values")
        xs = np.asarray(x, dtype=float)
        if xs.shape != (n,):
            raise DomainError("given covariates must have length n")
    else:
        raise DomainError("x_mode must be 'uniform_sorted' or 'given'")

    theta = np.asarray(eta_to_par(family, eta_eval(spec, xs)), dtype=float)
    w = gen.uniforms(2 * n)
    u = w[0::2]
    v = np.empty(n)
    if family == Family.FRANK:
        indep = np.abs(theta) < families.FRANK_INDEP_TOL
        if np.any(indep):
            v[indep] = w[1::2][indep]
        rest = ~indep
        if np.any(rest):
            v[rest] = np.asarray(families.h_inv(
                family, w[1::2][rest], u[rest], theta[rest]))
    else:
        v[:] = np.asarray(families.h_inv(family, w[1::2], u, theta, nu))
    return Dataset(u1=u, u2=v, x=xs)


def empirical_tau(u, v):
    """Kendall's tau-a: (concordant - discordant) / C(n, 2).

    Merge counting makes this O(n log^2 n); ties count as neither
    concordant nor discordant.
    """
    ua = np.asarray(u, dtype=float)
    va = np.asarray(v, dtype=float)
    if ua.shape != va.shape or ua.ndim != 1 or len(ua) < 2:
        raise DomainError("empirical_tau needs two equal-length sequences, n >= 2")
    n = len(ua)
    order = np.lexsort((va, ua))
    swaps = _inversions(va[order])
    t_u = _tie_pairs(ua)
    t_v = _tie_pairs(va)
    t_uv = _tie_pairs(ua + 1j * va)
    n0 = n * (n - 1) // 2
    return float(n0 - t_u - t_v + t_uv - 2 * swaps) / n0


def _tie_pairs(values):
    _, counts = np.unique(values, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def _inversions(a):
    n = len(a)
    if n < 2:
        return 0
    mid = n // 2
    left = np.sort(a[:mid], kind="stable")
    right = a[mid:]
    crossing = int(np.sum(mid - np.searchsorted(left, np.sort(right, kind="stable"),
                                                side="right")))
    return _inversions(a[:mid]) + _inversions(right) + crossing
