"""Smoothing kernels and local weight computation.

Weights are K((x_i - x0)/h) with no 1/h prefactor: the local likelihood is
maximized, and its argmax is invariant to any positive scaling of the
weights, so the prefactor is omitted for conditioning.  Weights below
WEIGHT_FLOOR are truncated to exactly zero and the corresponding
observations skipped downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindowError, DomainError

KERNEL_KINDS = ("gaussian", "epanechnikov", "rectangular")
WEIGHT_FLOOR = 1e-12

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus bandwidth h > 0."""

    kind: str = "gaussian"
    band: float = 0.1

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DomainError(f"unknown kernel {self.kind!r}; "
                              f"choose one of {KERNEL_KINDS}")
        if not (np.isfinite(self.band) and self.band > 0):
            raise DomainError("bandwidth must be positive")


def kernel_eval(kind, z):
    """Evaluate the named kernel at z (symmetric in z)."""
    if kind not in KERNEL_KINDS:
        raise DomainError(f"unknown kernel {kind!r}")
    za = np.asarray(z, dtype=float)
    if kind == "gaussian":
        out = _INV_SQRT_2PI * np.exp(-0.5 * za * za)
    elif kind == "epanechnikov":
        out = 0.75 * np.maximum(1.0 - za * za, 0.0)
    else:
        out = np.where(np.abs(za) <= 1.0, 0.5, 0.0)
    return float(out) if np.ndim(z) == 0 else out


def local_weights(x, x0, spec: KernelSpec):
    """Kernel weights of the observations around x0; truncated below 1e-12.

    Raises DegenerateWindowError when every weight is truncated (the window
    contains no usable observations).
    """
    xa = np.asarray(x, dtype=float)
    if xa.size == 0:
        raise DomainError("x must be nonempty")
    w = kernel_eval(spec.kind, (xa - x0) / spec.band)
    w = np.where(w < WEIGHT_FLOOR, 0.0, w)
    if not np.any(w > 0.0):
        raise DegenerateWindowError(
            f"all kernel weights vanished at x0={x0} (band={spec.band})")
    return w
