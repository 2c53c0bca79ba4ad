"""Compactly supported smoothing kernels and the multivariate product kernel.

Both families are symmetric Lipschitz probability densities on [-1, 1]; the
quartic (biweight) kernel is the default because it is smoother at the
support boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

KERNEL_FAMILIES = ("quartic", "epanechnikov")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "quartic"

    def __post_init__(self) -> None:
        if self.family not in KERNEL_FAMILIES:
            raise ContractViolation(
                f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )


def k_eval(spec: KernelSpec, u):
    """Evaluate the univariate kernel density; zero outside [-1, 1]."""
    arr = np.asarray(u, dtype=float)
    inside = np.abs(arr) <= 1.0
    t = np.where(inside, arr, 1.0)
    if spec.family == "quartic":
        vals = (15.0 / 16.0) * (1.0 - t * t) ** 2
    else:
        vals = 0.75 * (1.0 - t * t)
    out = np.where(inside, vals, 0.0)
    return float(out) if np.isscalar(u) or arr.ndim == 0 else out


def k_cdf(spec: KernelSpec, u):
    """Integrated kernel ``int_{-inf}^{u} K``; saturates at 0 and 1.

    Closed forms: quartic ``1/2 + (15/16)(u - 2u^3/3 + u^5/5)``,
    Epanechnikov ``1/2 + (3/4)(u - u^3/3)``.
    """
    arr = np.asarray(u, dtype=float)
    t = np.clip(arr, -1.0, 1.0)
    if spec.family == "quartic":
        vals = 0.5 + (15.0 / 16.0) * (t - 2.0 * t**3 / 3.0 + t**5 / 5.0)
    else:
        vals = 0.5 + 0.75 * (t - t**3 / 3.0)
    out = np.clip(vals, 0.0, 1.0)
    return float(out) if np.isscalar(u) or arr.ndim == 0 else out


def product_kernel(spec: KernelSpec, z, h: float) -> float:
    """Product kernel ``h^{-r} prod_k K(z_k / h)`` for a single point.

    Exits early on the first out-of-support coordinate; the OPG loops
    evaluate this O(n^2) times.
    """
    if h <= 0.0:
        raise ContractViolation(f"bandwidth must be positive, got {h!r}")
    vec = np.atleast_1d(np.asarray(z, dtype=float))
    out = 1.0
    for zk in vec:
        if abs(zk) > h:
            return 0.0
        out *= k_eval(spec, zk / h)
    return out * h ** (-vec.size)


def product_kernel_many(spec: KernelSpec, z: np.ndarray, h) -> np.ndarray:
    """Vectorized product kernel over the last axis of ``z``.

    ``h`` may be a scalar or broadcastable against ``z[..., 0]``; rows with
    any coordinate outside the support come out exactly zero.
    """
    z = np.asarray(z, dtype=float)
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr <= 0.0):
        raise ContractViolation("bandwidth must be positive")
    r = z.shape[-1]
    scaled = z / h_arr[..., None]
    inside = np.all(np.abs(scaled) <= 1.0, axis=-1)
    vals = k_eval(spec, np.where(inside[..., None], scaled, 1.0))
    return np.where(inside, vals.prod(axis=-1), 0.0) * h_arr ** (-r)
