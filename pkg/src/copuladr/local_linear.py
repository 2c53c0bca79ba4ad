"""Local-linear regression with projected product-kernel weights.

The estimator fits, at an evaluation point x, the weighted least-squares
problem with design (1, X_i - x) and weights K_h(B'(X_i - x)); the intercept
estimates the regression function and the slope vector its gradient. The
projection B inside the weight is what the adaptive outer-product scheme
iterates on. A batched driver solves many evaluation points at once, sharing
the weight and normal-matrix computations across all target vectors.

The kernel-smoothed conditional CDF estimator reuses the same fit with
integrated-kernel targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateNeighborhood, EstimationFailed
from .kernels import KernelSpec, k_cdf, product_kernel_many
from .linalg import solve_normal_eq, weighted_ls

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

_CHUNK_BUDGET = 4_000_000  # floats per temporary (c, n) block
_WIDEN_CAP = 60  # doubling 60 times overflows any finite spread of the data


if _numba is not None:

    @_numba.njit(cache=True)
    def _pk_weights_jit(XB, PB, h, quartic):  # pragma: no cover - jitted
        n, r = XB.shape
        m = PB.shape[0]
        out = np.empty((m, n))
        for j in range(m):
            hj = h[j]
            for i in range(n):
                w = 1.0
                for kk in range(r):
                    t = (XB[i, kk] - PB[j, kk]) / hj
                    c = 1.0 - t * t
                    if c < 0.0:
                        w = 0.0
                        break
                    w *= c * c if quartic else c
                out[j, i] = w
        return out


@dataclass(frozen=True)
class ProjectionContext:
    """Projection matrix (p x r) used inside the kernel weight, and bandwidth."""

    projection: np.ndarray
    h: float

    def __post_init__(self) -> None:
        b = np.asarray(self.projection, dtype=float)
        if b.ndim != 2 or b.shape[1] > b.shape[0] or b.shape[1] < 1:
            raise ContractViolation(f"projection must be p x r with 1 <= r <= p, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ContractViolation("projection entries must be finite")
        if not self.h > 0.0:
            raise ContractViolation(f"bandwidth must be positive, got {self.h!r}")
        object.__setattr__(self, "projection", b)


@dataclass(frozen=True)
class LocalLinearFit:
    value: float
    gradient: np.ndarray
    effective_n: int


def kernel_weights(x: np.ndarray, X: np.ndarray, ctx: ProjectionContext, spec: KernelSpec) -> np.ndarray:
    """Weights K_h(B'(X_i - x)) for one evaluation point."""
    z = (np.asarray(X, dtype=float) - np.asarray(x, dtype=float)) @ ctx.projection
    return product_kernel_many(spec, z, ctx.h)


def _weights_fast(spec: KernelSpec, XB: np.ndarray, PB: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Product-kernel weights for all (evaluation point, observation) pairs.

    Computes K_h of the projected differences XB_i - PB_j row-wise, in the
    clipped polynomial form (1 - t^2 vanishes continuously at the support
    edge) with early exit on the first out-of-support coordinate; agrees
    with :func:`copuladr.kernels.product_kernel_many` to rounding. Uses a
    fused jitted kernel when numba is available (this is the hot path of
    every gradient pass), with a pure-numpy fallback.
    """
    r = XB.shape[-1]
    const = (15.0 / 16.0) ** r if spec.family == "quartic" else 0.75**r
    if _numba is not None:
        w = _pk_weights_jit(
            np.ascontiguousarray(XB),
            np.ascontiguousarray(PB),
            np.ascontiguousarray(h),
            spec.family == "quartic",
        )
    else:
        t = (XB[None, :, :] - PB[:, None, :]) / h[:, None, None]
        c = np.maximum(1.0 - t * t, 0.0)
        w = (c * c).prod(axis=-1) if spec.family == "quartic" else c.prod(axis=-1)
    return w * (const * h ** (-float(r)))[:, None]


def ll_fit(
    x: np.ndarray,
    X: np.ndarray,
    t: np.ndarray,
    ctx: ProjectionContext,
    spec: KernelSpec = KernelSpec(),
) -> LocalLinearFit:
    """Local-linear fit at a single point; raises on degenerate neighborhoods.

    Needs at least p + 1 observations with positive weight; the caller is
    responsible for widening the bandwidth or skipping the point otherwise.
    """
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    n, p = X.shape
    if t.shape != (n,):
        raise ContractViolation("targets must be a length-n vector")
    w = kernel_weights(x, X, ctx, spec)
    eff = int(np.count_nonzero(w))
    if eff < p + 1:
        raise DegenerateNeighborhood(
            f"only {eff} observations in the kernel support, need {p + 1}"
        )
    design = np.hstack([np.ones((n, 1)), X - x])
    beta = weighted_ls(design, t, w)
    return LocalLinearFit(float(beta[0]), beta[1:].copy(), eff)


def ll_fit_batch(
    points: np.ndarray,
    X: np.ndarray,
    targets: np.ndarray,
    ctx: ProjectionContext,
    spec: KernelSpec = KernelSpec(),
    *,
    per_point_targets: bool = False,
    max_doublings: int = 3,
    widen_until_ok: bool = False,
    min_eig_ratio: float = 0.0,
):
    """Local-linear fits at many evaluation points.

    Parameters
    ----------
    points : (m, p) ndarray
        Evaluation points.
    targets : (n, g) or (m, n) ndarray
        Target vectors shared by all points, or (with
        ``per_point_targets=True``) one target vector per evaluation point.
    max_doublings : int
        Points with a degenerate neighborhood are retried with the bandwidth
        doubled, this many times.
    widen_until_ok : bool
        Keep doubling past ``max_doublings`` until every point fits (used
        when a value is required for every point, e.g. pseudo-observations).
    min_eig_ratio : float
        Treat a neighborhood as degenerate when the local normal matrix has
        eigenvalue ratio min/max below this, in addition to the
        fewer-than-p+1-observations test. Nearly singular local designs
        amplify target noise by orders of magnitude, and a handful of such
        points can dominate a gradient average; widening their bandwidth is
        the stated remedy for degenerate neighborhoods.

    Returns
    -------
    values : (m, g) ndarray, gradients : (m, g, p) ndarray,
    effective : (m,) int ndarray, h_used : (m,) ndarray.
    Rows that stay degenerate after the retries are NaN.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n, p = X.shape
    m = points.shape[0]
    if points.shape[1] != p:
        raise ContractViolation("evaluation points must match the covariate dimension")
    if per_point_targets:
        if targets.shape != (m, n):
            raise ContractViolation("per-point targets must have shape (m, n)")
        g = 1
    else:
        if targets.ndim == 1:
            targets = targets[:, None]
        if targets.shape[0] != n:
            raise ContractViolation("shared targets must have shape (n, g)")
        g = targets.shape[1]
    k = p + 1

    proj = ctx.projection
    XB = X @ proj
    PB = points @ proj

    values = np.full((m, g), np.nan)
    gradients = np.full((m, g, p), np.nan)
    effective = np.zeros(m, dtype=int)
    h_used = np.full(m, ctx.h)

    # Fits run in uncentered coordinates so every evaluation point shares the
    # same design (1, X): the normal matrices become one flat GEMM over the
    # precomputed entry products, and the intercept at x is recovered as
    # beta_0 + slope . x. Slopes are identical to the centered fit.
    design = np.hstack([np.ones((n, 1)), X])
    pairs = design[:, :, None] * design[:, None, :]  # (n, k, k)
    e_flat = pairs.reshape(n, k * k)
    if not per_point_targets:
        f_flat = (design[:, :, None] * targets[:, None, :]).reshape(n, k * g)
    points_aug = np.hstack([np.ones((m, 1)), points])

    active = np.arange(m)
    attempt = 0
    chunk = max(16, int(_CHUNK_BUDGET // max(n, 1)))
    while active.size:
        still = []
        for start in range(0, active.size, chunk):
            rows = active[start : start + chunk]
            w = _weights_fast(spec, XB, PB[rows], h_used[rows])
            eff = np.count_nonzero(w, axis=1)
            effective[rows] = eff
            ok = eff >= k
            s_all = (w @ e_flat).reshape(-1, k, k)
            s_all = (s_all + np.swapaxes(s_all, 1, 2)) / 2.0
            if min_eig_ratio > 0.0:
                vals_s = np.linalg.eigvalsh(s_all)
                ok &= vals_s[:, 0] > min_eig_ratio * vals_s[:, -1]
            still.append(rows[~ok])
            fit_rows = rows[ok]
            if fit_rows.size == 0:
                continue
            w_ok = w[ok]
            s = s_all[ok]
            if per_point_targets:
                rhs = ((w_ok * targets[fit_rows]) @ design)[:, :, None]
            else:
                rhs = (w_ok @ f_flat).reshape(-1, k, g)
            beta = solve_normal_eq(s, rhs)
            values[fit_rows] = np.einsum("jk,jkg->jg", points_aug[fit_rows], beta)
            gradients[fit_rows] = np.swapaxes(beta[:, 1:, :], 1, 2)
        active = np.concatenate(still) if still else np.empty(0, dtype=int)
        if active.size == 0:
            break
        attempt += 1
        if widen_until_ok:
            if attempt > _WIDEN_CAP:
                raise EstimationFailed("bandwidth widening failed to produce a valid fit")
        elif attempt > max_doublings:
            break
        h_used[active] *= 2.0
    return values, gradients, effective, h_used


def _cdf_targets(spec: KernelSpec, y: float, samples: np.ndarray, b: float) -> np.ndarray:
    return k_cdf(spec, (y - samples) / b)


def smoothed_cdf_fit(
    y: float,
    j: int,
    x: np.ndarray,
    data,
    b_margin: np.ndarray,
    h: float,
    b: float,
    spec: KernelSpec = KernelSpec(),
) -> float:
    """Kernel-smoothed conditional CDF estimate of response ``j`` at (y, x).

    Fits the local-linear estimator to the integrated-kernel targets
    ``int_{-inf}^{y} K_b(s - Y_ij) ds`` and returns the intercept, clamped
    to [1/(n+1), 1 - 1/(n+1)] so downstream quantile transforms stay finite.
    """
    if not (h > 0.0 and b > 0.0):
        raise ContractViolation("bandwidths h and b must be positive")
    t = _cdf_targets(spec, float(y), data.Y[:, j], b)
    fit = ll_fit(x, data.X, t, ProjectionContext(b_margin, h), spec)
    eps = 1.0 / (data.n + 1)
    return float(np.clip(fit.value, eps, 1.0 - eps))


def smoothed_cdf_grid(
    ys: np.ndarray,
    j: int,
    x: np.ndarray,
    data,
    b_margin: np.ndarray,
    h: float,
    b: float,
    spec: KernelSpec = KernelSpec(),
) -> np.ndarray:
    """Smoothed conditional CDF on an increasing grid of response values.

    The local-linear estimator is not monotone by construction, so the grid
    values are rearranged by a running maximum before clamping.
    """
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(ys) < 0.0):
        raise ContractViolation("grid must be nondecreasing")
    if not (h > 0.0 and b > 0.0):
        raise ContractViolation("bandwidths h and b must be positive")
    X = data.X
    n, p = X.shape
    ctx = ProjectionContext(b_margin, h)
    w = kernel_weights(x, X, ctx, spec)
    if int(np.count_nonzero(w)) < p + 1:
        raise DegenerateNeighborhood("too few observations in the kernel support")
    design = np.hstack([np.ones((n, 1)), X - np.asarray(x, dtype=float)])
    s = design.T @ (w[:, None] * design)
    s = (s + s.T) / 2.0
    t = k_cdf(spec, (ys[None, :] - data.Y[:, j][:, None]) / b)
    beta = solve_normal_eq(s, design.T @ (w[:, None] * t))
    eps = 1.0 / (n + 1)
    return np.clip(np.maximum.accumulate(beta[0, :]), eps, 1.0 - eps)
