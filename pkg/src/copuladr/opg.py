"""Outer-product-of-gradients estimation of dependence subspaces.

The estimated matrix averages outer products of local-linear gradient
estimates over the sample, restricted to a trimming region that keeps the
average away from the covariate distribution's tails. Its top eigenvectors
span the target subspace. The adaptive variant re-weights the kernel with
the previous iterate's scaled eigenbasis while shrinking the bandwidth
geometrically toward a floor, which removes the ambient dimension from the
convergence rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, EstimationFailed
from .kernels import KernelSpec
from .linalg import EigenDecomposition, SubspaceBasis, eig_sym, subspace_distance
from .local_linear import ProjectionContext, ll_fit_batch
from .measures import PseudoResponses

DEFAULT_TRIM_QUANTILE = 0.05
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 50

#: Local normal matrices with eigenvalue ratio below this are treated as
#: degenerate neighborhoods (widened, then excluded): ill-conditioned local
#: designs amplify target noise enough that a single evaluation point can
#: dominate the whole gradient average. Well-populated neighborhoods sit
#: around 1e-2 on this scale.
LOCAL_FIT_EIG_RATIO = 1e-3


@dataclass(frozen=True)
class BandwidthSchedule:
    """Initial bandwidth, geometric decay factor, and bandwidth floor."""

    h0: float
    rho: float
    h_inf: float

    def __post_init__(self) -> None:
        if not (self.h0 > 0.0 and self.h_inf > 0.0 and self.h0 >= self.h_inf):
            raise ContractViolation("need h0 >= h_inf > 0")
        if not 0.0 < self.rho < 1.0:
            raise ContractViolation(f"rho must lie in (0, 1), got {self.rho!r}")


def default_schedule(n: int, p: int, d: int) -> BandwidthSchedule:
    """Recommended schedule: h0 = n^{-1/(6+p)}, rho = n^{-1/(12+2p)}, h_inf = n^{-1/(4+d)}."""
    if n < 2:
        raise ContractViolation(f"n must be >= 2, got {n}")
    if not 1 <= d <= p:
        raise ContractViolation(f"need 1 <= d <= p, got d={d}, p={p}")
    return BandwidthSchedule(
        h0=float(n) ** (-1.0 / (6.0 + p)),
        rho=float(n) ** (-1.0 / (12.0 + 2.0 * p)),
        h_inf=float(n) ** (-1.0 / (4.0 + d)),
    )


@dataclass(frozen=True)
class TrimmingSet:
    """Per-coordinate box bounds; points outside are excluded from the average."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractViolation("lower and upper must be equal-length vectors")
        if not np.all(lo < hi):
            raise ContractViolation("need lower < upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lower) & (X <= self.upper), axis=-1)


def trimming_from_quantiles(X: np.ndarray, q: float = DEFAULT_TRIM_QUANTILE) -> TrimmingSet:
    """Box given by the per-coordinate empirical q and 1-q quantiles.

    ``q = 0`` retains the full sample (bounds at the observed min/max).
    """
    if not 0.0 <= q < 0.5:
        raise ContractViolation(f"trim quantile must lie in [0, 0.5), got {q!r}")
    X = np.asarray(X, dtype=float)
    return TrimmingSet(np.quantile(X, q, axis=0), np.quantile(X, 1.0 - q, axis=0))


@dataclass(frozen=True)
class OpgResult:
    """Estimated gradient outer-product matrix and derived subspace.

    ``converged`` is False when the adaptive loop hit its iteration cap
    before the stopping rule fired; the last iterate is still returned.
    """

    delta: np.ndarray
    eigen: EigenDecomposition
    basis: SubspaceBasis
    iterations: int
    h_final: float
    trimmed_fraction: float
    converged: bool


def stabilizer_scale(eigenvalues: np.ndarray, d: int | None = None) -> np.ndarray:
    """Column scaling for the next iterate's projection basis.

    ``s_j = lam_j * (1/2 + 1/(2 sum_k lam_k))``, with the leading scale
    repeated over the first ``d`` entries when ``d`` is given. Repeating the
    dominant scale keeps every target direction equally localized in the
    kernel; scaling the d-th direction by its own (smaller) eigenvalue lets
    its localization, and with it the very signal that produces that
    eigenvalue, wash out -- a self-reinforcing loss for signals with
    mean-zero gradients (e.g. even functions). Beyond ``d`` the scaling is
    proportional to the eigenvalue, so null directions map to zero scale.
    An all-zero spectrum returns zeros.
    """
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0.0:
        return np.zeros_like(lam)
    s = lam * (0.5 + 0.5 / total)
    if d is not None:
        if not 1 <= d <= lam.size:
            raise ContractViolation(f"need 1 <= d <= {lam.size}, got d={d}")
        s[:d] = s[0]
    return s


def _targets_matrix(pseudo: PseudoResponses, n: int) -> np.ndarray:
    t = pseudo.matrix()
    if t.shape[0] != n:
        raise ContractViolation("pseudo-response length does not match the sample")
    return t


def _gradient_pass(
    X: np.ndarray,
    T: np.ndarray,
    projection: np.ndarray,
    h: float,
    spec: KernelSpec,
    eval_idx: np.ndarray,
    max_doublings: int = 3,
):
    """One OPG pass: accumulated gradient outer products over trim-interior points.

    Returns (sum of outer products, number of contributing points).
    """
    _, grads, _, _ = ll_fit_batch(
        X[eval_idx],
        X,
        T,
        ProjectionContext(projection, h),
        spec,
        max_doublings=max_doublings,
        min_eig_ratio=LOCAL_FIT_EIG_RATIO,
    )
    kept = np.all(np.isfinite(grads), axis=(1, 2))
    if not np.any(kept):
        raise EstimationFailed("every evaluation point had a degenerate neighborhood")
    g = grads[kept]
    acc = np.einsum("igp,igq->pq", g, g)
    return (acc + acc.T) / 2.0, int(kept.sum())


def opg_matrix(
    X: np.ndarray,
    pseudo: PseudoResponses,
    ctx: ProjectionContext,
    trim: TrimmingSet | None = None,
    spec: KernelSpec = KernelSpec(),
) -> np.ndarray:
    """Gradient outer-product matrix sum_g n^{-1} sum_i grad_g(X_i) grad_g(X_i)' 1(X_i in trim).

    Points whose neighborhood stays degenerate after three bandwidth
    doublings are excluded from the average (the divisor stays n).
    """
    X = np.asarray(X, dtype=float)
    n, _ = X.shape
    T = _targets_matrix(pseudo, n)
    inside = trim.contains(X) if trim is not None else np.ones(n, dtype=bool)
    eval_idx = np.flatnonzero(inside)
    if eval_idx.size == 0:
        raise EstimationFailed("trimming removed every sample point")
    acc, _ = _gradient_pass(X, T, ctx.projection, ctx.h, spec, eval_idx)
    return acc / n


def adaptive_opg(
    X: np.ndarray,
    pseudo: PseudoResponses,
    d: int,
    schedule: BandwidthSchedule | None = None,
    trim: TrimmingSet | None = None,
    spec: KernelSpec = KernelSpec(),
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> OpgResult:
    """Adaptive OPG estimate of the d-dimensional target subspace.

    Starting from the identity projection and bandwidth ``h0``, each
    iteration recomputes the gradient outer-product matrix with the kernel
    projected through the previous eigenbasis scaled by
    :func:`stabilizer_scale`, then shrinks the bandwidth by ``rho`` down to
    the floor ``h_inf``. The loop stops once the bandwidth has reached the
    floor and consecutive top-d bases agree within ``tol``, or at
    ``max_iter`` (flagged, not an error).

    The stabilizer is applied to the trace-normalized spectrum. Early
    iterations at small bandwidths produce noise-dominated gradient
    estimates whose eigenvalues can exceed the population scale by orders of
    magnitude; raw eigenvalue scalings would compress the kernel support to
    nothing. Normalizing also makes the iteration exactly invariant to
    affine rescaling of the targets.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= d <= p:
        raise ContractViolation(f"need 1 <= d <= p, got d={d}, p={p}")
    if max_iter < 1:
        raise ContractViolation("max_iter must be >= 1")
    if schedule is None:
        schedule = default_schedule(n, p, d)
    T = _targets_matrix(pseudo, n)
    inside = trim.contains(X) if trim is not None else np.ones(n, dtype=bool)
    eval_idx = np.flatnonzero(inside)
    if eval_idx.size == 0:
        raise EstimationFailed("trimming removed every sample point")

    projection = np.eye(p)
    h = schedule.h0
    prev_basis: SubspaceBasis | None = None
    converged = False
    iterations = 0
    h_final = h
    delta = np.zeros((p, p))
    dec = None
    kept = 0
    for _ in range(max_iter):
        acc, kept = _gradient_pass(X, T, projection, h, spec, eval_idx)
        delta = acc / n
        dec = eig_sym(delta)
        basis = SubspaceBasis(dec.eigenvectors[:, :d])
        iterations += 1
        h_final = h
        if (
            prev_basis is not None
            and h == schedule.h_inf
            and subspace_distance(prev_basis, basis) < tol
        ):
            converged = True
            break
        prev_basis = basis
        lam = np.clip(dec.eigenvalues, 0.0, None)
        total = lam.sum()
        scales = stabilizer_scale(lam / total if total > 0.0 else lam, d)
        projection = dec.eigenvectors * scales[None, :]
        h = max(schedule.rho * h, schedule.h_inf)

    return OpgResult(
        delta=delta,
        eigen=dec,
        basis=SubspaceBasis(dec.eigenvectors[:, :d]),
        iterations=iterations,
        h_final=h_final,
        trimmed_fraction=1.0 - kept / n,
        converged=converged,
    )


def opg_single_pass(
    X: np.ndarray,
    pseudo: PseudoResponses,
    d: int,
    schedule: BandwidthSchedule | None = None,
    trim: TrimmingSet | None = None,
    spec: KernelSpec = KernelSpec(),
) -> OpgResult:
    """Non-adaptive estimate: one pass at h0 with the identity projection."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not 1 <= d <= p:
        raise ContractViolation(f"need 1 <= d <= p, got d={d}, p={p}")
    if schedule is None:
        schedule = default_schedule(n, p, d)
    T = _targets_matrix(pseudo, n)
    inside = trim.contains(X) if trim is not None else np.ones(n, dtype=bool)
    eval_idx = np.flatnonzero(inside)
    if eval_idx.size == 0:
        raise EstimationFailed("trimming removed every sample point")
    acc, kept = _gradient_pass(X, T, np.eye(p), schedule.h0, spec, eval_idx)
    delta = acc / n
    eigen = eig_sym(delta)
    return OpgResult(
        delta=delta,
        eigen=eigen,
        basis=SubspaceBasis(eigen.eigenvectors[:, :d]),
        iterations=1,
        h_final=schedule.h0,
        trimmed_fraction=1.0 - kept / n,
        converged=True,
    )
