"""Pseudo-observations from conditional margins.

Three regimes: oracle (stored uniforms from the generative model),
parametric (least-squares location fit on the true feature set, i.e. the
Gaussian-location MLE), and nonparametric (marginal subspace via adaptive
OPG followed by a kernel-smoothed local-linear CDF fit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .data import MARGIN1_ACTIVE, MARGIN2_ACTIVE, Dataset
from .errors import ContractViolation, UnsupportedMarginMode
from .kernels import KernelSpec, k_cdf
from .local_linear import ProjectionContext, ll_fit_batch
from .measures import PseudoResponses
from .opg import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LOCAL_FIT_EIG_RATIO,
    adaptive_opg,
    default_schedule,
    trimming_from_quantiles,
)

DEFAULT_MARGIN_DIM = 2


@dataclass
class MarginModel:
    """Fitted margin description: mode plus the per-response artifacts."""

    mode: str
    coef: tuple[np.ndarray, np.ndarray] | None = None
    bases: tuple[np.ndarray, np.ndarray] | None = None
    h: float | None = None
    b: float | None = None


def known_means(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """True conditional mean functions of the generative model."""
    X = np.asarray(X, dtype=float)
    mu1 = X[:, 3] ** 2 / 5.0 + X[:, 4] ** 2 / 5.0
    mu2 = -X[:, 1] - X[:, 3] ** 2 / 5.0
    return mu1, mu2


def location_design(X: np.ndarray, j: int) -> np.ndarray:
    """Design of the correctly specified location model (intercept first)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if j == 0:
        feats = [X[:, MARGIN1_ACTIVE[0]] ** 2, X[:, MARGIN1_ACTIVE[1]] ** 2]
    elif j == 1:
        feats = [X[:, MARGIN2_ACTIVE[0]], X[:, MARGIN2_ACTIVE[1]] ** 2]
    else:
        raise ContractViolation(f"response index must be 0 or 1, got {j}")
    return np.column_stack([np.ones(n), *feats])


def _clamp_unit(U: np.ndarray, n: int) -> np.ndarray:
    eps = 1.0 / (n + 1)
    return np.clip(U, eps, 1.0 - eps)


def margins_known(data: Dataset) -> np.ndarray:
    """Oracle pseudo-observations: the stored conditional PIT values.

    Generated datasets carry the uniforms that produced the responses, and
    those are exactly the conditional PIT values; data without them cannot
    be used in oracle mode.
    """
    if data.U_true is None:
        raise UnsupportedMarginMode("oracle margins need a dataset with stored uniforms")
    return np.array(data.U_true, copy=True)


def margins_parametric(data: Dataset) -> tuple[MarginModel, np.ndarray]:
    """Location-model MLE margins: OLS on the true features, unit noise scale.

    The noise in the generative model is standard normal given the
    covariates, so the Gaussian-location MLE is ordinary least squares and
    the PIT is Phi(y - fitted mean), clamped away from {0, 1}.
    """
    n = data.n
    U = np.empty((n, 2))
    coefs = []
    for j in (0, 1):
        F = location_design(data.X, j)
        coef, *_ = np.linalg.lstsq(F, data.Y[:, j], rcond=None)
        coefs.append(coef)
        U[:, j] = ndtr(data.Y[:, j] - F @ coef)
    return MarginModel("parametric", coef=(coefs[0], coefs[1])), _clamp_unit(U, n)


def margins_nonparametric(
    data: Dataset,
    d_margin: int = DEFAULT_MARGIN_DIM,
    spec: KernelSpec = KernelSpec(),
    trim_q: float = 0.05,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    h: float | None = None,
    b: float | None = None,
) -> tuple[MarginModel, np.ndarray]:
    """Nonparametric margins: marginal OPG subspace, then smoothed CDF fits.

    For each response the marginal central mean subspace is estimated by the
    adaptive OPG with the raw response as target, then every observation's
    pseudo-observation is the smoothed conditional CDF evaluated at its own
    (y, x) with bandwidths h = n^{-1/4}, b = n^{-1/2} (strong
    under-smoothing). The CDF evaluation widens the bandwidth until each
    point has a valid neighborhood -- unlike the OPG average, it cannot skip
    points, because every observation needs a value.
    """
    n, p = data.n, data.p
    if not 1 <= d_margin <= p:
        raise ContractViolation(f"need 1 <= d_margin <= p, got {d_margin}")
    if n < p + 2:
        raise ContractViolation("too few observations for nonparametric margins")
    h = float(n) ** (-0.25) if h is None else h
    b = float(n) ** (-0.5) if b is None else b
    schedule = default_schedule(n, p, d_margin)
    trim = trimming_from_quantiles(data.X, trim_q)
    U = np.empty((n, 2))
    bases = []
    for j in (0, 1):
        pseudo = PseudoResponses((data.Y[:, j].copy(),), (f"margin_y{j + 1}",))
        fit = adaptive_opg(data.X, pseudo, d_margin, schedule, trim, spec, max_iter, tol)
        basis = fit.basis.basis
        bases.append(basis)
        targets = k_cdf(spec, (data.Y[:, j][:, None] - data.Y[:, j][None, :]) / b)
        values, _, _, _ = ll_fit_batch(
            data.X,
            data.X,
            targets,
            ProjectionContext(basis, h),
            spec,
            per_point_targets=True,
            widen_until_ok=True,
            min_eig_ratio=LOCAL_FIT_EIG_RATIO,
        )
        U[:, j] = values[:, 0]
    model = MarginModel("nonparametric", bases=(bases[0], bases[1]), h=h, b=b)
    return model, _clamp_unit(U, n)


def pseudo_observations(
    data: Dataset,
    mode: str,
    *,
    d_margin: int = DEFAULT_MARGIN_DIM,
    spec: KernelSpec = KernelSpec(),
    trim_q: float = 0.05,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Dispatch to the requested margin regime, returning the (n, 2) uniforms."""
    if mode == "known":
        return margins_known(data)
    if mode == "parametric":
        return margins_parametric(data)[1]
    if mode == "nonparametric":
        return margins_nonparametric(
            data, d_margin=d_margin, spec=spec, trim_q=trim_q, tol=tol, max_iter=max_iter
        )[1]
    raise ContractViolation(f"unknown margin mode {mode!r}")
