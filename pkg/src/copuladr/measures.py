"""Pseudo-response functions turning pseudo-observations into regression targets.

Each dependence summary corresponds to a function g on the unit square; the
per-observation values g(u1_i, u2_i) are the targets whose gradient outer
products identify the dependence subspace. Grid kinds produce one target
vector per grid element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import MEASURE_KINDS
from .errors import ContractViolation

DEFAULT_INDICATOR_GRID = tuple((a, b) for a in (0.25, 0.5, 0.75) for b in (0.25, 0.5, 0.75))
DEFAULT_MOMENT_GRID = ((1, 1), (1, 2), (2, 1), (2, 2))


@dataclass(frozen=True)
class PseudoResponses:
    """One target vector (length n) per function in the family, plus labels."""

    targets: tuple
    labels: tuple

    def __post_init__(self) -> None:
        if len(self.targets) < 1 or len(self.targets) != len(self.labels):
            raise ContractViolation("need at least one labeled target vector")
        arrays = tuple(np.asarray(t, dtype=float) for t in self.targets)
        n = arrays[0].shape[0] if arrays[0].ndim == 1 else -1
        for a in arrays:
            if a.ndim != 1 or a.shape[0] != n:
                raise ContractViolation("all target vectors must share length n")
            if not np.all(np.isfinite(a)):
                raise ContractViolation("target values must be finite")
        object.__setattr__(self, "targets", arrays)

    @property
    def n(self) -> int:
        return self.targets[0].shape[0]

    def matrix(self) -> np.ndarray:
        """Targets stacked as an (n, |family|) matrix."""
        return np.column_stack(self.targets)


def g_spearman(u1, u2):
    """12 (u1 - 1/2)(u2 - 1/2); range [-3, 3]."""
    return 12.0 * (np.asarray(u1, dtype=float) - 0.5) * (np.asarray(u2, dtype=float) - 0.5)


def g_blomqvist(u1, u2):
    """1 - 4 * 1(u1 <= 1/2, u2 <= 1/2); values in {-3, 1}."""
    ind = (np.asarray(u1, dtype=float) <= 0.5) & (np.asarray(u2, dtype=float) <= 0.5)
    return 1.0 - 4.0 * ind


def g_gini(u1, u2):
    """2 (|u1 + u2 - 1| - |u1 - u2|); range [-2, 2]."""
    a = np.asarray(u1, dtype=float)
    b = np.asarray(u2, dtype=float)
    return 2.0 * (np.abs(a + b - 1.0) - np.abs(a - b))


def g_waerden(u1, u2):
    """Product of standard normal quantiles; requires inputs strictly in (0, 1)."""
    a = np.asarray(u1, dtype=float)
    b = np.asarray(u2, dtype=float)
    if np.any(a <= 0.0) or np.any(a >= 1.0) or np.any(b <= 0.0) or np.any(b >= 1.0):
        raise ContractViolation("van der Waerden targets need inputs strictly inside (0, 1)")
    return ndtri(a) * ndtri(b)


def g_tau_kernel(u1, u2, ub1, ub2):
    """Concordance kernel 4 * 1(u1 <= ub1, u2 <= ub2) - 1 on two copula draws.

    Provided as a pure function only; the corresponding estimator needs
    conditionally independent copies and is not part of this package.
    """
    ind = (np.asarray(u1, dtype=float) <= np.asarray(ub1, dtype=float)) & (
        np.asarray(u2, dtype=float) <= np.asarray(ub2, dtype=float)
    )
    return 4.0 * ind - 1.0


_SINGLETONS = {
    "spearman": g_spearman,
    "blomqvist": g_blomqvist,
    "gini": g_gini,
    "waerden": g_waerden,
}


def build_pseudo_responses(kind: str, U: np.ndarray, grid=None) -> PseudoResponses:
    """Targets for a measure kind from (n, 2) pseudo-observations.

    Grid kinds default to the 3x3 interior lattice {0.25, 0.5, 0.75}^2
    (indicators) or the exponent pairs {1, 2}^2 (moments, both exponents
    >= 1 so the targets actually depend on the joint law).
    """
    if kind not in MEASURE_KINDS:
        raise ContractViolation(f"unknown measure kind {kind!r}")
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] != 2:
        raise ContractViolation("pseudo-observations must have shape (n, 2)")
    u1, u2 = U[:, 0], U[:, 1]

    if kind in _SINGLETONS:
        return PseudoResponses((_SINGLETONS[kind](u1, u2),), (kind,))

    if grid is None:
        grid = DEFAULT_INDICATOR_GRID if kind == "indicator_grid" else DEFAULT_MOMENT_GRID
    grid = tuple(tuple(g) for g in grid)
    if len(grid) == 0:
        raise ContractViolation(f"{kind} requires a nonempty grid")

    targets, labels = [], []
    if kind == "indicator_grid":
        for a, b in grid:
            targets.append(((u1 <= a) & (u2 <= b)).astype(float))
            labels.append(f"ind({a:g},{b:g})")
    else:
        for k1, k2 in grid:
            if k1 < 1 or k2 < 1:
                raise ContractViolation("moment grid exponents must both be >= 1")
            targets.append(u1**k1 * u2**k2)
            labels.append(f"mom({k1},{k2})")
    return PseudoResponses(tuple(targets), tuple(labels))
