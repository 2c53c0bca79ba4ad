"""Dense symmetric linear algebra primitives.

Everything downstream (local-linear fits, gradient outer products, subspace
extraction) reduces to four operations implemented here: symmetric
eigendecomposition with a deterministic sign convention, an eigen-truncated
pseudo-inverse, a weighted least-squares solve through the normal equations,
and the projector-distance metric between subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateNeighborhood

#: Relative eigenvalue threshold below which a symmetric matrix is treated as
#: rank deficient (pseudo-inverse truncation and the automatic ridge trigger).
PINV_REL_TOL = 1e-10

_SYM_TOL = 1e-10
_ORTHO_TOL = 1e-8
_AUTO_RIDGE_FACTOR = 1e-8


def _as_square_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} must have finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > _SYM_TOL * scale:
        raise ContractViolation(f"{name} must be symmetric within {_SYM_TOL:g}")
    return a


def orient_columns(v: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's first nonzero entry is positive.

    This is the deterministic orientation convention used for eigenvectors
    and subspace bases; using the first *nonzero* entry avoids ambiguity when
    a leading component is exactly zero (e.g. for coordinate subspaces).
    """
    v = np.array(v, dtype=float, copy=True)
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0.0:
            v[:, j] = -col
    return v


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending.

    Column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``; columns
    are orthonormal and sign-oriented via :func:`orient_columns`.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SubspaceBasis:
    """Column-orthonormal, sign-oriented basis of a linear subspace."""

    basis: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1 or b.shape[1] > b.shape[0]:
            raise ContractViolation(f"basis must be p x d with 1 <= d <= p, got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ContractViolation("basis entries must be finite")
        gram = b.T @ b
        if np.abs(gram - np.eye(b.shape[1])).max() > _SYM_TOL:
            raise ContractViolation("basis columns must be orthonormal within 1e-10")
        for j in range(b.shape[1]):
            nz = np.flatnonzero(b[:, j])
            if nz.size and b[nz[0], j] < 0.0:
                raise ContractViolation("basis columns must have non-negative first nonzero entry")
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_columns(cls, columns: np.ndarray) -> "SubspaceBasis":
        """Build a basis from orthonormal columns, applying the orientation."""
        return cls(orient_columns(np.asarray(columns, dtype=float)))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def eig_sym(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, descending and oriented."""
    a = _as_square_symmetric(a)
    vals, vecs = np.linalg.eigh(a)
    return EigenDecomposition(vals[::-1].copy(), orient_columns(vecs[:, ::-1]))


def pinv_sym(a: np.ndarray, rel_tol: float = PINV_REL_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigen truncation.

    Eigenvalues with ``|lam| <= rel_tol * max|lam|`` are treated as zero,
    all others are inverted. The result is exactly symmetric.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ContractViolation(f"rel_tol must lie in (0, 1), got {rel_tol!r}")
    dec = eig_sym(a)
    lam = dec.eigenvalues
    cutoff = rel_tol * (np.abs(lam).max() if lam.size else 0.0)
    inv = np.where(np.abs(lam) > cutoff, 1.0 / np.where(lam == 0.0, 1.0, lam), 0.0)
    out = (dec.eigenvectors * inv) @ dec.eigenvectors.T
    return (out + out.T) / 2.0


def solve_normal_eq(
    s: np.ndarray,
    rhs: np.ndarray,
    ridge: float | None = None,
    rel_tol: float = PINV_REL_TOL,
) -> np.ndarray:
    """Solve stacked normal-equation systems ``s @ beta = rhs``.

    Parameters
    ----------
    s : (..., k, k) ndarray
        Symmetric normal matrices. By convention the first design column is
        the intercept; ridge augmentation never touches it.
    rhs : (..., k) or (..., k, g) ndarray
        Right-hand sides; multiple targets share the same factorization.
    ridge : float or None
        ``None`` applies the automatic policy: systems that are numerically
        singular (smallest eigenvalue ``<= rel_tol * max|lam|``) get a ridge
        of ``1e-8 * trace(s) / k`` added to the non-intercept diagonal. An
        explicit value is applied to every system unconditionally.

    The solve itself is the eigen-truncated pseudo-inverse with threshold
    ``rel_tol``, applied to the (possibly ridge-augmented) normal matrix.
    """
    s = np.asarray(s, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    squeeze = rhs.ndim == s.ndim - 1
    if squeeze:
        rhs = rhs[..., None]
    k = s.shape[-1]

    if ridge is not None:
        if ridge < 0.0:
            raise ContractViolation(f"ridge must be >= 0, got {ridge!r}")
        if ridge > 0.0:
            s = s.copy()
            idx = np.arange(1, k)
            s[..., idx, idx] += ridge

    vals, vecs = np.linalg.eigh(s)
    lam_max = np.abs(vals).max(axis=-1)
    if ridge is None:
        singular = vals[..., 0] <= rel_tol * lam_max
        if np.any(singular):
            s = s.copy()
            auto = _AUTO_RIDGE_FACTOR * np.trace(s, axis1=-2, axis2=-1) / k
            idx = np.arange(1, k)
            sel = np.broadcast_to(singular[..., None], s[..., idx, idx].shape)
            diag = s[..., idx, idx]
            diag = diag + np.where(sel, auto[..., None], 0.0)
            s[..., idx, idx] = diag
            vals, vecs = np.linalg.eigh(s)
            lam_max = np.abs(vals).max(axis=-1)

    cutoff = (rel_tol * lam_max)[..., None]
    safe = np.where(vals == 0.0, 1.0, vals)
    inv = np.where(np.abs(vals) > cutoff, 1.0 / safe, 0.0)
    beta = vecs @ (inv[..., None] * (np.swapaxes(vecs, -2, -1) @ rhs))
    return beta[..., 0] if squeeze else beta


def weighted_ls(
    design: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    ridge: float | None = None,
) -> np.ndarray:
    """Weighted least squares via the (pseudo-inverted) normal equations.

    Minimizes ``sum_i w_i (t_i - beta' d_i)^2 + ridge * ||beta[1:]||^2``; the
    ridge excludes the intercept, which must be the first design column. See
    :func:`solve_normal_eq` for the automatic ridge policy when ``ridge`` is
    ``None``.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if design.ndim != 2 or targets.shape != (design.shape[0],) or weights.shape != targets.shape:
        raise ContractViolation("design (n,k), targets (n,), weights (n,) required")
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise ContractViolation("weights must be finite and non-negative")
    if not np.any(weights > 0.0):
        raise DegenerateNeighborhood("all weights are zero")
    wd = design * weights[:, None]
    s = design.T @ wd
    s = (s + s.T) / 2.0
    rhs = design.T @ (weights * targets)
    return solve_normal_eq(s, rhs, ridge=ridge)


def _basis_matrix(b, name: str) -> np.ndarray:
    m = b.basis if isinstance(b, SubspaceBasis) else np.asarray(b, dtype=float)
    if m.ndim != 2:
        raise ContractViolation(f"{name} must be a p x d matrix")
    gram = m.T @ m
    if np.abs(gram - np.eye(m.shape[1])).max() > _ORTHO_TOL:
        raise ContractViolation(f"{name} must have orthonormal columns")
    return m


def subspace_distance(b1, b2) -> float:
    """Operator-norm distance between the projectors of two subspaces.

    ``||P1 - P2||_2`` with ``P = B B'``; symmetric in its arguments and
    invariant to right-multiplication of either basis by an orthogonal
    matrix. Lies in [0, 1] for subspaces of equal dimension.
    """
    m1 = _basis_matrix(b1, "first basis")
    m2 = _basis_matrix(b2, "second basis")
    if m1.shape[0] != m2.shape[0]:
        raise ContractViolation(
            f"ambient dimensions differ: {m1.shape[0]} vs {m2.shape[0]}"
        )
    diff = m1 @ m1.T - m2 @ m2.T
    return float(np.linalg.norm(diff, 2))
