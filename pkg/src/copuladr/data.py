"""Scenario and dataset containers, CSV round-trip, and RNG stream derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

COPULA_FAMILIES = ("gaussian", "clayton")
MEASURE_KINDS = ("spearman", "blomqvist", "gini", "waerden", "indicator_grid", "moment_grid")
MARGIN_MODES = ("known", "parametric", "nonparametric")
METHODS = ("par", "opg1", "opga")

#: Zero-based covariate indices driving the conditional means of y1 and y2.
MARGIN1_ACTIVE = (3, 4)
MARGIN2_ACTIVE = (1, 3)


def coordinate_basis(p: int, indices) -> np.ndarray:
    """p x len(indices) matrix whose columns are standard basis vectors."""
    idx = list(indices)
    out = np.zeros((p, len(idx)))
    for j, i in enumerate(idx):
        out[i, j] = 1.0
    return out


@dataclass(frozen=True)
class GroundTruth:
    """True subspace bases of the generative model (columns of e_j's)."""

    copula: np.ndarray
    margin1: np.ndarray
    margin2: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """One simulation cell: design, dependence, estimation route, and seed."""

    n: int
    p: int
    d: int
    alpha: float
    copula: str = "gaussian"
    measure: str = "spearman"
    margins: str = "known"
    method: str = "opga"
    replicate: int = 0
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ContractViolation(f"n must be >= 2, got {self.n}")
        if self.p < 5:
            raise ContractViolation(
                f"p must be >= 5 (the generative model uses x2, x4, x5), got {self.p}"
            )
        if not 1 <= self.d <= self.p:
            raise ContractViolation(f"need 1 <= d <= p, got d={self.d}, p={self.p}")
        if not self.alpha >= 0.0:
            raise ContractViolation(f"alpha must be >= 0, got {self.alpha!r}")
        if self.copula not in COPULA_FAMILIES:
            raise ContractViolation(f"unknown copula family {self.copula!r}")
        if self.measure not in MEASURE_KINDS:
            raise ContractViolation(f"unknown measure {self.measure!r}")
        if self.margins not in MARGIN_MODES:
            raise ContractViolation(f"unknown margin mode {self.margins!r}")
        if self.method not in METHODS:
            raise ContractViolation(f"unknown method {self.method!r}")
        if self.replicate < 0:
            raise ContractViolation("replicate index must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ContractViolation("master_seed must be an unsigned 64-bit integer")


@dataclass
class Dataset:
    """Covariates, bivariate responses, and (for generated data) oracle uniforms."""

    X: np.ndarray
    Y: np.ndarray
    U_true: np.ndarray | None = None
    truth: GroundTruth | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.shape != (self.X.shape[0], 2):
            raise ContractViolation("X must be (n,p) and Y must be (n,2)")
        if self.U_true is not None:
            self.U_true = np.asarray(self.U_true, dtype=float)
            if self.U_true.shape != self.Y.shape:
                raise ContractViolation("U_true must be (n,2)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def replicate_key(scenario: Scenario) -> str:
    """Canonical string hashed into the replicate's RNG stream.

    The estimation method is deliberately excluded so that all methods see
    the same data within a replicate (paired comparisons).
    """
    return "|".join(
        [
            str(scenario.n),
            str(scenario.p),
            str(scenario.d),
            repr(float(scenario.alpha)),
            scenario.copula,
            scenario.measure,
            scenario.margins,
            str(scenario.replicate),
        ]
    )


def _key_words(scenario: Scenario) -> list[int]:
    digest = hashlib.sha256(replicate_key(scenario).encode("utf-8")).digest()
    return [int.from_bytes(digest[4 * i : 4 * i + 4], "little") for i in range(4)]


def replicate_seed(scenario: Scenario) -> int:
    """Unsigned 64-bit identifier of the replicate stream (reported in results)."""
    digest = hashlib.sha256(replicate_key(scenario).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def replicate_rng(scenario: Scenario) -> np.random.Generator:
    """Deterministic PCG64 stream from (master_seed, scenario fields, replicate).

    Entropy is the master seed followed by the first four little-endian
    uint32 words of sha256(replicate_key).
    """
    ss = np.random.SeedSequence([scenario.master_seed, *_key_words(scenario)])
    return np.random.default_rng(ss)


def write_dataset_csv(path, data: Dataset) -> None:
    """Write ``x1..xp,y1,y2[,u1,u2]`` with 17 significant digits (exact round-trip)."""
    cols = [f"x{j + 1}" for j in range(data.p)] + ["y1", "y2"]
    blocks = [data.X, data.Y]
    if data.U_true is not None:
        cols += ["u1", "u2"]
        blocks.append(data.U_true)
    table = np.hstack(blocks)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_dataset_csv(path) -> Dataset:
    """Parse a dataset CSV written by :func:`write_dataset_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",") if header else []
        p = sum(1 for c in names if c.startswith("x"))
        has_u = names[-2:] == ["u1", "u2"]
        expected = [f"x{j + 1}" for j in range(p)] + ["y1", "y2"] + (["u1", "u2"] if has_u else [])
        if p < 1 or names != expected:
            raise ContractViolation(f"malformed dataset header: {header!r}")
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ContractViolation(f"malformed dataset rows: {exc}") from exc
    if table.shape[0] < 1 or table.shape[1] != len(expected):
        raise ContractViolation("dataset rows do not match header")
    X = table[:, :p]
    Y = table[:, p : p + 2]
    U = table[:, p + 2 : p + 4] if has_u else None
    return Dataset(X=X, Y=Y, U_true=U)
