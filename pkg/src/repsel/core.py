"""Domain types shared across the package: universes, rankings, choices, and
model parameters with their gauge conventions.

Items are dense integer indices into a universe of size n; labels are
presentation-only. Rankings may be full (length n) or top-k (length < n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import numpy.typing as npt

__all__ = [
    "Universe",
    "Ranking",
    "ChoiceObservation",
    "RankingDataset",
    "PLParams",
    "CRSFullParams",
    "CRSFactorParams",
    "MallowsParams",
    "ModelParams",
    "ValidationIssue",
    "ValidationReport",
    "pair_index",
    "pair_unindex",
    "validate_dataset",
]


@dataclass(frozen=True)
class Universe:
    """A finite collection of n items, optionally labeled for display."""

    n: int
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"universe needs at least 2 items, got n={self.n}")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.n:
                raise ValueError(
                    f"got {len(labels)} labels for a universe of {self.n} items"
                )
            object.__setattr__(self, "labels", labels)

    def label(self, item: int) -> str:
        if self.labels is not None:
            return self.labels[item]
        return str(item)


@dataclass(frozen=True)
class Ranking:
    """An ordered, duplicate-free sequence of item indices.

    Position 0 is rank 1. A length shorter than ``universe_n`` marks a top-k
    ranking: the listed items are the first k, everything else is unranked.
    ``weight`` is an integer multiplicity, so repeated ballots need not be
    materialized.
    """

    items: tuple[int, ...]
    universe_n: int
    weight: int = 1

    def __post_init__(self) -> None:
        items = tuple(int(x) for x in self.items)
        object.__setattr__(self, "items", items)
        if not 1 <= len(items) <= self.universe_n:
            raise ValueError(
                f"ranking length {len(items)} outside [1, {self.universe_n}]"
            )
        if len(set(items)) != len(items):
            raise ValueError(f"duplicate item in ranking {items}")
        for x in items:
            if not 0 <= x < self.universe_n:
                raise ValueError(f"item {x} out of range for n={self.universe_n}")
        if self.weight < 1:
            raise ValueError(f"ranking weight must be positive, got {self.weight}")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def is_full(self) -> bool:
        return len(self.items) == self.universe_n


@dataclass(frozen=True)
class ChoiceObservation:
    """A single choice: ``winner`` picked out of ``choice_set``.

    The choice set is stored sorted; it must contain the winner and at least
    one alternative.
    """

    winner: int
    choice_set: tuple[int, ...]

    def __post_init__(self) -> None:
        cs = tuple(sorted(int(x) for x in self.choice_set))
        object.__setattr__(self, "choice_set", cs)
        object.__setattr__(self, "winner", int(self.winner))
        if len(set(cs)) != len(cs):
            raise ValueError(f"duplicate item in choice set {cs}")
        if len(cs) < 2:
            raise ValueError(f"choice set {cs} has fewer than 2 items")
        if self.winner not in cs:
            raise ValueError(f"winner {self.winner} not in choice set {cs}")


@dataclass(frozen=True)
class RankingDataset:
    """A universe together with a weighted multiset of rankings."""

    universe: Universe
    rankings: tuple[Ranking, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rankings", tuple(self.rankings))

    @property
    def num_rankings(self) -> int:
        """Total weighted ranking count (the sample size ell)."""
        return sum(r.weight for r in self.rankings)


# --- model parameters -------------------------------------------------------


@dataclass(frozen=True)
class PLParams:
    """Plackett-Luce utilities theta, one per item.

    The softmax gauge is fixed by centering: fitted vectors sum to zero.
    """

    theta: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.shape[0] < 2:
            raise ValueError(f"theta must be a vector of length >= 2, got {theta.shape}")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def centered(self) -> "PLParams":
        return PLParams(self.theta - self.theta.mean())


@dataclass(frozen=True)
class CRSFullParams:
    """Full CDM/CRS pairwise interactions.

    ``u`` is a flat vector of length n(n-1) over ordered pairs (x, z), x != z,
    row-major over x with the diagonal slot skipped (see :func:`pair_index`).
    The single gauge is global: fitted vectors sum to zero.
    """

    u: npt.NDArray[np.float64]
    n: int

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if u.shape != (self.n * (self.n - 1),):
            raise ValueError(
                f"u has shape {u.shape}, expected ({self.n * (self.n - 1)},) for n={self.n}"
            )
        object.__setattr__(self, "u", u)

    def centered(self) -> "CRSFullParams":
        return CRSFullParams(self.u - self.u.mean(), self.n)

    def as_matrix(self) -> npt.NDArray[np.float64]:
        """Dense n x n matrix U with U[x, z] = u_{xz} and a zero diagonal."""
        n = self.n
        mat = np.zeros((n, n))
        mask = ~np.eye(n, dtype=bool)
        mat[mask] = self.u
        return mat


@dataclass(frozen=True)
class CRSFactorParams:
    """Rank-r factorization of the CDM interactions: u_{xz} = c_z . t_x."""

    T: npt.NDArray[np.float64]
    C: npt.NDArray[np.float64]
    r: int

    def __post_init__(self) -> None:
        T = np.asarray(self.T, dtype=np.float64)
        C = np.asarray(self.C, dtype=np.float64)
        if self.r < 1:
            raise ValueError(f"rank must be >= 1, got {self.r}")
        if T.ndim != 2 or C.ndim != 2 or T.shape != C.shape or T.shape[1] != self.r:
            raise ValueError(
                f"T and C must both be n x r, got {T.shape} and {C.shape} with r={self.r}"
            )
        if T.shape[0] < 2:
            raise ValueError(f"need n >= 2 items, got {T.shape[0]}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def induced_full(self) -> CRSFullParams:
        """The full interaction vector u_{xz} = c_z . t_x this factorization induces."""
        mat = self.T @ self.C.T  # mat[x, z] = t_x . c_z
        n = self.n
        mask = ~np.eye(n, dtype=bool)
        return CRSFullParams(mat[mask].copy(), n)


@dataclass(frozen=True)
class MallowsParams:
    """Mallows model: reference permutation sigma0 and concentration theta_c >= 0."""

    sigma0: tuple[int, ...]
    theta_c: float

    def __post_init__(self) -> None:
        sigma0 = tuple(int(x) for x in self.sigma0)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "theta_c", float(self.theta_c))
        if sorted(sigma0) != list(range(len(sigma0))):
            raise ValueError(f"sigma0 {sigma0} is not a permutation of 0..n-1")
        if self.theta_c < 0:
            raise ValueError(f"theta_c must be >= 0, got {self.theta_c}")

    @property
    def n(self) -> int:
        return len(self.sigma0)

    def positions(self) -> npt.NDArray[np.int64]:
        """positions()[x] is the rank position of item x under sigma0."""
        pos = np.empty(self.n, dtype=np.int64)
        for rank, item in enumerate(self.sigma0):
            pos[item] = rank
        return pos


ModelParams = Union[PLParams, CRSFullParams, CRSFactorParams, MallowsParams]


def params_n(params: ModelParams) -> int:
    """Universe size a parameter object is dimensioned for."""
    return params.n


# --- pair indexing ----------------------------------------------------------


def pair_index(x: int, z: int, n: int) -> int:
    """Flat index of the ordered pair (x, z) in the n(n-1) interaction vector.

    Row-major over x, skipping the diagonal slot z = x: row x holds the n-1
    pairs (x, 0), ..., (x, n-1) with (x, x) removed.
    """
    if not (0 <= x < n and 0 <= z < n):
        raise ValueError(f"pair ({x}, {z}) out of range for n={n}")
    if x == z:
        raise ValueError(f"pair ({x}, {z}) is diagonal; interactions need x != z")
    return x * (n - 1) + z - (1 if z > x else 0)


def pair_unindex(idx: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    if not 0 <= idx < n * (n - 1):
        raise ValueError(f"flat index {idx} out of range for n={n}")
    x, col = divmod(idx, n - 1)
    z = col if col < x else col + 1
    return x, z


# --- dataset validation -----------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    ranking_index: Optional[int]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    num_rankings: int
    issues: tuple[ValidationIssue, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok


def validate_dataset(
    universe: Universe, rankings: Sequence[Sequence[int]], weights: Optional[Sequence[int]] = None
) -> ValidationReport:
    """Report-style validation of raw ranking rows against a universe.

    Unlike the ``Ranking`` constructor this never raises; it collects every
    violation (duplicates, out-of-range indices, bad weights, empty input)
    so callers can surface them all at once.
    """
    issues: list[ValidationIssue] = []
    n = universe.n
    if weights is not None and len(weights) != len(rankings):
        issues.append(ValidationIssue(None, "weights length does not match rankings"))
        weights = None
    total = 0
    for i, row in enumerate(rankings):
        row = list(row)
        w = 1 if weights is None else int(weights[i])
        if w < 1:
            issues.append(ValidationIssue(i, f"weight {w} is not positive"))
        if not 1 <= len(row) <= n:
            issues.append(
                ValidationIssue(i, f"length {len(row)} outside [1, {n}]")
            )
        seen: set[int] = set()
        for x in row:
            if not 0 <= x < n:
                issues.append(ValidationIssue(i, f"index out of range: {x}"))
            elif x in seen:
                issues.append(ValidationIssue(i, f"duplicate item: {x}"))
            seen.add(x)
        total += max(w, 0)
    if not rankings:
        issues.append(ValidationIssue(None, "empty dataset"))
    return ValidationReport(ok=not issues, num_rankings=total, issues=tuple(issues))


def dataset_from_rows(
    universe: Universe, rows: Sequence[Sequence[int]], weights: Optional[Sequence[int]] = None
) -> RankingDataset:
    """Build a RankingDataset from raw rows, raising on the first violation."""
    rankings = tuple(
        Ranking(tuple(row), universe.n, 1 if weights is None else int(weights[i]))
        for i, row in enumerate(rows)
    )
    if not rankings:
        raise ValueError("empty dataset")
    return RankingDataset(universe, rankings)
