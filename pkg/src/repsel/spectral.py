"""Spectral identifiability diagnostics.

Two PSD matrices summarize how thoroughly a choice dataset covers the
parameter space:

* the comparison Laplacian L (n x n) for MNL/PL - the weighted graph
  Laplacian accumulated from choice-set cliques; lambda_2(L) > 0 iff the
  comparison graph is connected, and its size enters the PL risk bounds;
* the design Gram G (n(n-1) x n(n-1)) for the CDM - lambda_2(G) > 0
  certifies identifiability of the pairwise interactions up to the global
  shift gauge.

Eigenvalues come from the in-repo cyclic Jacobi solver, so certificates do
not depend on platform LAPACK builds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .backends import get_kernels
from .core import Ranking, RankingDataset, Universe, pair_index
from .decompose import ChoiceDataset, repeated_selection

__all__ = [
    "SpectralCertificate",
    "BoundCheck",
    "DimensionGuardError",
    "build_pl_laplacian",
    "build_cdm_gram",
    "lambda2",
    "symmetric_eigenvalues",
    "certify",
    "alpha_b",
    "crs_gram_floor",
    "delta_certificate_dataset",
    "delta_closed_form_lambda2",
    "CDM_GRAM_MAX_DIM",
    "CONNECTIVITY_EPS",
]

CDM_GRAM_MAX_DIM = 1024
CONNECTIVITY_EPS = 1e-8
MATRIX_KINDS = ("pl_laplacian", "pl_laplacian_hat", "cdm_gram")


class DimensionGuardError(ValueError):
    """A requested matrix exceeds the desk-scale dimension guard."""


@dataclass(frozen=True)
class BoundCheck:
    name: str
    bound_value: float
    holds: bool


@dataclass(frozen=True)
class SpectralCertificate:
    matrix_kind: str
    dim: int
    lambda2: float
    lambda_max: float
    connected_or_identified: bool
    bound_checks: tuple[BoundCheck, ...]

    def __post_init__(self) -> None:
        if self.matrix_kind not in MATRIX_KINDS:
            raise ValueError(f"matrix_kind must be one of {MATRIX_KINDS}")
        if self.lambda2 < -1e-9:
            raise ValueError(f"lambda2 {self.lambda2} below the numerical zero floor")


def build_pl_laplacian(cds: ChoiceDataset, scaled: bool = False) -> npt.NDArray[np.float64]:
    """Comparison Laplacian of the choice sets.

    Each observation over a set S of size k adds the clique Laplacian
    k I - 1 1^T on the rows and columns of S (times its weight, and times
    1/k when ``scaled``); the total is divided by the weighted observation
    count m. ``scaled=True`` builds the variant whose quadratic form matches
    the (1/m)-normalized design Gram of the MNL embedding.
    """
    if cds.num_observations == 0:
        raise ValueError("cannot build a Laplacian from an empty choice dataset")
    n = cds.universe.n
    L = np.zeros((n, n))
    sizes = np.diff(cds.set_offsets)
    for k in np.unique(sizes):
        idx = np.nonzero(sizes == k)[0]
        starts = cds.set_offsets[idx]
        items = cds.set_items[starts[:, None] + np.arange(int(k))[None, :]]
        w = cds.weights[idx] * (1.0 / k if scaled else 1.0)
        # off-diagonal -1 per ordered pair within S, diagonal k - 1
        pair_w = np.broadcast_to(w[:, None, None], (len(idx), int(k), int(k)))
        np.add.at(L, (items[:, :, None], items[:, None, :]), -pair_w)
        np.add.at(L, (items, items), np.broadcast_to((w * k)[:, None], items.shape))
    return L / cds.total_weight


def build_cdm_gram(cds: ChoiceDataset) -> npt.NDArray[np.float64]:
    """Design-matrix Gram of the CDM embedding, (1/m) X^T X.

    An observation over S of size k contributes E_S M_k E_S^T where
    M_k = I - (1/k) 1 1^T acts on the set members and E_S maps member y to
    its pair slots (y, z), z in S \\ y. Block-wise that is M_k[a, c] spread
    uniformly over slots(a) x slots(c), which is exactly
    kron(M_k, ones(k-1, k-1)) scattered through the slot index.
    """
    if cds.num_observations == 0:
        raise ValueError("cannot build a Gram from an empty choice dataset")
    n = cds.universe.n
    d = n * (n - 1)
    if d > CDM_GRAM_MAX_DIM:
        raise DimensionGuardError(
            f"CDM Gram dimension n(n-1) = {d} exceeds the guard {CDM_GRAM_MAX_DIM}"
        )
    G = np.zeros((d, d))
    for j in range(cds.num_observations):
        members = cds.choice_set(j)
        k = len(members)
        slots = np.array(
            [[pair_index(int(a), int(z), n) for z in members if z != a] for a in members]
        ).ravel()
        M = np.eye(k) - np.full((k, k), 1.0 / k)
        block = np.kron(M, np.ones((k - 1, k - 1)))
        G[np.ix_(slots, slots)] += cds.weights[j] * block
    return G / cds.total_weight


def symmetric_eigenvalues(matrix: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """All eigenvalues of a symmetric matrix, ascending (in-repo Jacobi)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"need a square matrix, got shape {matrix.shape}")
    if np.abs(matrix - matrix.T).max() > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    return get_kernels().jacobi_eigvalsh(matrix)


def lambda2(matrix: npt.NDArray[np.float64]) -> float:
    """Second-smallest eigenvalue (algebraic connectivity for Laplacians)."""
    eig = symmetric_eigenvalues(matrix)
    if len(eig) < 2:
        raise ValueError("lambda2 needs a matrix of dimension >= 2")
    return float(eig[1])


def alpha_b(B: float) -> float:
    """The B-dependent constant in the probabilistic PL Laplacian floor."""
    return 1.0 / (4.0 * (1.0 + 2.0 * np.exp(3.0 * B)))


def crs_gram_floor(n: int, B: float) -> float:
    """Crude deterministic-style floor for the CDM Gram's lambda_2."""
    return 1.0 / (4.0 * n**3 * (n - 1) * np.exp(2.0 * B))


def certify(
    ds: RankingDataset, model_kind: str, B: float = 1.5, scaled: bool = False
) -> SpectralCertificate:
    """Build the spectral certificate for a dataset under one model family.

    ``model_kind`` "pl" examines the comparison Laplacian; "crs" (or "cdm")
    the design Gram. Bound lines are conditional on the supplied parameter
    bound B. A bound line's ``holds`` records whether this dataset clears
    it; probabilistic bounds may legitimately fail on unlucky draws.
    """
    cds = repeated_selection(ds)
    n = ds.universe.n
    if model_kind == "pl":
        mat = build_pl_laplacian(cds, scaled=scaled)
        kind = "pl_laplacian_hat" if scaled else "pl_laplacian"
    elif model_kind in ("crs", "cdm", "crs_full"):
        mat = build_cdm_gram(cds)
        kind = "cdm_gram"
    else:
        raise ValueError(f"unknown model_kind {model_kind!r} for certification")
    eig = symmetric_eigenvalues(mat)
    lam2 = float(eig[1])
    lam_max = float(eig[-1])
    tol = 1e-9
    if kind == "cdm_gram":
        floor = crs_gram_floor(n, B)
        checks = (BoundCheck("lambda2_ge_crs_gram_floor", float(floor), lam2 >= floor - tol),)
    else:
        crude = n / (n - 1)
        floor = alpha_b(B) * n
        checks = (
            BoundCheck("lambda2_ge_n_over_n_minus_1", float(crude), lam2 >= crude - tol),
            BoundCheck("lambda2_ge_alpha_b_n", float(floor), lam2 >= floor - tol),
        )
    return SpectralCertificate(
        matrix_kind=kind,
        dim=mat.shape[0],
        lambda2=lam2,
        lambda_max=lam_max,
        connected_or_identified=lam2 > CONNECTIVITY_EPS,
        bound_checks=checks,
    )


def delta_certificate_dataset(n: int) -> RankingDataset:
    """The deterministic dataset whose CDM Gram has a closed-form lambda_2.

    n top-2 rankings, one starting at each item, decompose into the full
    universe set (n times) plus every (n-1)-subset once - 2n observations
    whose Gram is (1/2) E_X M_n E_X^T + (1/2n) sum_x E_{X\\x} M_{n-1} E_{X\\x}^T.
    """
    if n < 3:
        raise ValueError(f"the construction needs n >= 3, got n={n}")
    universe = Universe(n)
    rankings = tuple(Ranking((x, (x + 1) % n), n) for x in range(n))
    return RankingDataset(universe, rankings)


def delta_closed_form_lambda2(n: int) -> float:
    """Closed-form lambda_2 of the Gram of :func:`delta_certificate_dataset`.

    The quadratic-root eigenvalue lambda divided by 2n; it exceeds the
    simple floor 1/(4 n^3) for every n >= 3.
    """
    beta = (
        4 * n**6 - 28 * n**5 + 81 * n**4 - 116 * n**3 + 74 * n**2 - 12 * n + 1
    )
    lam = (2 * n**3 - 7 * n**2 + 8 * n - 1 - np.sqrt(beta)) / (2 * (n - 1))
    return float(lam / (2 * n))
