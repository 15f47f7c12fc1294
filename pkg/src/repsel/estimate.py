"""Maximum-likelihood fitting.

PL and full CRS have convex choice-decomposition objectives and start at
zero; factorized CRS starts at small random embeddings (zero is a saddle of
the factorization). All three run Adam, full-batch by default. The softmax
gauge is never projected during optimization - the objective is invariant
to constant shifts, so iterates drift harmlessly - and a single centering
at the end pins the zero-sum convention.

Mallows is fit by the greedy reference construction over pairwise counts
followed by a one-dimensional bracketed search for the concentration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from .backends import get_kernels
from .core import (
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    ModelParams,
    PLParams,
    RankingDataset,
)
from .decompose import ChoiceDataset, repeated_selection

__all__ = [
    "FitConfig",
    "FitReport",
    "DivergenceError",
    "nll_and_grad",
    "fit",
    "fit_mallows",
    "mga_reference",
    "pairwise_count_matrix",
    "MODEL_KINDS",
]

MODEL_KINDS = ("pl", "crs_full", "crs_factor", "mallows")


class DivergenceError(RuntimeError):
    """The objective became non-finite during optimization."""


@dataclass(frozen=True)
class FitConfig:
    """Adam hyperparameters and fitting protocol knobs.

    Defaults are the canonical Adam settings (learning rate 0.001, betas
    0.9/0.999, epsilon 1e-8) with 10 full-batch epochs. ``rank`` is required
    for factorized CRS; ``init_scale`` is the standard deviation of its
    random initialization.
    """

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 10
    batch_size: Union[int, str] = "full"
    seed: int = 0
    init_scale: float = 0.1
    rank: Optional[int] = None

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size != "full" and (
            not isinstance(self.batch_size, int) or self.batch_size < 1
        ):
            raise ValueError(f"batch_size must be a positive int or 'full', got {self.batch_size!r}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {self.init_scale}")
        if self.rank is not None and self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class FitReport:
    """Fit outcome.

    ``nll_trace[0]`` is the NLL at initialization and ``nll_trace[e]`` the
    full-dataset NLL after epoch e, so the trace has ``epochs_run + 1``
    entries. Everything except ``wall_time_seconds`` is deterministic given
    the dataset and config.
    """

    final_params: ModelParams
    train_nll_per_ranking: float
    train_nll_per_choice: float
    epochs_run: int
    nll_trace: tuple[float, ...]
    wall_time_seconds: float


# --- objective plumbing -----------------------------------------------------


def nll_and_grad(params: ModelParams, cds: ChoiceDataset):
    """Weighted NLL of a choice dataset and its exact analytic gradient.

    The gradient is the classic softmax residual (probabilities minus the
    winner indicator) scattered onto whatever parameters each observation
    touches. Returns the gradient shaped like the parameters: a vector for
    PL and full CRS, an (dT, dC) pair for factorized CRS.
    """
    kern = get_kernels()
    args = (cds.set_items, cds.set_offsets, cds.winner_pos, cds.weights)
    if isinstance(params, PLParams):
        if params.n != cds.universe.n:
            raise ValueError(f"theta has n={params.n}, dataset n={cds.universe.n}")
        return kern.pl_nll_grad(params.theta, *args)
    if isinstance(params, CRSFullParams):
        if params.n != cds.universe.n:
            raise ValueError(f"u is for n={params.n}, dataset n={cds.universe.n}")
        return kern.crs_full_nll_grad(params.u, params.n, *args)
    if isinstance(params, CRSFactorParams):
        if params.n != cds.universe.n:
            raise ValueError(f"T is for n={params.n}, dataset n={cds.universe.n}")
        nll, grad_t, grad_c = kern.crs_factor_nll_grad(params.T, params.C, *args)
        return nll, (grad_t, grad_c)
    raise TypeError(f"nll_and_grad supports PL/CRS params, got {type(params).__name__}")


def _subset(cds: ChoiceDataset, idx: npt.NDArray[np.int64]) -> ChoiceDataset:
    """Packed view of a subset of observations, in the given order."""
    sizes = np.diff(cds.set_offsets)[idx]
    starts = cds.set_offsets[:-1][idx]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = np.repeat(starts - offsets[:-1], sizes) + np.arange(offsets[-1])
    return ChoiceDataset(
        universe=cds.universe,
        set_items=cds.set_items[flat],
        set_offsets=offsets,
        winner_pos=cds.winner_pos[idx],
        weights=cds.weights[idx],
    )


class _FlatObjective:
    """Flat-vector view of a family's NLL and gradient for the Adam loop."""

    def __init__(self, kind: str, cds: ChoiceDataset, rank: Optional[int]):
        self.kind = kind
        self.cds = cds
        self.n = cds.universe.n
        self.rank = rank
        if kind == "pl":
            self.size = self.n
        elif kind == "crs_full":
            self.size = self.n * (self.n - 1)
        elif kind == "crs_factor":
            if rank is None:
                raise ValueError("crs_factor requires cfg.rank")
            self.size = 2 * self.n * rank
        else:
            raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")

    def to_params(self, vec: np.ndarray) -> ModelParams:
        if self.kind == "pl":
            return PLParams(vec.copy())
        if self.kind == "crs_full":
            return CRSFullParams(vec.copy(), self.n)
        half = self.n * self.rank
        T = vec[:half].reshape(self.n, self.rank).copy()
        C = vec[half:].reshape(self.n, self.rank).copy()
        return CRSFactorParams(T, C, self.rank)

    def from_params(self, params: ModelParams) -> np.ndarray:
        if self.kind == "pl":
            if not isinstance(params, PLParams) or params.n != self.n:
                raise ValueError("init params do not match model kind pl")
            return params.theta.copy()
        if self.kind == "crs_full":
            if not isinstance(params, CRSFullParams) or params.n != self.n:
                raise ValueError("init params do not match model kind crs_full")
            return params.u.copy()
        if not isinstance(params, CRSFactorParams) or params.n != self.n or params.r != self.rank:
            raise ValueError("init params do not match model kind crs_factor")
        return np.concatenate([params.T.ravel(), params.C.ravel()])

    def value_and_grad(self, vec: np.ndarray, cds: ChoiceDataset) -> tuple[float, np.ndarray]:
        kern = get_kernels()
        args = (cds.set_items, cds.set_offsets, cds.winner_pos, cds.weights)
        if self.kind == "pl":
            return kern.pl_nll_grad(vec, *args)
        if self.kind == "crs_full":
            return kern.crs_full_nll_grad(vec, self.n, *args)
        half = self.n * self.rank
        T = vec[:half].reshape(self.n, self.rank)
        C = vec[half:].reshape(self.n, self.rank)
        nll, gt, gc = kern.crs_factor_nll_grad(T, C, *args)
        return nll, np.concatenate([gt.ravel(), gc.ravel()])

    def center(self, vec: np.ndarray) -> np.ndarray:
        # single end-of-fit gauge fix; the factorization has no linear gauge
        if self.kind in ("pl", "crs_full"):
            return vec - vec.mean()
        return vec


def fit(
    model_kind: str,
    ds: RankingDataset,
    cfg: FitConfig,
    init: Optional[ModelParams] = None,
) -> FitReport:
    """Fit a model by Adam on the choice-decomposition NLL.

    Deterministic given (ds, cfg, init): initialization and mini-batch
    shuffles all flow from ``cfg.seed``. ``init`` overrides the default
    initialization (zeros for PL and full CRS, N(0, init_scale^2) entries
    for factorized CRS). ``model_kind`` "mallows" delegates to
    :func:`fit_mallows`, which ignores the Adam settings.
    """
    if model_kind == "mallows":
        return fit_mallows(ds)
    start = time.perf_counter()
    cds = repeated_selection(ds)
    obj = _FlatObjective(model_kind, cds, cfg.rank)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if init is not None:
        vec = obj.from_params(init)
    elif model_kind == "crs_factor":
        vec = rng.normal(0.0, cfg.init_scale, obj.size)
    else:
        vec = np.zeros(obj.size)

    m_adam = np.zeros(obj.size)
    v_adam = np.zeros(obj.size)
    step = 0
    records = cds.num_observations
    full_batch = cfg.batch_size == "full" or cfg.batch_size >= records

    def full_nll(v: np.ndarray) -> float:
        value, _ = obj.value_and_grad(v, cds)
        return value

    trace = [full_nll(vec)]
    if not np.isfinite(trace[0]):
        raise DivergenceError("objective non-finite at initialization")
    for epoch in range(cfg.epochs):
        if full_batch:
            batches = [cds]
        else:
            order = rng.permutation(records)
            batches = [
                _subset(cds, order[i : i + cfg.batch_size])
                for i in range(0, records, cfg.batch_size)
            ]
        for batch in batches:
            value, grad = obj.value_and_grad(vec, batch)
            if not np.isfinite(value):
                raise DivergenceError(f"objective diverged at epoch {epoch + 1}")
            step += 1
            m_adam = cfg.beta1 * m_adam + (1 - cfg.beta1) * grad
            v_adam = cfg.beta2 * v_adam + (1 - cfg.beta2) * grad * grad
            m_hat = m_adam / (1 - cfg.beta1**step)
            v_hat = v_adam / (1 - cfg.beta2**step)
            vec = vec - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        epoch_nll = full_nll(vec)
        if not np.isfinite(epoch_nll):
            raise DivergenceError(f"objective diverged at epoch {epoch + 1}")
        trace.append(epoch_nll)

    vec = obj.center(vec)
    final = obj.to_params(vec)
    total_nll = full_nll(vec)
    ell = float(sum(r.weight for r in ds.rankings))
    return FitReport(
        final_params=final,
        train_nll_per_ranking=total_nll / ell,
        train_nll_per_choice=total_nll / cds.total_weight,
        epochs_run=cfg.epochs,
        nll_trace=tuple(trace),
        wall_time_seconds=time.perf_counter() - start,
    )


# --- Mallows ----------------------------------------------------------------


def pairwise_count_matrix(ds: RankingDataset) -> npt.NDArray[np.float64]:
    """W[i, j] = weighted count of ballots asserting i above j.

    A top-k ballot asserts i above j when i is ranked and j is either
    ranked lower or unranked; two unranked items assert nothing.
    """
    n = ds.universe.n
    W = np.zeros((n, n))
    for ranking in ds.rankings:
        w = float(ranking.weight)
        items = ranking.items
        ranked = set(items)
        for a, x in enumerate(items):
            for y in items[a + 1 :]:
                W[x, y] += w
            if len(items) < n:
                for y in range(n):
                    if y not in ranked:
                        W[x, y] += w
    return W


def mga_reference(ds: RankingDataset) -> tuple[int, ...]:
    """Greedy reference permutation from net pairwise wins.

    Repeatedly appends the remaining item maximizing
    sum_{j remaining} (W[i][j] - W[j][i]); ties break to the lowest index.
    """
    W = pairwise_count_matrix(ds)
    n = W.shape[0]
    net = W - W.T
    remaining = list(range(n))
    order: list[int] = []
    while remaining:
        sub = net[np.ix_(remaining, remaining)]
        scores = sub.sum(axis=1)
        # argmax returns the first maximizer; remaining is kept sorted, so
        # this is the lowest-index tie-break
        pick = remaining[int(np.argmax(scores))]
        order.append(pick)
        remaining.remove(pick)
    return tuple(order)


def _mallows_stage_arrays(cds: ChoiceDataset, sigma0: tuple[int, ...]):
    """Per-observation (v_winner, set size, weight) under a reference."""
    n = len(sigma0)
    pos = np.empty(n, dtype=np.int64)
    for rank, item in enumerate(sigma0):
        pos[item] = rank
    sizes = np.diff(cds.set_offsets)
    v = np.zeros(cds.num_observations, dtype=np.int64)
    for k in np.unique(sizes):
        idx = np.nonzero(sizes == k)[0]
        starts = cds.set_offsets[idx]
        items = cds.set_items[starts[:, None] + np.arange(int(k))[None, :]]
        p = pos[items]
        pw = p[np.arange(len(idx)), cds.winner_pos[idx]]
        v[idx] = (p < pw[:, None]).sum(axis=1)
    return v, sizes, cds.weights


def _mallows_nll(theta: float, v, sizes, weights) -> float:
    """Stage-decomposition NLL at concentration theta, given the reference."""
    nll = float(theta * (weights @ v))
    for k in np.unique(sizes):
        wk = weights[sizes == k].sum()
        nll += wk * np.log(np.exp(-theta * np.arange(int(k))).sum())
    return nll


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimizer on [lo, hi] to interval width <= tol."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    # also consider the bracket edges; a monotone objective drives the
    # optimum onto the box boundary
    candidates = [lo, 0.5 * (a + b), hi]
    values = [f(x) for x in candidates]
    return candidates[int(np.argmin(values))]


THETA_C_SEARCH_BOX = (0.0, 20.0)
THETA_C_SEARCH_TOL = 1e-6


def fit_mallows(ds: RankingDataset) -> FitReport:
    """Mallows fit: greedy reference, then 1-D concentration search.

    The reference comes from :func:`mga_reference`; theta_c maximizes the
    choice-decomposition likelihood over [0, 20] by golden section to an
    interval of 1e-6. ``nll_trace`` records the NLL at theta_c = 0 (uniform)
    and at the optimum; ``epochs_run`` is 0 because nothing is iterative in
    the Adam sense.
    """
    start = time.perf_counter()
    cds = repeated_selection(ds)
    sigma0 = mga_reference(ds)
    v, sizes, weights = _mallows_stage_arrays(cds, sigma0)
    lo, hi = THETA_C_SEARCH_BOX
    theta_c = _golden_section(
        lambda t: _mallows_nll(t, v, sizes, weights), lo, hi, THETA_C_SEARCH_TOL
    )
    params = MallowsParams(sigma0, theta_c)
    total_nll = _mallows_nll(theta_c, v, sizes, weights)
    ell = float(sum(r.weight for r in ds.rankings))
    return FitReport(
        final_params=params,
        train_nll_per_ranking=total_nll / ell,
        train_nll_per_choice=total_nll / cds.total_weight,
        epochs_run=0,
        nll_trace=(_mallows_nll(0.0, v, sizes, weights), total_nll),
        wall_time_seconds=time.perf_counter() - start,
    )
