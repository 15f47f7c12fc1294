"""Out-of-sample evaluation and risk-convergence simulations.

Cross-validation follows the per-ranking protocol: weighted ballots are
expanded to unit weight, shuffled once per seed, and split into folds of
near-equal size. The risk experiments draw bounded ground truths, sample
growing datasets, and track squared l2 error of the centered estimates;
their observed rates (1/ell for PL, n^2/ell full CRS, nr/ell factorized)
are what the acceptance suite checks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from .core import (
    CRSFactorParams,
    CRSFullParams,
    ModelParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
)
from .decompose import repeated_selection
from .estimate import FitConfig, fit
from .models import SampleConfig, choice_logprobs, ranking_logprobs, sample_rankings

__all__ = [
    "CVResult",
    "PositionProfile",
    "RiskExperimentConfig",
    "kfold_eval",
    "position_profile",
    "risk_experiment",
    "tail_bundle_stats",
    "draw_ground_truth",
    "squared_l2_risk",
]


@dataclass(frozen=True)
class CVResult:
    model_kind: str
    folds: int
    mean_test_nll_per_ranking: float
    sem: float
    per_fold_nll: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.sem < 0:
            raise ValueError(f"sem must be >= 0, got {self.sem}")


@dataclass(frozen=True)
class PositionProfile:
    """Per-position mean choice log-likelihood over a test set.

    ``per_position[k-1]`` covers rank position k for k = 1..n-1: the mean
    stage-k log-probability over rankings of length >= k, and the weighted
    count of such rankings. The divisor is that qualifying count, so each
    entry is a conditional mean (dividing by the total ranking count
    instead would shrink positions that long ballots rarely reach).
    """

    per_position: tuple[tuple[float, int], ...]


def _expand_weights(ds: RankingDataset) -> tuple[list[Ranking], np.ndarray]:
    """Unit-weight view: unique rankings plus the expanded index vector."""
    base = [
        Ranking(r.items, r.universe_n, 1) if r.weight != 1 else r for r in ds.rankings
    ]
    expanded = np.repeat(np.arange(len(base)), [r.weight for r in ds.rankings])
    return base, expanded


def _weighted_subset(
    universe: Universe, base: list[Ranking], expanded_idx: np.ndarray
) -> RankingDataset:
    """Recompress a multiset of expanded indices into weighted rankings."""
    counts = np.bincount(expanded_idx, minlength=len(base))
    rankings = tuple(
        Ranking(base[i].items, base[i].universe_n, int(c))
        for i, c in enumerate(counts)
        if c > 0
    )
    return RankingDataset(universe, rankings)


def kfold_eval(
    ds: RankingDataset,
    model_kind: str,
    folds: int,
    cfg: FitConfig,
    seed: int,
    threads: int = 1,
) -> CVResult:
    """Seed-deterministic k-fold CV of mean test NLL per ranking.

    Folds partition the expanded (unit-weight) rankings; sizes differ by at
    most one. Each fold's model is fit on the complement with ``cfg``; the
    fold statistic is the mean negative log-probability of its held-out
    rankings. Results do not depend on ``threads``.
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    base, expanded = _expand_weights(ds)
    ell = len(expanded)
    if folds > ell:
        raise ValueError(f"more folds ({folds}) than rankings ({ell})")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(ell)
    parts = np.array_split(order, folds)

    def one_fold(i: int) -> float:
        test_idx = expanded[parts[i]]
        train_idx = expanded[np.concatenate([parts[j] for j in range(folds) if j != i])]
        train = _weighted_subset(ds.universe, base, train_idx)
        report = fit(model_kind, train, cfg)
        test = _weighted_subset(ds.universe, base, test_idx)
        logp = ranking_logprobs(report.final_params, test)
        weights = np.array([r.weight for r in test.rankings], dtype=np.float64)
        return float(-(logp @ weights) / weights.sum())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_fold = list(pool.map(one_fold, range(folds)))
    else:
        per_fold = [one_fold(i) for i in range(folds)]
    arr = np.asarray(per_fold)
    sem = float(arr.std(ddof=1) / np.sqrt(folds)) if folds > 1 else 0.0
    return CVResult(
        model_kind=model_kind,
        folds=folds,
        mean_test_nll_per_ranking=float(arr.mean()),
        sem=sem,
        per_fold_nll=tuple(float(x) for x in arr),
    )


def position_profile(params: ModelParams, test: RankingDataset) -> PositionProfile:
    """Mean per-position choice log-likelihood of a test set under ``params``.

    Position k's slate follows the decomposition convention: the universe
    minus the k-1 items ranked above, with unranked items still present.
    """
    cds = repeated_selection(test)
    logp = choice_logprobs(params, cds)
    stages = cds.source_map[:, 1]
    n = test.universe.n
    rows = []
    for k in range(1, n):
        sel = stages == (k - 1)
        w = cds.weights[sel]
        if w.size == 0:
            rows.append((0.0, 0))
            continue
        rows.append((float((logp[sel] @ w) / w.sum()), int(round(w.sum()))))
    return PositionProfile(per_position=tuple(rows))


# --- risk experiments ---------------------------------------------------------


@dataclass(frozen=True)
class RiskExperimentConfig:
    """Grid spec for the risk-convergence simulations.

    Ground truths are drawn inside the B-ball (see
    :func:`draw_ground_truth`); for each universe size and trial, one
    dataset of ``max(ell_grid)`` rankings is sampled and the model is
    refit on each prefix in ``ell_grid``.
    """

    model_kind: str
    n_grid: tuple[int, ...]
    ell_grid: tuple[int, ...]
    fit_cfg: FitConfig
    rank: Optional[int] = None
    B: float = 1.5
    trials: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_kind not in ("pl", "crs_full", "crs_factor"):
            raise ValueError(f"unsupported model_kind {self.model_kind!r}")
        if self.model_kind == "crs_factor" and self.rank is None:
            raise ValueError("crs_factor experiments require rank")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        ells = tuple(int(x) for x in self.ell_grid)
        if not ells or any(b <= a for a, b in zip(ells, ells[1:])):
            raise ValueError(f"ell_grid must be strictly increasing, got {ells}")
        object.__setattr__(self, "ell_grid", ells)
        object.__setattr__(self, "n_grid", tuple(int(x) for x in self.n_grid))


def _row_l1_rescale(mat: np.ndarray, B: float) -> np.ndarray:
    """Scale any row whose l1 norm exceeds B back onto the ball boundary."""
    norms = np.abs(mat).sum(axis=1, keepdims=True)
    factor = np.where(norms > B, B / np.maximum(norms, 1e-300), 1.0)
    return mat * factor


def draw_ground_truth(
    model_kind: str,
    n: int,
    rank: Optional[int],
    B: float,
    rng: np.random.Generator,
) -> ModelParams:
    """Sample a bounded ground-truth parameter for the simulations.

    PL entries are standard normal redrawn until inside [-B, B], then
    centered. CRS interaction rows (and the factor rows of T and C) are
    standard normal, rescaled onto the l1 ball of radius B only when they
    exceed it; the full interaction vector is globally centered.
    """
    if model_kind == "pl":
        theta = rng.standard_normal(n)
        while True:
            outside = np.abs(theta) > B
            if not outside.any():
                break
            theta[outside] = rng.standard_normal(int(outside.sum()))
        return PLParams(theta - theta.mean())
    if model_kind == "crs_full":
        rows = _row_l1_rescale(rng.standard_normal((n, n - 1)), B)
        u = rows.ravel()
        return CRSFullParams(u - u.mean(), n)
    if model_kind == "crs_factor":
        assert rank is not None
        T = _row_l1_rescale(rng.standard_normal((n, rank)), B)
        C = _row_l1_rescale(rng.standard_normal((n, rank)), B)
        return CRSFactorParams(T, C, rank)
    raise ValueError(f"unsupported model_kind {model_kind!r}")


def _centered_vector(params: ModelParams) -> np.ndarray:
    """The identified parameter vector: centered theta or centered induced u."""
    if isinstance(params, PLParams):
        return params.theta - params.theta.mean()
    if isinstance(params, CRSFullParams):
        return params.u - params.u.mean()
    if isinstance(params, CRSFactorParams):
        u = params.induced_full().u
        return u - u.mean()
    raise TypeError(f"no identified vector for {type(params).__name__}")


def squared_l2_risk(estimate: ModelParams, truth: ModelParams) -> float:
    """||estimate - truth||_2^2 between centered identified vectors.

    Factorized estimates are compared through their induced full
    interaction vectors; (T, C) themselves are only defined up to an r x r
    linear gauge.
    """
    diff = _centered_vector(estimate) - _centered_vector(truth)
    return float(diff @ diff)


def _job_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, np.uint64)[0])


def risk_experiment(
    cfg: RiskExperimentConfig, threads: int = 1
) -> list[dict[str, object]]:
    """Squared-l2 risk table over the (n, ell, trial) grid.

    Per (n, trial): draw a ground truth, sample max(ell_grid) rankings, and
    fit on every prefix in ell_grid. Per-job randomness derives from
    (seed, n, trial), so rows are independent of execution order and of
    ``threads``. Returns flat dict rows ready for the CSV writer.
    """
    jobs = [(n, trial) for n in cfg.n_grid for trial in range(cfg.trials)]

    def one_job(job: tuple[int, int]) -> list[dict[str, object]]:
        n, trial = job
        gt_rng = np.random.Generator(
            np.random.PCG64(_job_seed(cfg.seed, n, trial, 0))
        )
        truth = draw_ground_truth(cfg.model_kind, n, cfg.rank, cfg.B, gt_rng)
        universe = Universe(n)
        sample_cfg = SampleConfig(
            seed=_job_seed(cfg.seed, n, trial, 1), count=max(cfg.ell_grid)
        )
        full = sample_rankings(truth, universe, sample_cfg)
        fit_cfg = FitConfig(
            learning_rate=cfg.fit_cfg.learning_rate,
            beta1=cfg.fit_cfg.beta1,
            beta2=cfg.fit_cfg.beta2,
            epsilon=cfg.fit_cfg.epsilon,
            epochs=cfg.fit_cfg.epochs,
            batch_size=cfg.fit_cfg.batch_size,
            seed=_job_seed(cfg.seed, n, trial, 2),
            init_scale=cfg.fit_cfg.init_scale,
            rank=cfg.rank,
        )
        rows = []
        for ell in cfg.ell_grid:
            prefix = RankingDataset(universe, full.rankings[:ell])
            report = fit(cfg.model_kind, prefix, fit_cfg)
            rows.append(
                {
                    "model_kind": cfg.model_kind,
                    "n": n,
                    "rank": cfg.rank if cfg.rank is not None else "",
                    "ell": ell,
                    "trial": trial,
                    "squared_l2_risk": squared_l2_risk(report.final_params, truth),
                }
            )
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one_job, jobs))
    else:
        chunks = [one_job(job) for job in jobs]
    return [row for chunk in chunks for row in chunk]


MIN_BUNDLE_TRIALS = 10


def tail_bundle_stats(table: Sequence[dict[str, object]]) -> list[dict[str, object]]:
    """Per-(n, ell) spread of the risk bundle: median, IQR, max/median.

    Requires at least MIN_BUNDLE_TRIALS trials per cell; spread summaries
    of tiny bundles say nothing about tail behavior.
    """
    cells: dict[tuple[int, int], list[float]] = {}
    for row in table:
        key = (int(row["n"]), int(row["ell"]))
        cells.setdefault(key, []).append(float(row["squared_l2_risk"]))
    out = []
    for (n, ell), risks in sorted(cells.items()):
        if len(risks) < MIN_BUNDLE_TRIALS:
            raise ValueError(
                f"cell (n={n}, ell={ell}) has {len(risks)} trials; "
                f"need >= {MIN_BUNDLE_TRIALS} for spread summaries"
            )
        arr = np.sort(np.asarray(risks))
        median = float(np.median(arr))
        q1, q3 = np.percentile(arr, [25, 75])
        out.append(
            {
                "n": n,
                "ell": ell,
                "trials": len(risks),
                "median": median,
                "iqr": float(q3 - q1),
                "max_over_median": float(arr[-1] / median) if median > 0 else np.inf,
            }
        )
    return out
