"""Choice-probability kernels, induced ranking distributions, and exact samplers.

Every model family here factors a ranking into repeated selections; the
families differ only in the stage kernel over the remaining slate S:

* MNL / Plackett-Luce:  P(x | S) proportional to exp(theta_x)
* CDM / CRS:            P(x | S) proportional to exp(sum_{z in S\\x} u_{xz})
* Mallows:              P(x | S) proportional to exp(-theta_c * v(x, S)),
  v counting slate members the reference sigma0 ranks above x.

All three reduce to a shared pairwise form: an item utility vector plus a
pairwise interaction matrix accumulated over the slate. That form drives
the sampler and the exhaustive enumerator; the public per-family entry
points keep their own closed forms (and their documented stability
choices: log-space arithmetic with max subtraction everywhere).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .backends import get_kernels
from .core import (
    ChoiceObservation,
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    ModelParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
    pair_index,
)
from .decompose import ChoiceDataset, decompose_ranking, repeated_selection

__all__ = [
    "SampleConfig",
    "mnl_choice_logprob",
    "cdm_choice_logprob",
    "mallows_choice_logprob",
    "choice_logprob",
    "choice_logprobs",
    "ranking_logprob",
    "ranking_logprobs",
    "kendall_tau",
    "sample_rankings",
    "enumerate_pmf",
    "mallows_log_z",
    "pairwise_representation",
    "pl_as_crs_fixed_size",
]

ENUMERATE_MAX_N = 8


@dataclass(frozen=True)
class SampleConfig:
    """Seeded sampling request: ``count`` rankings from one 64-bit seed."""

    seed: int
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"sample count must be >= 1, got {self.count}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def _log_softmax(logits: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    mx = logits.max()
    shifted = logits - mx
    return shifted - np.log(np.exp(shifted).sum())


def _check_obs(n: int, obs: ChoiceObservation) -> None:
    if obs.choice_set[-1] >= n:
        raise ValueError(
            f"choice set {obs.choice_set} out of range for a universe of {n} items"
        )


def mnl_choice_logprob(params: PLParams, obs: ChoiceObservation) -> float:
    """log P(winner | S) under the multinomial logit kernel."""
    _check_obs(params.n, obs)
    items = np.asarray(obs.choice_set, dtype=np.int64)
    logp = _log_softmax(params.theta[items])
    return float(logp[obs.choice_set.index(obs.winner)])


def cdm_choice_logprob(
    params: CRSFullParams | CRSFactorParams, obs: ChoiceObservation
) -> float:
    """log P(winner | S) under the context-dependent utility kernel.

    The full and factorized parameterizations agree whenever
    u_{xz} = c_z . t_x entry-wise.
    """
    _check_obs(params.n, obs)
    items = np.asarray(obs.choice_set, dtype=np.int64)
    if isinstance(params, CRSFactorParams):
        trows = params.T[items]
        crows = params.C[items]
        ctx = crows.sum(axis=0, keepdims=True) - crows
        logits = (trows * ctx).sum(axis=1)
    else:
        n = params.n
        logits = np.array(
            [
                sum(params.u[pair_index(x, z, n)] for z in obs.choice_set if z != x)
                for x in obs.choice_set
            ]
        )
    logp = _log_softmax(logits)
    return float(logp[obs.choice_set.index(obs.winner)])


def _count_ranked_above(sigma0_pos: npt.NDArray[np.int64], x: int, choice_set) -> int:
    """v(x, S): slate members the reference permutation places above x."""
    px = sigma0_pos[x]
    return int(sum(1 for y in choice_set if sigma0_pos[y] < px))


def mallows_choice_logprob(params: MallowsParams, obs: ChoiceObservation) -> float:
    """log P(winner | S) under the Mallows stage kernel.

    The denominator uses the closed form sum_{v=0}^{|S|-1} exp(-theta_c v):
    within any slate the counts v take each value exactly once.
    """
    _check_obs(params.n, obs)
    pos = params.positions()
    v = _count_ranked_above(pos, obs.winner, obs.choice_set)
    k = len(obs.choice_set)
    denom = np.exp(-params.theta_c * np.arange(k)).sum()
    return float(-params.theta_c * v - np.log(denom))


def _mallows_denominator_by_counting(params: MallowsParams, choice_set) -> float:
    """O(k^2) counting denominator; debug oracle for the closed form."""
    pos = params.positions()
    return float(
        sum(
            np.exp(-params.theta_c * _count_ranked_above(pos, y, choice_set))
            for y in choice_set
        )
    )


def choice_logprob(params: ModelParams, obs: ChoiceObservation) -> float:
    """Single-observation dispatch over the model families."""
    if isinstance(params, PLParams):
        return mnl_choice_logprob(params, obs)
    if isinstance(params, (CRSFullParams, CRSFactorParams)):
        return cdm_choice_logprob(params, obs)
    if isinstance(params, MallowsParams):
        return mallows_choice_logprob(params, obs)
    raise TypeError(f"unsupported params type {type(params).__name__}")


def _mallows_choice_logprobs(params: MallowsParams, cds: ChoiceDataset) -> np.ndarray:
    pos = params.positions()
    sizes = np.diff(cds.set_offsets)
    out = np.zeros(cds.num_observations)
    theta = params.theta_c
    for k in np.unique(sizes):
        idx = np.nonzero(sizes == k)[0]
        starts = cds.set_offsets[idx]
        items = cds.set_items[starts[:, None] + np.arange(k)[None, :]]
        p = pos[items]
        pw = p[np.arange(len(idx)), cds.winner_pos[idx]]
        v = (p < pw[:, None]).sum(axis=1)
        log_denom = np.log(np.exp(-theta * np.arange(k)).sum())
        out[idx] = -theta * v - log_denom
    return out


def choice_logprobs(params: ModelParams, cds: ChoiceDataset) -> npt.NDArray[np.float64]:
    """Per-observation log choice probabilities over a packed choice dataset."""
    if params.n != cds.universe.n:
        raise ValueError(
            f"params are for n={params.n} but dataset universe has n={cds.universe.n}"
        )
    kern = get_kernels()
    if isinstance(params, PLParams):
        return kern.pl_choice_logprobs(
            params.theta, cds.set_items, cds.set_offsets, cds.winner_pos
        )
    if isinstance(params, CRSFullParams):
        return kern.crs_full_choice_logprobs(
            params.u, params.n, cds.set_items, cds.set_offsets, cds.winner_pos
        )
    if isinstance(params, CRSFactorParams):
        return kern.crs_factor_choice_logprobs(
            params.T, params.C, cds.set_items, cds.set_offsets, cds.winner_pos
        )
    if isinstance(params, MallowsParams):
        return _mallows_choice_logprobs(params, cds)
    raise TypeError(f"unsupported params type {type(params).__name__}")


def ranking_logprob(params: ModelParams, ranking: Ranking) -> float:
    """log P(ranking): the sum of its stage choice log-probabilities.

    For a top-k ranking this is the top-k marginal likelihood (unranked
    items stay in every stage slate and the censored tail contributes
    nothing).
    """
    if params.n != ranking.universe_n:
        raise ValueError(
            f"params are for n={params.n} but ranking has universe_n={ranking.universe_n}"
        )
    total = 0.0
    for winner, slate in decompose_ranking(ranking):
        total += choice_logprob(params, ChoiceObservation(winner, slate))
    return total


def ranking_logprobs(params: ModelParams, ds: RankingDataset) -> npt.NDArray[np.float64]:
    """Per-ranking log-probabilities, one entry per dataset row (weights ignored)."""
    cds = repeated_selection(ds)
    logp = choice_logprobs(params, cds)
    out = np.zeros(len(ds.rankings))
    np.add.at(out, cds.source_map[:, 0], logp)
    return out


def kendall_tau(a: Ranking, b: Ranking) -> int:
    """Number of item pairs the two full rankings order oppositely."""
    if a.universe_n != b.universe_n:
        raise ValueError("rankings live in different universes")
    if not (a.is_full and b.is_full):
        raise ValueError("Kendall tau is defined here for full rankings only")
    n = a.universe_n
    pos_a = np.empty(n, dtype=np.int64)
    pos_b = np.empty(n, dtype=np.int64)
    for p, x in enumerate(a.items):
        pos_a[x] = p
    for p, x in enumerate(b.items):
        pos_b[x] = p
    disc = 0
    for x in range(n):
        for y in range(x + 1, n):
            if (pos_a[x] - pos_a[y]) * (pos_b[x] - pos_b[y]) < 0:
                disc += 1
    return disc


def mallows_log_z(theta_c: float, n: int) -> float:
    """log of the Mallows partition function Z(theta, n).

    Z(theta, n) = prod_{i=1}^{n} (1 - e^{-theta i}) / (1 - e^{-theta}),
    with the theta -> 0 limit Z = n!.
    """
    if theta_c < 0:
        raise ValueError(f"theta_c must be >= 0, got {theta_c}")
    if theta_c == 0.0:
        return float(sum(np.log(i) for i in range(2, n + 1)))
    total = 0.0
    for i in range(1, n + 1):
        # each factor is sum_{v=0}^{i-1} e^{-theta v}, evaluated in log space
        total += np.log(np.exp(-theta_c * np.arange(i)).sum())
    return float(total)


def pairwise_representation(
    params: ModelParams,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(item utilities, pairwise matrix) form shared by every family.

    Stage utilities over a slate S are theta[y] + sum_{z in S, z != y} U[y, z];
    PL has U = 0, the CDM families have theta = 0, and Mallows sets
    U[y, z] = -theta_c when sigma0 ranks z above y.
    """
    n = params.n
    if isinstance(params, PLParams):
        return params.theta.copy(), np.zeros((n, n))
    if isinstance(params, CRSFullParams):
        return np.zeros(n), params.as_matrix()
    if isinstance(params, CRSFactorParams):
        return np.zeros(n), params.induced_full().as_matrix()
    if isinstance(params, MallowsParams):
        pos = params.positions()
        mat = np.where(pos[None, :] < pos[:, None], -params.theta_c, 0.0)
        np.fill_diagonal(mat, 0.0)
        return np.zeros(n), mat
    raise TypeError(f"unsupported params type {type(params).__name__}")


def sample_rankings(
    params: ModelParams, universe: Universe, cfg: SampleConfig
) -> RankingDataset:
    """Draw full rankings by repeated selection from the stage kernel.

    Uniform variates come from a PCG64 stream keyed by ``cfg.seed`` and are
    drawn up front, one row per sample, so results are reproducible across
    platforms and independent of any execution schedule. Each stage picks
    the lowest-index item whose inclusive cumulative probability reaches
    the variate.
    """
    if params.n != universe.n:
        raise ValueError(
            f"params are for n={params.n} but universe has n={universe.n}"
        )
    theta, U = pairwise_representation(params)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    uniforms = rng.random((cfg.count, universe.n - 1))
    mat = get_kernels().sample_pairwise(theta, U, uniforms)
    rankings = tuple(Ranking(tuple(int(x) for x in row), universe.n) for row in mat)
    return RankingDataset(universe, rankings)


def enumerate_pmf(
    params: ModelParams, universe: Universe
) -> dict[tuple[int, ...], float]:
    """Exact probabilities of all n! full rankings (test/plot oracle, n <= 8)."""
    n = universe.n
    if n > ENUMERATE_MAX_N:
        raise ValueError(
            f"enumerate_pmf supports n <= {ENUMERATE_MAX_N}, got n={n}"
        )
    if params.n != n:
        raise ValueError(
            f"params are for n={params.n} but universe has n={universe.n}"
        )
    theta, U = pairwise_representation(params)
    # per-subset table of member stage log-probabilities, keyed by bitmask
    table: list[dict[int, float]] = [{} for _ in range(1 << n)]
    for mask in range(1, 1 << n):
        members = [y for y in range(n) if mask >> y & 1]
        if len(members) < 2:
            continue
        idx = np.asarray(members, dtype=np.int64)
        logits = theta[idx] + U[np.ix_(idx, idx)].sum(axis=1)
        logp = _log_softmax(logits)
        table[mask] = {y: float(lp) for y, lp in zip(members, logp)}
    full = (1 << n) - 1
    out: dict[tuple[int, ...], float] = {}
    for perm in itertools.permutations(range(n)):
        mask = full
        lp = 0.0
        for j in range(n - 1):
            lp += table[mask][perm[j]]
            mask &= ~(1 << perm[j])
        out[perm] = float(np.exp(lp))
    return out


def pl_as_crs_fixed_size(theta: npt.NDArray[np.float64], k: int) -> CRSFullParams:
    """CRS interactions reproducing MNL(theta) on slates of one fixed size k.

    With u_{xz} = theta_x / (k - 1) the context sum over any (k-1)-sized
    complement equals theta_x, so stage probabilities coincide for every
    slate of exactly k items (and only for that size).
    """
    theta = np.asarray(theta, dtype=np.float64)
    n = theta.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"slate size k={k} outside [2, {n}]")
    u = np.zeros(n * (n - 1))
    for x in range(n):
        for z in range(n):
            if z != x:
                u[pair_index(x, z, n)] = theta[x] / (k - 1)
    return CRSFullParams(u, n)
