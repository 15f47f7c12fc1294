"""Repeated selection: decompose rankings into conditionally independent choices.

A ranking is read top-down as a sequence of winners drawn from shrinking
slates. Stage j of a ranking offers the universe minus the j-1 items already
ranked; for a full ranking that slate is exactly the ranking's own suffix,
for a top-k ranking the unranked items stay in every slate. Final stages
with a single candidate are certain and therefore never emitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import numpy.typing as npt

from .core import ChoiceObservation, Ranking, RankingDataset, Universe

__all__ = ["ChoiceDataset", "repeated_selection", "stage_counts"]


@dataclass(frozen=True)
class ChoiceDataset:
    """Choice observations in a flat packed layout.

    ``set_items`` concatenates every choice set (each one sorted);
    ``set_offsets`` delimits them, so observation j covers
    ``set_items[set_offsets[j]:set_offsets[j+1]]``. ``winner_pos[j]`` is the
    winner's position within its own set and ``weights[j]`` its multiplicity.
    ``source_map[j] = (ranking index, stage index)`` when the observations
    came from a decomposition.

    The packed arrays are what the numerical kernels consume; the
    ``observations`` view materializes friendly objects on demand.
    """

    universe: Universe
    set_items: npt.NDArray[np.int64]
    set_offsets: npt.NDArray[np.int64]
    winner_pos: npt.NDArray[np.int64]
    weights: npt.NDArray[np.float64]
    source_map: Optional[npt.NDArray[np.int64]] = None

    @property
    def num_observations(self) -> int:
        """Number of stored observation records (weights not expanded)."""
        return len(self.winner_pos)

    @property
    def total_weight(self) -> float:
        """Weighted observation count m."""
        return float(self.weights.sum())

    @cached_property
    def set_sizes(self) -> npt.NDArray[np.int64]:
        return np.diff(self.set_offsets)

    @cached_property
    def winners(self) -> npt.NDArray[np.int64]:
        return self.set_items[self.set_offsets[:-1] + self.winner_pos]

    @cached_property
    def observations(self) -> tuple[ChoiceObservation, ...]:
        out = []
        for j in range(self.num_observations):
            lo, hi = self.set_offsets[j], self.set_offsets[j + 1]
            items = tuple(int(x) for x in self.set_items[lo:hi])
            out.append(ChoiceObservation(items[self.winner_pos[j]], items))
        return tuple(out)

    def choice_set(self, j: int) -> npt.NDArray[np.int64]:
        return self.set_items[self.set_offsets[j] : self.set_offsets[j + 1]]


def from_observations(
    universe: Universe,
    observations: list[ChoiceObservation],
    weights: Optional[list[float]] = None,
) -> ChoiceDataset:
    """Pack a list of observations into the flat kernel layout."""
    if weights is None:
        weights = [1.0] * len(observations)
    items: list[int] = []
    offsets = [0]
    winner_pos = []
    for obs in observations:
        items.extend(obs.choice_set)
        offsets.append(len(items))
        winner_pos.append(obs.choice_set.index(obs.winner))
    return ChoiceDataset(
        universe=universe,
        set_items=np.asarray(items, dtype=np.int64),
        set_offsets=np.asarray(offsets, dtype=np.int64),
        winner_pos=np.asarray(winner_pos, dtype=np.int64),
        weights=np.asarray(weights, dtype=np.float64),
    )


def decompose_ranking(ranking: Ranking) -> list[tuple[int, tuple[int, ...]]]:
    """Stages of one ranking as (winner, sorted choice set) pairs.

    Stage j's slate is the universe minus the first j-1 ranked items; slates
    of size 1 are dropped because their choice is certain.
    """
    n = ranking.universe_n
    stages = []
    removed: set[int] = set()
    for winner in ranking.items:
        slate = tuple(x for x in range(n) if x not in removed)
        if len(slate) < 2:
            break
        stages.append((winner, slate))
        removed.add(winner)
    return stages


def repeated_selection(ds: RankingDataset) -> ChoiceDataset:
    """Convert a ranking dataset into its choice dataset (the L-decomposition).

    Observation order is deterministic: rankings in dataset order, stages
    top-down within each ranking. Each observation inherits its ranking's
    weight.
    """
    items: list[int] = []
    offsets = [0]
    winner_pos: list[int] = []
    weights: list[float] = []
    source: list[tuple[int, int]] = []
    for ri, ranking in enumerate(ds.rankings):
        removed: set[int] = set()
        for stage, winner in enumerate(ranking.items):
            slate = [x for x in range(ds.universe.n) if x not in removed]
            if len(slate) < 2:
                break
            items.extend(slate)
            offsets.append(len(items))
            winner_pos.append(slate.index(winner))
            weights.append(float(ranking.weight))
            source.append((ri, stage))
            removed.add(winner)
    if not winner_pos:
        raise ValueError("dataset decomposes to zero choice observations")
    return ChoiceDataset(
        universe=ds.universe,
        set_items=np.asarray(items, dtype=np.int64),
        set_offsets=np.asarray(offsets, dtype=np.int64),
        winner_pos=np.asarray(winner_pos, dtype=np.int64),
        weights=np.asarray(weights, dtype=np.float64),
        source_map=np.asarray(source, dtype=np.int64),
    )


def stage_counts(ds: RankingDataset) -> dict[int, int]:
    """Weighted histogram of choice-set sizes; its max key is k_max."""
    hist: dict[int, int] = {}
    n = ds.universe.n
    for ranking in ds.rankings:
        # stage j (0-based) over a slate of size n - j; singleton slates drop
        for j in range(len(ranking.items)):
            size = n - j
            if size < 2:
                break
            hist[size] = hist.get(size, 0) + ranking.weight
    return dict(sorted(hist.items()))
