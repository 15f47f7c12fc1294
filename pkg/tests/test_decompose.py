import numpy as np
import pytest
from hypothesis import given, strategies as st

from repsel.core import ChoiceObservation, Ranking, RankingDataset, Universe
from repsel.decompose import (
    decompose_ranking,
    from_observations,
    repeated_selection,
    stage_counts,
)


def test_full_ranking_stages():
    # final singleton stage is dropped
    assert decompose_ranking(Ranking((2, 0, 1), 3)) == [
        (2, (0, 1, 2)),
        (0, (0, 1)),
    ]


def test_topk_keeps_unranked_in_every_slate():
    assert decompose_ranking(Ranking((2, 0), 4)) == [
        (2, (0, 1, 2, 3)),
        (0, (0, 1, 3)),
    ]


def test_single_item_ranking_is_one_choice():
    assert decompose_ranking(Ranking((3,), 4)) == [(3, (0, 1, 2, 3))]


@given(st.integers(2, 7), st.data())
def test_stage_structure_properties(n, data):
    k = data.draw(st.integers(1, n))
    items = tuple(data.draw(st.permutations(range(n)))[:k])
    stages = decompose_ranking(Ranking(items, n))
    expected = k - 1 if k == n else k
    assert len(stages) == expected
    seen = []
    for j, (winner, slate) in enumerate(stages):
        assert winner == items[j]
        assert slate == tuple(sorted(set(range(n)) - set(seen)))
        assert len(slate) == n - j >= 2
        seen.append(winner)


def test_repeated_selection_packs_weights_and_sources(topk_ds):
    cds = repeated_selection(topk_ds)
    # stages: (2,0)->2, full->3, (3,)->1, (1,3,0)->3
    assert cds.num_observations == 9
    assert cds.total_weight == pytest.approx(4 * 2 + 1 * 3 + 2 * 1 + 1 * 3)
    np.testing.assert_array_equal(cds.source_map[:, 0], [0, 0, 1, 1, 1, 2, 3, 3, 3])
    np.testing.assert_array_equal(cds.source_map[:, 1], [0, 1, 0, 1, 2, 0, 0, 1, 2])
    # first observation: winner 2 from the full slate, weight 4
    np.testing.assert_array_equal(cds.choice_set(0), [0, 1, 2, 3])
    assert cds.winners[0] == 2
    assert cds.weights[0] == 4.0
    # second: item 0 from {0,1,3}
    np.testing.assert_array_equal(cds.choice_set(1), [0, 1, 3])
    assert cds.winners[1] == 0


def test_packed_layout_matches_observation_view(topk_ds):
    cds = repeated_selection(topk_ds)
    for j, obs in enumerate(cds.observations):
        assert isinstance(obs, ChoiceObservation)
        assert obs.choice_set == tuple(cds.choice_set(j))
        assert obs.winner == cds.set_items[cds.set_offsets[j] + cds.winner_pos[j]]


def test_from_observations_round_trip():
    obs = [ChoiceObservation(1, (0, 1, 2)), ChoiceObservation(2, (1, 2))]
    cds = from_observations(Universe(3), obs, weights=[2.0, 1.0])
    assert cds.num_observations == 2
    assert list(cds.observations) == obs
    np.testing.assert_array_equal(cds.set_sizes, [3, 2])
    assert cds.source_map is None


def test_repeated_selection_rejects_empty():
    with pytest.raises(ValueError):
        repeated_selection(RankingDataset(Universe(3), ()))


def test_stage_counts_weighted(topk_ds):
    # weighted histogram of slate sizes
    assert stage_counts(topk_ds) == {4: 8, 3: 6, 2: 2}
