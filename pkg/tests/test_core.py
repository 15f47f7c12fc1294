import numpy as np
import pytest
from hypothesis import given, strategies as st

from repsel.core import (
    ChoiceObservation,
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
    dataset_from_rows,
    pair_index,
    pair_unindex,
    params_n,
    validate_dataset,
)

# Row-major pair layout for n=4, diagonal skipped.
PAIR_TABLE_N4 = {
    (0, 1): 0, (0, 2): 1, (0, 3): 2,
    (1, 0): 3, (1, 2): 4, (1, 3): 5,
    (2, 0): 6, (2, 1): 7, (2, 3): 8,
    (3, 0): 9, (3, 1): 10, (3, 2): 11,
}


def test_pair_index_frozen_table():
    for (x, z), idx in PAIR_TABLE_N4.items():
        assert pair_index(x, z, 4) == idx
        assert pair_unindex(idx, 4) == (x, z)


def test_pair_index_rejects_diagonal_and_range():
    with pytest.raises(ValueError):
        pair_index(1, 1, 4)
    with pytest.raises(ValueError):
        pair_index(0, 4, 4)
    with pytest.raises(ValueError):
        pair_index(-1, 0, 4)
    with pytest.raises(ValueError):
        pair_unindex(12, 4)


@given(st.integers(2, 12), st.data())
def test_pair_index_bijection(n, data):
    x = data.draw(st.integers(0, n - 1))
    z = data.draw(st.integers(0, n - 1).filter(lambda v: v != x))
    idx = pair_index(x, z, n)
    assert 0 <= idx < n * (n - 1)
    assert pair_unindex(idx, n) == (x, z)


@given(st.integers(2, 12))
def test_pair_index_covers_every_slot_once(n):
    slots = {pair_index(x, z, n) for x in range(n) for z in range(n) if x != z}
    assert slots == set(range(n * (n - 1)))


def test_universe_validation():
    with pytest.raises(ValueError):
        Universe(1)
    with pytest.raises(ValueError):
        Universe(3, labels=("a", "b"))
    u = Universe(2, labels=("left", "right"))
    assert u.label(1) == "right"
    assert Universe(2).label(1) == "1"


def test_ranking_validation():
    with pytest.raises(ValueError):
        Ranking((0, 0), 3)
    with pytest.raises(ValueError):
        Ranking((0, 3), 3)
    with pytest.raises(ValueError):
        Ranking((), 3)
    with pytest.raises(ValueError):
        Ranking((0, 1), 3, weight=0)
    assert Ranking((0, 1, 2), 3).is_full
    assert not Ranking((0, 1), 3).is_full
    assert len(Ranking((2, 0), 4)) == 2


def test_choice_observation_sorts_and_validates():
    obs = ChoiceObservation(2, (3, 2, 0))
    assert obs.choice_set == (0, 2, 3)
    with pytest.raises(ValueError):
        ChoiceObservation(1, (0, 2))
    with pytest.raises(ValueError):
        ChoiceObservation(0, (0,))
    with pytest.raises(ValueError):
        ChoiceObservation(0, (0, 0, 1))


def test_num_rankings_is_weighted(tiny_ds):
    assert tiny_ds.num_rankings == 6


def test_params_shapes_and_centering():
    p = PLParams(np.array([1.0, 2.0, 3.0]))
    assert p.n == 3
    c = p.centered()
    assert abs(c.theta.sum()) < 1e-12
    np.testing.assert_allclose(c.theta, [-1.0, 0.0, 1.0])

    u = np.arange(6, dtype=float)
    f = CRSFullParams(u, 3)
    assert f.n == 3
    assert abs(f.centered().u.sum()) < 1e-12
    mat = f.as_matrix()
    assert mat.shape == (3, 3)
    assert np.all(np.diag(mat) == 0)
    # matrix[x, z] holds u_{xz} at the pair slot
    assert mat[0, 1] == u[pair_index(0, 1, 3)]
    assert mat[2, 1] == u[pair_index(2, 1, 3)]


def test_crs_factor_induced_full():
    rng = np.random.Generator(np.random.PCG64(3))
    T = rng.normal(size=(4, 2))
    C = rng.normal(size=(4, 2))
    p = CRSFactorParams(T, C, 2)
    assert p.n == 4 and p.r == 2
    full = p.induced_full()
    for x in range(4):
        for z in range(4):
            if x != z:
                assert full.u[pair_index(x, z, 4)] == pytest.approx(C[z] @ T[x])
    with pytest.raises(ValueError):
        CRSFactorParams(T, rng.normal(size=(4, 3)), 2)


def test_mallows_params_validation():
    p = MallowsParams((2, 0, 1), 0.5)
    assert p.positions()[2] == 0
    with pytest.raises(ValueError):
        MallowsParams((0, 0, 1), 0.5)
    with pytest.raises(ValueError):
        MallowsParams((0, 1, 2), -0.1)


def test_params_n_dispatch():
    assert params_n(PLParams(np.zeros(5))) == 5
    assert params_n(CRSFullParams(np.zeros(20), 5)) == 5
    assert params_n(MallowsParams((1, 0), 0.0)) == 2


def test_validate_dataset_collects_all_issues():
    rep = validate_dataset(Universe(3), [[0, 1, 2], [0, 0], [5], []], weights=[1, 1, 1, 0])
    assert not rep
    msgs = " ".join(i.message for i in rep.issues)
    assert "duplicate" in msgs
    assert "out of range" in msgs
    assert "length" in msgs
    assert "not positive" in msgs
    bad_rows = {i.ranking_index for i in rep.issues}
    assert 0 not in bad_rows


def test_validate_dataset_ok_path():
    rep = validate_dataset(Universe(3), [[0, 1], [2]], weights=[3, 1])
    assert rep.ok and bool(rep)
    assert rep.num_rankings == 4


def test_dataset_from_rows_round_trip():
    ds = dataset_from_rows(Universe(3), [[2, 0], [1]], weights=[2, 5])
    assert isinstance(ds, RankingDataset)
    assert ds.universe.n == 3
    assert ds.rankings[0].items == (2, 0)
    assert ds.rankings[1].weight == 5
    with pytest.raises(ValueError):
        dataset_from_rows(Universe(3), [[0, 0]])
