import math

import numpy as np
import pytest

from repsel.core import (
    ChoiceObservation,
    CRSFactorParams,
    CRSFullParams,
    MallowsParams,
    PLParams,
    Ranking,
    RankingDataset,
    Universe,
)
from repsel.decompose import from_observations, repeated_selection
from repsel.estimate import (
    THETA_C_SEARCH_BOX,
    DivergenceError,
    FitConfig,
    fit,
    fit_mallows,
    mga_reference,
    nll_and_grad,
    pairwise_count_matrix,
    _golden_section,
    _mallows_nll,
    _mallows_stage_arrays,
)
from repsel.models import SampleConfig, ranking_logprobs, sample_rankings

FAST = FitConfig(learning_rate=0.05, epochs=300)


def synthetic_pl_ds(n=5, ell=2000, seed=8):
    rng = np.random.Generator(np.random.PCG64(seed))
    theta = rng.normal(scale=0.8, size=n)
    theta -= theta.mean()
    truth = PLParams(theta)
    ds = sample_rankings(truth, Universe(n), SampleConfig(seed + 1, ell))
    return truth, ds


# --- objective and gradients ----------------------------------------------------


def test_pl_two_item_frozen_gradient():
    cds = from_observations(Universe(2), [ChoiceObservation(0, (0, 1))])
    val, grad = nll_and_grad(PLParams(np.zeros(2)), cds)
    assert val == pytest.approx(math.log(2.0), abs=1e-15)
    np.testing.assert_allclose(grad, [-0.5, 0.5], atol=1e-15)


def test_weights_scale_objective(tiny_ds):
    cds = repeated_selection(tiny_ds)
    doubled = type(cds)(
        universe=cds.universe,
        set_items=cds.set_items,
        set_offsets=cds.set_offsets,
        winner_pos=cds.winner_pos,
        weights=cds.weights * 2.0,
        source_map=cds.source_map,
    )
    p = PLParams(np.array([0.3, -0.1, -0.2]))
    v1, g1 = nll_and_grad(p, cds)
    v2, g2 = nll_and_grad(p, doubled)
    assert v2 == pytest.approx(2 * v1, rel=1e-14)
    np.testing.assert_allclose(g2, 2 * np.asarray(g1), rtol=1e-14)


def fd_check(make_params, flatten, unflatten, x0, cds, h=1e-5):
    """Central finite differences against the analytic gradient."""
    val, grad = nll_and_grad(make_params(x0), cds)
    grad = flatten(grad)
    fd = np.empty_like(x0)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        fp, _ = nll_and_grad(make_params(xp), cds)
        fm, _ = nll_and_grad(make_params(xm), cds)
        fd[i] = (fp - fm) / (2 * h)
    denom = max(np.linalg.norm(fd), 1e-12)
    return np.linalg.norm(grad - fd) / denom


@pytest.mark.parametrize("kind", ["pl", "crs_full", "crs_factor"])
def test_gradients_match_finite_differences(kind, topk_ds, rng):
    cds = repeated_selection(topk_ds)
    n, r = 4, 2
    for _ in range(5):
        if kind == "pl":
            x0 = rng.normal(size=n)
            rel = fd_check(lambda x: PLParams(x), np.asarray, None, x0, cds)
        elif kind == "crs_full":
            x0 = rng.normal(size=n * (n - 1))
            rel = fd_check(lambda x: CRSFullParams(x, n), np.asarray, None, x0, cds)
        else:
            x0 = rng.normal(size=2 * n * r)
            rel = fd_check(
                lambda x: CRSFactorParams(
                    x[: n * r].reshape(n, r), x[n * r :].reshape(n, r), r
                ),
                lambda g: np.concatenate([g[0].ravel(), g[1].ravel()]),
                None,
                x0,
                cds,
            )
        assert rel <= 1e-6


def test_pl_objective_is_convex_along_segments(topk_ds, rng):
    cds = repeated_selection(topk_ds)
    for _ in range(10):
        a = rng.normal(size=4)
        b = rng.normal(size=4)
        va, _ = nll_and_grad(PLParams(a), cds)
        vb, _ = nll_and_grad(PLParams(b), cds)
        vm, _ = nll_and_grad(PLParams((a + b) / 2), cds)
        assert vm <= (va + vb) / 2 + 1e-12


# --- fit mechanics ----------------------------------------------------------------


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        FitConfig(beta1=1.0)
    with pytest.raises(ValueError):
        FitConfig(epochs=-1)
    with pytest.raises(ValueError):
        FitConfig(batch_size=0)
    with pytest.raises(ValueError):
        FitConfig(batch_size="half")
    with pytest.raises(ValueError):
        FitConfig(rank=0)


def test_unknown_model_kind(tiny_ds):
    with pytest.raises(ValueError):
        fit("bradley_terry", tiny_ds, FitConfig())


def test_rank_required_for_factor(tiny_ds):
    with pytest.raises(ValueError):
        fit("crs_factor", tiny_ds, FitConfig(rank=None))


def test_zero_epochs_returns_initialization(tiny_ds):
    rep = fit("pl", tiny_ds, FitConfig(epochs=0))
    assert rep.epochs_run == 0
    assert len(rep.nll_trace) == 1
    np.testing.assert_array_equal(rep.final_params.theta, np.zeros(3))


def test_trace_shape_and_improvement(tiny_ds):
    rep = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=40))
    assert rep.epochs_run == 40
    assert len(rep.nll_trace) == 41
    assert rep.nll_trace[-1] < rep.nll_trace[0]


def test_report_normalizers(tiny_ds):
    rep = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=60))
    lps = ranking_logprobs(rep.final_params, tiny_ds)
    w = np.array([r.weight for r in tiny_ds.rankings], dtype=float)
    total = -(lps @ w)
    assert rep.train_nll_per_ranking == pytest.approx(total / 6, rel=1e-9)
    # n=3 full rankings decompose into 2 choices each
    assert rep.train_nll_per_choice == pytest.approx(total / 12, rel=1e-9)


def test_fit_is_deterministic(tiny_ds):
    a = fit("crs_factor", tiny_ds, FitConfig(epochs=25, rank=2, seed=3))
    b = fit("crs_factor", tiny_ds, FitConfig(epochs=25, rank=2, seed=3))
    np.testing.assert_array_equal(a.final_params.T, b.final_params.T)
    np.testing.assert_array_equal(a.final_params.C, b.final_params.C)
    assert a.nll_trace == b.nll_trace


def test_fit_seed_changes_factor_init(tiny_ds):
    a = fit("crs_factor", tiny_ds, FitConfig(epochs=0, rank=2, seed=3))
    b = fit("crs_factor", tiny_ds, FitConfig(epochs=0, rank=2, seed=4))
    assert not np.array_equal(a.final_params.T, b.final_params.T)


def test_final_params_are_centered(tiny_ds):
    rep = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=30))
    assert abs(rep.final_params.theta.sum()) < 1e-12
    rep = fit("crs_full", tiny_ds, FitConfig(learning_rate=0.05, epochs=30))
    assert abs(rep.final_params.u.sum()) < 1e-12


def test_gauge_indifference_of_pl_fit(tiny_ds):
    # shifted warm starts land on the same centered optimum
    cfg = FitConfig(learning_rate=0.05, epochs=200)
    a = fit("pl", tiny_ds, cfg, init=PLParams(np.zeros(3)))
    b = fit("pl", tiny_ds, cfg, init=PLParams(np.zeros(3) + 5.0))
    np.testing.assert_allclose(a.final_params.theta, b.final_params.theta, atol=1e-6)


def test_minibatch_path_converges(tiny_ds):
    full = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=300))
    mini = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=300, batch_size=2, seed=1))
    assert mini.train_nll_per_ranking == pytest.approx(full.train_nll_per_ranking, abs=5e-3)
    rerun = fit("pl", tiny_ds, FitConfig(learning_rate=0.05, epochs=300, batch_size=2, seed=1))
    np.testing.assert_array_equal(mini.final_params.theta, rerun.final_params.theta)


def test_pl_recovery():
    truth, ds = synthetic_pl_ds(n=5, ell=2000)
    rep = fit("pl", ds, FAST)
    err = np.linalg.norm(rep.final_params.theta - truth.theta)
    assert err <= 0.15


def test_divergence_is_reported(tiny_ds):
    with pytest.raises(DivergenceError, match="epoch"):
        fit("crs_factor", tiny_ds, FitConfig(learning_rate=1e160, epochs=5, rank=2))


def test_warm_start_accepts_matching_params(tiny_ds):
    rep0 = fit("pl", tiny_ds, FAST)
    rep1 = fit("pl", tiny_ds, FitConfig(learning_rate=0.01, epochs=5), init=rep0.final_params)
    assert rep1.train_nll_per_ranking == pytest.approx(rep0.train_nll_per_ranking, abs=1e-4)


# --- pairwise counts and MGA --------------------------------------------------------


def test_pairwise_count_matrix_topk():
    ds = RankingDataset(Universe(4), (Ranking((2, 0), 4, 1),))
    W = pairwise_count_matrix(ds)
    expected = np.zeros((4, 4))
    # 2 beats 0 (listed below) and 1, 3 (unranked); 0 beats the unranked pair
    expected[2, [0, 1, 3]] = 1
    expected[0, [1, 3]] = 1
    np.testing.assert_array_equal(W, expected)


def test_pairwise_count_matrix_weights(tiny_ds):
    W = pairwise_count_matrix(tiny_ds)
    # (0,1,2) w3, (1,2,0) w2, (2,0,1) w1
    assert W[0, 1] == 3 + 1
    assert W[1, 0] == 2
    assert W[1, 2] == 3 + 2
    assert W[2, 0] == 2 + 1


def test_mga_recovers_unanimous_order():
    ds = RankingDataset(Universe(4), (Ranking((3, 1, 0, 2), 4, 7),))
    assert mga_reference(ds) == (3, 1, 0, 2)


def test_mga_condorcet_cycle_tie_break():
    # perfectly tied cycle: greedy falls back to lowest index at every step
    ds = RankingDataset(
        Universe(3),
        tuple(Ranking(p, 3, 1) for p in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]),
    )
    assert mga_reference(ds) == (0, 1, 2)


# --- Mallows fitting ---------------------------------------------------------------


def test_golden_section_quadratic():
    argmin = _golden_section(lambda x: (x - 1.3) ** 2, 0.0, 20.0, 1e-6)
    assert argmin == pytest.approx(1.3, abs=1e-5)


def test_golden_section_beats_grid_sweep(tiny_ds):
    cds = repeated_selection(tiny_ds)
    sigma0 = mga_reference(tiny_ds)
    v, sizes, weights = _mallows_stage_arrays(cds, sigma0)
    best = _golden_section(lambda t: _mallows_nll(t, v, sizes, weights), *THETA_C_SEARCH_BOX, 1e-6)
    lo, hi = THETA_C_SEARCH_BOX
    grid = np.arange(lo, hi + 0.01, 0.01)
    grid_best = min(_mallows_nll(float(t), v, sizes, weights) for t in grid)
    assert _mallows_nll(best, v, sizes, weights) <= grid_best + 1e-9


def test_fit_mallows_recovery():
    truth = MallowsParams((0, 1, 2, 3, 4), 1.0)
    ds = sample_rankings(truth, Universe(5), SampleConfig(11, 2000))
    rep = fit_mallows(ds)
    assert rep.final_params.sigma0 == truth.sigma0
    assert rep.final_params.theta_c == pytest.approx(1.0, abs=0.1)
    assert rep.nll_trace[1] < rep.nll_trace[0]


def test_fit_mallows_unanimous_hits_search_edge():
    ds = RankingDataset(Universe(4), (Ranking((0, 1, 2, 3), 4, 100),))
    rep = fit_mallows(ds)
    assert rep.final_params.sigma0 == (0, 1, 2, 3)
    assert rep.final_params.theta_c == pytest.approx(THETA_C_SEARCH_BOX[1])


def test_fit_dispatches_mallows(tiny_ds):
    a = fit("mallows", tiny_ds, FitConfig())
    b = fit_mallows(tiny_ds)
    assert a.final_params == b.final_params
