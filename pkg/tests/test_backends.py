import numpy as np
import pytest

import repsel.backends as backends
from repsel.core import CRSFactorParams, CRSFullParams, PLParams, Universe
from repsel.decompose import repeated_selection
from repsel.estimate import nll_and_grad
from repsel.models import SampleConfig, pairwise_representation, sample_rankings

numba_missing = "numba" not in backends.available_backends()


def test_numpy_backend_always_available():
    assert "numpy" in backends.available_backends()
    assert backends.get_kernels("numpy").NAME == "numpy"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        backends.get_kernels("cython")


def test_env_flag_dispatch(monkeypatch):
    monkeypatch.setenv(backends.ENV_FLAG, "numpy")
    assert backends.get_kernels().NAME == "numpy"
    monkeypatch.delenv(backends.ENV_FLAG)
    default = backends.get_kernels().NAME
    assert default == ("numba" if not numba_missing else "numpy")


def test_env_flag_bogus_value(monkeypatch):
    monkeypatch.setenv(backends.ENV_FLAG, "fortran")
    with pytest.raises(ValueError):
        backends.get_kernels()


def test_warm_up_smoke():
    backends.warm_up("numpy")


@pytest.mark.skipif(numba_missing, reason="numba backend not importable")
class TestBackendAgreement:
    def setup_method(self):
        self.nb = backends.get_kernels("numba")
        self.np_ = backends.get_kernels("numpy")
        rng = np.random.Generator(np.random.PCG64(12))
        self.rng = rng

    def _cds(self, topk_ds):
        return repeated_selection(topk_ds)

    def test_nll_grad_agreement(self, topk_ds, monkeypatch):
        cds = repeated_selection(topk_ds)
        n, r = 4, 2
        params = [
            ("pl", PLParams(self.rng.normal(size=n))),
            ("crs_full", CRSFullParams(self.rng.normal(size=n * (n - 1)), n)),
            (
                "crs_factor",
                CRSFactorParams(self.rng.normal(size=(n, r)), self.rng.normal(size=(n, r)), r),
            ),
        ]
        for _, p in params:
            monkeypatch.setenv(backends.ENV_FLAG, "numba")
            v1, g1 = nll_and_grad(p, cds)
            monkeypatch.setenv(backends.ENV_FLAG, "numpy")
            v2, g2 = nll_and_grad(p, cds)
            assert v1 == pytest.approx(v2, abs=1e-12)
            g1 = g1 if isinstance(g1, np.ndarray) else np.concatenate([a.ravel() for a in g1])
            g2 = g2 if isinstance(g2, np.ndarray) else np.concatenate([a.ravel() for a in g2])
            np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_choice_logprobs_agreement(self, topk_ds):
        cds = repeated_selection(topk_ds)
        args = (cds.set_items, cds.set_offsets, cds.winner_pos)
        theta = self.rng.normal(size=4)
        np.testing.assert_allclose(
            self.nb.pl_choice_logprobs(theta, *args),
            self.np_.pl_choice_logprobs(theta, *args),
            atol=1e-13,
        )

    def test_sampler_bit_identical(self, monkeypatch):
        for params in (
            PLParams(np.array([0.5, -0.2, 0.1, -0.4])),
            CRSFullParams(np.linspace(-0.4, 0.4, 12), 4),
        ):
            theta, U = pairwise_representation(params)
            uniforms = np.random.Generator(np.random.PCG64(99)).random((64, 3))
            a = self.nb.sample_pairwise(theta, U, uniforms)
            b = self.np_.sample_pairwise(theta, U, uniforms)
            np.testing.assert_array_equal(a, b)

    def test_sample_rankings_identical_across_env(self, monkeypatch):
        p = PLParams(np.array([0.3, 0.0, -0.3]))
        monkeypatch.setenv(backends.ENV_FLAG, "numba")
        a = sample_rankings(p, Universe(3), SampleConfig(4, 200))
        monkeypatch.setenv(backends.ENV_FLAG, "numpy")
        b = sample_rankings(p, Universe(3), SampleConfig(4, 200))
        assert [r.items for r in a.rankings] == [r.items for r in b.rankings]

    def test_jacobi_agreement(self):
        A = np.random.Generator(np.random.PCG64(5)).normal(size=(12, 12))
        A = A + A.T
        np.testing.assert_allclose(
            np.sort(self.nb.jacobi_eigvalsh(A, 1e-11, 100)),
            np.sort(self.np_.jacobi_eigvalsh(A, 1e-11, 100)),
            atol=1e-11,
        )
