"""Kernel backend selection.

Two interchangeable kernel sets exist: numba-jitted scalar loops (fast,
default when numba is importable) and bucketed pure-numpy vectorization.
The environment variable ``REPSEL_BACKEND`` forces one of {"numba",
"numpy"}; it is consulted on every lookup so tests can flip it at runtime.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_numpy

ENV_FLAG = "REPSEL_BACKEND"

try:
    from . import _kernels_numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _kernels_numba = None
    HAS_NUMBA = False


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def get_kernels(name: str | None = None) -> ModuleType:
    """Resolve a kernel module by explicit name, env flag, or default."""
    if name is None:
        name = os.environ.get(ENV_FLAG, "").strip().lower() or None
    if name is None:
        name = "numba" if HAS_NUMBA else "numpy"
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(
                "backend 'numba' requested via REPSEL_BACKEND but numba is not importable"
            )
        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}; expected one of {available_backends()}")


def warm_up(name: str | None = None) -> None:
    """Trigger JIT compilation of every kernel on tiny inputs.

    No-op for the numpy backend. Useful before timed runs so compilation
    cost is not attributed to the measured work.
    """
    import numpy as np

    kern = get_kernels(name)
    items = np.array([0, 1, 0, 1, 2], dtype=np.int64)
    offsets = np.array([0, 2, 5], dtype=np.int64)
    winner = np.array([0, 1], dtype=np.int64)
    weights = np.array([1.0, 1.0])
    theta = np.zeros(3)
    u = np.zeros(6)
    T = np.zeros((3, 2))
    C = np.zeros((3, 2))
    kern.pl_choice_logprobs(theta, items, offsets, winner)
    kern.pl_nll_grad(theta, items, offsets, winner, weights)
    kern.crs_full_choice_logprobs(u, 3, items, offsets, winner)
    kern.crs_full_nll_grad(u, 3, items, offsets, winner, weights)
    kern.crs_factor_choice_logprobs(T, C, items, offsets, winner)
    kern.crs_factor_nll_grad(T, C, items, offsets, winner, weights)
    kern.sample_pairwise(theta, np.zeros((3, 3)), np.full((2, 2), 0.5))
    kern.jacobi_eigvalsh(np.eye(3))
