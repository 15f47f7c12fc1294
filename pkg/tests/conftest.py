import numpy as np
import pytest

from repsel.core import Ranking, RankingDataset, Universe


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240601))


@pytest.fixture
def tiny_ds():
    """Three weighted full rankings over n=3."""
    return RankingDataset(
        Universe(3),
        (
            Ranking((0, 1, 2), 3, 3),
            Ranking((1, 2, 0), 3, 2),
            Ranking((2, 0, 1), 3, 1),
        ),
    )


@pytest.fixture
def topk_ds():
    """Mixed full and top-k rankings over n=4."""
    return RankingDataset(
        Universe(4),
        (
            Ranking((2, 0), 4, 4),
            Ranking((0, 1, 2, 3), 4, 1),
            Ranking((3,), 4, 2),
            Ranking((1, 3, 0), 4, 1),
        ),
    )
