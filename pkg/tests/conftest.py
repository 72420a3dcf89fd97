import numpy as np
import pytest

from combodose.core import Combo, DoseGrid, TrialState, record_cohort


@pytest.fixture
def grid33() -> DoseGrid:
    return DoseGrid.regular(3, 3)


def make_state(counts: dict[tuple[int, int], tuple[int, int]], shape=(3, 3), current=None) -> TrialState:
    """Build a trial state from {(i, j): (n, y)} in dosing order."""
    state = TrialState.fresh(shape)
    last = Combo(1, 1)
    for (i, j), (n, y) in counts.items():
        state = record_cohort(state, Combo(i, j), n, y)
        last = Combo(i, j)
    if current is not None:
        state = TrialState(
            n=state.n,
            y=state.y,
            current=Combo(*current),
            eliminated=state.eliminated,
            terminated=state.terminated,
            cohort_log=state.cohort_log,
        )
    return state


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
