import numpy as np
import pytest

from seeqst.circuits import Variant
from seeqst.experiments import error_sweep, loglog_slope, noisy_mle_fidelity, subset_growth, sweep_observations
from seeqst.sim import NoiseSpec
from seeqst.verify import anticommutation_matrix, commutation_violations, dense_commutation_violations


def test_loglog_slope_exact():
    s = np.array([1e2, 1e3, 1e4])
    assert loglog_slope(s, 3 / np.sqrt(s)) == pytest.approx(-0.5)


def test_error_sweep_shape_and_order():
    sweep = error_sweep(2, [256, 4096], n_states=3, variant=Variant.SEEQST, seed=1)
    assert sweep.errors.shape == (3, 2, 3)
    assert np.all(sweep.mean()[1] < sweep.mean()[0])
    assert len(list(sweep.rows())) == 2 * 3
    assert len(sweep_observations(sweep)) == 6


def test_error_sweep_reproducible():
    a = error_sweep(2, [128], 2, Variant.LOCAL, seed=4)
    b = error_sweep(2, [128], 2, Variant.LOCAL, seed=4)
    np.testing.assert_array_equal(a.errors, b.errors)


def test_noisy_mle_fidelity_noiseless():
    assert noisy_mle_fidelity(2, NoiseSpec(), Variant.SEEQST, state_seed=0, shots=4096) > 0.98


def test_subset_growth_shapes():
    out = subset_growth(2, [1, 2], n_states=1, shots=256)
    assert out["direct"].shape == out["mle"].shape == (1, 2)


def test_symplectic_matrix():
    assert anticommutation_matrix(["X", "Z"], ["Y", "X"]).tolist() == [[1, 0], [1, 1]]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_commutation_checks(n):
    assert commutation_violations(n) == 0
    assert dense_commutation_violations(n) == 0
