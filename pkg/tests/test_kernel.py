import numpy as np
import pytest

from misspec_bandits import kernel
from misspec_bandits.env import context_cdf, trial_streams

PHI = np.array([[2.0, 3.0], [4.0, 5.0], [2.0, 1.0]])
PHI_X2 = np.array([[2.0, 3.0], [4.0, 5.0], [6.0, 7.0]])

needs_ext = pytest.mark.skipif(kernel.run_trial_ext is None, reason="compiled kernel not built")


def _inputs(table, mu, seed, T, probs=(1.0,)):
    noise, explore, ctx = trial_streams(seed)
    grid = mu.reshape(table.shape[0], table.shape[1])
    gaps = (grid.max(axis=1, keepdims=True) - grid).reshape(-1)
    return (table, gaps, mu), (explore.random((T, 2)), noise.standard_normal(T), ctx.random(T), context_cdf(probs))


CASES = [
    ("eps forced", PHI[None], np.array([4.847, 9.972, -0.8]), kernel.EPS_GREEDY, 0.0, 0.0, (1.0,)),
    ("eps ridge", PHI[None], np.array([4.847, 9.972, -0.8]), kernel.EPS_GREEDY, 1.0, 0.0, (1.0,)),
    ("linucb fallback", PHI[None], np.array([4.847, 9.972, -0.8]), kernel.LINUCB, 0.0, 41.0, (1.0,)),
    ("linucb ridge", PHI[None], np.array([4.847, 9.972, -0.8]), kernel.LINUCB, 2.0, 0.0, (1.0,)),
    ("contextual", np.stack([PHI, PHI_X2]), np.array([1.0, 3.0, 0.0, 0.5, 2.0, 1.0]),
     kernel.EPS_GREEDY, 0.0, 0.0, (0.3, 0.7)),
    ("scalar", np.array([[[3.0], [1.0]]]), np.array([20.0, 3.0]), kernel.LINUCB, 0.0, 9.0, (1.0,)),
]


@needs_ext
@pytest.mark.parametrize("case", CASES, ids=[c[0] for c in CASES])
def test_backends_bit_identical(case):
    _, table, mu, algo, ridge, min_eig, probs = case
    (tbl, gaps, mu), draws = _inputs(table, mu, 11, 3000, probs)
    a = kernel.run_trial_py(tbl, gaps, mu, algo, ridge, 0.5, 0.05, 0.5, min_eig, *draws)
    b = kernel.run_trial_ext(tbl, gaps, mu, algo, ridge, 0.5, 0.05, 0.5, min_eig, *draws)
    for x, y in zip(a[:4], b[:4]):
        assert np.array_equal(np.asarray(x), np.asarray(y))
    assert bool(a[4]) == bool(b[4])


def test_backend_flag():
    assert kernel.BACKEND in ("cython", "python")
    assert (kernel.run_trial_ext is None) == (kernel.BACKEND == "python")


def test_trace_shapes_and_monotone():
    (tbl, gaps, mu), draws = _inputs(PHI[None], np.array([4.847, 9.972, -0.8]), 0, 500)
    contexts, actions, cum, kinds, fell_back = kernel.run_trial(tbl, gaps, mu, kernel.EPS_GREEDY, 0.0,
                                                                0.5, 0.05, 0.5, 0.0, *draws)
    assert cum.shape == (500,) and actions.shape == (500,)
    assert np.all(np.diff(cum) >= 0)
    assert np.all(contexts == 0)
    assert not fell_back
    assert cum[-1] == pytest.approx(gaps[actions].sum())
