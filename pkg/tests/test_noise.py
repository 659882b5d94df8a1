import numpy as np
from scipy import stats

from oscimarket.noise import NoiseEnsemble, NoiseStream, chunk_steps


def test_same_key_same_sequence():
    a = NoiseStream(42, 3, 2).normals(0, 1000)
    b = NoiseStream(42, 3, 2).normals(0, 1000)
    assert np.array_equal(a, b)


def test_counter_access_is_chunk_invariant():
    s = NoiseStream(7, 0, 3)
    whole = s.normals(0, 101)
    parts = np.concatenate([s.normals(0, 40), s.normals(40, 1), s.normals(41, 60)])
    assert np.array_equal(whole, parts)


def test_stream_equals_ensemble_column():
    ens = NoiseEnsemble.first(9, 5, 2)
    block = ens.normals(10, 20)
    for m in range(5):
        assert np.array_equal(block[:, :, m], NoiseStream(9, m, 2).normals(10, 20))
    sub = ens.subset(2, 4).normals(10, 20)
    assert np.array_equal(sub, block[:, :, 2:4])


def test_distinct_paths_are_uncorrelated_and_normal():
    a = NoiseStream(1, 0, 1).normals(0, 200_000).ravel()
    b = NoiseStream(1, 1, 1).normals(0, 200_000).ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)
    assert stats.kstest(a, "norm").statistic < 0.005
    assert abs(a.var() - 1) < 0.01


def test_increments_scale_with_sqrt_dt():
    s = NoiseStream(3, 0, 1)
    assert np.allclose(s.increments(0, 10, 0.04), 0.2 * s.normals(0, 10))


def test_seeds_differ():
    assert not np.array_equal(NoiseStream(1, 0).normals(0, 10), NoiseStream(2, 0).normals(0, 10))


def test_chunk_steps_bounds():
    assert chunk_steps(10, 2, 1) == 10
    assert 1 <= chunk_steps(10 ** 6, 2, 10 ** 5) < 10 ** 6
