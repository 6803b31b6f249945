import numpy as np
import pytest

from ictd.exception import DimensionError, DomainError, SingularityError
from ictd.numerics import (as_matrix, cosine_similarity, make_rng, mat_mul, spawn_rngs, weighted_least_squares,
                           weighted_norm)


def test_same_seed_same_stream():
    assert np.array_equal(make_rng(7).random(5), make_rng(7).random(5))
    assert not np.array_equal(make_rng(7).random(5), make_rng(8).random(5))


def test_spawned_streams_are_reproducible_and_distinct():
    first = [g.random(3) for g in spawn_rngs(11, 3)]
    again = [g.random(3) for g in spawn_rngs(11, 3)]
    for a, b in zip(first, again):
        assert np.array_equal(a, b)
    assert not np.array_equal(first[0], first[1])


def test_as_matrix_rejects_bad_input():
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
    with pytest.raises(DomainError):
        as_matrix([[1.0, np.nan]])


def test_mat_mul_shape_mismatch():
    with pytest.raises(DimensionError):
        mat_mul(np.ones((2, 3)), np.ones((2, 3)))
    assert np.array_equal(mat_mul(np.eye(2), np.ones((2, 3))), np.ones((2, 3)))


def test_weighted_norm():
    assert weighted_norm(np.array([3.0, 4.0]), np.array([1.0, 1.0])) == pytest.approx(5.0)
    assert weighted_norm(np.array([3.0, 4.0]), np.array([0.0, 0.25])) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        weighted_norm(np.ones(2), np.array([-1.0, 1.0]))


def test_weighted_least_squares_recovers_exact_weights(rng):
    Phi = rng.uniform(-1.0, 1.0, size=(10, 3))
    w = np.array([0.5, -1.0, 2.0])
    d_p = rng.uniform(0.1, 1.0, size=10)
    d_p /= d_p.sum()
    assert np.allclose(weighted_least_squares(Phi, Phi @ w, d_p), w, atol=1e-10)


def test_weighted_least_squares_singular(rng):
    column = rng.uniform(-1.0, 1.0, size=(6, 1))
    Phi = np.hstack([column, column])
    with pytest.raises(SingularityError):
        weighted_least_squares(Phi, np.ones(6), np.full(6, 1 / 6))


def test_cosine_similarity_conventions():
    a = np.array([1.0, 2.0, 3.0])
    assert cosine_similarity(a, 2 * a) == pytest.approx(1.0)
    assert cosine_similarity(a, -a) == pytest.approx(-1.0)
    assert cosine_similarity(a, np.zeros(3)) == 0.0
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)
