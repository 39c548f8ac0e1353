import numpy as np

from prbandits.rng import RngStream, derive_stream_id


def test_identical_keys_reproduce_bit_exactly():
    a = RngStream(123, 456).uniform(size=100)
    b = RngStream(123, 456).uniform(size=100)
    assert np.array_equal(a, b)


def test_distinct_keys_differ():
    a = RngStream(123, 456).uniform(size=100)
    b = RngStream(123, 457).uniform(size=100)
    c = RngStream(124, 456).uniform(size=100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_derive_stream_id_stable_and_typed():
    assert derive_stream_id("a", 1) == derive_stream_id("a", 1)
    assert derive_stream_id("a", 1) != derive_stream_id("a", 2)
    assert derive_stream_id("a", 1) != derive_stream_id(1, "a")
    # str/int confusion must not collide: "1" is not 1
    assert derive_stream_id("1") != derive_stream_id(1)


def test_child_streams_are_independent_and_reproducible():
    base = RngStream(9)
    c1 = base.child("arm", 0)
    c2 = base.child("arm", 1)
    again = RngStream(9).child("arm", 0)
    assert c1.stream_id == again.stream_id
    assert np.array_equal(c1.uniform(size=10), again.uniform(size=10))
    assert not np.array_equal(
        RngStream(9).child("arm", 0).uniform(size=10), c2.uniform(size=10)
    )


def test_integers_in_range():
    rng = RngStream(5)
    draws = [rng.integers(7) for _ in range(200)]
    assert min(draws) >= 0 and max(draws) < 7
