import numpy as np
import pytest

from qbfactory.rng import RngStream


def test_same_key_same_sequence():
    a = RngStream(42, 3).uniforms(1000)
    b = RngStream(42, 3).uniforms(1000)
    assert np.array_equal(a, b)


def test_key_is_used_verbatim():
    # documented contract: Philox keyed by (seed, stream), counter at zero
    ref = np.random.Generator(np.random.Philox(key=np.array([7, 11], dtype=np.uint64))).random(16)
    assert np.array_equal(RngStream(7, 11).uniforms(16), ref)


def test_scalar_and_array_draws_agree():
    rng = RngStream(5)
    scalars = [rng.random() for _ in range(777)]
    assert np.array_equal(np.array(scalars), RngStream(5).uniforms(777))


def test_streams_differ():
    assert not np.array_equal(RngStream(1, 0).uniforms(8), RngStream(1, 1).uniforms(8))
    assert not np.array_equal(RngStream(1, 0).uniforms(8), RngStream(2, 0).uniforms(8))


def test_for_task_matches_explicit_stream():
    assert np.array_equal(RngStream.for_task(9, 4).uniforms(10), RngStream(9, 4).uniforms(10))


def test_substream_ignores_parent_consumption():
    fresh = RngStream(3, 2)
    used = RngStream(3, 2)
    used.uniforms(1000)
    assert fresh.substream(1).stream == used.substream(1).stream
    assert fresh.substream(1).stream != fresh.substream(2).stream


def test_spawn_is_deterministic_and_advances_parent():
    a, b = RngStream(8), RngStream(8)
    assert a.spawn().stream == b.spawn().stream
    assert a.spawn().stream != RngStream(8).spawn().stream


@pytest.mark.parametrize("seed,stream", [(-1, 0), (0, -1), (1 << 64, 0)])
def test_rejects_out_of_range_keys(seed, stream):
    with pytest.raises(ValueError):
        RngStream(seed, stream)


def test_uniform_moments():
    u = RngStream(123).uniforms(200_000)
    assert abs(u.mean() - 0.5) < 5 * np.sqrt(1 / 12 / u.size)
    assert u.min() >= 0.0 and u.max() < 1.0
