import numpy as np
import pytest

from concentra.mc import block_rng, run_blocks


def draw(rng, size):
    return rng.normal(size=size)


@pytest.mark.parametrize("workers", [1, 2, 5])
def test_worker_count_does_not_change_output(workers):
    ref = run_blocks(draw, 10_000, seed=9, workers=1, block_size=1000)
    out = run_blocks(draw, 10_000, seed=9, workers=workers, block_size=1000)
    assert out.tobytes() == ref.tobytes()


def test_blocks_are_independent_streams():
    a = block_rng(1, 0).random(5)
    b = block_rng(1, 1).random(5)
    c = block_rng(2, 0).random(5)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert np.array_equal(a, block_rng(1, 0).random(5))


def test_partial_block_and_validation():
    assert run_blocks(draw, 10, seed=0, block_size=4).shape == (10,)
    with pytest.raises(ValueError):
        run_blocks(draw, 0, seed=0)
