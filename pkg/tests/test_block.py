import numpy as np
import pytest

from ppformer.block import BlockConfig, run_block
from ppformer.fixed_ring import RingParams


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_block_accuracy(seed):
    res = run_block(BlockConfig(seed=seed, poly_n=256))
    assert res.output.params == RingParams(64, 18)
    assert res.output.shape == (8, 16)
    assert res.max_err <= 2.0 ** -8


def test_block_deterministic():
    a = run_block(BlockConfig(seed=5, poly_n=256))
    b = run_block(BlockConfig(seed=5, poly_n=256))
    assert a.output == b.output
    assert a.run.transcript.signature() == b.run.transcript.signature()
    assert a.run.transcript.bytes == b.run.transcript.bytes


def test_block_tcp_matches_inproc():
    a = run_block(BlockConfig(seed=3, poly_n=256))
    b = run_block(BlockConfig(seed=3, poly_n=256, transport="tcp"))
    assert a.run.transcript.signature() == b.run.transcript.signature()
    assert a.setup.transcript.signature() == b.setup.transcript.signature()
    assert np.array_equal(a.output.data, b.output.data)


def test_block_counts():
    res = run_block(BlockConfig(rows=4, cols=8, out=8, poly_n=64))
    tr = res.run.transcript
    assert tr.ct_out == 1 and tr.ct_in == 0
    assert res.setup.transcript.ciphertexts("weights") == 8
    calls = tr.func_calls_by_label
    assert calls[("mul", "poly")] == 2 and calls[("less", "cmp")] == 2
    assert tr.func_calls["wrap"] == 2
