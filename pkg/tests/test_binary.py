import numpy as np

from vsmm.binary import b2a, bit_decompose, highest_one_hot, msb, relu
from vsmm.ring import lift_signed, random_ring, reconstruct, share_secret
from vsmm.runtime import run_two_party


def _shared(rng, x):
    return share_secret(x, random_ring(rng, x.shape))


def test_bit_decompose_exact(rng):
    x = random_ring(rng, (64,))
    x0, x1 = _shared(rng, x)
    o0, o1, meter = run_two_party(bit_decompose, (x0,), (x1,))
    bits = (o0 ^ o1).astype(np.uint64)
    weights = np.uint64(1) << np.arange(64, dtype=np.uint64)
    assert np.array_equal((bits * weights).sum(axis=-1, dtype=np.uint64), x)
    assert meter.rounds == 7  # initial AND plus 6 prefix levels


def test_msb_matches_sign(rng):
    x = rng.integers(-10 ** 9, 10 ** 9, 200).astype(np.int64).astype(np.uint64)
    x0, x1 = _shared(rng, x)
    o0, o1, _ = run_two_party(msb, (x0,), (x1,))
    assert np.array_equal(o0 ^ o1, (lift_signed(x) < 0).astype(np.uint8))


def test_b2a(rng):
    b = rng.integers(0, 2, 100).astype(np.uint8)
    mask = rng.integers(0, 2, 100).astype(np.uint8)
    o0, o1, _ = run_two_party(b2a, (mask,), (b ^ mask,))
    assert np.array_equal(reconstruct(o0, o1), (b ^ mask ^ mask).astype(np.uint64))


def test_relu_exact(rng):
    x = rng.integers(-10 ** 6, 10 ** 6, 500).astype(np.int64).astype(np.uint64)
    x0, x1 = _shared(rng, x)

    def proto(ctx, xv):
        return relu(ctx, xv)

    (v0, m0), (v1, m1), meter = run_two_party(proto, (x0,), (x1,))
    got = lift_signed(reconstruct(v0, v1))
    assert np.array_equal(got, np.maximum(lift_signed(x), 0))
    mask = reconstruct(m0, m1)
    assert np.array_equal(mask, (lift_signed(x) >= 0).astype(np.uint64))
    assert meter.rounds == 9  # bit decomposition + b2a + final multiply


def test_highest_one_hot(rng):
    x = random_ring(rng, (64,))
    x[0] = 0  # include the all-zero case
    x0, x1 = _shared(rng, x)
    o0, o1, meter = run_two_party(highest_one_hot, (x0,), (x1,))
    onehot = reconstruct(o0, o1)
    for i, v in enumerate(x):
        row = onehot[i]
        if v == 0:
            assert row.sum() == 0
        else:
            k = int(v).bit_length() - 1
            assert row[k] == 1 and row.sum() == 1
    assert meter.rounds == 14
