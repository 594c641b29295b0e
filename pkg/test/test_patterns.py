import numpy as np
from lenslesstools import patterns
from load_tests import assert_raises_message
from parameterized import parameterized


def _cyclic_autocorrelation(vector):
    signed = 2 * vector - 1
    return np.array([np.dot(signed, np.roll(signed, lag)) for lag in range(len(signed))])


def test_mls_order_9_balance():
    vector = patterns.mls_vector(9)
    assert vector.shape == (511,)
    assert np.sum(vector == 1) == 256
    assert np.sum(vector == 0) == 255


def test_mls_order_2():
    vector = patterns.mls_vector(2)
    phases = [np.roll([1, 1, 0], shift).tolist() for shift in range(3)]
    assert vector.tolist() in phases


@parameterized.expand([(order,) for order in range(2, 13)])
def test_mls_two_level_autocorrelation(order):
    vector = patterns.mls_vector(order)
    n = 2 ** order - 1
    assert len(vector) == n
    assert np.sum(vector) == (n + 1) // 2
    correlation = _cyclic_autocorrelation(vector)
    assert correlation[0] == n
    np.testing.assert_array_equal(correlation[1:], -1)


def test_mls_deterministic():
    np.testing.assert_array_equal(patterns.mls_vector(7), patterns.mls_vector(7))


@parameterized.expand([(1,), (21,)])
def test_mls_order_out_of_range(order):
    with assert_raises_message(
        ValueError, "Expected order between 2 and 20, got {}".format(order)
    ):
        patterns.mls_vector(order)


def test_mls_order_not_int():
    with assert_raises_message(ValueError, "Expected order integer, got 9.0"):
        patterns.mls_vector(9.0)


def test_make_mask_mls():
    mask = patterns.make_mask("mls", order=9)
    assert mask.kind == "mls"
    assert mask.row_vector.shape == (511,)
    np.testing.assert_array_equal(mask.row_vector, mask.col_vector)
    np.testing.assert_array_equal(mask.row_vector, patterns.mls_vector(9))
    assert np.isclose(mask.pitch_mm, 0.06)


def test_make_mask_pinhole_centered():
    mask = patterns.make_mask("pinhole", n_features=511)
    assert np.flatnonzero(mask.row_vector).tolist() == [255]
    assert np.flatnonzero(mask.col_vector).tolist() == [255]
    assert mask.matrix.sum() == 1
    assert mask.matrix[255, 255] == 1


def test_make_mask_pinhole_index():
    mask = patterns.make_mask("pinhole", pinhole_index=3, n_features=11)
    assert np.flatnonzero(mask.row_vector).tolist() == [3]


def test_make_mask_pinhole_bad_index():
    with assert_raises_message(
        ValueError, "Expected pinhole_index between 0 and 10, got 11"
    ):
        patterns.make_mask("pinhole", pinhole_index=11, n_features=11)


def test_make_mask_bad_kind():
    with assert_raises_message(
        ValueError, "kind value lens not recognized. Choose from ['mls', 'pinhole']"
    ):
        patterns.make_mask("lens")


def test_mask_outer_product():
    mask = patterns.MaskSpec([1, 0, 1], [1, 0, 1])
    expected = np.array([[1, 0, 1], [0, 0, 0], [1, 0, 1]])
    np.testing.assert_array_equal(mask.matrix, expected)
    assert np.linalg.matrix_rank(mask.matrix) == 1


def test_mask_not_binary():
    with assert_raises_message(ValueError, "Expected row_vector to be binary"):
        patterns.MaskSpec([1, 0.5, 1], [1, 0, 1])


def test_pinhole_mask_two_openings():
    with assert_raises_message(
        ValueError, "Expected exactly one open feature in pinhole row_vector, got 2"
    ):
        patterns.MaskSpec([1, 0, 1], [0, 1, 0], kind="pinhole")


def test_uniform_sequence():
    sequence = patterns.uniform_sequence(4)
    assert sequence.count == 1
    assert sequence.family == "uniform"
    np.testing.assert_array_equal(sequence.patterns[0], np.ones((4, 4)))
    np.testing.assert_array_equal(sequence.patterns.sum(axis=0), np.ones((4, 4)))
    assert sequence.separable


def test_random_sequence_deterministic():
    a = patterns.random_sequence(16, 40, seed=7)
    b = patterns.random_sequence(16, 40, seed=7)
    np.testing.assert_array_equal(a.patterns, b.patterns)
    assert a.seed == 7


def test_random_sequence_covers():
    sequence = patterns.random_sequence(16, 40, seed=1)
    assert sequence.count == 40
    np.testing.assert_array_equal(sequence.patterns.max(axis=0), np.ones((16, 16)))
    for i in range(sequence.count):
        np.testing.assert_array_equal(
            sequence.patterns[i],
            np.outer(sequence.row_factors[i], sequence.col_factors[i]),
        )


def test_random_sequence_single_pattern_fails():
    with assert_raises_message(
        ValueError, "1 random patterns did not cover a 64x64 grid in 100 draws"
    ):
        patterns.random_sequence(64, 1, seed=0)


def test_shifting_dots_uniform():
    sequence = patterns.shifting_dots_sequence(5, 1)
    assert sequence.count == 1
    np.testing.assert_array_equal(sequence.patterns[0], np.ones((5, 5)))


def test_shifting_dots_partition():
    sequence = patterns.shifting_dots_sequence(6, 3)
    assert sequence.count == 9
    np.testing.assert_array_equal(sequence.patterns.sum(axis=(1, 2)), 4)
    np.testing.assert_array_equal(sequence.patterns.sum(axis=0), np.ones((6, 6)))
    assert sequence.patterns[1, 0, 1] == 1
    assert sequence.patterns[1, 3, 4] == 1
    assert sequence.patterns[1, 0, 0] == 0


def test_shifting_dots_count():
    assert patterns.shifting_dots_sequence(128, 7).count == 49


@parameterized.expand([(64, 8, 16), (128, 24, 48), (4, 2, 4)])
def test_shifting_lines(N, k, count):
    sequence = patterns.shifting_lines_sequence(N, k)
    assert sequence.count == count
    np.testing.assert_array_equal(sequence.patterns.sum(axis=0), 2 * np.ones((N, N)))
    np.testing.assert_array_equal(sequence.patterns[:k].sum(axis=0), np.ones((N, N)))
    np.testing.assert_array_equal(sequence.patterns[k:].sum(axis=0), np.ones((N, N)))


@parameterized.expand([(N,) for N in range(2, 65)])
def test_shifting_dots_partition_all_spacings(N):
    index = np.arange(N)
    for k in range(1, min(N, 16) + 1):
        sequence = patterns.shifting_dots_sequence(N, k)
        assert sequence.count == k * k
        np.testing.assert_array_equal(sequence.patterns.sum(axis=0), np.ones((N, N)))
        for a, b in [(0, 0), (k - 1, k - 1), (k // 2, 0)]:
            expected = np.outer(index % k == a, index % k == b)
            np.testing.assert_array_equal(sequence.patterns[a * k + b], expected)


@parameterized.expand([(N,) for N in range(2, 65)])
def test_shifting_lines_partition_all_spacings(N):
    index = np.arange(N)
    for k in range(1, min(N, 16) + 1):
        sequence = patterns.shifting_lines_sequence(N, k)
        assert sequence.count == 2 * k
        horizontal, vertical = sequence.patterns[:k], sequence.patterns[k:]
        np.testing.assert_array_equal(horizontal.sum(axis=0), np.ones((N, N)))
        np.testing.assert_array_equal(vertical.sum(axis=0), np.ones((N, N)))
        for a in range(k):
            np.testing.assert_array_equal(horizontal[a].all(axis=1), index % k == a)
            np.testing.assert_array_equal(vertical[a].all(axis=0), index % k == a)


def test_shifting_lines_orientation():
    sequence = patterns.shifting_lines_sequence(4, 2)
    np.testing.assert_array_equal(sequence.patterns[0][:, 0], [1, 0, 1, 0])
    np.testing.assert_array_equal(sequence.patterns[0][0], [1, 1, 1, 1])
    np.testing.assert_array_equal(sequence.patterns[3][0], [0, 1, 0, 1])


@parameterized.expand([(0,), (9,)])
def test_spacing_out_of_range(k):
    with assert_raises_message(ValueError, "Expected k between 1 and 8, got {}".format(k)):
        patterns.shifting_lines_sequence(8, k)


@parameterized.expand(
    [
        ("uniform", dict()),
        ("random", dict(count=30, seed=3)),
        ("shifting_dots", dict(spacing=3)),
        ("shifting_lines", dict(spacing=5)),
    ]
)
def test_build_sequence_covers(family, params):
    sequence = patterns.build_sequence(family, 12, **params)
    assert sequence.family == family
    assert np.all(sequence.patterns.max(axis=0) == 1)


def test_sequence_not_covering():
    with assert_raises_message(
        ValueError, "Illumination sequence does not cover every scene pixel"
    ):
        patterns.IlluminationSequence(np.zeros((1, 3, 3)), "random")


def test_sequence_not_binary():
    with assert_raises_message(ValueError, "Expected binary patterns"):
        patterns.IlluminationSequence(0.5 * np.ones((1, 3, 3)), "uniform")


def test_sequence_repeat():
    sequence = patterns.uniform_sequence(4).repeat(5)
    assert sequence.count == 5
    assert sequence.separable
    with assert_raises_message(ValueError, "Expected a single-pattern sequence"):
        patterns.shifting_lines_sequence(4, 2).repeat(2)
