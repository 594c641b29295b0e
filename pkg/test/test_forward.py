import numpy as np
from lenslesstools import forward, optics, patterns
from load_tests import (
    assert_raises_message,
    dense_operator,
    random_model,
    random_volume,
    small_geometry,
    small_mask,
    small_model,
)
from parameterized import parameterized


def _nonseparable_sequence(N, count, seed=42):
    separable = patterns.random_sequence(N, count, seed=seed)
    return patterns.IlluminationSequence(separable.patterns, "random", seed=seed)


def _sequences(N):
    return [
        patterns.uniform_sequence(N),
        patterns.shifting_dots_sequence(N, 2),
        patterns.shifting_lines_sequence(N, 2),
        patterns.random_sequence(N, 20, seed=7),
        _nonseparable_sequence(N, 20),
    ]


@parameterized.expand([(i,) for i in range(5)])
def test_forward_matches_dense(i):
    model = random_model(6, 4, 3)
    sequence = _sequences(4)[i]
    volume = random_volume((3, 4, 4))
    operator = forward.MeasurementOperator(model, sequence)
    expected = dense_operator(model, sequence) @ volume.reshape(-1)
    result = operator.forward(volume).reshape(-1)
    np.testing.assert_allclose(result, expected, rtol=1e-12, atol=1e-12)
    assert np.linalg.norm(result - expected) <= 1e-12 * np.linalg.norm(expected)


@parameterized.expand([(i,) for i in range(5)])
def test_adjoint_matches_dense(i):
    model = random_model(6, 4, 3)
    sequence = _sequences(4)[i]
    frames = np.random.RandomState(3).normal(size=(sequence.count, 6, 6))
    operator = forward.MeasurementOperator(model, sequence)
    expected = dense_operator(model, sequence).T @ frames.reshape(-1)
    result = operator.adjoint(frames).reshape(-1)
    np.testing.assert_allclose(result, expected, rtol=1e-12, atol=1e-12)
    assert np.linalg.norm(result - expected) <= 1e-12 * np.linalg.norm(expected)


def test_adjoint_inner_product():
    model = random_model(9, 5, 2, seed=1)
    sequence = patterns.shifting_lines_sequence(5, 2)
    operator = forward.MeasurementOperator(model, sequence)
    x = random_volume(operator.volume_shape, seed=2)
    y = np.random.RandomState(3).normal(size=operator.frame_shape)
    lhs = np.sum(operator.forward(x) * y)
    rhs = np.sum(x * operator.adjoint(y))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_operator_shapes():
    model = random_model(7, 4, 3)
    sequence = patterns.shifting_lines_sequence(4, 2)
    operator = forward.MeasurementOperator(model, sequence)
    assert operator.volume_shape == (3, 4, 4)
    assert operator.frame_shape == (4, 7, 7)
    assert operator.depth_grid == model.depth_grid
    assert operator.forward(np.zeros((3, 4, 4))).shape == (4, 7, 7)
    assert operator.normal(np.zeros((3, 4, 4))).shape == (3, 4, 4)


def test_operator_threads_identical():
    model = random_model(8, 6, 3)
    sequence = patterns.random_sequence(6, 24, seed=5)
    volume = random_volume((3, 6, 6))
    single = forward.MeasurementOperator(model, sequence, n_jobs=1)
    threaded = forward.MeasurementOperator(model, sequence, n_jobs=3)
    np.testing.assert_array_equal(single.forward(volume), threaded.forward(volume))
    frames = single.forward(volume)
    np.testing.assert_array_equal(single.adjoint(frames), threaded.adjoint(frames))


def test_forward_linear():
    model = random_model(6, 4, 2)
    sequence = patterns.shifting_dots_sequence(4, 2)
    operator = forward.MeasurementOperator(model, sequence)
    a = random_volume((2, 4, 4), seed=1)
    b = random_volume((2, 4, 4), seed=2)
    np.testing.assert_allclose(
        operator.forward(2 * a + 3 * b),
        2 * operator.forward(a) + 3 * operator.forward(b),
        rtol=1e-12,
    )


def test_zero_volume_gives_zero_frames():
    model = small_model()
    sequence = patterns.shifting_lines_sequence(4, 2)
    operator = forward.MeasurementOperator(model, sequence)
    np.testing.assert_array_equal(operator.forward(np.zeros((2, 4, 4))), 0)


def test_uniform_sequence_sums_planes():
    model = random_model(5, 3, 2)
    sequence = patterns.uniform_sequence(3)
    volume = random_volume((2, 3, 3))
    frame = forward.MeasurementOperator(model, sequence).forward(volume)[0]
    expected = sum(
        model.left[k] @ volume[k] @ model.right[k].T for k in range(model.n_planes)
    )
    np.testing.assert_allclose(frame, expected, rtol=1e-12)


def test_operator_volume_shape_mismatch():
    operator = forward.MeasurementOperator(
        random_model(5, 4, 2), patterns.uniform_sequence(4)
    )
    with assert_raises_message(
        ValueError, "Expected volume with shape (2, 4, 4), got (3, 4, 4)"
    ):
        operator.forward(np.zeros((3, 4, 4)))
    with assert_raises_message(
        ValueError, "Expected frames with shape (1, 5, 5), got (2, 5, 5)"
    ):
        operator.adjoint(np.zeros((2, 5, 5)))


def test_operator_pattern_size_mismatch():
    with assert_raises_message(
        ValueError, "System model expects N = 4 but patterns are 5x5"
    ):
        forward.MeasurementOperator(random_model(5, 4, 2), patterns.uniform_sequence(5))


def test_operator_model_count_mismatch():
    model = random_model(5, 4, 2)
    with assert_raises_message(
        ValueError, "Expected one system model per frame (4), got 2"
    ):
        forward.MeasurementOperator(
            [model, model], patterns.shifting_lines_sequence(4, 2)
        )


def test_scene_volume():
    grid = optics.DepthGrid([400.0, 500.0])
    scene = forward.SceneVolume(np.ones((2, 3, 3)), grid)
    assert scene.shape == (2, 3, 3)
    assert scene.n_planes == 2
    assert scene.n_pixels == 3


@parameterized.expand(
    [
        (np.ones((2, 3, 4)), "Expected intensities with shape [n_planes, N, N]"),
        (np.ones((3, 3, 3)), "Expected 2 planes to match the depth grid, got 3"),
        (-np.ones((2, 3, 3)), "Expected nonnegative intensities"),
    ]
)
def test_scene_volume_invalid(intensities, message):
    with assert_raises_message(ValueError, message):
        forward.SceneVolume(intensities, optics.DepthGrid([400.0, 500.0]))


def test_forward_measurement_set():
    model = small_model()
    sequence = patterns.shifting_lines_sequence(4, 2)
    scene = forward.SceneVolume(random_volume((2, 4, 4)), model.depth_grid)
    measurements = forward.forward(scene, sequence, model)
    assert measurements.count == 4
    assert measurements.sensor_pixels == 8
    assert not measurements.noisy
    assert measurements.shifts is None
    assert np.all(measurements.frames >= 0)


def test_forward_depth_grid_mismatch():
    model = small_model()
    scene = forward.SceneVolume(
        random_volume((2, 4, 4)), optics.DepthGrid([400.0, 500.0])
    )
    with assert_raises_message(
        ValueError, "Scene depth grid DepthGrid([400.0, 500.0]) does not match"
    ):
        forward.forward(scene, patterns.uniform_sequence(4), model)


def test_measurement_set_frame_count():
    with assert_raises_message(
        ValueError, "Expected 4 frames to match the illumination sequence, got 3"
    ):
        forward.MeasurementSet(np.zeros((3, 8, 8)), patterns.shifting_lines_sequence(4, 2))


def test_noise_model_sigma():
    noise = forward.NoiseModel(full_well=20000.0, dynamic_range=60.0)
    np.testing.assert_allclose(noise.sigma, 20.0)


@parameterized.expand(
    [
        (dict(full_well=0), "Expected full_well > 0, got 0"),
        (dict(gain=-1.0), "Expected gain > 0, got -1.0"),
        (dict(seed=-3), "Expected seed >= 0, got -3"),
    ]
)
def test_noise_model_invalid(params, message):
    with assert_raises_message(ValueError, message):
        forward.NoiseModel(**params)


def _constant_measurements(value, shape=(1, 100, 100)):
    sequence = patterns.uniform_sequence(4).repeat(shape[0])
    return forward.MeasurementSet(np.full(shape, value), sequence)


def test_add_noise_statistics():
    clean = _constant_measurements(0.5)
    noise = forward.NoiseModel(full_well=1000.0, gain=1.0, dynamic_range=300.0, seed=42)
    frames = forward.add_noise(clean, noise).frames
    variance = 0.5 / 1000.0
    standard_error = np.sqrt(variance / frames.size)
    assert abs(frames.mean() - 0.5) < 4 * standard_error
    np.testing.assert_allclose(frames.var(), variance, rtol=0.05)


def test_add_noise_normal_approximation():
    clean = _constant_measurements(0.5)
    noise = forward.NoiseModel(full_well=1e6, gain=1.0, dynamic_range=300.0, seed=1)
    frames = forward.add_noise(clean, noise).frames
    variance = 0.5 / 1e6
    assert abs(frames.mean() - 0.5) < 4 * np.sqrt(variance / frames.size)
    np.testing.assert_allclose(frames.var(), variance, rtol=0.05)


def test_add_noise_read_noise_only():
    clean = _constant_measurements(0.0)
    noise = forward.NoiseModel(full_well=1000.0, gain=1.0, dynamic_range=20.0, seed=3)
    frames = forward.add_noise(clean, noise).frames
    # sigma = 100 electrons, 0.1 after scaling
    np.testing.assert_allclose(frames.std(), 0.1, rtol=0.05)


def test_add_noise_deterministic():
    clean = _constant_measurements(0.3, shape=(4, 16, 16))
    noise = forward.NoiseModel(seed=11)
    a = forward.add_noise(clean, noise)
    b = forward.add_noise(clean, noise, n_jobs=2)
    np.testing.assert_array_equal(a.frames, b.frames)
    assert a.noisy
    assert a.noise is noise
    c = forward.add_noise(clean, noise.copy(seed=12))
    assert not np.array_equal(a.frames, c.frames)


def test_add_noise_frames_independent():
    clean = _constant_measurements(0.3, shape=(2, 16, 16))
    frames = forward.add_noise(clean, forward.NoiseModel(seed=5)).frames
    assert not np.array_equal(frames[0], frames[1])


def test_sweepcam_shifts():
    shifts = forward.sweepcam_shifts(48, 2.88)
    assert shifts.shape == (48, 2)
    assert np.all(np.abs(shifts) <= 1.44 + 1e-12)
    assert not np.any(np.all(shifts == 0, axis=1))
    assert len(np.unique(shifts, axis=0)) == 48


def test_sweepcam_shifts_square():
    shifts = forward.sweepcam_shifts(16, 1.5)
    assert shifts.shape == (16, 2)
    np.testing.assert_allclose(np.unique(shifts[:, 0]), np.linspace(-0.75, 0.75, 4))


def test_sweepcam_shifts_single():
    np.testing.assert_array_equal(forward.sweepcam_shifts(1, 2.0), [[0.0, 0.0]])


def test_sweepcam_zero_shift_matches_uniform():
    geometry = small_geometry()
    mask = small_mask()
    model = small_model(geometry=geometry, mask=mask)
    scene = forward.SceneVolume(random_volume((2, 4, 4)), model.depth_grid)
    swept = forward.sweepcam_forward(scene, [[0.0, 0.0]], geometry, mask)
    uniform = forward.forward(scene, patterns.uniform_sequence(4), model)
    np.testing.assert_allclose(swept.frames, uniform.frames, rtol=1e-12)
    np.testing.assert_array_equal(swept.shifts, [[0.0, 0.0]])


@parameterized.expand([((0.6, 0.0),), ((0.0, -0.36),), ((-0.42, 0.3),)])
def test_sweepcam_point_source_translates(shift):
    geometry = small_geometry(
        sensor_pixels=64, sensor_pitch=60.0, mask_features=127, baseline=0.0
    )
    mask = small_mask(order=7)
    z = 500.0
    intensities = np.zeros((1, 4, 4))
    intensities[0, 1, 2] = 1.0
    scene = forward.SceneVolume(intensities, optics.DepthGrid([z]))
    swept = forward.sweepcam_forward(scene, [[0.0, 0.0], shift], geometry, mask)
    assert swept.count == 2
    assert swept.sequence.family == "uniform"
    d = geometry.mask_distance
    for axis in (0, 1):
        # a mask shift t moves the shadow by t z / (z - d) on the sensor
        expected = shift[axis] * z / (z - d) / geometry.sensor_pitch_mm
        reference = swept.frames[0].sum(axis=1 - axis)
        moved = swept.frames[1].sum(axis=1 - axis)
        correlation = np.correlate(
            moved - moved.mean(), reference - reference.mean(), mode="full"
        )
        lag = np.argmax(correlation) - (len(reference) - 1)
        assert abs(lag - expected) <= 1, (axis, lag, expected)


def test_sweepcam_shift_too_large():
    geometry = small_geometry()
    scene = forward.SceneVolume(
        random_volume((2, 4, 4)), optics.DepthGrid.linspace(400.0, 600.0, 2)
    )
    with assert_raises_message(ValueError, "Expected mask shifts within +/-"):
        forward.sweepcam_forward(scene, [[1.0, 0.0]], geometry, small_mask())


def test_sweepcam_scene_size_mismatch():
    geometry = small_geometry()
    scene = forward.SceneVolume(
        random_volume((2, 5, 5)), optics.DepthGrid.linspace(400.0, 600.0, 2)
    )
    with assert_raises_message(ValueError, "Scene is 5x5 but geometry has N = 4"):
        forward.sweepcam_forward(scene, [[0.0, 0.0]], geometry, small_mask())


def _adjoint_models():
    return [
        small_model(n_planes=2),
        small_model(n_planes=1, geometry=small_geometry(baseline=0.0)),
        small_model(n_planes=3, geometry=small_geometry(axial_offset=30.0)),
        random_model(11, 4, 2, seed=9),
    ]


@parameterized.expand([(m, family) for m in range(4) for family in range(5)])
def test_adjoint_identity_random_trials(m, family):
    model = _adjoint_models()[m]
    sequence = _sequences(4)[family]
    operator = forward.MeasurementOperator(model, sequence)
    random_state = np.random.RandomState(100 * m + family)
    for _ in range(5):
        x = random_state.uniform(size=operator.volume_shape)
        y = random_state.normal(size=operator.frame_shape)
        Ax = operator.forward(x)
        lhs = np.sum(Ax * y)
        rhs = np.sum(x * operator.adjoint(y))
        scale = np.linalg.norm(Ax) * np.linalg.norm(y)
        assert abs(lhs - rhs) <= 1e-10 * scale, (lhs, rhs)


@parameterized.expand([(seed,) for seed in range(4)])
def test_added_illumination_never_darkens(seed):
    model = small_model(n_planes=2)
    base = patterns.random_sequence(4, 6, seed=seed)
    extra = np.random.RandomState(seed).randint(0, 2, size=base.patterns.shape)
    brighter = patterns.IlluminationSequence(
        np.maximum(base.patterns, extra), "random"
    )
    volume = forward.SceneVolume(random_volume((2, 4, 4), seed=seed), model.depth_grid)
    dim = forward.forward(volume, base, model).frames
    bright = forward.forward(volume, brighter, model).frames
    assert np.all(bright >= dim - 1e-12 * dim.max())
    if np.any(extra > base.patterns):
        assert np.any(bright > dim + 1e-12 * dim.max())
