import numpy as np
from lenslesstools import evaluate, forward, optics
from load_tests import assert_raises_message, random_volume
from parameterized import parameterized
from scipy import ndimage


def _volume(intensities, depths):
    return forward.SceneVolume(intensities, optics.DepthGrid(depths))


def _reference_ssim(a, b, L):
    def smooth(X):
        return ndimage.gaussian_filter(X, sigma=1.5, truncate=3.5)

    C1 = (0.01 * L) ** 2
    C2 = (0.03 * L) ** 2
    ua, ub = smooth(a), smooth(b)
    va = smooth(a * a) - ua ** 2
    vb = smooth(b * b) - ub ** 2
    cov = smooth(a * b) - ua * ub
    S = ((2 * ua * ub + C1) * (2 * cov + C2)) / (
        (ua ** 2 + ub ** 2 + C1) * (va + vb + C2)
    )
    return S[5:-5, 5:-5].mean()


def test_extract_depth_and_aif():
    intensities = np.zeros((3, 2, 2))
    intensities[0, 0, 0] = 1.0
    intensities[2, 0, 1] = 2.0
    intensities[1, 1, 0] = 0.5
    intensities[1, 1, 1] = 0.05
    depth_map, aif = evaluate.extract_depth_and_aif(
        _volume(intensities, [400.0, 500.0, 600.0])
    )
    np.testing.assert_array_equal(aif, [[1.0, 2.0], [0.5, 0.05]])
    np.testing.assert_array_equal(depth_map.valid, [[True, True], [True, False]])
    np.testing.assert_allclose(depth_map.depths[depth_map.valid], [40, 60, 50])
    assert np.isnan(depth_map.depths[1, 1])


def test_extract_ties_resolve_near():
    intensities = np.ones((3, 2, 2))
    depth_map, _ = evaluate.extract_depth_and_aif(
        _volume(intensities, [400.0, 500.0, 600.0])
    )
    np.testing.assert_array_equal(depth_map.depths, 40)


def test_extract_zero_volume_invalid():
    depth_map, aif = evaluate.extract_depth_and_aif(
        _volume(np.zeros((2, 3, 3)), [400.0, 500.0])
    )
    assert not np.any(depth_map.valid)
    np.testing.assert_array_equal(aif, 0)


def test_extract_threshold():
    with assert_raises_message(ValueError, "Expected threshold between 0 and 1, got 2"):
        evaluate.extract_depth_and_aif(_volume(np.ones((1, 2, 2)), [500.0]), threshold=2)


def test_depth_rmse():
    reference = evaluate.DepthMap([[40.0, 40.0]])
    estimated = evaluate.DepthMap([[40.0, 43.0]])
    np.testing.assert_allclose(evaluate.depth_rmse(estimated, reference), 3 / np.sqrt(2))


def test_depth_rmse_constant_offset():
    reference = evaluate.DepthMap(np.full((4, 4), 50.0))
    estimated = evaluate.DepthMap(np.full((4, 4), 52.0))
    np.testing.assert_allclose(evaluate.depth_rmse(estimated, reference), 2.0)
    assert evaluate.depth_rmse(reference, reference) == 0


def test_depth_rmse_joint_validity():
    reference = evaluate.DepthMap([[40.0, np.nan], [45.0, 50.0]])
    estimated = evaluate.DepthMap(
        [[41.0, 60.0], [45.0, 99.0]], valid=[[True, True], [True, False]]
    )
    np.testing.assert_allclose(
        evaluate.depth_rmse(estimated, reference), np.sqrt(1 / 2)
    )


def test_depth_rmse_no_overlap():
    reference = evaluate.DepthMap([[40.0, np.nan]])
    estimated = evaluate.DepthMap([[np.nan, 40.0]])
    with assert_raises_message(
        evaluate.NoValidPixelError, "Depth maps share no valid pixel"
    ):
        evaluate.depth_rmse(estimated, reference)
    assert issubclass(evaluate.NoValidPixelError, ArithmeticError)


def test_depth_rmse_shape_mismatch():
    with assert_raises_message(
        ValueError, "Depth maps differ in shape: (1, 2) and (2, 2)"
    ):
        evaluate.depth_rmse(
            evaluate.DepthMap(np.ones((1, 2))), evaluate.DepthMap(np.ones((2, 2)))
        )


def test_depth_map_invalid():
    with assert_raises_message(ValueError, "Expected depths with shape [N, N]"):
        evaluate.DepthMap(np.ones(3))


def test_ssim_identical():
    image = random_volume((32, 32))
    np.testing.assert_allclose(evaluate.ssim(image, image, 1.0), 1.0)


@parameterized.expand([(0,), (1,), (2,)])
def test_ssim_matches_reference(seed):
    random_state = np.random.RandomState(seed)
    a = random_state.uniform(size=(32, 32))
    b = np.clip(a + 0.2 * random_state.normal(size=(32, 32)), 0, 1)
    np.testing.assert_allclose(
        evaluate.ssim(a, b, 1.0), _reference_ssim(a, b, 1.0), atol=1e-6
    )


def test_ssim_symmetric():
    random_state = np.random.RandomState(4)
    a = random_state.uniform(size=(16, 16))
    b = random_state.uniform(size=(16, 16))
    np.testing.assert_allclose(evaluate.ssim(a, b, 1.0), evaluate.ssim(b, a, 1.0))
    assert evaluate.ssim(a, b, 1.0) < 0.5


def test_ssim_too_small():
    with assert_raises_message(
        ValueError, "Expected images of at least 11x11 pixels, got (10, 10)"
    ):
        evaluate.ssim(np.ones((10, 10)), np.ones((10, 10)), 1.0)


def test_ssim_shape_mismatch():
    with assert_raises_message(
        ValueError, "Images differ in shape: (12, 12) and (12, 13)"
    ):
        evaluate.ssim(np.ones((12, 12)), np.ones((12, 13)), 1.0)


def test_evaluate_perfect_reconstruction():
    truth = _volume(0.2 + random_volume((3, 16, 16)), [400.0, 500.0, 600.0])
    depth_map, aif = evaluate.extract_depth_and_aif(truth)
    report = evaluate.evaluate_reconstruction(truth, depth_map, aif, truth)
    assert report.depth_rmse == 0
    np.testing.assert_allclose(report.ssim, 1.0)
    np.testing.assert_array_equal(report.plane_residuals, 0)
    assert report.plane_residuals.shape == (3,)


def test_evaluate_plane_residuals():
    truth = _volume(np.ones((2, 12, 12)), [400.0, 500.0])
    estimate = _volume(np.ones((2, 12, 12)) * [[[1.0]], [[1.5]]], [400.0, 500.0])
    depth_map, aif = evaluate.extract_depth_and_aif(truth)
    report = evaluate.evaluate_reconstruction(estimate, depth_map, aif, truth)
    np.testing.assert_allclose(report.plane_residuals, [0.0, 0.5])


def test_evaluate_grid_mismatch():
    truth = _volume(np.ones((2, 12, 12)), [400.0, 500.0])
    other = _volume(np.ones((2, 12, 12)), [400.0, 600.0])
    depth_map, aif = evaluate.extract_depth_and_aif(truth)
    with assert_raises_message(
        ValueError, "Reference volume must share the reconstruction depth grid"
    ):
        evaluate.evaluate_reconstruction(other, depth_map, aif, truth)
