import os
import re
import unittest
import warnings

import numpy as np
import tasklogger

from lenslesstools import optics, patterns
from lenslesstools.config import ExperimentConfig

_case = unittest.TestCase()


def assert_warns_message(expected_warning, expected_message, *args, **kwargs):
    expected_regex = re.escape(expected_message)
    return _case.assertWarnsRegex(expected_warning, expected_regex, *args, **kwargs)


def assert_raises_message(expected_error, expected_message, *args, **kwargs):
    expected_regex = re.escape(expected_message)
    return _case.assertRaisesRegex(expected_error, expected_regex, *args, **kwargs)


def reset_warnings():
    warnings.resetwarnings()
    warnings.filterwarnings("error", module="lenslesstools")


#: Set to run the desk-scale study trend tests
SLOW_ENV = "LENSLESSTOOLS_SLOW"


def require_slow():
    if not os.environ.get(SLOW_ENV):
        raise unittest.SkipTest("set {}=1 to run desk-scale studies".format(SLOW_ENV))


reset_warnings()
tasklogger.get_tasklogger("lenslesstools").set_level(0)


def small_geometry(**kwargs):
    """8 pixel sensor, 4 projector angles and a 31 feature mask"""
    params = dict(
        sensor_pixels=8,
        sensor_pitch=150.0,
        mask_features=31,
        mask_pitch=60.0,
        mask_distance=2.0,
        baseline=50.0,
        axial_offset=0.0,
        scene_angles=4,
        projector_half_fov=0.2,
    )
    params.update(kwargs)
    return optics.CameraGeometry(**params)


def small_mask(order=5):
    return patterns.make_mask("mls", order=order)


def small_model(n_planes=2, geometry=None, mask=None, offset=(0.0, 0.0)):
    if geometry is None:
        geometry = small_geometry()
    if mask is None:
        mask = small_mask()
    grid = optics.DepthGrid.linspace(400.0, 600.0, n_planes)
    return optics.build_system_matrices(geometry, mask, grid, offset=offset)


def random_model(M, N, D, seed=42):
    """System model with random dense matrices"""
    random_state = np.random.RandomState(seed)
    geometry = small_geometry(sensor_pixels=M, scene_angles=N)
    grid = optics.DepthGrid(np.linspace(400.0, 600.0, D) if D > 1 else [500.0])
    return optics.SystemModel(
        random_state.uniform(size=(D, M, N)),
        random_state.uniform(size=(D, M, N)),
        geometry,
        small_mask(),
        grid,
    )


def dense_operator(model, sequence):
    """Explicit matrix of the coded-illumination forward model

    Row blocks are frames, column blocks are planes; each block is
    kron(L_k, R_k) diag(vec(P_i)) with C-order vectorization.
    """
    models = [model] * sequence.count if isinstance(model, optics.SystemModel) else model
    rows = []
    for i, frame_model in enumerate(models):
        mask = sequence.patterns[i].reshape(-1)
        rows.append(
            np.hstack(
                [
                    np.kron(frame_model.left[k], frame_model.right[k]) * mask[None, :]
                    for k in range(frame_model.n_planes)
                ]
            )
        )
    return np.vstack(rows)


def random_volume(shape, seed=42):
    return np.random.RandomState(seed).uniform(size=shape)


def small_config(**params):
    """Configuration small enough for end-to-end tests"""
    defaults = dict(
        sensor_pixels=32,
        sensor_pitch_um=76.8,
        scene_pixels=16,
        sim_planes=3,
        recon_planes=2,
        pattern_spacing=4,
        max_iters=10,
    )
    defaults.update(params)
    return ExperimentConfig(**defaults)


def study_config(**params):
    """Smallest scale at which every study condition is valid"""
    defaults = dict(
        sensor_pixels=48,
        sensor_pitch_um=51.2,
        scene_pixels=24,
        sim_planes=3,
        recon_planes=2,
        max_iters=5,
    )
    defaults.update(params)
    return ExperimentConfig(**defaults)


def recovery_geometry(mask_features=101, baseline=0.0):
    """Well-conditioned single-plane geometry

    Neighboring scene points image one mask feature apart on the sensor.
    """
    return optics.CameraGeometry(
        sensor_pixels=64,
        sensor_pitch=38.4,
        mask_features=mask_features,
        mask_pitch=60.0,
        mask_distance=2.0,
        baseline=baseline,
        scene_angles=32,
        projector_half_fov=float(np.arctan(0.465)),
    )
