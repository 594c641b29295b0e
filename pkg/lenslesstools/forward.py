"""Multi-shot measurement simulation under coded illumination."""

import numpy as np
import tasklogger

from joblib import Parallel, delayed

from . import matrix, optics, patterns, utils
from .base import Base

_logger = tasklogger.get_tasklogger("lenslesstools")

#: Poisson means above this are drawn from the normal approximation
POISSON_NORMAL_THRESHOLD = 1e3


class SceneVolume(Base):
    """Voxel intensities on a stack of depth planes

    Parameters
    ----------
    intensities : array-like, shape=[n_planes, N, N]
        Nonnegative intensities I_k

    depth_grid : `optics.DepthGrid`
    """

    def __init__(self, intensities, depth_grid):
        intensities = matrix.to_array(intensities)
        if intensities.ndim != 3 or intensities.shape[1] != intensities.shape[2]:
            raise ValueError(
                "Expected intensities with shape [n_planes, N, N], got {}".format(
                    intensities.shape
                )
            )
        if intensities.shape[0] != depth_grid.n_planes:
            raise ValueError(
                "Expected {} planes to match the depth grid, got {}".format(
                    depth_grid.n_planes, intensities.shape[0]
                )
            )
        if np.any(intensities < 0):
            raise ValueError("Expected nonnegative intensities")
        self.intensities = intensities
        self.depth_grid = depth_grid
        super().__init__()

    @property
    def n_planes(self):
        return self.intensities.shape[0]

    @property
    def n_pixels(self):
        return self.intensities.shape[1]

    @property
    def shape(self):
        return self.intensities.shape

    def __repr__(self):
        return "SceneVolume(shape={}, depth_grid={})".format(
            self.shape, self.depth_grid
        )


class NoiseModel(Base):
    """Shot and read noise of the sensor

    Parameters
    ----------
    full_well : `float`, optional (default: 20000)
        Full-well capacity F in electrons

    gain : `float`, optional (default: 1)
        Gain G

    dynamic_range : `float`, optional (default: 60)
        Dynamic range R in dB. Read noise is F * 10^(-R / 20).

    seed : `int` or `None`, optional (default: `None`)
    """

    def __init__(self, full_well=20000.0, gain=1.0, dynamic_range=60.0, seed=None):
        utils.check_positive(
            full_well=full_well, gain=gain, dynamic_range=dynamic_range
        )
        utils.check_if_not(None, utils.check_int, utils.check_nonnegative, seed=seed)
        self.full_well = full_well
        self.gain = gain
        self.dynamic_range = dynamic_range
        self.seed = seed
        super().__init__()

    @property
    def sigma(self):
        return self.full_well * 10 ** (-self.dynamic_range / 20)


class MeasurementSet(Base):
    """Sensor frames, one per illumination pattern

    Parameters
    ----------
    frames : array-like, shape=[n_patterns, M, M]

    sequence : `patterns.IlluminationSequence`

    noise : `NoiseModel` or `None`, optional (default: `None`)
        Noise the frames were corrupted with. `None` for clean frames.

    shifts : array-like, shape=[n_patterns, 2], optional
        Mask translations of SweepCam frames in millimeters
    """

    def __init__(self, frames, sequence, noise=None, shifts=None):
        frames = matrix.to_array(frames)
        if frames.ndim != 3 or frames.shape[1] != frames.shape[2]:
            raise ValueError(
                "Expected frames with shape [n_patterns, M, M], got {}".format(
                    frames.shape
                )
            )
        if frames.shape[0] != sequence.count:
            raise ValueError(
                "Expected {} frames to match the illumination sequence, got {}".format(
                    sequence.count, frames.shape[0]
                )
            )
        if shifts is not None:
            shifts = np.asarray(shifts, dtype=float)
            utils.check_shape((sequence.count, 2), shifts=shifts)
        self.frames = frames
        self.sequence = sequence
        self.noise = noise
        self.shifts = shifts
        super().__init__()

    @property
    def count(self):
        return self.frames.shape[0]

    @property
    def sensor_pixels(self):
        return self.frames.shape[1]

    @property
    def noisy(self):
        return self.noise is not None

    def __repr__(self):
        return "MeasurementSet(count={}, M={}, noisy={})".format(
            self.count, self.sensor_pixels, self.noisy
        )


class MeasurementOperator(object):
    """Linear map from a scene volume to all sensor frames

    Frame i is sum_k L_k (P_i * I_k) R_k^T, where (L_k, R_k) come from the
    shared system model or from the i-th of a list of per-frame models.

    Parameters
    ----------
    model : `optics.SystemModel` or list of `optics.SystemModel`
        A single model shared by all frames, or one model per frame

    sequence : `patterns.IlluminationSequence`

    n_jobs : `int`, optional (default: 1)
        Number of threads used over frames. Results do not depend on it.
    """

    def __init__(self, model, sequence, n_jobs=1):
        if isinstance(model, optics.SystemModel):
            models = [model]
        else:
            models = list(model)
            if len(models) != sequence.count:
                raise ValueError(
                    "Expected one system model per frame ({}), got {}".format(
                        sequence.count, len(models)
                    )
                )
        first = models[0]
        for other in models[1:]:
            if other.left.shape != first.left.shape or other.depth_grid != first.depth_grid:
                raise ValueError("Per-frame system models must share shape and depths")
        if first.scene_pixels != sequence.n_pixels:
            raise ValueError(
                "System model expects N = {} but patterns are {}x{}".format(
                    first.scene_pixels, sequence.n_pixels, sequence.n_pixels
                )
            )
        utils.check_int(n_jobs=n_jobs)
        self.models = models
        self.sequence = sequence
        self.n_jobs = n_jobs
        if sequence.separable:
            self._rows = [np.flatnonzero(u) for u in sequence.row_factors]
            self._cols = [np.flatnonzero(v) for v in sequence.col_factors]

    @property
    def depth_grid(self):
        return self.models[0].depth_grid

    @property
    def volume_shape(self):
        model = self.models[0]
        return (model.n_planes, model.scene_pixels, model.scene_pixels)

    @property
    def frame_shape(self):
        model = self.models[0]
        return (self.sequence.count, model.sensor_pixels, model.sensor_pixels)

    def _model(self, i):
        return self.models[i] if len(self.models) > 1 else self.models[0]

    def _map(self, fn, *args):
        if self.n_jobs == 1:
            return [fn(i, *args) for i in range(self.sequence.count)]
        return Parallel(n_jobs=self.n_jobs, prefer="threads")(
            delayed(fn)(i, *args) for i in range(self.sequence.count)
        )

    def _forward_frame(self, i, volume):
        model = self._model(i)
        if self.sequence.separable:
            rows, cols = self._rows[i], self._cols[i]
            left = model.left[:, :, rows]
            right = model.right[:, :, cols]
            lit = volume[:, rows][:, :, cols]
            return (left @ (lit @ right.transpose(0, 2, 1))).sum(axis=0)
        lit = volume * self.sequence.patterns[i]
        return (model.left @ lit @ model.right.transpose(0, 2, 1)).sum(axis=0)

    def _adjoint_frame(self, i, frames):
        model = self._model(i)
        frame = frames[i]
        if self.sequence.separable:
            rows, cols = self._rows[i], self._cols[i]
            left = model.left[:, :, rows]
            right = model.right[:, :, cols]
            block = left.transpose(0, 2, 1) @ frame @ right
            out = np.zeros(self.volume_shape)
            return matrix.add_submatrix(out, rows, cols, block)
        back = model.left.transpose(0, 2, 1) @ frame @ model.right
        return self.sequence.patterns[i] * back

    def forward(self, volume):
        """Frames of a volume, shape=[n_patterns, M, M]"""
        volume = matrix.to_array(volume)
        utils.check_shape(self.volume_shape, volume=volume)
        return np.stack(self._map(self._forward_frame, volume))

    def adjoint(self, frames):
        """Exact transpose of `forward`, shape=[n_planes, N, N]"""
        frames = matrix.to_array(frames)
        utils.check_shape(self.frame_shape, frames=frames)
        out = np.zeros(self.volume_shape)
        # fixed summation order over frames
        for contribution in self._map(self._adjoint_frame, frames):
            out += contribution
        return out

    def normal(self, volume):
        return self.adjoint(self.forward(volume))


def forward(scene, sequence, model, n_jobs=1):
    """Simulate clean measurements of a scene under coded illumination

    Parameters
    ----------
    scene : `SceneVolume`

    sequence : `patterns.IlluminationSequence`

    model : `optics.SystemModel`
        Must be built on the scene's depth grid

    n_jobs : `int`, optional (default: 1)

    Returns
    -------
    measurements : `MeasurementSet`

    Raises
    ------
    ValueError : scene, sequence and model shapes disagree
    """
    if scene.depth_grid != model.depth_grid:
        raise ValueError(
            "Scene depth grid {} does not match system model depth grid {}".format(
                scene.depth_grid, model.depth_grid
            )
        )
    operator = MeasurementOperator(model, sequence, n_jobs=n_jobs)
    _logger.debug(
        "Simulating {} frames of {} planes".format(sequence.count, scene.n_planes)
    )
    return MeasurementSet(operator.forward(scene.intensities), sequence)


def _noisy_frame(frame, noise, seed_sequence):
    rng = np.random.Generator(np.random.Philox(seed_sequence))
    expected = noise.full_well / noise.gain * np.maximum(frame, 0)
    small = expected <= POISSON_NORMAL_THRESHOLD
    shot = rng.poisson(np.where(small, expected, 0.0)).astype(float)
    approximate = expected + np.sqrt(expected) * rng.standard_normal(frame.shape)
    counts = np.where(small, shot, approximate)
    read = rng.normal(0.0, noise.sigma, size=frame.shape)
    return noise.gain / noise.full_well * (counts + read)


def add_noise(clean, noise, n_jobs=1):
    """Corrupt clean frames with shot and read noise

    Each entry becomes G / F (Poisson(F / G Y) + N(0, sigma^2)). Every frame
    draws from its own counter-based stream spawned from `noise.seed`, so
    the output does not depend on `n_jobs`.

    Parameters
    ----------
    clean : `MeasurementSet`

    noise : `NoiseModel`

    n_jobs : `int`, optional (default: 1)

    Returns
    -------
    measurements : `MeasurementSet`
    """
    streams = np.random.SeedSequence(noise.seed).spawn(clean.count)
    frames = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_noisy_frame)(clean.frames[i], noise, streams[i])
        for i in range(clean.count)
    )
    return MeasurementSet(
        np.stack(frames), clean.sequence, noise=noise, shifts=clean.shifts
    )


def sweepcam_shifts(count=48, extent=2.88):
    """Mask translations on a square grid

    Positions form a ceil(sqrt(count))^2 grid spanning [-extent / 2,
    extent / 2] on both axes; the positions nearest the center are dropped
    until `count` remain.

    Parameters
    ----------
    count : `int`, optional (default: 48)

    extent : `float`, optional (default: 2.88)
        Translation range in millimeters

    Returns
    -------
    shifts : array-like, shape=[count, 2]
        (x, y) translations in raster order
    """
    utils.check_int(count=count)
    utils.check_positive(count=count)
    utils.check_nonnegative(extent=extent)
    size = int(np.ceil(np.sqrt(count)))
    axis = np.linspace(-extent / 2, extent / 2, size) if size > 1 else np.zeros(1)
    grid = np.array([(x, y) for x in axis for y in axis])
    distance = np.hypot(grid[:, 0], grid[:, 1])
    drop = np.argsort(distance, kind="stable")[: len(grid) - count]
    return np.delete(grid, drop, axis=0)


def _check_shifts(shifts, geometry):
    shifts = np.asarray(shifts, dtype=float).reshape(-1, 2)
    limit = geometry.mask_extent / 2
    if np.any(np.abs(shifts) > limit):
        raise ValueError(
            "Expected mask shifts within +/-{} mm, got {}".format(
                limit, np.abs(shifts).max()
            )
        )
    return shifts


def sweepcam_models(shifts, geometry, mask, depth_grid, n_jobs=1):
    """One system model per mask translation"""
    shifts = _check_shifts(shifts, geometry)
    return [
        optics.build_system_matrices(
            geometry, mask, depth_grid, offset=shift, n_jobs=n_jobs
        )
        for shift in shifts
    ]


def sweepcam_forward(scene, shifts, geometry, mask, n_jobs=1):
    """Simulate a translating-mask camera under uniform illumination

    Parameters
    ----------
    scene : `SceneVolume`

    shifts : array-like, shape=[n_frames, 2]
        Mask translations (x, y) in millimeters

    geometry : `optics.CameraGeometry`

    mask : `patterns.MaskSpec`

    n_jobs : `int`, optional (default: 1)

    Returns
    -------
    measurements : `MeasurementSet`
        With a repeated uniform sequence and the shifts attached
    """
    shifts = _check_shifts(shifts, geometry)
    if scene.n_pixels != geometry.scene_angles:
        raise ValueError(
            "Scene is {}x{} but geometry has N = {}".format(
                scene.n_pixels, scene.n_pixels, geometry.scene_angles
            )
        )
    models = sweepcam_models(shifts, geometry, mask, scene.depth_grid, n_jobs=n_jobs)
    sequence = patterns.uniform_sequence(scene.n_pixels).repeat(len(shifts))
    operator = MeasurementOperator(models, sequence, n_jobs=n_jobs)
    return MeasurementSet(operator.forward(scene.intensities), sequence, shifts=shifts)
