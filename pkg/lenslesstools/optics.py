"""Camera, mask and projector geometry and the per-depth system matrices.

Coordinates are in millimeters with the origin at the sensor center. The
projector sits at lateral offset `baseline` along +x (the sensor row axis)
and `axial_offset` behind the camera along the optical axis.
"""

import numpy as np
import tasklogger

from joblib import Parallel, delayed

from . import utils
from .base import Base

_logger = tasklogger.get_tasklogger("lenslesstools")


class CameraGeometry(Base):
    """Physical layout of a lensless camera with a projector

    Parameters
    ----------
    sensor_pixels : `int`, optional (default: 512)
        Sensor size M in pixels (square sensor)

    sensor_pitch : `float`, optional (default: 4.8)
        Sensor pixel pitch in micrometers

    mask_features : `int`, optional (default: 511)
        Number of mask features along each axis

    mask_pitch : `float`, optional (default: 60)
        Mask feature size in micrometers

    mask_distance : `float`, optional (default: 2)
        Sensor-to-mask distance d in millimeters

    baseline : `float`, optional (default: 50)
        Lateral camera-projector baseline B in millimeters

    axial_offset : `float`, optional (default: 0)
        Axial camera-projector separation in millimeters

    scene_angles : `int`, optional (default: 128)
        Number N of projector angles along each axis

    projector_half_fov : `float`, optional (default: pi / 6)
        Half field of view of the projector in radians
    """

    def __init__(
        self,
        sensor_pixels=512,
        sensor_pitch=4.8,
        mask_features=511,
        mask_pitch=60.0,
        mask_distance=2.0,
        baseline=50.0,
        axial_offset=0.0,
        scene_angles=128,
        projector_half_fov=np.pi / 6,
    ):
        utils.check_int(
            sensor_pixels=sensor_pixels,
            mask_features=mask_features,
            scene_angles=scene_angles,
        )
        utils.check_positive(
            sensor_pixels=sensor_pixels,
            mask_features=mask_features,
            scene_angles=scene_angles,
            sensor_pitch=sensor_pitch,
            mask_pitch=mask_pitch,
            mask_distance=mask_distance,
            projector_half_fov=projector_half_fov,
        )
        utils.check_nonnegative(baseline=baseline, axial_offset=axial_offset)
        if not projector_half_fov < np.pi / 2:
            raise ValueError(
                "Expected projector_half_fov < pi / 2, got {}".format(
                    projector_half_fov
                )
            )
        self.sensor_pixels = sensor_pixels
        self.sensor_pitch = sensor_pitch
        self.mask_features = mask_features
        self.mask_pitch = mask_pitch
        self.mask_distance = mask_distance
        self.baseline = baseline
        self.axial_offset = axial_offset
        self.scene_angles = scene_angles
        self.projector_half_fov = projector_half_fov
        super().__init__()

    @property
    def sensor_pitch_mm(self):
        return self.sensor_pitch * 1e-3

    @property
    def mask_pitch_mm(self):
        return self.mask_pitch * 1e-3

    @property
    def sensor_extent(self):
        """Sensor side length in millimeters"""
        return self.sensor_pixels * self.sensor_pitch_mm

    @property
    def mask_extent(self):
        """Mask side length in millimeters"""
        return self.mask_features * self.mask_pitch_mm

    def sensor_coordinates(self):
        """Pixel centers s_m in millimeters"""
        return (
            np.arange(self.sensor_pixels) - (self.sensor_pixels - 1) / 2
        ) * self.sensor_pitch_mm

    def projector_tangents(self):
        """tan(alpha_n), uniform between -tan(half_fov) and tan(half_fov)"""
        if self.scene_angles == 1:
            return np.zeros(1)
        return np.tan(self.projector_half_fov) * np.linspace(
            -1, 1, self.scene_angles
        )

    def check_depth(self, **params):
        """Raise unless every given depth lies beyond the mask"""
        for p in params:
            z = np.asarray(params[p], dtype=float)
            if np.any(~(z > self.mask_distance)):
                raise ValueError(
                    "Expected {} > mask distance {} mm, got {}".format(
                        p, self.mask_distance, params[p]
                    )
                )


class DepthGrid(Base):
    """Ordered plane distances z_k in millimeters

    Parameters
    ----------
    depths : array-like, shape=[n_planes]
        Strictly increasing plane distances
    """

    def __init__(self, depths):
        depths = np.asarray(depths, dtype=float).reshape(-1)
        utils.check_increasing(depths=depths)
        if np.any(depths <= 0):
            raise ValueError("Expected depths > 0, got {}".format(depths.tolist()))
        self.depths = depths
        super().__init__()

    @classmethod
    def linspace(cls, z_min, z_max, n_planes):
        utils.check_int(n_planes=n_planes)
        utils.check_positive(n_planes=n_planes)
        if n_planes == 1:
            return cls([(z_min + z_max) / 2])
        return cls(np.linspace(z_min, z_max, n_planes))

    @property
    def n_planes(self):
        return len(self.depths)

    @property
    def depths_cm(self):
        return self.depths / 10

    def __len__(self):
        return self.n_planes

    def __eq__(self, other):
        return isinstance(other, DepthGrid) and np.array_equal(
            self.depths, other.depths
        )

    def __repr__(self):
        return "DepthGrid({})".format(np.round(self.depths, 3).tolist())


class SystemModel(Base):
    """Per-depth left and right system matrices

    Measurements of plane k are Phi_k^L I_k (Phi_k^R)^T.

    Parameters
    ----------
    left : array-like, shape=[n_planes, M, N]
        Baseline-axis matrices Phi_k^L

    right : array-like, shape=[n_planes, M, N]
        Orthogonal-axis matrices Phi_k^R

    geometry : `CameraGeometry`

    mask : `MaskSpec`

    depth_grid : `DepthGrid`

    offset : tuple of `float`, optional (default: (0, 0))
        Lateral mask translation in millimeters the matrices were built with
    """

    def __init__(self, left, right, geometry, mask, depth_grid, offset=(0.0, 0.0)):
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        if left.ndim != 3:
            raise ValueError(
                "Expected left with shape [n_planes, M, N], got {}".format(left.shape)
            )
        utils.check_shape(left.shape, right=right)
        if left.shape[0] != depth_grid.n_planes:
            raise ValueError(
                "Expected {} planes to match the depth grid, got {}".format(
                    depth_grid.n_planes, left.shape[0]
                )
            )
        self.left = left
        self.right = right
        self.geometry = geometry
        self.mask = mask
        self.depth_grid = depth_grid
        self.offset = tuple(offset)
        super().__init__()

    @property
    def n_planes(self):
        return self.left.shape[0]

    @property
    def sensor_pixels(self):
        return self.left.shape[1]

    @property
    def scene_pixels(self):
        return self.left.shape[2]

    def __repr__(self):
        return "SystemModel(n_planes={}, M={}, N={}, offset={})".format(
            self.n_planes, self.sensor_pixels, self.scene_pixels, self.offset
        )


def sample_mask_1d(mask_vector, coordinate, feature_pitch):
    """Transmittance of a 1D mask at continuous coordinates

    Feature centers sit at (j - (F - 1) / 2) * feature_pitch. Values between
    centers are linearly interpolated; the outermost half features hold the
    edge value; everything beyond the mask extent is opaque.

    Parameters
    ----------
    mask_vector : array-like, shape=[F]
        Feature transmittances

    coordinate : `float` or array-like
        Position on the mask plane in millimeters, origin at the mask center

    feature_pitch : `float`
        Feature size in millimeters

    Returns
    -------
    transmittance : `float` or array-like, same shape as `coordinate`
    """
    mask_vector = np.asarray(mask_vector, dtype=float)
    coordinate = np.asarray(coordinate, dtype=float)
    n_features = len(mask_vector)
    centers = (np.arange(n_features) - (n_features - 1) / 2) * feature_pitch
    half_extent = n_features * feature_pitch / 2
    values = np.interp(coordinate, centers, mask_vector)
    return np.where(np.abs(coordinate) <= half_extent, values, 0.0)


def psf_1d(s, p, z, geometry, mask_vector, offset=0.0):
    """1D point spread function of a separable mask

    A point at lateral position `p` and depth `z` lights sensor position `s`
    through the mask at (1 - d / z) s + d p / z.

    Parameters
    ----------
    s : `float` or array-like
        Sensor coordinate in millimeters

    p : `float` or array-like
        Lateral scene coordinate in the camera frame, millimeters

    z : `float`
        Depth in millimeters, must exceed the mask distance

    geometry : `CameraGeometry`

    mask_vector : array-like
        Mask feature vector along this axis

    offset : `float`, optional (default: 0)
        Translation of the mask in millimeters

    Returns
    -------
    transmittance : `float` or array-like, broadcast shape of `s` and `p`
    """
    geometry.check_depth(z=z)
    d = geometry.mask_distance
    argument = (1 - d / z) * np.asarray(s, dtype=float) + d * np.asarray(
        p, dtype=float
    ) / z
    return sample_mask_1d(mask_vector, argument - offset, geometry.mask_pitch_mm)


def predict_depth_shift(z1, z2, geometry):
    """Lateral PSF shift between two depths caused by the baseline

    Parameters
    ----------
    z1, z2 : `float`
        Depths in millimeters

    geometry : `CameraGeometry`

    Returns
    -------
    shift : `float`
        |d B / (z1 + dz - d) - d B / (z2 + dz - d)| in millimeters
    """
    geometry.check_depth(z1=z1, z2=z2)
    d = geometry.mask_distance
    B = geometry.baseline
    z1 = z1 + geometry.axial_offset
    z2 = z2 + geometry.axial_offset
    return abs(d * B / (z1 - d) - d * B / (z2 - d))


def scene_lateral_coordinates(z, geometry):
    """Camera-frame lateral positions of the projector rays at depth z

    Parameters
    ----------
    z : `float`
        Plane depth in millimeters

    geometry : `CameraGeometry`

    Returns
    -------
    baseline_axis : array-like, shape=[N]
        (z + dz) tan(alpha_n) + B

    orthogonal_axis : array-like, shape=[N]
        z tan(alpha_n)
    """
    geometry.check_depth(z=z)
    tangents = geometry.projector_tangents()
    baseline_axis = (z + geometry.axial_offset) * tangents + geometry.baseline
    orthogonal_axis = z * tangents
    return baseline_axis, orthogonal_axis


def _check_mask(geometry, mask):
    if (
        len(mask.row_vector) != geometry.mask_features
        or len(mask.col_vector) != geometry.mask_features
    ):
        raise ValueError(
            "Mask has {}x{} features but geometry expects {}".format(
                len(mask.row_vector), len(mask.col_vector), geometry.mask_features
            )
        )
    if not np.isclose(mask.feature_pitch, geometry.mask_pitch):
        raise ValueError(
            "Mask feature pitch {} um does not match geometry mask pitch {} um".format(
                mask.feature_pitch, geometry.mask_pitch
            )
        )


def _plane_matrices(z, geometry, mask, offset):
    s = geometry.sensor_coordinates()[:, None]
    p_baseline, p_orthogonal = scene_lateral_coordinates(z, geometry)
    left = psf_1d(s, p_baseline[None, :], z, geometry, mask.row_vector, offset[0])
    right = psf_1d(s, p_orthogonal[None, :], z, geometry, mask.col_vector, offset[1])
    return left, right


def build_system_matrices(geometry, mask, depth_grid, offset=(0.0, 0.0), n_jobs=1):
    """Per-depth system matrices from the mask PSF

    Parameters
    ----------
    geometry : `CameraGeometry`

    mask : `MaskSpec`

    depth_grid : `DepthGrid`

    offset : tuple of `float`, optional (default: (0, 0))
        Lateral mask translation (x, y) in millimeters

    n_jobs : `int`, optional (default: 1)
        Number of threads used over depth planes

    Returns
    -------
    model : `SystemModel`
    """
    _check_mask(geometry, mask)
    geometry.check_depth(depths=depth_grid.depths)
    offset = (float(offset[0]), float(offset[1]))
    _logger.debug(
        "Building {} plane pairs of {}x{} matrices".format(
            depth_grid.n_planes, geometry.sensor_pixels, geometry.scene_angles
        )
    )
    planes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_plane_matrices)(z, geometry, mask, offset) for z in depth_grid.depths
    )
    left = np.stack([plane[0] for plane in planes])
    right = np.stack([plane[1] for plane in planes])
    return SystemModel(left, right, geometry, mask, depth_grid, offset=offset)
