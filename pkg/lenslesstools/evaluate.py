"""Depth map and all-in-focus extraction, depth RMSE and SSIM."""

import numpy as np

from skimage.metrics import structural_similarity

from . import matrix, utils
from .base import Base

#: Pixels whose peak is below this fraction of the volume maximum have no depth
VALIDITY_THRESHOLD = 0.05


class NoValidPixelError(ArithmeticError):
    """Depth maps have no jointly valid pixel to compare"""


class DepthMap(Base):
    """Per-pixel depth in centimeters with a validity mask

    Parameters
    ----------
    depths : array-like, shape=[N, N]
        Depth in centimeters. Entries outside `valid` are ignored.

    valid : array-like of bool, shape=[N, N], optional
        Defaults to every finite entry
    """

    def __init__(self, depths, valid=None):
        depths = np.asarray(depths, dtype=float)
        if depths.ndim != 2:
            raise ValueError(
                "Expected depths with shape [N, N], got {}".format(depths.shape)
            )
        if valid is None:
            valid = np.isfinite(depths)
        valid = np.asarray(valid, dtype=bool)
        utils.check_shape(depths.shape, valid=valid)
        self.depths = np.where(valid, depths, np.nan)
        self.valid = valid
        super().__init__()

    @property
    def shape(self):
        return self.depths.shape

    def __repr__(self):
        return "DepthMap(shape={}, valid={})".format(self.shape, int(self.valid.sum()))


class MetricReport(Base):
    """Metrics of one reconstruction

    Parameters
    ----------
    depth_rmse : `float`
        Centimeters

    ssim : `float`
        SSIM of the all-in-focus image against the reference

    plane_residuals : array-like, shape=[n_planes]
        RMS difference per plane against a reference volume on the same grid.
        Empty when no reference volume is available.
    """

    def __init__(self, depth_rmse, ssim, plane_residuals=()):
        utils.check_nonnegative(depth_rmse=depth_rmse)
        self.depth_rmse = depth_rmse
        self.ssim = ssim
        self.plane_residuals = np.asarray(plane_residuals, dtype=float)
        super().__init__()

    def __repr__(self):
        return "MetricReport(depth_rmse={:.4f}, ssim={:.4f})".format(
            self.depth_rmse, self.ssim
        )


def extract_depth_and_aif(volume, threshold=VALIDITY_THRESHOLD):
    """Depth map and all-in-focus image from the brightest plane per pixel

    Parameters
    ----------
    volume : `forward.SceneVolume`

    threshold : `float`, optional (default: 0.05)
        Fraction of the volume maximum below which a pixel is invalid

    Returns
    -------
    depth_map : `DepthMap`
        Ties between planes resolve to the nearer plane.

    all_in_focus : array-like, shape=[N, N]
        Peak intensity along each ray
    """
    utils.check_between(0, 1, threshold=threshold)
    intensities = volume.intensities
    if np.any(intensities < 0):
        raise ValueError("Expected a nonnegative volume")
    # argmax returns the first, i.e. nearest, of tied planes
    index = np.argmax(intensities, axis=0)
    all_in_focus = np.max(intensities, axis=0)
    peak = all_in_focus.max()
    valid = (all_in_focus >= threshold * peak) & (peak > 0)
    depths = volume.depth_grid.depths_cm[index]
    return DepthMap(depths, valid), all_in_focus


def depth_rmse(estimated, reference):
    """Root-mean-square depth difference over jointly valid pixels

    Parameters
    ----------
    estimated, reference : `DepthMap`

    Returns
    -------
    rmse : `float`
        Centimeters

    Raises
    ------
    ValueError : the maps differ in shape

    NoValidPixelError : the maps share no valid pixel
    """
    if estimated.shape != reference.shape:
        raise ValueError(
            "Depth maps differ in shape: {} and {}".format(
                estimated.shape, reference.shape
            )
        )
    joint = estimated.valid & reference.valid
    if not np.any(joint):
        raise NoValidPixelError("Depth maps share no valid pixel")
    difference = estimated.depths[joint] - reference.depths[joint]
    return float(np.sqrt(np.mean(difference ** 2)))


def ssim(image_a, image_b, dynamic_range):
    """Mean structural similarity with an 11x11 Gaussian window

    Uses sigma = 1.5, population statistics and the stabilizers
    C1 = (0.01 L)^2, C2 = (0.03 L)^2.

    Parameters
    ----------
    image_a, image_b : array-like, shape=[N, N], N >= 11

    dynamic_range : `float`
        L, the value range of the images

    Returns
    -------
    ssim : `float`
    """
    utils.check_positive(dynamic_range=dynamic_range)
    image_a = matrix.to_array(image_a)
    image_b = matrix.to_array(image_b)
    if image_a.shape != image_b.shape:
        raise ValueError(
            "Images differ in shape: {} and {}".format(image_a.shape, image_b.shape)
        )
    if min(image_a.shape) < 11:
        raise ValueError(
            "Expected images of at least 11x11 pixels, got {}".format(image_a.shape)
        )
    return float(
        structural_similarity(
            image_a,
            image_b,
            data_range=dynamic_range,
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            K1=0.01,
            K2=0.03,
        )
    )


def evaluate_reconstruction(
    volume, reference_depth, reference_aif, reference_volume=None, threshold=VALIDITY_THRESHOLD
):
    """Depth RMSE, SSIM and per-plane residuals of a reconstruction

    Parameters
    ----------
    volume : `forward.SceneVolume`

    reference_depth : `DepthMap`

    reference_aif : array-like, shape=[N, N]
        Reference all-in-focus image. Its maximum sets the SSIM range.

    reference_volume : `forward.SceneVolume`, optional
        Reference on the same depth grid as `volume`

    Returns
    -------
    report : `MetricReport`
    """
    depth_map, aif = extract_depth_and_aif(volume, threshold=threshold)
    dynamic_range = float(np.max(reference_aif))
    if dynamic_range <= 0:
        dynamic_range = 1.0
    residuals = ()
    if reference_volume is not None:
        if reference_volume.depth_grid != volume.depth_grid:
            raise ValueError("Reference volume must share the reconstruction depth grid")
        difference = volume.intensities - reference_volume.intensities
        residuals = np.sqrt(np.mean(difference ** 2, axis=(1, 2)))
    return MetricReport(
        depth_rmse(depth_map, reference_depth),
        ssim(aif, reference_aif, dynamic_range),
        residuals,
    )
