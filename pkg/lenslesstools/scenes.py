"""Built-in synthetic test scenes and depth-map file scenes."""

import abc
import os
import warnings

import numpy as np

from scipy import ndimage
from sklearn.utils import check_random_state

from . import evaluate, forward, io, utils
from .base import Base

SYNTHETIC_SCENES = ["two_plane_cards", "slanted_plane", "step_pyramid"]


def _texture(n_pixels, random_state, smoothing=1.5, low=0.3):
    """Smooth random albedo in [low, 1]"""
    noise = random_state.uniform(size=(n_pixels, n_pixels))
    field = ndimage.gaussian_filter(noise, sigma=smoothing, mode="wrap")
    span = field.max() - field.min()
    field = (field - field.min()) / span if span > 0 else np.ones_like(field)
    return low + (1 - low) * field


class _Scene(Base, metaclass=abc.ABCMeta):
    """Shared rasterization for scenes given by a depth and an intensity map"""

    @abc.abstractmethod
    def depth_map(self):
        """Continuous reference depth in centimeters"""

    @abc.abstractmethod
    def intensity(self):
        """Nonnegative intensity of every scene pixel"""

    def volume(self, depth_grid):
        """Place every pixel on its nearest plane of `depth_grid`

        Parameters
        ----------
        depth_grid : `optics.DepthGrid`

        Returns
        -------
        volume : `forward.SceneVolume`
        """
        depth_map = self.depth_map()
        intensity = np.where(depth_map.valid, self.intensity(), 0.0)
        depths = depth_map.depths * 10
        planes = depth_grid.depths
        if depth_grid.n_planes > 1:
            half_step = np.min(np.diff(planes)) / 2
            valid_depths = depths[depth_map.valid]
            if np.any(valid_depths < planes[0] - half_step) or np.any(
                valid_depths > planes[-1] + half_step
            ):
                warnings.warn(
                    "Scene depths extend beyond the depth grid {}-{} mm".format(
                        planes[0], planes[-1]
                    ),
                    RuntimeWarning,
                )
        distance = np.abs(np.nan_to_num(depths)[None] - planes[:, None, None])
        # argmin picks the nearer plane on ties
        index = np.argmin(distance, axis=0)
        intensities = np.zeros((depth_grid.n_planes,) + intensity.shape)
        rows, cols = np.indices(intensity.shape)
        intensities[index, rows, cols] = intensity
        return forward.SceneVolume(intensities, depth_grid)

    def all_in_focus(self):
        return np.where(self.depth_map().valid, self.intensity(), 0.0)


class SyntheticScene(_Scene):
    """Procedural scene with known depth

    Parameters
    ----------
    name : {'two_plane_cards', 'slanted_plane', 'step_pyramid'}

    n_pixels : `int`
        Grid size N

    depth_range : tuple of `float`, optional (default: (40, 60))
        Nearest and farthest depth in centimeters

    seed : `int`, optional (default: 0)
        Seed of the surface texture
    """

    def __init__(self, name, n_pixels, depth_range=(40.0, 60.0), seed=0):
        utils.check_in(SYNTHETIC_SCENES, name=name)
        utils.check_int(n_pixels=n_pixels)
        utils.check_positive(n_pixels=n_pixels)
        low, high = depth_range
        utils.check_positive(depth_min=low)
        utils.check_greater(low, depth_max=high)
        self.name = name
        self.n_pixels = n_pixels
        self.depth_range = (float(low), float(high))
        self.seed = seed
        super().__init__()

    def depth_map(self):
        n = self.n_pixels
        low, high = self.depth_range
        span = high - low
        rows, cols = np.indices((n, n)) / max(n - 1, 1)
        if self.name == "two_plane_cards":
            depth = np.full((n, n), high)
            near = (rows >= 0.15) & (rows < 0.55) & (cols >= 0.1) & (cols < 0.45)
            middle = (rows >= 0.45) & (rows < 0.85) & (cols >= 0.5) & (cols < 0.9)
            depth[middle] = low + 0.5 * span
            depth[near] = low + 0.1 * span
        elif self.name == "slanted_plane":
            depth = low + span * cols
        else:
            steps = 4
            ring = np.minimum(np.minimum(rows, 1 - rows), np.minimum(cols, 1 - cols))
            level = np.minimum(np.floor(ring * 2 * steps), steps - 1)
            depth = high - span * level / (steps - 1)
        return evaluate.DepthMap(depth, np.ones((n, n), dtype=bool))

    def intensity(self):
        return _texture(self.n_pixels, check_random_state(self.seed))


class FileScene(_Scene):
    """Scene read from 16-bit PGM depth and intensity maps

    Depth value 0 marks empty pixels; 1..maxval map linearly onto
    `depth_range`. Maps are resampled to N x N.

    Parameters
    ----------
    depth_path : `str`

    n_pixels : `int`

    depth_range : tuple of `float`, optional (default: (40, 60))
        Centimeters

    intensity_path : `str` or `None`, optional (default: `None`)
        Defaults to unit intensity on every occupied pixel
    """

    def __init__(self, depth_path, n_pixels, depth_range=(40.0, 60.0), intensity_path=None):
        utils.check_int(n_pixels=n_pixels)
        utils.check_positive(n_pixels=n_pixels)
        for path in [depth_path, intensity_path]:
            if path is not None and not os.path.isfile(path):
                raise FileNotFoundError("Scene file {} not found".format(path))
        self.depth_path = depth_path
        self.n_pixels = n_pixels
        self.depth_range = (float(depth_range[0]), float(depth_range[1]))
        self.intensity_path = intensity_path
        super().__init__()

    def _resample(self, image, order):
        zoom = (self.n_pixels / image.shape[0], self.n_pixels / image.shape[1])
        return ndimage.zoom(image.astype(float), zoom, order=order)

    def depth_map(self):
        raw, maxval, _ = io.read_pgm(self.depth_path)
        raw = self._resample(raw, order=0)
        low, high = self.depth_range
        valid = raw > 0
        fraction = (raw - 1) / (maxval - 1) if maxval > 1 else np.zeros_like(raw)
        return evaluate.DepthMap(low + (high - low) * np.clip(fraction, 0, 1), valid)

    def intensity(self):
        if self.intensity_path is None:
            return np.ones((self.n_pixels, self.n_pixels))
        raw, maxval, _ = io.read_pgm(self.intensity_path)
        return np.clip(self._resample(raw, order=1) / maxval, 0, None)
