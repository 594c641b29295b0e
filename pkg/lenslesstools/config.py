"""Experiment configuration: validated parameters and the key = value file format."""

import hashlib
import os
import numpy as np

from functools import partial

from . import forward, io, optics, patterns, recon, scenes, utils
from .version import __version__


class ConfigError(ValueError):
    """Invalid configuration, optionally tied to a line of the config file"""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)


def attribute(attr, default=None, doc=None, on_set=None):
    def getter(self, attr):
        try:
            return getattr(self, "_" + attr)
        except AttributeError:
            return default

    def setter(self, value, attr, on_set=None):
        if on_set is not None:
            if callable(on_set):
                on_set = [on_set]
            for fn in on_set:
                fn(**{attr: value})
        setattr(self, "_" + attr, value)

    return property(
        fget=partial(getter, attr=attr),
        fset=partial(setter, attr=attr, on_set=on_set),
        doc=doc,
    )


def _parse_bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError("Expected a boolean, got {!r}".format(text))


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError("Expected an integer, got {!r}".format(text))


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError("Expected a number, got {!r}".format(text))


def _parse_auto_float(text):
    return "auto" if text.lower() == "auto" else _parse_float(text)


def _parse_optional_int(text):
    return None if text.lower() in ("none", "") else _parse_int(text)


def _parse_optional_str(text):
    return None if text.lower() in ("none", "") else text


def _check_bool(**params):
    for p in params:
        if not isinstance(params[p], bool):
            raise ValueError("Expected {} boolean, got {}".format(p, params[p]))


def _check_lambda_scale(**params):
    utils.check_nonnegative(**params)
    utils.check_in([0.0] + list(recon.LAMBDA_GRID), **params)


_positive_int = [utils.check_int, utils.check_positive]

#: Overrides of the desk-scale defaults. `full` is the full-scale simulation study.
PRESETS = {
    "desk": {},
    "full": {
        "sensor_pixels": 512,
        "sensor_pitch_um": 4.8,
        "scene_pixels": 128,
        "sim_planes": 50,
        "recon_planes": 10,
    },
}


class ExperimentConfig(object):
    """Parameters of a simulation and reconstruction experiment

    Every attribute is validated on assignment. Defaults form the desk-scale
    preset: a 128 pixel sensor, a 64 x 64 scene grid, 15 simulation and 5
    reconstruction planes between 40 and 60 cm, and 48 shifting lines.

    Parameters
    ----------
    params : keyword arguments
        Any subset of the keys in `ExperimentConfig.keys()`
    """

    sensor_pixels = attribute("sensor_pixels", default=128, on_set=_positive_int)
    sensor_pitch_um = attribute(
        "sensor_pitch_um",
        default=19.2,
        doc="Sensor pitch in micrometers",
        on_set=utils.check_positive,
    )
    mask_kind = attribute(
        "mask_kind", default="mls", on_set=partial(utils.check_in, patterns.MASK_KINDS)
    )
    mask_order = attribute(
        "mask_order",
        default=9,
        on_set=[utils.check_int, partial(utils.check_between, 2, 20)],
    )
    mask_features = attribute(
        "mask_features",
        default=511,
        doc="Pinhole vector length",
        on_set=_positive_int,
    )
    pinhole_index = attribute(
        "pinhole_index",
        default=None,
        on_set=partial(utils.check_if_not, None, utils.check_int, utils.check_nonnegative),
    )
    mask_pitch_um = attribute(
        "mask_pitch_um", default=60.0, on_set=utils.check_positive
    )
    mask_distance_mm = attribute(
        "mask_distance_mm", default=2.0, on_set=utils.check_positive
    )
    baseline_mm = attribute("baseline_mm", default=50.0, on_set=utils.check_nonnegative)
    axial_offset_mm = attribute(
        "axial_offset_mm", default=0.0, on_set=utils.check_nonnegative
    )
    scene_pixels = attribute("scene_pixels", default=64, on_set=_positive_int)
    projector_half_fov_deg = attribute(
        "projector_half_fov_deg",
        default=30.0,
        on_set=[utils.check_positive, partial(utils.check_between, 0, 89.9)],
    )
    depth_min_mm = attribute("depth_min_mm", default=400.0, on_set=utils.check_positive)
    depth_max_mm = attribute("depth_max_mm", default=600.0, on_set=utils.check_positive)
    sim_planes = attribute("sim_planes", default=15, on_set=_positive_int)
    recon_planes = attribute("recon_planes", default=5, on_set=_positive_int)
    acquisition = attribute(
        "acquisition", default="coded", on_set=partial(utils.check_in, ["coded", "sweepcam"])
    )
    pattern_family = attribute(
        "pattern_family",
        default="shifting_lines",
        on_set=partial(utils.check_in, patterns.FAMILIES),
    )
    pattern_spacing = attribute("pattern_spacing", default=24, on_set=_positive_int)
    pattern_count = attribute("pattern_count", default=48, on_set=_positive_int)
    sweep_positions = attribute("sweep_positions", default=48, on_set=_positive_int)
    sweep_extent_mm = attribute(
        "sweep_extent_mm", default=2.88, on_set=utils.check_nonnegative
    )
    noise = attribute("noise", default=True, on_set=_check_bool)
    full_well = attribute("full_well", default=20000.0, on_set=utils.check_positive)
    gain = attribute("gain", default=1.0, on_set=utils.check_positive)
    dynamic_range_db = attribute(
        "dynamic_range_db", default=60.0, on_set=utils.check_positive
    )
    lambda_scale = attribute(
        "lambda_scale", default=1e-3, on_set=_check_lambda_scale
    )
    tv_epsilon = attribute(
        "tv_epsilon",
        default="auto",
        on_set=partial(utils.check_if_not, "auto", utils.check_positive),
    )
    depth_weight = attribute(
        "depth_weight", default=1.0, on_set=utils.check_nonnegative
    )
    max_iters = attribute(
        "max_iters", default=300, on_set=[utils.check_int, utils.check_nonnegative]
    )
    step_rule = attribute(
        "step_rule",
        default="backtracking",
        on_set=partial(utils.check_in, ["backtracking", "fixed"]),
    )
    scene = attribute(
        "scene",
        default="two_plane_cards",
        on_set=partial(utils.check_in, scenes.SYNTHETIC_SCENES + ["file"]),
    )
    scene_file = attribute("scene_file", default=None)
    scene_intensity_file = attribute("scene_intensity_file", default=None)
    output_dir = attribute("output_dir", default="out")
    seed = attribute(
        "seed", default=0, on_set=[utils.check_int, utils.check_nonnegative]
    )
    n_jobs = attribute("n_jobs", default=1, on_set=utils.check_int)
    parallel_conditions = attribute(
        "parallel_conditions", default=False, on_set=_check_bool
    )

    _parsers = {
        "sensor_pixels": _parse_int,
        "sensor_pitch_um": _parse_float,
        "mask_kind": str,
        "mask_order": _parse_int,
        "mask_features": _parse_int,
        "pinhole_index": _parse_optional_int,
        "mask_pitch_um": _parse_float,
        "mask_distance_mm": _parse_float,
        "baseline_mm": _parse_float,
        "axial_offset_mm": _parse_float,
        "scene_pixels": _parse_int,
        "projector_half_fov_deg": _parse_float,
        "depth_min_mm": _parse_float,
        "depth_max_mm": _parse_float,
        "sim_planes": _parse_int,
        "recon_planes": _parse_int,
        "acquisition": str,
        "pattern_family": str,
        "pattern_spacing": _parse_int,
        "pattern_count": _parse_int,
        "sweep_positions": _parse_int,
        "sweep_extent_mm": _parse_float,
        "noise": _parse_bool,
        "full_well": _parse_float,
        "gain": _parse_float,
        "dynamic_range_db": _parse_float,
        "lambda_scale": _parse_float,
        "tv_epsilon": _parse_auto_float,
        "depth_weight": _parse_float,
        "max_iters": _parse_int,
        "step_rule": str,
        "scene": str,
        "scene_file": _parse_optional_str,
        "scene_intensity_file": _parse_optional_str,
        "output_dir": str,
        "seed": _parse_int,
        "n_jobs": _parse_int,
        "parallel_conditions": _parse_bool,
    }

    def __init__(self, **params):
        self.set_params(**params)

    @classmethod
    def keys(cls):
        return sorted(cls._parsers)

    @classmethod
    def preset(cls, name, **params):
        """Configuration from a named preset ('desk' or 'full')"""
        utils.check_in(list(PRESETS), name=name)
        merged = dict(PRESETS[name])
        merged.update(params)
        return cls(**merged)

    def get_params(self):
        """Get parameters from this object
        """
        return {key: getattr(self, key) for key in self.keys()}

    def set_params(self, **params):
        """Set parameters on this object

        Parameters
        ----------
        params : key-value pairs of parameter name and new values

        Returns
        -------
        self

        Raises
        ------
        ConfigError : unknown key or invalid value
        """
        for key, value in params.items():
            if key not in self._parsers:
                raise ConfigError("Unknown configuration key {!r}".format(key))
            try:
                setattr(self, key, value)
            except ValueError as e:
                raise ConfigError(str(e))
        return self

    def copy(self, **params):
        new = ExperimentConfig(**self.get_params())
        return new.set_params(**params)

    def validate(self):
        """Check constraints between keys

        Raises
        ------
        ConfigError : inconsistent parameters or missing scene files
        """
        if not self.depth_max_mm > self.depth_min_mm:
            raise ConfigError(
                "Expected depth_max_mm > depth_min_mm ({}), got {}".format(
                    self.depth_min_mm, self.depth_max_mm
                )
            )
        if not self.depth_min_mm > self.mask_distance_mm:
            raise ConfigError(
                "Expected depth_min_mm > mask_distance_mm ({}), got {}".format(
                    self.mask_distance_mm, self.depth_min_mm
                )
            )
        if self.pattern_family in ("shifting_dots", "shifting_lines") and (
            self.pattern_spacing > self.scene_pixels
        ):
            raise ConfigError(
                "Expected pattern_spacing <= scene_pixels ({}), got {}".format(
                    self.scene_pixels, self.pattern_spacing
                )
            )
        if self.mask_kind == "pinhole" and self.pinhole_index is not None:
            if self.pinhole_index >= self.mask_features:
                raise ConfigError(
                    "Expected pinhole_index < mask_features ({}), got {}".format(
                        self.mask_features, self.pinhole_index
                    )
                )
        if self.scene == "file":
            if self.scene_file is None:
                raise ConfigError("scene = file requires scene_file")
            for key in ("scene_file", "scene_intensity_file"):
                path = getattr(self, key)
                if path is not None and not os.path.isfile(path):
                    raise ConfigError("{} {} does not exist".format(key, path))
        return self

    def to_text(self):
        """Canonical sorted `key = value` form"""
        return "".join(
            "{} = {}\n".format(key, io.format_value(getattr(self, key)))
            for key in self.keys()
        )

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def manifest(self, **extra):
        """Entries recorded next to run outputs"""
        entries = self.get_params()
        entries.update(
            config_sha256=self.config_hash(), toolkit_version=__version__
        )
        entries.update(extra)
        return entries

    def __repr__(self):
        return "ExperimentConfig({})".format(
            ", ".join("{}={!r}".format(k, v) for k, v in self.get_params().items())
        )

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_text() == other.to_text()

    # builders

    def geometry(self, baseline_mm=None):
        mask_features = (
            2 ** self.mask_order - 1 if self.mask_kind == "mls" else self.mask_features
        )
        return optics.CameraGeometry(
            sensor_pixels=self.sensor_pixels,
            sensor_pitch=self.sensor_pitch_um,
            mask_features=mask_features,
            mask_pitch=self.mask_pitch_um,
            mask_distance=self.mask_distance_mm,
            baseline=self.baseline_mm if baseline_mm is None else baseline_mm,
            axial_offset=self.axial_offset_mm,
            scene_angles=self.scene_pixels,
            projector_half_fov=float(np.radians(self.projector_half_fov_deg)),
        )

    def mask(self):
        return patterns.make_mask(
            kind=self.mask_kind,
            order=self.mask_order,
            pinhole_index=self.pinhole_index,
            n_features=self.mask_features,
            feature_pitch=self.mask_pitch_um,
        )

    def sim_grid(self):
        return optics.DepthGrid.linspace(
            self.depth_min_mm, self.depth_max_mm, self.sim_planes
        )

    def recon_grid(self):
        return optics.DepthGrid.linspace(
            self.depth_min_mm, self.depth_max_mm, self.recon_planes
        )

    def sequence(self):
        if self.acquisition == "sweepcam":
            return patterns.uniform_sequence(self.scene_pixels).repeat(
                self.sweep_positions
            )
        return patterns.build_sequence(
            self.pattern_family,
            self.scene_pixels,
            spacing=self.pattern_spacing,
            count=self.pattern_count,
            seed=self.seed,
        )

    def sweep_shifts(self):
        return forward.sweepcam_shifts(self.sweep_positions, self.sweep_extent_mm)

    def noise_model(self):
        if not self.noise:
            return None
        return forward.NoiseModel(
            full_well=self.full_well,
            gain=self.gain,
            dynamic_range=self.dynamic_range_db,
            seed=self.seed,
        )

    def make_scene(self, name=None):
        depth_range = (self.depth_min_mm / 10, self.depth_max_mm / 10)
        name = self.scene if name is None else name
        if name == "file":
            self.validate()
            return scenes.FileScene(
                self.scene_file,
                self.scene_pixels,
                depth_range=depth_range,
                intensity_path=self.scene_intensity_file,
            )
        return scenes.SyntheticScene(
            name, self.scene_pixels, depth_range=depth_range, seed=self.seed
        )


def parse_config(text):
    """Parse `key = value` text into an `ExperimentConfig`

    Raises
    ------
    ConfigError : with the offending line number
    """
    config = ExperimentConfig()
    seen = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value', got {!r}".format(raw), line=number)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in ExperimentConfig._parsers:
            raise ConfigError("unknown key {!r}".format(key), line=number)
        if key in seen:
            raise ConfigError(
                "duplicate key {!r} (first set on line {})".format(key, seen[key]),
                line=number,
            )
        seen[key] = number
        try:
            config.set_params(**{key: ExperimentConfig._parsers[key](value)})
        except ValueError as e:
            message = str(e)
            if isinstance(e, ConfigError) and e.line is None:
                message = e.args[0]
            raise ConfigError(message, line=number)
    return config


def read_config(path):
    """Read and validate a configuration file

    Parameters
    ----------
    path : `str`

    Returns
    -------
    config : `ExperimentConfig`

    Raises
    ------
    ConfigError : invalid content
    OSError : unreadable file
    """
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    return parse_config(text).validate()
