"""Experiment orchestration: simulate, reconstruct, evaluate and run studies."""

import collections
import os
import time

import numpy as np
import tasklogger

from joblib import Parallel, delayed

from . import evaluate, forward, io, optics, recon, scenes
from .config import ConfigError

_logger = tasklogger.get_tasklogger("lenslesstools")

#: Environment variable overriding the configured output directory
OUTPUT_ENV = "LENSLESSTOOLS_OUT"

MEASUREMENTS_FILE = "measurements.llv"
GROUND_TRUTH_FILE = "ground_truth.llv"
PATTERNS_FILE = "patterns.llv"
VOLUME_FILE = "volume.llv"
MANIFEST_FILE = "manifest.txt"
RECON_MANIFEST_FILE = "reconstruct_manifest.txt"

Simulation = collections.namedtuple(
    "Simulation", ["measurements", "ground_truth", "scene", "exposure_scale"]
)

STUDY_COLUMNS = [
    "condition",
    "scenes",
    "lambda_scale",
    "depth_rmse_cm",
    "ssim",
    "residual_per_frame",
    "runtime_s",
]


def output_dir(config, out=None):
    """Output directory: `out`, else $LENSLESSTOOLS_OUT, else the config value"""
    if out is not None:
        return out
    return os.environ.get(OUTPUT_ENV) or config.output_dir


def _n_jobs(config, n_jobs):
    return config.n_jobs if n_jobs is None else n_jobs


def simulate(config, scene=None, n_jobs=None):
    """Simulate measurements of a scene

    Clean frames are scaled so that the brightest entry of the sequence
    reaches full well before noise is added, then scaled back.

    Parameters
    ----------
    config : `ExperimentConfig`

    scene : scene object, optional
        Defaults to `config.make_scene()`

    n_jobs : `int`, optional
        Defaults to `config.n_jobs`

    Returns
    -------
    simulation : `Simulation`
        Measurements, ground-truth volume on the simulation grid, the scene
        and the exposure scale
    """
    config.validate()
    n_jobs = _n_jobs(config, n_jobs)
    if scene is None:
        scene = config.make_scene()
    geometry = config.geometry()
    mask = config.mask()
    truth = scene.volume(config.sim_grid())
    with _logger.task("forward simulation"):
        if config.acquisition == "sweepcam":
            clean = forward.sweepcam_forward(
                truth, config.sweep_shifts(), geometry, mask, n_jobs=n_jobs
            )
        else:
            with _logger.task("system matrices"):
                model = optics.build_system_matrices(
                    geometry, mask, truth.depth_grid, n_jobs=n_jobs
                )
            clean = forward.forward(truth, config.sequence(), model, n_jobs=n_jobs)
    noise = config.noise_model()
    exposure_scale = 1.0
    measurements = clean
    if noise is not None:
        peak = float(clean.frames.max())
        exposure_scale = 1 / peak if peak > 0 else 1.0
        scaled = forward.MeasurementSet(
            clean.frames * exposure_scale, clean.sequence, shifts=clean.shifts
        )
        noisy = forward.add_noise(scaled, noise, n_jobs=n_jobs)
        measurements = forward.MeasurementSet(
            noisy.frames / exposure_scale,
            clean.sequence,
            noise=noise,
            shifts=clean.shifts,
        )
    return Simulation(measurements, truth, scene, exposure_scale)


def reconstruct(config, measurements, n_jobs=None):
    """Solve for a volume on the reconstruction grid

    Parameters
    ----------
    config : `ExperimentConfig`

    measurements : `forward.MeasurementSet`
        SweepCam measurements carry their mask shifts

    Returns
    -------
    volume : `forward.SceneVolume`

    report : `recon.SolverReport`
    """
    n_jobs = _n_jobs(config, n_jobs)
    geometry = config.geometry()
    mask = config.mask()
    grid = config.recon_grid()
    with _logger.task("system matrices"):
        if measurements.shifts is not None:
            model = forward.sweepcam_models(
                measurements.shifts, geometry, mask, grid, n_jobs=n_jobs
            )
        else:
            model = optics.build_system_matrices(geometry, mask, grid, n_jobs=n_jobs)
    lam = recon.lambda_from_scale(measurements, model, config.lambda_scale, n_jobs=n_jobs)
    problem = recon.ReconProblem(
        measurements,
        model,
        lam=lam,
        tv_epsilon=config.tv_epsilon,
        depth_weight=config.depth_weight,
        n_jobs=n_jobs,
    )
    return recon.solve(problem, max_iters=config.max_iters, step_rule=config.step_rule)


def _manifest_entries(config, **extra):
    return config.manifest(
        sim_depths_mm=config.sim_grid().depths,
        recon_depths_mm=config.recon_grid().depths,
        **extra
    )


def run_simulate(config, out=None, verbose=1):
    """Simulate and write measurements, ground truth, patterns and a manifest

    Outputs appear only once every file has been written.

    Returns
    -------
    paths : dict
        Output file paths by role
    """
    _logger.set_level(verbose)
    config.validate()
    out_dir = output_dir(config, out)
    with _logger.task("simulate"):
        simulation = simulate(config)
        measurements = simulation.measurements
        depth_map, aif = evaluate.extract_depth_and_aif(simulation.ground_truth)
        extra = dict(
            frame_count=measurements.count,
            pattern_family=measurements.sequence.family,
            pattern_spacing=measurements.sequence.spacing,
            exposure_scale=simulation.exposure_scale,
        )
        if measurements.shifts is not None:
            extra["sweep_shifts_mm"] = measurements.shifts.reshape(-1)
        depth_range = (config.depth_min_mm / 10, config.depth_max_mm / 10)
        with io.atomic_output_dir(out_dir) as staging:
            io.write_llv(os.path.join(staging, MEASUREMENTS_FILE), measurements.frames)
            io.write_llv(
                os.path.join(staging, GROUND_TRUTH_FILE),
                simulation.ground_truth.intensities,
            )
            io.write_llv(
                os.path.join(staging, PATTERNS_FILE), measurements.sequence.patterns
            )
            io.write_depth_pgm(
                os.path.join(staging, "ground_truth_depth.pgm"), depth_map, depth_range
            )
            io.write_image_pgm(os.path.join(staging, "ground_truth_aif.pgm"), aif)
            io.write_manifest(
                os.path.join(staging, MANIFEST_FILE),
                _manifest_entries(config, **extra),
            )
    return {
        "measurements": os.path.join(out_dir, MEASUREMENTS_FILE),
        "ground_truth": os.path.join(out_dir, GROUND_TRUTH_FILE),
        "patterns": os.path.join(out_dir, PATTERNS_FILE),
        "manifest": os.path.join(out_dir, MANIFEST_FILE),
    }


def load_measurements(config, path):
    """Read simulation outputs back as a `forward.MeasurementSet`

    Parameters
    ----------
    path : `str`
        Simulation output directory or its measurement file

    Raises
    ------
    io.FormatError : corrupt files or shapes that disagree with the config
    ConfigError : stored patterns differ from the configured sequence
    """
    directory = path if os.path.isdir(path) else os.path.dirname(path)
    frames_path = (
        path if not os.path.isdir(path) else os.path.join(path, MEASUREMENTS_FILE)
    )
    sequence = config.sequence()
    frames = io.read_llv(
        frames_path, shape=(sequence.count, config.sensor_pixels, config.sensor_pixels)
    )
    patterns_path = os.path.join(directory, PATTERNS_FILE)
    if os.path.exists(patterns_path):
        stored = io.read_llv(patterns_path, shape=sequence.patterns.shape)
        if not np.array_equal(stored, sequence.patterns):
            raise ConfigError(
                "Stored patterns do not match the configured illumination sequence"
            )
    shifts = config.sweep_shifts() if config.acquisition == "sweepcam" else None
    return forward.MeasurementSet(frames, sequence, shifts=shifts)


def run_reconstruct(config, measurements, out=None, verbose=1):
    """Reconstruct and write the volume, depth map, all-in-focus image and report

    Parameters
    ----------
    config : `ExperimentConfig`

    measurements : `str` or `forward.MeasurementSet`
        Simulation output directory, measurement file, or measurements

    Returns
    -------
    paths : dict
    """
    _logger.set_level(verbose)
    config.validate()
    out_dir = output_dir(config, out)
    if not isinstance(measurements, forward.MeasurementSet):
        measurements = load_measurements(config, measurements)
    with _logger.task("reconstruct"):
        volume, report = reconstruct(config, measurements)
        depth_map, aif = evaluate.extract_depth_and_aif(volume)
        depth_range = (config.depth_min_mm / 10, config.depth_max_mm / 10)
        with io.atomic_output_dir(out_dir) as staging:
            io.write_llv(os.path.join(staging, VOLUME_FILE), volume.intensities)
            io.write_depth_pgm(
                os.path.join(staging, "depth_map.pgm"), depth_map, depth_range
            )
            io.write_image_pgm(os.path.join(staging, "all_in_focus.pgm"), aif)
            io.write_manifest(
                os.path.join(staging, "solver_report.txt"), report.summary()
            )
            io.write_csv(
                os.path.join(staging, "objective_trace.csv"),
                (
                    {"iteration": i, "objective": value}
                    for i, value in enumerate(report.objective_trace)
                ),
                ["iteration", "objective"],
            )
            io.write_manifest(
                os.path.join(staging, RECON_MANIFEST_FILE),
                _manifest_entries(
                    config, lam=report.lam, frame_count=measurements.count
                ),
            )
    return {
        "volume": os.path.join(out_dir, VOLUME_FILE),
        "depth_map": os.path.join(out_dir, "depth_map.pgm"),
        "all_in_focus": os.path.join(out_dir, "all_in_focus.pgm"),
        "solver_report": os.path.join(out_dir, "solver_report.txt"),
    }, report


def run_evaluate(config, volume_path, reference_path, out=None, verbose=1):
    """Metrics of a reconstructed volume against a simulated ground truth

    Returns
    -------
    report : `evaluate.MetricReport`
    """
    _logger.set_level(verbose)
    config.validate()
    out_dir = output_dir(config, out)
    n = config.scene_pixels
    recon_grid = config.recon_grid()
    sim_grid = config.sim_grid()
    estimate = forward.SceneVolume(
        io.read_llv(volume_path, shape=(recon_grid.n_planes, n, n)), recon_grid
    )
    reference = forward.SceneVolume(
        io.read_llv(reference_path, shape=(sim_grid.n_planes, n, n)), sim_grid
    )
    reference_depth, reference_aif = evaluate.extract_depth_and_aif(reference)
    report = evaluate.evaluate_reconstruction(estimate, reference_depth, reference_aif)
    with io.atomic_output_dir(out_dir) as staging:
        io.write_csv(
            os.path.join(staging, "metrics.csv"),
            [{"depth_rmse_cm": report.depth_rmse, "ssim": report.ssim}],
            ["depth_rmse_cm", "ssim"],
        )
    return report


def _pattern_count_conditions(config):
    return [
        ("01_uniform", config.copy(pattern_family="uniform")),
        ("02_random48", config.copy(pattern_family="random", pattern_count=48)),
        ("03_dots16", config.copy(pattern_family="shifting_dots", pattern_spacing=4)),
        ("04_lines16", config.copy(pattern_family="shifting_lines", pattern_spacing=8)),
        ("05_dots49", config.copy(pattern_family="shifting_dots", pattern_spacing=7)),
        ("06_lines48", config.copy(pattern_family="shifting_lines", pattern_spacing=24)),
    ]


def _baseline_sweep_conditions(config):
    lines = config.copy(
        acquisition="coded", pattern_family="shifting_lines", pattern_spacing=24
    )
    return [
        ("{:02d}_B{:.1f}cm".format(i + 1, baseline / 10), lines.copy(baseline_mm=baseline))
        for i, baseline in enumerate([0.0, 25.0, 50.0, 75.0])
    ]


def _pinhole_vs_mls_conditions(config):
    conditions = []
    base = config.copy(acquisition="coded", pattern_family="shifting_lines", noise=False)
    for i, (kind, spacing) in enumerate(
        [("mls", 8), ("mls", 24), ("pinhole", 8), ("pinhole", 24)]
    ):
        label = "{:02d}_{}_lines{}".format(i + 1, kind, 2 * spacing)
        conditions.append((label, base.copy(mask_kind=kind, pattern_spacing=spacing)))
    return conditions


def _sweepcam_vs_coded_conditions(config):
    coded = config.copy(acquisition="coded", pattern_family="shifting_lines")
    sweep = config.copy(acquisition="sweepcam")
    return [
        ("01_coded_lines16", coded.copy(pattern_spacing=8)),
        ("02_coded_lines48", coded.copy(pattern_spacing=24)),
        ("03_sweepcam16", sweep.copy(sweep_positions=16)),
        ("04_sweepcam48", sweep.copy(sweep_positions=48)),
    ]


#: Study name to condition builder
STUDIES = {
    "pattern_count": _pattern_count_conditions,
    "baseline_sweep": _baseline_sweep_conditions,
    "pinhole_vs_mls": _pinhole_vs_mls_conditions,
    "sweepcam_vs_coded": _sweepcam_vs_coded_conditions,
}

#: lambda_scale applied to every condition of a study, taken from recon.LAMBDA_GRID
STUDY_LAMBDA_SCALE = {
    "pattern_count": recon.LAMBDA_GRID[1],
    "baseline_sweep": recon.LAMBDA_GRID[1],
    "pinhole_vs_mls": recon.LAMBDA_GRID[1],
    "sweepcam_vs_coded": recon.LAMBDA_GRID[1],
}


def study_conditions(study_name, config):
    """Labelled configurations of a study

    Raises
    ------
    ConfigError : unknown study or conditions invalid at this scale
    """
    if study_name not in STUDIES:
        raise ConfigError(
            "study value {} not recognized. Choose from {}".format(
                study_name, sorted(STUDIES)
            )
        )
    lambda_scale = STUDY_LAMBDA_SCALE[study_name]
    conditions = [
        (label, condition.copy(lambda_scale=lambda_scale))
        for label, condition in STUDIES[study_name](config)
    ]
    for label, condition in conditions:
        try:
            condition.validate()
        except ConfigError as e:
            raise ConfigError("condition {}: {}".format(label, e))
    return conditions


def run_condition(label, config, n_jobs=None):
    """Average metrics of one study condition over the built-in scenes"""
    start = time.perf_counter()
    rmse, similarity, residual = [], [], []
    with _logger.task("condition {}".format(label)):
        for name in scenes.SYNTHETIC_SCENES:
            scene_config = config.copy(scene=name)
            simulation = simulate(scene_config, n_jobs=n_jobs)
            volume, report = reconstruct(
                scene_config, simulation.measurements, n_jobs=n_jobs
            )
            if not report.final_objective <= report.initial_objective:
                raise recon.DivergenceError(
                    "Objective increased in condition {} on {}".format(label, name)
                )
            scene = simulation.scene
            metrics = evaluate.evaluate_reconstruction(
                volume,
                scene.depth_map(),
                scene.all_in_focus(),
                reference_volume=scene.volume(volume.depth_grid),
            )
            rmse.append(metrics.depth_rmse)
            similarity.append(metrics.ssim)
            residual.append(report.data_residual / simulation.measurements.count)
    return {
        "condition": label,
        "scenes": len(scenes.SYNTHETIC_SCENES),
        "lambda_scale": config.lambda_scale,
        "depth_rmse_cm": float(np.mean(rmse)),
        "ssim": float(np.mean(similarity)),
        "residual_per_frame": float(np.mean(residual)),
        "runtime_s": time.perf_counter() - start,
    }


def run_study(study_name, config, out=None, verbose=1):
    """Run every condition of a study and write `<study_name>.csv`

    Rows are sorted by condition label and report the mean depth RMSE,
    SSIM and data residual over the built-in scenes, with wall time.

    Parameters
    ----------
    study_name : {'pattern_count', 'baseline_sweep', 'pinhole_vs_mls',
        'sweepcam_vs_coded'}

    config : `ExperimentConfig`
        Scale and shared parameters

    Returns
    -------
    table : `pandas.DataFrame`
    """
    _logger.set_level(verbose)
    conditions = study_conditions(study_name, config)
    out_dir = output_dir(config, out)
    with _logger.task("study {}".format(study_name)):
        if config.parallel_conditions:
            rows = Parallel(n_jobs=len(conditions), prefer="threads")(
                delayed(run_condition)(label, condition, n_jobs=1)
                for label, condition in conditions
            )
        else:
            rows = [run_condition(label, condition) for label, condition in conditions]
    rows = sorted(rows, key=lambda row: row["condition"])
    with io.atomic_output_dir(out_dir) as staging:
        table = io.write_csv(
            os.path.join(staging, "{}.csv".format(study_name)), rows, STUDY_COLUMNS
        )
        io.write_manifest(
            os.path.join(staging, "{}_manifest.txt".format(study_name)),
            _manifest_entries(
                config,
                study=study_name,
                study_lambda_scale=STUDY_LAMBDA_SCALE[study_name],
                conditions=[label for label, _ in conditions],
                scenes=scenes.SYNTHETIC_SCENES,
            ),
        )
    return table
