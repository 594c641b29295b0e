"""3D total-variation regularized least squares over coded-illumination frames."""

import numpy as np
import tasklogger

from . import forward as forward_model
from . import matrix, utils
from .base import Base

_logger = tasklogger.get_tasklogger("lenslesstools")

#: Coarse grid of lambda_scale values; lambda = scale * max |adjoint(Y)|
LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1)

STEP_RULES = ["backtracking", "fixed"]


class DivergenceError(ArithmeticError):
    """The objective became non-finite or no decreasing step exists"""


def _frames(measurements):
    if isinstance(measurements, forward_model.MeasurementSet):
        return measurements.frames
    return matrix.to_array(measurements)


def apply_adjoint(frames, model, sequence, n_jobs=1):
    """Transpose of the coded-illumination forward model

    Parameters
    ----------
    frames : `forward.MeasurementSet` or array-like, shape=[n_patterns, M, M]

    model : `optics.SystemModel` or list of per-frame models

    sequence : `patterns.IlluminationSequence`

    n_jobs : `int`, optional (default: 1)

    Returns
    -------
    volume : array-like, shape=[n_planes, N, N]
        sum_i P_i * (L_k^T Y_i R_k) for every plane k
    """
    operator = forward_model.MeasurementOperator(model, sequence, n_jobs=n_jobs)
    return operator.adjoint(_frames(frames))


def _forward_difference(X, axis):
    diff = np.zeros_like(X)
    n = X.shape[axis]
    if n > 1:
        front = [slice(None)] * X.ndim
        back = [slice(None)] * X.ndim
        front[axis] = slice(0, n - 1)
        back[axis] = slice(1, n)
        diff[tuple(front)] = X[tuple(back)] - X[tuple(front)]
    return diff


def _forward_difference_adjoint(Q, axis):
    out = -Q
    n = Q.shape[axis]
    if n > 1:
        head = [slice(None)] * Q.ndim
        tail = [slice(None)] * Q.ndim
        head[axis] = slice(1, n)
        tail[axis] = slice(0, n - 1)
        out[tuple(head)] += Q[tuple(tail)]
    return out


def tv3d_value_and_gradient(volume, epsilon, depth_weight=1.0):
    """Smoothed isotropic 3D total variation and its gradient

    TV = sum over voxels of sqrt(dx^2 + dy^2 + w dz^2 + eps^2) - eps, with
    forward differences that vanish at the far boundary of each axis.

    Parameters
    ----------
    volume : `forward.SceneVolume` or array-like, shape=[n_planes, N, N]

    epsilon : `float`, > 0
        Smoothing

    depth_weight : `float`, optional (default: 1)
        Weight w of the squared depth differences

    Returns
    -------
    value : `float`

    gradient : array-like, same shape as `volume`
    """
    utils.check_positive(epsilon=epsilon)
    utils.check_nonnegative(depth_weight=depth_weight)
    if isinstance(volume, forward_model.SceneVolume):
        volume = volume.intensities
    volume = matrix.to_array(volume)
    dz = _forward_difference(volume, 0)
    dx = _forward_difference(volume, 1)
    dy = _forward_difference(volume, 2)
    magnitude = np.sqrt(dx ** 2 + dy ** 2 + depth_weight * dz ** 2 + epsilon ** 2)
    value = float(np.sum(magnitude - epsilon))
    gradient = (
        _forward_difference_adjoint(dx / magnitude, 1)
        + _forward_difference_adjoint(dy / magnitude, 2)
        + depth_weight * _forward_difference_adjoint(dz / magnitude, 0)
    )
    return value, gradient


class ReconProblem(Base):
    """Regularized least squares over all frames

    Minimizes sum_i ||Y_i - A_i(I)||^2 + lam * TV_eps(I) subject to I >= 0.

    Parameters
    ----------
    measurements : `forward.MeasurementSet`

    model : `optics.SystemModel` or list of per-frame models
        Reconstruction system model(s)

    sequence : `patterns.IlluminationSequence` or `None`, optional
        Defaults to the sequence stored with the measurements

    lam : `float`, optional (default: 0)
        Regularization weight

    tv_epsilon : `float` or 'auto', optional (default: 'auto')
        TV smoothing. 'auto' uses 1e-4 times the estimated maximum
        intensity max|adjoint(Y)| / L.

    depth_weight : `float`, optional (default: 1)

    n_jobs : `int`, optional (default: 1)
        Threads used by the forward and adjoint operators
    """

    def __init__(
        self,
        measurements,
        model,
        sequence=None,
        lam=0.0,
        tv_epsilon="auto",
        depth_weight=1.0,
        n_jobs=1,
    ):
        if sequence is None:
            sequence = measurements.sequence
        utils.check_nonnegative(lam=lam, depth_weight=depth_weight)
        utils.check_if_not("auto", utils.check_positive, tv_epsilon=tv_epsilon)
        self.measurements = measurements
        self.model = model
        self.sequence = sequence
        self.lam = lam
        self.tv_epsilon = tv_epsilon
        self.depth_weight = depth_weight
        self.n_jobs = n_jobs
        self.operator = forward_model.MeasurementOperator(
            model, sequence, n_jobs=n_jobs
        )
        utils.check_shape(self.operator.frame_shape, frames=measurements.frames)
        super().__init__()

    @property
    def depth_grid(self):
        return self.operator.depth_grid

    def __repr__(self):
        return "ReconProblem(frames={}, volume={}, lam={}, tv_epsilon={})".format(
            self.operator.frame_shape,
            self.operator.volume_shape,
            self.lam,
            self.tv_epsilon,
        )


class SolverReport(Base):
    """Outcome of `solve`

    Parameters
    ----------
    objective_trace : array-like
        Objective of the current iterate, starting with the initial volume

    data_residual : `float`
        sum_i ||Y_i - A_i(I)||^2 at the returned volume

    tv_value : `float`
        TV_eps at the returned volume

    iterations : `int`

    stop_reason : {'converged', 'max_iters'}

    lam, tv_epsilon, step_size, lipschitz : `float`
        Resolved regularization, smoothing, final step and operator norm
    """

    def __init__(
        self,
        objective_trace,
        data_residual,
        tv_value,
        iterations,
        stop_reason,
        lam,
        tv_epsilon,
        step_size,
        lipschitz,
    ):
        self.objective_trace = np.asarray(objective_trace, dtype=float)
        self.data_residual = data_residual
        self.tv_value = tv_value
        self.iterations = iterations
        self.stop_reason = stop_reason
        self.lam = lam
        self.tv_epsilon = tv_epsilon
        self.step_size = step_size
        self.lipschitz = lipschitz
        super().__init__()

    @property
    def initial_objective(self):
        return float(self.objective_trace[0])

    @property
    def final_objective(self):
        return float(self.objective_trace[-1])

    def summary(self):
        """Scalar fields, for manifests and reports"""
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "initial_objective": self.initial_objective,
            "final_objective": self.final_objective,
            "data_residual": self.data_residual,
            "tv_value": self.tv_value,
            "lam": self.lam,
            "tv_epsilon": self.tv_epsilon,
            "step_size": self.step_size,
            "lipschitz": self.lipschitz,
        }

    def __repr__(self):
        return "SolverReport(iterations={}, stop_reason={!r}, final_objective={:.6g})".format(
            self.iterations, self.stop_reason, self.final_objective
        )


def _power_iteration(operator, n_iters):
    x = np.ones(operator.volume_shape)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(n_iters):
        y = operator.normal(x)
        estimate = float(np.linalg.norm(y))
        if estimate == 0:
            return 0.0
        x = y / estimate
    return estimate


def lipschitz_estimate(model, sequence, n_iters=50, n_jobs=1):
    """Largest eigenvalue of adjoint(forward(.)) by power iteration

    Parameters
    ----------
    model : `optics.SystemModel` or list of per-frame models

    sequence : `patterns.IlluminationSequence`

    n_iters : `int`, optional (default: 50)

    n_jobs : `int`, optional (default: 1)

    Returns
    -------
    L : `float`, >= 0
    """
    utils.check_int(n_iters=n_iters)
    utils.check_positive(n_iters=n_iters)
    operator = forward_model.MeasurementOperator(model, sequence, n_jobs=n_jobs)
    return _power_iteration(operator, n_iters)


def lambda_from_scale(measurements, model, scale, sequence=None, n_jobs=1):
    """Regularization weight scale * max |adjoint(Y)|"""
    utils.check_nonnegative(scale=scale)
    if sequence is None:
        sequence = measurements.sequence
    back = apply_adjoint(measurements, model, sequence, n_jobs=n_jobs)
    if not np.all(np.isfinite(back)):
        raise DivergenceError("Back-projected measurements are not finite")
    return float(scale * np.max(np.abs(back)))


def objective_and_gradient(problem, volume, tv_epsilon):
    """Objective of a reconstruction problem and its gradient

    Parameters
    ----------
    problem : `ReconProblem`

    volume : array-like, shape=[n_planes, N, N]

    tv_epsilon : `float`
        Resolved TV smoothing

    Returns
    -------
    value : `float`

    gradient : array-like, shape=[n_planes, N, N]
    """
    operator = problem.operator
    residual = operator.forward(volume) - problem.measurements.frames
    tv, tv_gradient = tv3d_value_and_gradient(
        volume, tv_epsilon, problem.depth_weight
    )
    value = float(np.sum(residual ** 2)) + problem.lam * tv
    gradient = 2 * operator.adjoint(residual) + problem.lam * tv_gradient
    return value, gradient


def _resolve_epsilon(problem, lipschitz):
    if problem.tv_epsilon != "auto":
        return float(problem.tv_epsilon)
    back = problem.operator.adjoint(problem.measurements.frames)
    peak = float(np.max(np.abs(back)))
    if lipschitz > 0 and peak > 0:
        return 1e-4 * peak / lipschitz
    return 1e-4


def solve(problem, max_iters=300, step_rule="backtracking", tol=1e-10, x0=None):
    """Accelerated projected gradient with monotone restart

    Each iteration takes a projected gradient step from the extrapolated
    point. An iterate that would raise the objective is rejected and the
    momentum restarts from the current iterate, so the objective trace never
    increases and the returned volume is the best one visited.

    Parameters
    ----------
    problem : `ReconProblem`

    max_iters : `int`, optional (default: 300)
        0 returns the initial volume

    step_rule : {'backtracking', 'fixed'}, optional (default: 'backtracking')
        'fixed' uses 1 / (2 L + lam * 4 (2 + w) / eps), a global bound on
        the gradient's Lipschitz constant. 'backtracking' starts from 1 / (2 L)
        and halves the step until the quadratic upper bound holds.

    tol : `float`, optional (default: 1e-10)
        Stop when an accepted step changes the volume by less than `tol`
        relative to its norm

    x0 : array-like, shape=[n_planes, N, N], optional
        Nonnegative initial volume. Defaults to zeros.

    Returns
    -------
    volume : `forward.SceneVolume`

    report : `SolverReport`

    Raises
    ------
    DivergenceError : the objective became non-finite
    """
    utils.check_int(max_iters=max_iters)
    utils.check_nonnegative(max_iters=max_iters, tol=tol)
    utils.check_in(STEP_RULES, step_rule=step_rule)
    operator = problem.operator
    frames = problem.measurements.frames
    lam = problem.lam
    w = problem.depth_weight

    with _logger.task("Lipschitz estimate"):
        lipschitz = _power_iteration(operator, 50)
    epsilon = _resolve_epsilon(problem, lipschitz)
    data_bound = 2 * lipschitz
    total_bound = data_bound + lam * 4 * (2 + w) / epsilon
    if step_rule == "fixed" or data_bound == 0:
        step = 1 / total_bound if total_bound > 0 else 0.0
    else:
        step = 1 / data_bound

    def evaluate(x, Ax):
        residual = Ax - frames
        data = float(np.sum(residual ** 2))
        if lam > 0:
            tv, tv_gradient = tv3d_value_and_gradient(x, epsilon, w)
        else:
            tv, tv_gradient = 0.0, None
        return data + lam * tv, residual, tv_gradient

    if x0 is None:
        x = np.zeros(operator.volume_shape)
    else:
        x = np.array(matrix.to_array(x0))
        utils.check_shape(operator.volume_shape, x0=x)
        if np.any(x < 0):
            raise ValueError("Expected nonnegative x0")
    Ax = operator.forward(x)
    f_x = evaluate(x, Ax)[0]
    if not np.isfinite(f_x):
        raise DivergenceError("Initial objective is not finite")
    trace = [f_x]
    y, Ay, theta = x, Ax, 1.0
    stop_reason = "max_iters"
    iterations = 0
    restarted = False

    with _logger.task("reconstruction"):
        _logger.debug(
            "lam = {:.4g}, eps = {:.4g}, L = {:.4g}, step rule {}".format(
                lam, epsilon, lipschitz, step_rule
            )
        )
        for _ in range(max_iters):
            if step == 0:
                stop_reason = "converged"
                break
            f_y, residual_y, tv_gradient_y = evaluate(y, Ay)
            gradient = 2 * operator.adjoint(residual_y)
            if tv_gradient_y is not None:
                gradient += lam * tv_gradient_y
            for _halving in range(60):
                z = np.maximum(y - step * gradient, 0)
                Az = operator.forward(z)
                f_z = evaluate(z, Az)[0]
                if not np.isfinite(f_z):
                    raise DivergenceError(
                        "Objective became non-finite at iteration {}".format(
                            iterations + 1
                        )
                    )
                if step_rule == "fixed":
                    break
                diff = z - y
                bound = f_y + np.vdot(gradient, diff) + np.vdot(diff, diff) / (2 * step)
                if f_z <= bound + 1e-12 * abs(f_y):
                    break
                step *= 0.5
            else:
                raise DivergenceError("Line search found no decreasing step")
            iterations += 1
            if f_z <= f_x:
                theta_next = (1 + np.sqrt(1 + 4 * theta ** 2)) / 2
                momentum = (theta - 1) / theta_next
                change = np.linalg.norm(z - x)
                y = z + momentum * (z - x)
                Ay = Az + momentum * (Az - Ax)
                x, Ax, f_x, theta = z, Az, f_z, theta_next
                restarted = False
                trace.append(f_x)
                if change <= tol * np.linalg.norm(x):
                    stop_reason = "converged"
                    break
            else:
                if restarted:
                    # a plain gradient step from x failed: the step is too long
                    step *= 0.5
                y, Ay, theta = x, Ax, 1.0
                restarted = True
                trace.append(f_x)
        _logger.debug(
            "Stopped after {} iterations ({}), objective {:.6g} -> {:.6g}".format(
                iterations, stop_reason, trace[0], trace[-1]
            )
        )

    residual = Ax - frames
    tv_value = tv3d_value_and_gradient(x, epsilon, w)[0]
    report = SolverReport(
        objective_trace=trace,
        data_residual=float(np.sum(residual ** 2)),
        tv_value=tv_value,
        iterations=iterations,
        stop_reason=stop_reason,
        lam=lam,
        tv_epsilon=epsilon,
        step_size=step,
        lipschitz=lipschitz,
    )
    return forward_model.SceneVolume(x, problem.depth_grid), report
