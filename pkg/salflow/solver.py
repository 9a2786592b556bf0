"""Spatio-temporal variational optical flow on complemented sequences.

The energy is a B-weighted data term over every channel plus α·Ψ of the
spatio-temporal flow gradient, Ψ(r²) = √(r² + ε²). It is minimised through
its Euler–Lagrange equations with semi-implicit fixed-point sweeps inside a
coarse-to-fine pyramid. Each pyramid level is presmoothed, solved from the
prolonged coarser flow (zero at the coarsest level), median filtered, then
prolonged again.

Flow sample k of a window sits at frame k: spatial derivatives and weights
come from frame k, the temporal derivative is forward at k = 0 and central
afterwards."""

import concurrent.futures
import logging
import math
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import ndimage

from salflow.core import (FlowField, resample_volume, round_half_up,
                          spatial_gradient)
from salflow.errors import NumericalError, ValidationError

__all__ = [
    'SolverConfig',
    'WeightField',
    'LevelProblem',
    'LevelResult',
    'LevelReport',
    'SolveResult',
    'psi',
    'psi_prime',
    'gaussian_kernel',
    'presmooth',
    'pyramid_sizes',
    'build_pyramid',
    'compute_weights',
    'temporal_derivative',
    'assemble_level',
    'diffusivity',
    'fixed_point_sweep',
    'euler_lagrange_residual',
    'solve_level',
    'prolong_flow',
    'window_bounds',
    'solve_sequence',
    'solve_sequence_logged',
    'two_frame_baseline',
    'convergence_table',
]

MIN_LEVEL_SIZE = 8
# sweeps over which a residual increase is counted in the level report
MONITORED_SWEEPS = 10


class SolverConfig(NamedTuple):
    alpha: float = 40.0
    lam: float = 1.0
    tau: float = 1e-3
    xi: float = 0.01
    epsilon: float = 1e-6
    tol: float = 0.003
    levels: int = 4
    scale: float = 0.5
    max_iterations: int = 500
    median_radius: int = 2
    presmooth_sigma: float = 1.0
    # None means the whole sequence is one window
    temporal_window: Optional[int] = None
    # channel values are multiplied by this before solving, so α, τ and ξ act
    # on 8-bit code units by default
    value_scale: float = 255.0
    delta: float = 1e-8
    divergence_factor: float = 1e6
    workers: int = 1

    def validate(self):
        checks = [
            ('alpha', self.alpha > 0, "must be > 0"),
            ('lam', self.lam >= 0, "must be >= 0"),
            ('tau', self.tau > 0, "must be > 0"),
            ('xi', self.xi > 0, "must be > 0"),
            ('epsilon', self.epsilon > 0, "must be > 0"),
            ('tol', self.tol > 0, "must be > 0"),
            ('levels', int(self.levels) == self.levels and self.levels >= 1,
             "must be an integer >= 1"),
            ('scale', 0 < self.scale < 1, "must lie in (0, 1)"),
            ('max_iterations', self.max_iterations >= 0, "must be >= 0"),
            ('median_radius', self.median_radius >= 0, "must be >= 0"),
            ('presmooth_sigma', self.presmooth_sigma >= 0,
             "must be >= 0 (0 disables presmoothing)"),
            ('temporal_window', self.temporal_window is None
             or self.temporal_window >= 2, "must be >= 2 frames"),
            ('value_scale', self.value_scale > 0, "must be > 0"),
            ('delta', self.delta > 0, "must be > 0"),
            ('divergence_factor', self.divergence_factor > 1, "must be > 1"),
            ('workers', self.workers >= 1, "must be >= 1"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ValidationError(
                    f"SolverConfig.{name}={getattr(self, name)!r} {message}")
        return self


def psi(r2, epsilon):
    return np.sqrt(r2 + epsilon**2)


def psi_prime(s, epsilon):
    return 0.5 / np.sqrt(s + epsilon**2)


def gaussian_kernel(sigma):
    """Sampled Gaussian truncated at radius ceil(3σ), renormalised to sum 1."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be > 0, got {sigma}")
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-x**2 / (2 * sigma**2))
    return kernel / kernel.sum()


def presmooth(sequence, sigma):
    """Separable spatial Gaussian over every channel of every frame, saliency
    included, with replicated borders."""
    kernel = gaussian_kernel(sigma)
    data = ndimage.correlate1d(sequence.data, kernel, axis=1, mode='nearest')
    data = ndimage.correlate1d(data, kernel, axis=2, mode='nearest')
    return sequence.with_data(data)


def pyramid_sizes(width, height, levels, scale):
    """(width, height) per level, coarsest first."""
    return [(round_half_up(width * scale**n), round_half_up(height * scale**n))
            for n in range(levels - 1, -1, -1)]


def build_pyramid(sequence, levels, scale):
    """Coarsest-first list of bicubically resampled copies of `sequence`; each
    level is resampled from the next finer one."""
    sizes = pyramid_sizes(sequence.width, sequence.height, levels, scale)
    if levels > 1:
        coarse_w, coarse_h = sizes[0]
        if min(coarse_w, coarse_h) < MIN_LEVEL_SIZE:
            raise ValidationError(
                f"sequence of {sequence.width}×{sequence.height} is too small "
                f"for {levels} levels at scale {scale}: coarsest level would "
                f"be {coarse_w}×{coarse_h}, minimum is "
                f"{MIN_LEVEL_SIZE}×{MIN_LEVEL_SIZE}")
    pyramid = [sequence]
    for width, height in reversed(sizes[:-1]):
        finer = pyramid[0]
        pyramid.insert(0, finer.with_data(
            resample_volume(finer.data, width, height)))
    return pyramid


class WeightField(NamedTuple):
    """Per-frame, per-pixel B vectors shaped (T, H, W, σ)."""
    values: np.ndarray
    has_saliency: bool

    @property
    def image_weights(self):
        if self.has_saliency:
            return self.values[..., :-1]
        return self.values


def compute_weights(sequence, xi=0.01, value_scale=1.0):
    """B_i = s / √(|∇f_i|² + ξ²) for image channels, 1 for the saliency channel.
    Without a saliency channel the factor s is 1. Gradients are taken on the
    values multiplied by `value_scale`; s stays in its own [0, 1] range."""
    layout = sequence.layout
    n_image = layout.image_channels
    image = sequence.data[..., :n_image] * value_scale
    dx1, dx2 = spatial_gradient(image)
    weights = 1.0 / np.sqrt(dx1**2 + dx2**2 + xi**2)
    if layout.has_saliency:
        saliency = np.maximum(sequence.data[..., -1:], 0.0)
        weights = np.concatenate(
            [weights * saliency, np.ones_like(saliency)], axis=-1)
    return WeightField(weights, layout.has_saliency)


def temporal_derivative(data):
    """∂f/∂t at flow samples 0..T−2 of a (T, H, W, C) array: forward at the
    first sample, central after it."""
    data = np.asarray(data, dtype=np.float64)
    n_samples = data.shape[0] - 1
    if n_samples < 1:
        raise ValidationError("temporal derivative needs at least two frames")
    deriv = np.empty((n_samples, ) + data.shape[1:])
    deriv[0] = data[1] - data[0]
    if n_samples > 1:
        deriv[1:] = (data[2:] - data[:-2]) / 2
    return deriv


class LevelProblem(NamedTuple):
    """Pointwise data-term coefficients of one pyramid level, shaped
    (K, H, W): the Euler–Lagrange data parts are a11·u1 + a12·u2 + b1 and
    a12·u1 + a22·u2 + b2."""
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    weights: WeightField
    level: int = 0
    window: int = 0

    @property
    def shape(self):
        return self.a11.shape


def assemble_level(sequence, config, level=0, window=0):
    data = sequence.data * config.value_scale
    n_samples = sequence.n_frames - 1
    weights = compute_weights(sequence, config.xi, config.value_scale)
    dx1, dx2 = spatial_gradient(data[:n_samples])
    dt = temporal_derivative(data)
    b = weights.values[:n_samples]
    return LevelProblem(
        a11=np.sum(b * dx1 * dx1, axis=-1),
        a12=np.sum(b * dx1 * dx2, axis=-1),
        a22=np.sum(b * dx2 * dx2, axis=-1),
        b1=np.sum(b * dx1 * dt, axis=-1),
        b2=np.sum(b * dx2 * dt, axis=-1),
        weights=weights,
        level=level,
        window=window,
    )


def _squared_differences(u, axis):
    """Mean of squared forward and backward differences along `axis`, with
    replicated borders (the difference across a border is zero)."""
    step = np.diff(u, axis=axis)**2
    total = np.zeros_like(u)
    lead = [slice(None)] * u.ndim
    trail = [slice(None)] * u.ndim
    lead[axis] = slice(None, -1)
    trail[axis] = slice(1, None)
    total[tuple(lead)] += step
    total[tuple(trail)] += step
    return total / 2


def diffusivity(u1, u2, lam, epsilon):
    """Ψ′(|∇₃u1|² + |∇₃u2|²) per cell, axes (K, H, W)."""
    grad2 = np.zeros_like(u1)
    for u in (u1, u2):
        grad2 += _squared_differences(u, 2) + _squared_differences(u, 1)
        if u.shape[0] > 1 and lam > 0:
            grad2 += lam**2 * _squared_differences(u, 0)
    return psi_prime(grad2, epsilon)


def _face_weights(cell_weights, lam):
    """Arithmetic means of cell diffusivities across each face, per axis;
    temporal faces carry the λ² factor."""
    faces = []
    for axis, factor in ((2, 1.0), (1, 1.0), (0, lam**2)):
        if cell_weights.shape[axis] < 2 or factor == 0:
            faces.append((axis, None))
            continue
        lead = [slice(None)] * 3
        trail = [slice(None)] * 3
        lead[axis] = slice(None, -1)
        trail[axis] = slice(1, None)
        mean = (cell_weights[tuple(lead)] + cell_weights[tuple(trail)]) / 2
        faces.append((axis, factor * mean))
    return faces


def _stencil(u, faces):
    """Neighbour sum Σ w·u_n and weight sum Σ w over the 6-neighbourhood,
    boundary faces omitted."""
    neighbours = np.zeros_like(u)
    total = np.zeros_like(u)
    for axis, weight in faces:
        if weight is None:
            continue
        lead = [slice(None)] * 3
        trail = [slice(None)] * 3
        lead[axis] = slice(None, -1)
        trail[axis] = slice(1, None)
        lead, trail = tuple(lead), tuple(trail)
        neighbours[lead] += weight * u[trail]
        neighbours[trail] += weight * u[lead]
        total[lead] += weight
        total[trail] += weight
    return neighbours, total


def _divergences(u1, u2, config):
    faces = _face_weights(diffusivity(u1, u2, config.lam, config.epsilon),
                          config.lam)
    n1, w = _stencil(u1, faces)
    n2, _ = _stencil(u2, faces)
    return n1, n2, w


def fixed_point_sweep(problem, u1, u2, config):
    """One semi-implicit update of both components from iterate k.

    Each component appears implicitly in its own data term (a pointwise
    scalar solve). The other component and the diffusion term use iterate k,
    so u1 and u2 update independently of each other."""
    n1, n2, w = _divergences(u1, u2, config)
    tau, alpha = config.tau, config.alpha
    div1 = n1 - w * u1
    div2 = n2 - w * u2
    new_u1 = (u1 + tau * (alpha * div1 - problem.a12 * u2 - problem.b1)) \
        / (1 + tau * problem.a11)
    new_u2 = (u2 + tau * (alpha * div2 - problem.a12 * u1 - problem.b2)) \
        / (1 + tau * problem.a22)
    return new_u1, new_u2


def euler_lagrange_residual(problem, u1, u2, config):
    """Euclidean norm of the discrete optimality system at (u1, u2).

    The system is the exact gradient of the discrete energy
    ½·(data quadratic) + (α/2)·Σ Ψ over cells, so a sweep is a gradient step
    scaled per pixel by τ / (1 + τ·a_jj)."""
    n1, n2, w = _divergences(u1, u2, config)
    r1 = problem.a11 * u1 + problem.a12 * u2 + problem.b1 \
        - config.alpha * (n1 - w * u1)
    r2 = problem.a12 * u1 + problem.a22 * u2 + problem.b2 \
        - config.alpha * (n2 - w * u2)
    return float(np.sqrt(np.sum(r1**2) + np.sum(r2**2)))


class LevelResult(NamedTuple):
    flow: FlowField
    iterations: int
    converged: bool
    rel_change_u1: float
    rel_change_u2: float
    residual: float
    # sweeps among the first MONITORED_SWEEPS that raised the residual
    residual_increases: int = 0


class LevelReport(NamedTuple):
    window: int
    level: int
    width: int
    height: int
    iterations: int
    converged: bool
    rel_change_u1: float
    rel_change_u2: float
    residual: float
    residual_increases: int = 0


def _median(u, radius):
    if radius == 0:
        return u
    size = 2 * radius + 1
    return ndimage.median_filter(u, size=(1, size, size), mode='nearest')


def solve_level(problem, init, config):
    """Sweep until the relative change of both components drops below `tol`
    (or `max_iterations` is hit), then median filter each flow sample.

    Raises NumericalError when a sweep is non-finite or when the Euclidean
    norm of either component exceeds `divergence_factor` times its initial
    norm (at least 1)."""
    u1 = np.array(init.u1, dtype=np.float64)
    u2 = np.array(init.u2, dtype=np.float64)
    if u1.shape != problem.shape:
        raise ValidationError(
            f"initial flow shape {u1.shape} does not match level shape "
            f"{problem.shape}")
    if config.max_iterations == 0:
        residual = euler_lagrange_residual(problem, u1, u2, config)
        return LevelResult(init, 0, False, math.nan, math.nan, residual)

    limits = [
        config.divergence_factor * max(1.0, float(np.linalg.norm(u)))
        for u in (u1, u2)
    ]
    last_residual = euler_lagrange_residual(problem, u1, u2, config)
    increases = 0
    rel1 = rel2 = math.inf
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        new_u1, new_u2 = fixed_point_sweep(problem, u1, u2, config)
        if not (np.all(np.isfinite(new_u1)) and np.all(np.isfinite(new_u2))):
            raise NumericalError(
                f"non-finite flow at level {problem.level} (window "
                f"{problem.window}), iteration {iteration}; tau="
                f"{config.tau} is probably too large")
        for name, u, limit in (('u1', new_u1, limits[0]),
                               ('u2', new_u2, limits[1])):
            norm = float(np.linalg.norm(u))
            if norm > limit:
                raise NumericalError(
                    f"flow diverged at level {problem.level} (window "
                    f"{problem.window}), iteration {iteration}: |{name}| = "
                    f"{norm:.3g} exceeds {limit:.3g}; tau={config.tau} is "
                    "probably too large")
        if iteration <= MONITORED_SWEEPS:
            residual = euler_lagrange_residual(problem, new_u1, new_u2,
                                               config)
            if residual > last_residual:
                increases += 1
                logging.debug(
                    f"level {problem.level} iteration {iteration}: residual "
                    f"rose from {last_residual:.4g} to {residual:.4g}")
            last_residual = residual
        rel1 = float(np.linalg.norm(new_u1 - u1)
                     / (np.linalg.norm(u1) + config.delta))
        rel2 = float(np.linalg.norm(new_u2 - u2)
                     / (np.linalg.norm(u2) + config.delta))
        u1, u2 = new_u1, new_u2
        logging.debug(f"level {problem.level} iteration {iteration}: "
                      f"rel change u1={rel1:.3g} u2={rel2:.3g}")
        if rel1 < config.tol and rel2 < config.tol:
            converged = True
            break

    if not converged:
        logging.warning(
            f"level {problem.level} (window {problem.window}) stopped at "
            f"max_iterations={config.max_iterations} with relative changes "
            f"{rel1:.3g}, {rel2:.3g} (tol {config.tol})")
    u1 = _median(u1, config.median_radius)
    u2 = _median(u2, config.median_radius)
    residual = euler_lagrange_residual(problem, u1, u2, config)
    return LevelResult(FlowField(u1, u2), iteration, converged, rel1, rel2,
                       residual, increases)


def prolong_flow(flow, width, height):
    """Bicubic upsampling with displacement values rescaled by the size
    ratio."""
    u1 = resample_volume(flow.u1[..., None], width, height)[..., 0]
    u2 = resample_volume(flow.u2[..., None], width, height)[..., 0]
    return FlowField(u1 * (width / flow.width), u2 * (height / flow.height))


def window_bounds(n_frames, temporal_window=None):
    """[start, stop) frame ranges of consecutive windows sharing one frame, so
    each transition belongs to exactly one window."""
    if temporal_window is None or temporal_window >= n_frames:
        return [(0, n_frames)]
    step = temporal_window - 1
    bounds = []
    start = 0
    while start < n_frames - 1:
        stop = min(start + temporal_window, n_frames)
        bounds.append((start, stop))
        start += step
    return bounds


def _solve_window(sequence, config, window=0):
    pyramid = build_pyramid(sequence, config.levels, config.scale)
    flow = None
    reports = []
    for level, level_seq in enumerate(pyramid):
        if config.presmooth_sigma > 0:
            level_seq = presmooth(level_seq, config.presmooth_sigma)
        if flow is None:
            flow = FlowField.zeros(level_seq.n_frames - 1, level_seq.height,
                                   level_seq.width)
        else:
            flow = prolong_flow(flow, level_seq.width, level_seq.height)
        problem = assemble_level(level_seq, config, level=level,
                                 window=window)
        result = solve_level(problem, flow, config)
        flow = result.flow
        report = LevelReport(window, level, level_seq.width, level_seq.height,
                             result.iterations, result.converged,
                             result.rel_change_u1, result.rel_change_u2,
                             result.residual, result.residual_increases)
        logging.info(
            f"window {window} level {level} ({level_seq.width}×"
            f"{level_seq.height}): {result.iterations} iterations, "
            f"converged={result.converged}, residual={result.residual:.4g}, "
            f"early residual increases={result.residual_increases}")
        reports.append(report)
    return flow, reports


class SolveResult(NamedTuple):
    flow: FlowField
    reports: list

    @property
    def converged(self):
        return all(r.converged for r in self.reports)


def solve_sequence_logged(sequence, config=None):
    """As `solve_sequence`, plus a LevelReport per (window, level)."""
    config = (config or SolverConfig()).validate()
    bounds = window_bounds(sequence.n_frames, config.temporal_window)
    windows = [
        sequence.with_data(sequence.data[start:stop])
        for start, stop in bounds
    ]
    indices = range(len(windows))
    if config.workers > 1 and len(windows) > 1:
        with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
            outputs = list(
                pool.map(_solve_window, windows, [config] * len(windows),
                         indices))
    else:
        outputs = [
            _solve_window(w, config, i) for w, i in zip(windows, indices)
        ]
    flow = FlowField.concatenate(f for f, _ in outputs)
    reports = [r for _, window_reports in outputs for r in window_reports]
    assert flow.n_samples == sequence.n_frames - 1, \
        (flow.n_samples, sequence.n_frames)
    return SolveResult(flow, reports)


def solve_sequence(sequence, config=None):
    """Finest-level flow for every transition of `sequence`."""
    return solve_sequence_logged(sequence, config).flow


def two_frame_baseline(sequence, config=None):
    """Independent two-frame solves with a purely spatial regulariser."""
    config = (config or SolverConfig())._replace(temporal_window=2, lam=0.0)
    return solve_sequence(sequence, config)


def convergence_table(reports):
    return pd.DataFrame.from_records(
        [r._asdict() for r in reports], columns=LevelReport._fields)
