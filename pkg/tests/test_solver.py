import math

from conftest import random_sequence
import numpy as np
import pytest
from scipy import ndimage

from salflow.core import ComplementedSequence, FlowField
from salflow.errors import NumericalError, ValidationError
from salflow.solver import (LevelProblem, LevelReport, SolverConfig,
                            assemble_level, build_pyramid, compute_weights,
                            convergence_table, diffusivity,
                            euler_lagrange_residual, fixed_point_sweep,
                            gaussian_kernel, presmooth, prolong_flow, psi,
                            psi_prime, pyramid_sizes, solve_level,
                            solve_sequence, solve_sequence_logged,
                            temporal_derivative, two_frame_baseline,
                            window_bounds)
from salflow.synth import value_noise

_NEIGHBOURS = [(0, 0, 1), (0, 0, -1), (0, 1, 0), (0, -1, 0), (1, 0, 0),
               (-1, 0, 0)]


def _gradient_oracle(plane):
    height, width = plane.shape
    dx1 = np.zeros_like(plane)
    dx2 = np.zeros_like(plane)
    for r in range(height):
        for c in range(width):
            if c == 0:
                dx1[r, c] = plane[r, 1] - plane[r, 0]
            elif c == width - 1:
                dx1[r, c] = plane[r, c] - plane[r, c - 1]
            else:
                dx1[r, c] = (plane[r, c + 1] - plane[r, c - 1]) / 2
            if r == 0:
                dx2[r, c] = plane[1, c] - plane[0, c]
            elif r == height - 1:
                dx2[r, c] = plane[r, c] - plane[r - 1, c]
            else:
                dx2[r, c] = (plane[r + 1, c] - plane[r - 1, c]) / 2
    return dx1, dx2


def _inside(shape, k, r, c):
    return 0 <= k < shape[0] and 0 <= r < shape[1] and 0 <= c < shape[2]


def _diffusivity_oracle(u1, u2, lam, epsilon):
    shape = u1.shape
    temporal = shape[0] > 1 and lam > 0
    out = np.empty(shape)
    for k in range(shape[0]):
        for r in range(shape[1]):
            for c in range(shape[2]):
                total = 0.0
                for u in (u1, u2):
                    for dk, dr, dc in _NEIGHBOURS:
                        if dk and not temporal:
                            continue
                        if not _inside(shape, k + dk, r + dr, c + dc):
                            continue
                        factor = lam**2 if dk else 1.0
                        total += factor * (u[k + dk, r + dr, c + dc]
                                           - u[k, r, c])**2 / 2
                out[k, r, c] = 0.5 / math.sqrt(total + epsilon**2)
    return out


def _sweep_oracle(problem, u1, u2, config):
    g = _diffusivity_oracle(u1, u2, config.lam, config.epsilon)
    shape = u1.shape
    temporal = shape[0] > 1 and config.lam > 0
    new_u1 = np.empty(shape)
    new_u2 = np.empty(shape)
    for k in range(shape[0]):
        for r in range(shape[1]):
            for c in range(shape[2]):
                n1 = n2 = w = 0.0
                for dk, dr, dc in _NEIGHBOURS:
                    if dk and not temporal:
                        continue
                    kk, rr, cc = k + dk, r + dr, c + dc
                    if not _inside(shape, kk, rr, cc):
                        continue
                    factor = config.lam**2 if dk else 1.0
                    face = factor * (g[k, r, c] + g[kk, rr, cc]) / 2
                    n1 += face * u1[kk, rr, cc]
                    n2 += face * u2[kk, rr, cc]
                    w += face
                at = (k, r, c)
                a11, a12, a22 = problem.a11[at], problem.a12[at], \
                    problem.a22[at]
                b1, b2 = problem.b1[at], problem.b2[at]
                tau, alpha = config.tau, config.alpha
                new_u1[at] = (u1[at] + tau * (alpha * (n1 - w * u1[at])
                                              - a12 * u2[at] - b1)) \
                    / (1 + tau * a11)
                new_u2[at] = (u2[at] + tau * (alpha * (n2 - w * u2[at])
                                              - a12 * u1[at] - b2)) \
                    / (1 + tau * a22)
    return new_u1, new_u2


def _random_problem(rng, shape):
    a11 = rng.uniform(0.5, 2.0, size=shape)
    a22 = rng.uniform(0.5, 2.0, size=shape)
    a12 = rng.uniform(-0.4, 0.4, size=shape)
    return LevelProblem(a11, a12, a22, rng.normal(size=shape),
                        rng.normal(size=shape), weights=None)


@pytest.fixture
def quick_config():
    return SolverConfig(levels=1, max_iterations=20, presmooth_sigma=1.0)


def test_psi_and_derivative():
    r2 = np.array([0.0, 1e-3, 4.0, 100.0])
    eps = 0.01
    np.testing.assert_allclose(psi(r2, eps), np.sqrt(r2 + eps**2),
                               rtol=1e-15)
    np.testing.assert_allclose(psi_prime(r2, eps),
                               0.5 / np.sqrt(r2 + eps**2), rtol=1e-15)
    # Ψ′ is dΨ/d(r²)
    h = 1e-6
    numeric = (psi(4.0 + h, eps) - psi(4.0 - h, eps)) / (2 * h)
    assert numeric == pytest.approx(psi_prime(4.0, eps), rel=1e-6)


def test_gaussian_kernel():
    kernel = gaussian_kernel(1.0)
    assert kernel.shape == (7, )
    assert kernel.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(kernel, kernel[::-1])
    assert gaussian_kernel(1.2).shape == (9, )
    with pytest.raises(ValidationError):
        gaussian_kernel(0)


def test_presmooth_keeps_constants(rng):
    seq = ComplementedSequence(np.full((2, 9, 7, 2), 0.3), 'gray+saliency')
    np.testing.assert_allclose(presmooth(seq, 1.5).data, 0.3, rtol=1e-12)
    noisy = random_sequence(rng)
    smoothed = presmooth(noisy, 1.0)
    assert smoothed.layout is noisy.layout
    assert smoothed.data.std() < noisy.data.std()


def test_pyramid_sizes():
    assert pyramid_sizes(64, 64, 4, 0.5) == \
        [(8, 8), (16, 16), (32, 32), (64, 64)]
    assert pyramid_sizes(40, 30, 2, 0.5) == [(20, 15), (40, 30)]
    assert pyramid_sizes(40, 30, 1, 0.5) == [(40, 30)]


def test_build_pyramid(rng):
    seq = random_sequence(rng, height=32, width=32, layout='gray+saliency')
    pyramid = build_pyramid(seq, 3, 0.5)
    assert [(p.width, p.height) for p in pyramid] == \
        [(8, 8), (16, 16), (32, 32)]
    assert pyramid[-1] is seq
    assert all(p.layout is seq.layout for p in pyramid)
    with pytest.raises(ValidationError, match="too small"):
        build_pyramid(seq, 4, 0.5)


def test_weights_match_loop_oracle(rng):
    seq = random_sequence(rng, n_frames=2, height=9, width=11,
                          layout='color+saliency')
    xi, value_scale = 0.01, 255.0
    weights = compute_weights(seq, xi, value_scale)
    assert weights.has_saliency
    assert weights.values.shape == (2, 9, 11, 4)
    np.testing.assert_array_equal(weights.values[..., 3], 1.0)
    for t in range(2):
        saliency = seq.data[t, :, :, 3]
        for i in range(3):
            dx1, dx2 = _gradient_oracle(seq.data[t, :, :, i] * value_scale)
            expected = saliency / np.sqrt(dx1**2 + dx2**2 + xi**2)
            np.testing.assert_allclose(weights.image_weights[t, :, :, i],
                                       expected, rtol=1e-12)


def test_weights_without_saliency(rng):
    seq = random_sequence(rng, n_frames=2, layout='gray')
    weights = compute_weights(seq, xi=0.5)
    assert not weights.has_saliency
    assert weights.image_weights.shape == (2, 8, 8, 1)
    assert (weights.values <= 1 / 0.5).all()


def test_temporal_derivative_matches_loop_oracle(rng):
    data = rng.uniform(size=(5, 4, 3, 2))
    deriv = temporal_derivative(data)
    assert deriv.shape == (4, 4, 3, 2)
    for k in range(4):
        if k == 0:
            expected = data[1] - data[0]
        else:
            expected = (data[k + 1] - data[k - 1]) / 2
        np.testing.assert_allclose(deriv[k], expected, rtol=1e-15)
    with pytest.raises(ValidationError):
        temporal_derivative(data[:1])


def test_assemble_level_coefficients(rng):
    seq = random_sequence(rng, n_frames=3, height=6, width=7,
                          layout='gray+saliency')
    config = SolverConfig()
    problem = assemble_level(seq, config, level=2, window=1)
    assert problem.shape == (2, 6, 7)
    assert (problem.level, problem.window) == (2, 1)
    scaled = seq.data * config.value_scale
    b = compute_weights(seq, config.xi, config.value_scale).values
    dt = temporal_derivative(scaled)
    a11 = np.zeros((2, 6, 7))
    b2 = np.zeros((2, 6, 7))
    for k in range(2):
        for i in range(2):
            dx1, dx2 = _gradient_oracle(scaled[k, :, :, i])
            a11[k] += b[k, :, :, i] * dx1 * dx1
            b2[k] += b[k, :, :, i] * dx2 * dt[k, :, :, i]
    np.testing.assert_allclose(problem.a11, a11, rtol=1e-12)
    np.testing.assert_allclose(problem.b2, b2, rtol=1e-12, atol=1e-12)
    # each per-pixel data matrix is positive semi-definite
    assert (problem.a12**2 <= problem.a11 * problem.a22 * (1 + 1e-12)).all()


def test_image_data_term_scales_with_contrast_saliency_term_does_not(rng):
    seq = random_sequence(rng, n_frames=3, height=6, width=7,
                          layout='gray+saliency')
    data = seq.data.copy()
    data[..., 0] *= 0.5
    config = SolverConfig(xi=1e-8)

    def parts(image_factor):
        scaled = data.copy()
        scaled[..., 0] *= image_factor
        problem = assemble_level(seq.with_data(scaled), config)
        scaled[..., 0] = 0.25
        saliency_only = assemble_level(seq.with_data(scaled), config)
        return problem, saliency_only

    base, base_saliency = parts(1.0)
    doubled, doubled_saliency = parts(2.0)
    np.testing.assert_allclose(doubled_saliency.a11, base_saliency.a11)
    np.testing.assert_allclose(doubled_saliency.b1, base_saliency.b1)
    # B = s/|∇f| cancels one power of the contrast, the squared residual
    # brings two
    np.testing.assert_allclose(doubled.a11 - doubled_saliency.a11,
                               2 * (base.a11 - base_saliency.a11),
                               rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(doubled.b1 - doubled_saliency.b1,
                               2 * (base.b1 - base_saliency.b1),
                               rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize('lam', [0.0, 1.0, 3.0])
def test_diffusivity_matches_loop_oracle(rng, lam):
    u1 = rng.normal(size=(3, 5, 4))
    u2 = rng.normal(size=(3, 5, 4))
    np.testing.assert_allclose(diffusivity(u1, u2, lam, 1e-3),
                               _diffusivity_oracle(u1, u2, lam, 1e-3),
                               rtol=1e-12)


@pytest.mark.parametrize('lam', [0.0, 1.0])
def test_sweep_matches_loop_oracle(rng, lam):
    shape = (3, 6, 5)
    problem = _random_problem(rng, shape)
    u1 = rng.normal(size=shape)
    u2 = rng.normal(size=shape)
    config = SolverConfig(alpha=2.0, lam=lam, tau=0.01)
    got1, got2 = fixed_point_sweep(problem, u1, u2, config)
    want1, want2 = _sweep_oracle(problem, u1, u2, config)
    np.testing.assert_allclose(got1, want1, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(got2, want2, rtol=1e-12, atol=1e-12)


def test_residual_is_scaled_explicit_update(rng):
    shape = (2, 5, 4)
    problem = _random_problem(rng, shape)
    u1 = rng.normal(size=shape)
    u2 = rng.normal(size=shape)
    config = SolverConfig(alpha=3.0, lam=1.0, tau=0.05)
    new1, new2 = fixed_point_sweep(problem, u1, u2, config)
    r1 = (u1 - new1) * (1 + config.tau * problem.a11) / config.tau
    r2 = (u2 - new2) * (1 + config.tau * problem.a22) / config.tau
    assert euler_lagrange_residual(problem, u1, u2, config) == \
        pytest.approx(math.sqrt(np.sum(r1**2) + np.sum(r2**2)), rel=1e-9)

    zeros = np.zeros(shape)
    still = problem._replace(b1=zeros, b2=zeros)
    assert euler_lagrange_residual(still, zeros, zeros, config) == 0.0


def test_window_bounds():
    assert window_bounds(5) == [(0, 5)]
    assert window_bounds(5, 5) == [(0, 5)]
    assert window_bounds(5, 9) == [(0, 5)]
    assert window_bounds(5, 2) == [(0, 2), (1, 3), (2, 4), (3, 5)]
    assert window_bounds(6, 3) == [(0, 3), (2, 5), (4, 6)]


@pytest.mark.parametrize('n_frames', [2, 5, 8, 13])
@pytest.mark.parametrize('window', [2, 3, 4])
def test_windows_cover_each_transition_once(n_frames, window):
    transitions = []
    for start, stop in window_bounds(n_frames, window):
        assert stop - start >= 2
        transitions.extend(range(start, stop - 1))
    assert transitions == list(range(n_frames - 1))


def test_config_validation():
    assert SolverConfig().validate() == SolverConfig()
    bad = [
        dict(alpha=0),
        dict(lam=-1),
        dict(tau=0),
        dict(levels=0),
        dict(scale=1.0),
        dict(temporal_window=1),
        dict(divergence_factor=1),
        dict(workers=0),
    ]
    for kwargs in bad:
        name = next(iter(kwargs))
        with pytest.raises(ValidationError, match=f"SolverConfig.{name}="):
            SolverConfig(**kwargs).validate()


def test_zero_iterations_returns_initial_flow(rng):
    shape = (2, 4, 4)
    problem = _random_problem(rng, shape)
    init = FlowField(rng.normal(size=shape), rng.normal(size=shape))
    result = solve_level(problem, init, SolverConfig(max_iterations=0))
    assert result.flow is init
    assert result.iterations == 0
    assert not result.converged
    assert math.isnan(result.rel_change_u1)
    assert result.residual > 0


def test_initial_flow_shape_mismatch(rng):
    problem = _random_problem(rng, (2, 4, 4))
    with pytest.raises(ValidationError, match="does not match"):
        solve_level(problem, FlowField.zeros(2, 4, 5), SolverConfig())


def test_large_step_raises_numerical_error(rng):
    seq = random_sequence(rng, n_frames=3, height=12, width=12)
    config = SolverConfig(levels=1, tau=1e6, max_iterations=50)
    with pytest.raises(NumericalError):
        solve_sequence(seq, config)


def test_divergence_is_judged_on_component_norm():
    shape = (1, 4, 4)
    zeros = np.zeros(shape)
    # no data stiffness and a constant force: u1 grows by τ per sweep at
    # every pixel, so |u1| = 4k while the rms is only k
    problem = LevelProblem(zeros, zeros, zeros, np.full(shape, -1.0), zeros,
                           weights=None)
    config = SolverConfig(tau=1.0, divergence_factor=10.0, max_iterations=20,
                          median_radius=0)
    with pytest.raises(NumericalError,
                       match=r"iteration 3: \|u1\| = 12 exceeds 10"):
        solve_level(problem, FlowField.zeros(*shape), config)


def test_single_pixel_reaches_closed_form_stationary_point():
    # J = (1, 0; 0, 0), ∂f/∂t = (−0.3, 0), B = (1, 1):
    # a11 = 1, b1 = −0.3
    one = np.ones((1, 1, 1))
    zero = np.zeros((1, 1, 1))
    problem = LevelProblem(one, zero, zero, -0.3 * one, zero, weights=None)
    config = SolverConfig(alpha=1e-9, tau=0.5, tol=1e-12, max_iterations=200,
                          median_radius=0)
    result = solve_level(problem, FlowField.zeros(1, 1, 1), config)
    assert result.converged
    assert result.flow.u1[0, 0, 0] == pytest.approx(0.3, abs=1e-9)
    assert result.flow.u2[0, 0, 0] == 0.0
    assert result.residual == pytest.approx(0.0, abs=1e-9)


def _smooth_field(rng, shape):
    field = ndimage.gaussian_filter(rng.normal(size=shape), sigma=(0, 3, 3))
    return field / np.abs(field).max()


def test_residual_non_increasing_over_first_sweeps(rng):
    shape = (4, 16, 16)
    # equal diagonal data coefficients make every sweep a plain gradient
    # step of size τ/(1 + 4τ) on the convex discrete energy; unit flow
    # slopes keep Ψ′ ≤ 0.7, so that step stays below 2/L at the default τ
    diagonal = np.full(shape, 4.0)
    problem = LevelProblem(diagonal, 2.0 * _smooth_field(rng, shape),
                           diagonal, 10.0 * _smooth_field(rng, shape),
                           10.0 * _smooth_field(rng, shape), weights=None)
    _, rows, cols = np.meshgrid(*[np.arange(n) for n in shape],
                                indexing='ij')
    u1 = cols + 0.1 * _smooth_field(rng, shape)
    u2 = rows + 0.1 * _smooth_field(rng, shape)
    config = SolverConfig()

    residuals = [euler_lagrange_residual(problem, u1, u2, config)]
    a, b = u1, u2
    for _ in range(10):
        a, b = fixed_point_sweep(problem, a, b, config)
        residuals.append(euler_lagrange_residual(problem, a, b, config))
    for earlier, later in zip(residuals, residuals[1:]):
        assert later <= earlier * (1 + 1e-12)
    assert residuals[-1] < residuals[0]

    monitored = config._replace(tol=1e-12, max_iterations=10,
                                median_radius=0)
    result = solve_level(problem, FlowField(u1, u2), monitored)
    assert result.iterations == 10
    assert result.residual_increases == 0
    assert result.residual == pytest.approx(residuals[-1], rel=1e-12)


def _global_translation(n_frames=3, size=32, seed=3):
    """Smooth texture moving right by one pixel per frame."""
    texture = value_noise(size + 16, size, seed=seed, cell=8)[..., 0]
    frames = [texture[:, 8 - t:8 - t + size] for t in range(n_frames)]
    return ComplementedSequence(np.stack(frames), 'gray')


def test_two_level_solve_recovers_global_translation():
    seq = _global_translation()
    result = solve_sequence_logged(
        seq, SolverConfig(levels=2, tol=1e-4, max_iterations=3000))
    assert [(r.width, r.height) for r in result.reports] == \
        [(16, 16), (32, 32)]
    inner = (slice(None), slice(4, -4), slice(4, -4))
    assert result.flow.u1[inner].mean() == pytest.approx(1.0, abs=0.25)
    assert result.flow.u2[inner].mean() == pytest.approx(0.0, abs=0.25)


def test_identical_frames_give_zero_flow(static_scene):
    config = SolverConfig(levels=3)
    result = solve_sequence_logged(static_scene.sequence, config)
    assert result.flow.n_samples == static_scene.sequence.n_frames - 1
    np.testing.assert_array_equal(result.flow.u1, 0.0)
    np.testing.assert_array_equal(result.flow.u2, 0.0)
    assert len(result.reports) == 3
    assert result.converged
    assert all(r.iterations == 1 for r in result.reports)
    assert all(r.residual == 0.0 for r in result.reports)


def test_convergence_table(static_scene):
    config = SolverConfig(levels=2, temporal_window=2)
    result = solve_sequence_logged(static_scene.sequence, config)
    table = convergence_table(result.reports)
    assert list(table.columns) == list(LevelReport._fields)
    assert len(table) == 2 * (static_scene.sequence.n_frames - 1)
    assert list(table['level']) == [0, 1] * 2
    assert list(table['window']) == [0, 0, 1, 1]
    assert list(table['width'][:2]) == [16, 32]


def test_prolong_flow_scales_displacements():
    coarse = FlowField(np.ones((2, 8, 8)), np.full((2, 8, 8), -0.5))
    fine = prolong_flow(coarse, 16, 12)
    assert (fine.n_samples, fine.height, fine.width) == (2, 12, 16)
    np.testing.assert_allclose(fine.u1, 2.0, rtol=1e-6)
    np.testing.assert_allclose(fine.u2, -0.75, rtol=1e-6)


def _cubic_gain():
    """Σ|w| of the a = −0.75 cubic kernel at the quarter-pixel phase of a
    2× upsampling, squared for the two axes."""
    near = [1.25 * x**3 - 2.25 * x**2 + 1 for x in (0.25, 0.75)]
    far = [-0.75 * x**3 + 3.75 * x**2 - 6 * x + 3 for x in (1.25, 1.75)]
    return sum(abs(w) for w in near + far)**2


def test_prolonged_coarse_solution_bounds_fine_error():
    seq = _global_translation()
    config = SolverConfig(levels=2, tol=1e-4, max_iterations=3000)
    coarse_seq = presmooth(build_pyramid(seq, 2, 0.5)[0], 1.0)
    problem = assemble_level(coarse_seq, config)
    coarse = solve_level(problem, FlowField.zeros(*problem.shape),
                         config).flow
    fine = prolong_flow(coarse, seq.width, seq.height)

    # the error of the prolonged flow is the prolonged coarse error
    error = prolong_flow(FlowField(coarse.u1 - 0.5, coarse.u2), seq.width,
                         seq.height)
    np.testing.assert_allclose(fine.u1 - 1.0, error.u1, atol=1e-6)
    np.testing.assert_allclose(fine.u2, error.u2, atol=1e-6)

    ratio = seq.width / coarse.width
    assert ratio == 2
    bound_u1 = ratio * _cubic_gain() * np.abs(coarse.u1 - 0.5).max()
    bound_u2 = ratio * _cubic_gain() * np.abs(coarse.u2).max()
    assert np.abs(fine.u1 - 1.0).max() <= bound_u1 + 1e-6
    assert np.abs(fine.u2).max() <= bound_u2 + 1e-6


def test_worker_count_does_not_change_flow(rng, quick_config):
    seq = random_sequence(rng, n_frames=5, height=12, width=12)
    config = quick_config._replace(temporal_window=2)
    serial = solve_sequence(seq, config)
    threaded = solve_sequence(seq, config._replace(workers=3))
    np.testing.assert_array_equal(serial.u1, threaded.u1)
    np.testing.assert_array_equal(serial.u2, threaded.u2)


def test_two_frame_baseline_solves_transitions_independently(
        rng, quick_config):
    seq = random_sequence(rng, n_frames=4, height=12, width=12)
    baseline = two_frame_baseline(seq, quick_config)
    assert baseline.n_samples == 3
    for k in range(3):
        pair = seq.with_data(seq.data[k:k + 2])
        alone = solve_sequence(pair, quick_config._replace(lam=0.0))
        np.testing.assert_allclose(baseline.u1[k], alone.u1[0], rtol=1e-12,
                                   atol=1e-12)
        np.testing.assert_allclose(baseline.u2[k], alone.u2[0], rtol=1e-12,
                                   atol=1e-12)


def test_global_offset_leaves_flow_unchanged(rng, quick_config):
    # multiples of 1/64 keep every difference exact, so the flow is
    # bitwise identical
    data = rng.integers(0, 33, size=(3, 12, 12, 1)) / 64
    base = ComplementedSequence(data, 'gray')
    shifted = ComplementedSequence(data + 0.25, 'gray')
    exact = quick_config._replace(presmooth_sigma=0.0)
    flow = solve_sequence(base, exact)
    flow_shifted = solve_sequence(shifted, exact)
    np.testing.assert_array_equal(flow_shifted.u1, flow.u1)
    np.testing.assert_array_equal(flow_shifted.u2, flow.u2)

    # Gaussian presmoothing rounds the offset differently, so the smoothed
    # solves agree only to rounding
    data = rng.uniform(0, 0.5, size=(3, 12, 12, 1))
    flow = solve_sequence(ComplementedSequence(data, 'gray'), quick_config)
    flow_shifted = solve_sequence(ComplementedSequence(data + 0.3, 'gray'),
                                  quick_config)
    np.testing.assert_allclose(flow_shifted.u1, flow.u1, atol=1e-8)
    np.testing.assert_allclose(flow_shifted.u2, flow.u2, atol=1e-8)


@pytest.mark.slow
def test_translating_square_moves_right(translation_scene):
    scene = translation_scene
    flow = solve_sequence(scene.sequence, SolverConfig(levels=3))
    mask = scene.object_mask[:-1]
    assert flow.u1[mask].mean() > 0
    assert flow.u1[mask].mean() > np.abs(flow.u2[mask]).mean()
