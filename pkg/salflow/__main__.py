"""Command-line interface for salflow: synthetic scenes, saliency,
complemented sequences, flow, dynamic saliency, scoring and the experiments
built from them."""

import collections
import logging
import os
import sys
import time

import click
import numpy as np

from salflow import experiments, middlebury
from salflow.conditioning import (DEFAULT_THRESHOLD, condition_statistics,
                                  condition_table)
from salflow.core import (FLOW_PREFIX, SALIENCY_EXT, Layout, indexed_paths,
                          load_flow_sequence, load_sequence,
                          save_flow_sequence, save_saliency, save_sequence,
                          write_raster)
from salflow.dynsal import (load_dynamic_saliency, magnitude,
                            save_dynamic_saliency)
from salflow.errors import SalflowError
from salflow.evaluation import (average_angular_error, curves_table,
                                endpoint_error, latexify_results,
                                load_fixations, rasterize_fixations,
                                score_models)
from salflow.manifest import RunManifest, load_config, write_manifest
from salflow.presets import PRESETS, get_preset, register_presets
from salflow.saliency import (PROVIDERS, SpectralResidualProvider,
                              complement, compute_sequence_saliency,
                              make_provider)
from salflow.saved_runs import RUN_SUFFIX, SavedRun, save_run
from salflow.scene_vars import OcclusionSceneVars, TranslationSceneVars
from salflow.solver import (SolverConfig, convergence_table,
                            solve_sequence_logged)
from salflow.style import fixation_overlay, flow_preview, heat_preview
from salflow.synth import (SCENE_PRESETS, parse_scene_config, render,
                           write_scene)
from salflow.version import __version__

LAYOUT_CHOICES = [layout.value for layout in Layout]
_SCENE_VARS = {
    'occlusion': OcclusionSceneVars,
    'translation': TranslationSceneVars,
}
_INT_FIELDS = {
    'levels', 'max_iterations', 'median_radius', 'temporal_window', 'workers'
}

register_presets()


class SalflowGroup(click.Group):
    """Turns library errors into `error [<category>]: <message>` on stderr
    and the category's exit code."""
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except SalflowError as ex:
            click.echo(f"error [{ex.category}]: {ex}", err=True)
            ctx.exit(ex.exit_code)


def _load_config_file(ctx, param, value):
    """Eager --config callback: file values become the command's defaults, so
    explicit flags still win."""
    if value is None:
        return None
    allowed = {
        p.name
        for p in ctx.command.params if p.name not in ('config', 'help')
    }
    values = load_config(value, allowed_keys=allowed)
    default_map = dict(ctx.default_map or {})
    default_map.update(values)
    ctx.default_map = default_map
    return value


config_option = click.option(
    '--config',
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    is_eager=True,
    expose_value=False,
    callback=_load_config_file,
    help="key = value file supplying defaults for this command's options")


def solver_options(fn):
    """One --flag per SolverConfig field; unset flags keep the preset (or
    built-in) value."""
    defaults = SolverConfig()
    for name in reversed(SolverConfig._fields):
        if name in _INT_FIELDS:
            opt_type = int
        else:
            opt_type = float
        fn = click.option('--' + name.replace('_', '-'),
                          name,
                          type=opt_type,
                          default=None,
                          help=f"solver {name} (default "
                          f"{getattr(defaults, name)})")(fn)
    return fn


def resolve_solver_config(preset=None, two_frame=False, **overrides):
    config = get_preset(preset).config if preset else SolverConfig()
    config = config._replace(
        **{k: v
           for k, v in overrides.items() if v is not None})
    if two_frame or (preset and get_preset(preset).two_frame):
        config = config._replace(temporal_window=2, lam=0.0)
    return config.validate()


def _provider(kind, saliency_pattern):
    if kind == 'external':
        if saliency_pattern is None:
            raise click.UsageError(
                "--provider external needs --saliency-pattern")
        return make_provider(kind, pattern=saliency_pattern)
    if saliency_pattern is not None:
        raise click.UsageError(
            f"--saliency-pattern conflicts with --provider {kind}")
    return make_provider(kind)


def load_input(pattern, layout, provider_kind=None, saliency_pattern=None,
               workers=1):
    """Frames for `layout`. With a provider, the saliency channel is computed
    from the plain frames; without one, it comes from `.sal` sidecars."""
    layout = Layout.parse(layout)
    if provider_kind is None:
        if saliency_pattern is not None:
            raise click.UsageError("--saliency-pattern needs --provider")
        return load_sequence(pattern, layout)
    if not layout.has_saliency:
        raise click.UsageError(
            f"--provider {provider_kind} conflicts with layout "
            f"'{layout.value}', which has no saliency channel")
    provider = _provider(provider_kind, saliency_pattern)
    sequence = load_sequence(pattern, layout.base)
    maps = compute_sequence_saliency(sequence, provider, workers)
    return complement(sequence, maps)


def _finish(command, out_dir, config, inputs, outputs, started, summary,
            timings=None):
    timings = dict(timings or {})
    timings['total_s'] = round(time.time() - started, 3)
    manifest = RunManifest(command, dict(config), dict(inputs), dict(outputs),
                           timings, dict(summary))
    path = write_manifest(manifest, out_dir)
    logging.info(f"Wrote manifest to '{path}'")
    return manifest


@click.group(cls=SalflowGroup)
@click.option('-v',
              '--verbose',
              count=True,
              help="-v for progress messages, -vv for per-iteration detail")
@click.version_option(__version__, prog_name='salflow')
def cli(verbose):
    """Dynamic saliency as optical flow over saliency-complemented
    sequences."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s')


@cli.command()
@config_option
@click.option('--scene',
              type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="scene description file (key = value)")
@click.option('--preset',
              type=click.Choice(sorted(SCENE_PRESETS)),
              default=None,
              help="built-in scene used when --scene is absent "
              "[default: occlusion]")
@click.option('--seed',
              type=int,
              default=None,
              help="sample the preset's scene variables with this seed")
@click.option('--layout',
              type=click.Choice(['gray', 'color']),
              default='gray')
@click.argument('out_dir', type=click.Path(file_okay=False))
def synth(scene, preset, seed, layout, out_dir):
    """Render a synthetic scene with exact flow, masks and fixations."""
    started = time.time()
    if scene is not None:
        if preset is not None or seed is not None:
            raise click.UsageError("--scene conflicts with --preset/--seed")
        spec = parse_scene_config(scene)
        source = scene
    else:
        preset = preset or 'occlusion'
        if preset in _SCENE_VARS:
            vars_cls = _SCENE_VARS[preset]
            scene_vars = (vars_cls.defaults() if seed is None else
                          vars_cls.sample(np.random.default_rng(seed)))
            spec = SCENE_PRESETS[preset](scene_vars, layout=layout)
        else:
            spec = SCENE_PRESETS[preset](seed=seed or 0, layout=layout)
        source = f'preset:{preset}'
    rendered = render(spec)
    written = write_scene(rendered, out_dir)
    config = {
        k: v
        for k, v in spec._asdict().items()
        if k not in ('objects', 'occluders')
    }
    config['objects'] = len(spec.objects)
    config['occluders'] = len(spec.occluders)
    _finish('synth', out_dir, config, {'scene': source}, written, started,
            {'n_frames': spec.n_frames})
    click.echo(written['frames'])


def provider_options(fn):
    fn = click.option('--saliency-pattern',
                      default=None,
                      help="saliency rasters or .sal files for the "
                      "external provider")(fn)
    fn = click.option('--provider',
                      type=click.Choice(list(PROVIDERS)),
                      default=None,
                      help="compute the saliency channel with this "
                      "provider")(fn)
    return fn


@cli.command()
@config_option
@click.option('--layout',
              type=click.Choice(['gray', 'color', 'hsv']),
              default='gray',
              help="layout of the input frames")
@click.option('--working-width', type=int, default=64)
@click.option('--smoothing-sigma', type=float, default=2.5)
@click.option('--workers', type=int, default=1)
@click.option('--previews/--no-previews', default=True)
@click.argument('pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def saliency(layout, working_width, smoothing_sigma, workers, previews,
             pattern, out_dir):
    """Spectral-residual saliency for every frame matching PATTERN."""
    started = time.time()
    sequence = load_sequence(pattern, layout)
    provider = SpectralResidualProvider(working_width=working_width,
                                        smoothing_sigma=smoothing_sigma)
    maps = compute_sequence_saliency(sequence, provider, workers)
    os.makedirs(out_dir, exist_ok=True)
    paths = indexed_paths(pattern, skip_ext=SALIENCY_EXT)
    for path, saliency_map in zip(paths, maps):
        stem = os.path.join(out_dir,
                            os.path.splitext(os.path.basename(path))[0])
        save_saliency(stem + SALIENCY_EXT, saliency_map.values)
        if previews:
            write_raster(stem + '_preview.png',
                         heat_preview(saliency_map.values))
    _finish(
        'saliency', out_dir, {
            'layout': layout,
            'provider': provider.kind,
            'working_width': working_width,
            'smoothing_sigma': smoothing_sigma,
            'workers': workers,
        }, {'frames': pattern},
        {'saliency': os.path.join(out_dir, '*' + SALIENCY_EXT)}, started,
        {'n_maps': len(maps)})


@cli.command(name='complement')
@config_option
@click.option('--layout',
              type=click.Choice(['gray', 'color', 'hsv']),
              default='gray',
              help="layout of the input frames")
@provider_options
@click.option('--workers', type=int, default=1)
@click.option('--bit-depth', type=click.Choice(['8', '16']), default='8')
@click.argument('pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def complement_cmd(layout, provider, saliency_pattern, workers, bit_depth,
                   pattern, out_dir):
    """Write PATTERN's frames with a saliency sidecar per frame."""
    started = time.time()
    target = Layout.parse(layout).with_saliency()
    sequence = load_input(pattern, target, provider or 'spectral',
                          saliency_pattern, workers)
    out_pattern = save_sequence(sequence, out_dir, bit_depth=int(bit_depth))
    _finish(
        'complement', out_dir, {
            'layout': target.value,
            'provider': provider or 'spectral',
            'bit_depth': bit_depth,
        }, {
            'frames': pattern,
            'saliency': saliency_pattern
        }, {'frames': out_pattern}, started,
        {'n_frames': sequence.n_frames})
    click.echo(out_pattern)


@cli.command()
@config_option
@click.option('--layout',
              type=click.Choice(LAYOUT_CHOICES),
              default=None,
              help="channel layout [default: the preset's, else gray]")
@provider_options
@click.option('--preset',
              type=click.Choice(list(PRESETS)),
              default=None,
              help="start from a named model preset")
@click.option('--two-frame',
              is_flag=True,
              default=False,
              help="two-frame baseline: windows of 2 frames, lam = 0")
@click.option('--previews/--no-previews', default=False)
@solver_options
@click.argument('pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def flow(layout, provider, saliency_pattern, preset, two_frame, previews,
         pattern, out_dir, **overrides):
    """Optical flow for every transition of the frames matching PATTERN."""
    started = time.time()
    if layout is None:
        layout = get_preset(preset).layout.value if preset else 'gray'
    config = resolve_solver_config(preset, two_frame, **overrides)
    sequence = load_input(pattern, layout, provider, saliency_pattern,
                          config.workers)
    loaded = time.time()
    result = solve_sequence_logged(sequence, config)
    solved = time.time()

    paths = save_flow_sequence(result.flow, out_dir)
    table = convergence_table(result.reports)
    convergence_path = os.path.join(out_dir, 'convergence.csv')
    table.to_csv(convergence_path, index=False)
    if previews:
        for k in range(result.flow.n_samples):
            write_raster(
                os.path.join(out_dir, f'{FLOW_PREFIX}_{k:04d}.png'),
                flow_preview(result.flow.u1[k], result.flow.u2[k]))

    mags = magnitude(result.flow).raw
    manifest = _finish(
        'flow', out_dir,
        collections.OrderedDict([('layout', sequence.layout.value),
                                 ('provider', provider),
                                 ('preset', preset),
                                 ('two_frame', two_frame)] +
                                list(config._asdict().items())),
        {
            'frames': pattern,
            'saliency': saliency_pattern
        }, {
            'flow': os.path.join(out_dir, f'{FLOW_PREFIX}_*.flo'),
            'convergence': convergence_path,
        },
        started, {
            'converged': result.converged,
            'n_samples': result.flow.n_samples,
            'max_magnitude': float(mags.max()),
            'mean_magnitude': float(mags.mean()),
        },
        timings={
            'load_s': round(loaded - started, 3),
            'solve_s': round(solved - loaded, 3)
        })
    save_run(
        SavedRun(manifest._replace(timings={}), result.flow,
                 [tuple(r) for r in result.reports]),
        os.path.join(out_dir, 'run' + RUN_SUFFIX))
    if not result.converged:
        click.echo("warning: some levels hit max_iterations; see "
                   f"'{convergence_path}'", err=True)
    click.echo(f"wrote {len(paths)} flow fields to '{out_dir}'")


def _flow_pattern(pattern):
    if os.path.isdir(pattern):
        return os.path.join(pattern, f'{FLOW_PREFIX}_*.flo')
    return pattern


@cli.command()
@config_option
@click.option('--previews/--no-previews', default=True)
@click.argument('flow_pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def dynsal(previews, flow_pattern, out_dir):
    """Dynamic saliency (flow magnitude) from .flo files."""
    started = time.time()
    flow_pattern = _flow_pattern(flow_pattern)
    dyn_sal = magnitude(load_flow_sequence(flow_pattern))
    paths = save_dynamic_saliency(dyn_sal, out_dir, previews=previews)
    _finish('dynsal', out_dir, {'previews': previews},
            {'flow': flow_pattern},
            {'dynsal': os.path.join(out_dir, '*' + SALIENCY_EXT)}, started,
            {
                'n_maps': len(paths),
                'max_magnitude': float(dyn_sal.raw.max())
            })


def _named_pattern(text):
    name, sep, pattern = text.partition('=')
    if not sep or not name:
        raise click.BadParameter(f"expected NAME=PATTERN, got '{text}'")
    return name, pattern


def _write_overlays(dyn_sal, matrix, fixation_window, frame_offset, out_dir):
    unit = dyn_sal.unit_range
    for k in range(len(dyn_sal)):
        fixation_frame = k + frame_offset
        if not 0 <= fixation_frame < matrix.n_frames:
            continue
        write_raster(
            os.path.join(out_dir, f'overlay_{k:04d}.png'),
            fixation_overlay(heat_preview(unit[k]),
                             matrix.pooled(fixation_frame, fixation_window)))


@cli.command(name='eval')
@config_option
@click.option('--fixations',
              type=click.Path(exists=True, dir_okay=False),
              required=True,
              help="fixation CSV with columns viewer,start_s,end_s,x,y")
@click.option('--name', default='model', help="name of the scored model")
@click.option('--compare',
              multiple=True,
              help="additional NAME=PATTERN model to score")
@click.option('--frame-rate', type=float, default=25.0)
@click.option('--n-frames',
              type=int,
              default=None,
              help="video length for rasterising [default: maps + 1]")
@click.option('--fixation-window', type=int, default=0)
@click.option('--frame-offset', type=int, default=0)
@click.option('--constant-nss',
              type=float,
              default=None,
              help="NSS to record for constant maps instead of failing")
@click.option('--flow',
              'flow_pattern',
              default=None,
              help="estimated .flo files, for AAE/EPE")
@click.option('--truth',
              'truth_pattern',
              default=None,
              help="ground-truth .flo files, for AAE/EPE")
@click.option('--overlays/--no-overlays',
              default=False,
              help="write fixations painted over each heat map")
@click.argument('saliency_pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def eval_cmd(fixations, name, compare, frame_rate, n_frames, fixation_window,
             frame_offset, constant_nss, flow_pattern, truth_pattern,
             saliency_pattern, overlays, out_dir):
    """Per-frame AUC and NSS of dynamic saliency maps against fixations."""
    started = time.time()
    if (flow_pattern is None) != (truth_pattern is None):
        raise click.UsageError("--flow and --truth must be given together")
    models = collections.OrderedDict([(name,
                                       load_dynamic_saliency(saliency_pattern))
                                      ])
    for other in compare:
        other_name, other_pattern = _named_pattern(other)
        models[other_name] = load_dynamic_saliency(other_pattern)
    first = models[name]
    if n_frames is None:
        n_frames = len(first) + 1 + max(frame_offset, 0)
    fixation_set = load_fixations(fixations)
    matrix = rasterize_fixations(fixation_set, frame_rate, first.width,
                                 first.height, n_frames)
    curves = score_models(models, matrix,
                          fixation_window=fixation_window,
                          frame_offset=frame_offset,
                          constant_nss=constant_nss)

    os.makedirs(out_dir, exist_ok=True)
    curves_path = os.path.join(out_dir, 'curves.csv')
    curves_table(curves).to_csv(curves_path, index=False)
    summary = collections.OrderedDict()
    for curve in curves.values():
        summary[f'{curve.model}.mean_auc'] = curve.mean_auc
        summary[f'{curve.model}.mean_nss'] = curve.mean_nss
        summary[f'{curve.model}.frames'] = len(curve.frames)
        summary[f'{curve.model}.skipped'] = curve.skipped
    if flow_pattern is not None:
        estimate = load_flow_sequence(_flow_pattern(flow_pattern))
        truth = load_flow_sequence(truth_pattern)
        summary['aae_deg'] = average_angular_error(estimate, truth).mean
        summary['epe_px'] = endpoint_error(estimate, truth).mean
    if overlays:
        _write_overlays(first, matrix, fixation_window, frame_offset, out_dir)
    summary_path = os.path.join(out_dir, 'summary.txt')
    with open(summary_path, 'w') as fp:
        for key, value in summary.items():
            print(f"{key} = {value}", file=fp)
    _finish(
        'eval', out_dir, {
            'frame_rate': frame_rate,
            'n_frames': n_frames,
            'fixation_window': fixation_window,
            'frame_offset': frame_offset,
            'constant_nss': constant_nss,
            'overlays': overlays,
        }, {
            'saliency': saliency_pattern,
            'fixations': fixations,
            'flow': flow_pattern,
            'truth': truth_pattern,
        }, {
            'curves': curves_path,
            'summary': summary_path
        }, started, summary)
    for key, value in summary.items():
        click.echo(f"{key} = {value}")


@cli.command()
@config_option
@click.option('--layout',
              type=click.Choice(LAYOUT_CHOICES),
              default='color')
@provider_options
@click.option('--threshold', type=float, default=DEFAULT_THRESHOLD)
@click.option('--frame',
              'frames',
              type=int,
              multiple=True,
              help="frame index to measure (repeatable) [default: all]")
@click.option('--name', default=None, help="sequence name in the table")
@click.argument('pattern')
@click.argument('out_dir', type=click.Path(file_okay=False))
def condstats(layout, provider, saliency_pattern, threshold, frames, name,
              pattern, out_dir):
    """Fraction of well-conditioned pixels per frame."""
    started = time.time()
    sequence = load_input(pattern, layout, provider, saliency_pattern)
    name = name or os.path.basename(os.path.dirname(os.path.abspath(pattern)))
    frames = list(frames) or list(range(sequence.n_frames))
    table = condition_table(
        condition_statistics(sequence, name, threshold, k) for k in frames)
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, 'condition.csv')
    table.to_csv(table_path, index=False)
    _finish('condstats', out_dir, {
        'layout': layout,
        'provider': provider,
        'threshold': threshold,
    }, {'frames': pattern}, {'table': table_path}, started, {
        'mean_fraction_below': float(table['fraction_below'].mean()),
        'n_frames': len(frames),
    })
    click.echo(table.to_string(index=False))


@cli.command(name='demo-occlusion')
@config_option
@click.option('--seed',
              type=int,
              default=None,
              help="sample the scene variables with this seed "
              "[default: fixed scene]")
@click.option('--workers', type=int, default=1)
@click.option('--strict/--no-strict',
              default=False,
              help="exit with status 1 when a check fails")
@click.argument('out_dir', type=click.Path(file_okay=False))
def demo_occlusion(seed, workers, strict, out_dir):
    """Spatio-temporal vs two-frame flow on an object passing behind a
    bar."""
    started = time.time()
    scene_vars = (None if seed is None else OcclusionSceneVars.sample(
        np.random.default_rng(seed)))
    demo = experiments.run_occlusion_demo(scene_vars, workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    report_text = experiments.format_occlusion_report(demo.report)
    report_path = os.path.join(out_dir, 'report.txt')
    with open(report_path, 'w') as fp:
        fp.write(report_text)
    save_sequence(demo.scene.sequence, os.path.join(out_dir, 'frames'))
    for label, result in (('spatio_temporal', demo.spatio_temporal),
                          ('two_frame', demo.baseline)):
        save_dynamic_saliency(magnitude(result.flow),
                              os.path.join(out_dir, label))
        convergence_path = os.path.join(out_dir, f"{label}_convergence.csv")
        convergence_table(result.reports).to_csv(convergence_path,
                                                 index=False)
    _finish(
        'demo-occlusion', out_dir, {
            'seed': seed,
            'spatio_temporal_preset': experiments.SPATIO_TEMPORAL_PRESET,
            'two_frame_preset': experiments.TWO_FRAME_PRESET,
            'workers': workers,
        }, {}, {'report': report_path}, started, {
            'passed': demo.report.passed,
            'occluder_ratio': demo.report.ratio,
            'auc': demo.report.auc,
            'nss': demo.report.nss,
        })
    click.echo(report_text, nl=False)
    if strict and not demo.report.passed:
        raise click.ClickException("occlusion checks failed")


@cli.group(cls=SalflowGroup)
def experiment():
    """Multi-scene experiments over synthetic (and Middlebury) data."""


@experiment.command(name='metric-ordering')
@config_option
@click.option('--scenes', type=int, default=20)
@click.option('--seed', type=int, default=0)
@click.option('--workers', type=int, default=1)
@click.argument('out_dir', type=click.Path(file_okay=False))
def metric_ordering_cmd(scenes, seed, workers, out_dir):
    """Mean AUC/NSS of each model over seeded occlusion scenes."""
    started = time.time()
    frame, passed = experiments.metric_ordering(scenes, seed,
                                                workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    scores_path = os.path.join(out_dir, 'scores.csv')
    frame.to_csv(scores_path, index=False)
    with open(os.path.join(out_dir, 'scores.tex'), 'w') as fp:
        fp.write(latexify_results(frame))
    _finish('experiment metric-ordering', out_dir, {
        'scenes': scenes,
        'seed': seed,
        'workers': workers
    }, {}, {'scores': scores_path}, started, {'passed': passed})
    click.echo(frame.to_string(index=False))
    click.echo(f"ordering = {'PASS' if passed else 'FAIL'}")


@experiment.command(name='appendix-aae')
@config_option
@click.option('--seeds', type=int, default=5, help="number of seeds")
@click.option('--workers', type=int, default=1)
@click.argument('out_dir', type=click.Path(file_okay=False))
def appendix_aae_cmd(seeds, workers, out_dir):
    """AAE of the reduced-regularisation presets on panning colour scenes."""
    started = time.time()
    table, n_ordered = experiments.appendix_aae(range(seeds), workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, 'aae.csv')
    table.to_csv(table_path, index=False)
    _finish('experiment appendix-aae', out_dir, {
        'seeds': seeds,
        'workers': workers
    }, {}, {'table': table_path}, started, {
        'n_ordered': n_ordered,
        'n_seeds': seeds
    })
    click.echo(table.to_string(index=False))
    click.echo(f"ordered seeds = {n_ordered}/{seeds}")


@experiment.command(name='condition-ordering')
@config_option
@click.option('--seeds', type=int, default=5, help="synthetic frames")
@click.option('--threshold', type=float, default=DEFAULT_THRESHOLD)
@click.option('--middlebury',
              'middlebury_root',
              type=click.Path(exists=True, file_okay=False),
              default=None,
              help="extracted Middlebury data (see download-middlebury)")
@click.argument('out_dir', type=click.Path(file_okay=False))
def condition_ordering_cmd(seeds, threshold, middlebury_root, out_dir):
    """Well-conditioned fractions across the four layouts."""
    started = time.time()
    result = experiments.condition_ordering(range(seeds), threshold=threshold,
                                            middlebury_root=middlebury_root)
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, 'condition.csv')
    result.table.to_csv(table_path, index=False)
    summary = {
        'n_cases': result.n_cases,
        'n_ordered': result.n_ordered,
        'gray_always_zero': result.gray_always_zero,
        'reference_within_factor': result.reference_within_factor,
    }
    for seq_name, (measured, reported) in result.reference_checks.items():
        summary[f'{seq_name}.color_fraction'] = measured
        summary[f'{seq_name}.reported_fraction'] = reported
    _finish('experiment condition-ordering', out_dir, {
        'seeds': seeds,
        'threshold': threshold
    }, {'middlebury': middlebury_root}, {'table': table_path}, started,
            summary)
    click.echo(result.table.to_string(index=False))
    for key, value in summary.items():
        click.echo(f"{key} = {value}")


@cli.command(name='download-middlebury')
@click.option('--quiet', is_flag=True, default=False)
@click.argument('dest',
                type=click.Path(file_okay=False),
                default=middlebury.DEFAULT_LOCATION)
def download_middlebury(quiet, dest):
    """Fetch the Middlebury frames and ground-truth flows into DEST."""
    middlebury.try_download_middlebury(dest, progress=not quiet)
    click.echo(f"Middlebury data is in '{dest}'")


def dispatch(argv=None):
    """Run the CLI on `argv` and return the process exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        with cli.make_context('salflow', argv) as ctx:
            cli.invoke(ctx)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return 0


def run():
    sys.exit(dispatch())


if __name__ == '__main__':
    run()
