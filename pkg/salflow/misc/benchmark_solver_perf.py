#!/usr/bin/env python3

import cProfile
import datetime

import click

import salflow
from salflow.saliency import compute_sequence_saliency
from salflow.synth import SCENE_PRESETS, render


def do_solve(sequence, config, nruns):
    for _ in range(nruns):
        salflow.solve_sequence(sequence, config)


@click.command()
@click.option("--nruns", default=3, help="number of solves to profile")
@click.option("--size", default=64, help="scene width and height")
@click.option("--scene",
              type=click.Choice(sorted(SCENE_PRESETS)),
              default='occlusion')
@click.argument('preset_name')
def main(nruns, size, scene, preset_name):
    """Very simple script to profile the solver on a synthetic scene with one
    of the named presets (e.g. SpatioTemporal-GraySal-Occlusion-v0)."""
    preset = salflow.get_preset(preset_name)
    spec = SCENE_PRESETS[scene](size=size, layout=preset.layout.base.value)
    sequence = render(spec).sequence
    if preset.layout.has_saliency:
        maps = compute_sequence_saliency(sequence,
                                         salflow.SpectralResidualProvider())
        sequence = salflow.complement(sequence, maps)

    dtime = datetime.datetime.now().strftime("%Y-%m-%dT%H:%M:%S")
    out_filename = f'profile-{preset_name.lower()}-{dtime}.cprofile'
    print(f"Will write profile to '{out_filename}'")

    cProfile.runctx('do_solve(sequence, preset.config, nruns)',
                    globals(),
                    locals(),
                    filename=out_filename)

    print("Done")


if __name__ == '__main__':
    main()
