"""Synthetic scenes with exact ground truth: textured backgrounds (optionally
under a shaded sky, optionally panning), translating squares, static occluding
bars, per-frame contrast and noise, and fixations that follow each object's
centre (also while it is hidden)."""

import logging
import os
from typing import NamedTuple, Tuple

import numpy as np
from scipy import ndimage

from salflow.core import (ComplementedSequence, FlowField, Layout,
                          resample_volume, save_flow_sequence, save_sequence,
                          write_raster)
from salflow.errors import ValidationError
from salflow.evaluation import FixationSet, save_fixations
from salflow.manifest import parse_value, read_config_pairs
from salflow.scene_vars import OcclusionSceneVars, TranslationSceneVars
from salflow.style import COLOURS_RGB, darken_rgb

__all__ = [
    'MovingObject',
    'Occluder',
    'SceneSpec',
    'RenderedScene',
    'OcclusionInterval',
    'value_noise',
    'render',
    'occlusion_interval',
    'parse_scene_config',
    'write_scene',
    'occlusion_scene_spec',
    'translation_scene_spec',
    'static_scene_spec',
    'pan_scene_spec',
    'SCENE_PRESETS',
]

DEFAULT_FRAME_RATE = 25.0
TRUTH_PREFIX = 'truth'
MIN_SCENE_SIZE = 8


class MovingObject(NamedTuple):
    """Square of side `size` whose top-left pixel is (x, y) at frame 0 and
    moves by (vx, vy) whole pixels per frame."""
    x: int
    y: int
    size: int
    vx: int = 1
    vy: int = 0
    intensity: float = 0.9
    colour: str = 'red'
    textured: bool = False
    texture_contrast: float = 0.1


class Occluder(NamedTuple):
    """Static vertical bar covering columns x … x + width − 1."""
    x: int
    width: int
    intensity: float = 0.1
    colour: str = 'grey'


class SceneSpec(NamedTuple):
    width: int = 64
    height: int = 64
    n_frames: int = 12
    layout: str = 'gray'
    texture_seed: int = 0
    texture_cell: int = 8
    texture_contrast: float = 0.15
    background_level: float = 0.5
    objects: Tuple[MovingObject, ...] = ()
    occluders: Tuple[Occluder, ...] = ()
    noise: float = 0.0
    noise_seed: int = 0
    # per-frame contrast factors; empty means 1 everywhere
    contrast: Tuple[float, ...] = ()
    frame_rate: float = DEFAULT_FRAME_RATE
    # colour backgrounds are luminance times this colour, plus independent
    # per-channel texture of amplitude chroma_noise below the sky
    tint: str = 'blue'
    chroma_noise: float = 5e-5
    # top rows brighten towards the horizon as
    # level + amplitude·exp(−(distance to the horizon) / falloff)
    sky_rows: int = 0
    sky_amplitude: float = 0.2
    sky_falloff: float = 1.5
    # whole-pixel background motion per frame, wrapping around the borders
    pan: Tuple[int, int] = (0, 0)

    def validate(self):
        if min(self.width, self.height) < MIN_SCENE_SIZE:
            raise ValidationError(
                f"scene must be at least {MIN_SCENE_SIZE}×{MIN_SCENE_SIZE}, "
                f"got {self.width}×{self.height}")
        if self.n_frames < 2:
            raise ValidationError("a scene needs at least two frames")
        layout = Layout.parse(self.layout)
        if layout not in (Layout.GRAY, Layout.COLOR):
            raise ValidationError(
                f"scenes render gray or color frames, not '{layout.value}'")
        if self.texture_cell < 1:
            raise ValidationError("texture_cell must be >= 1")
        if not 0 <= self.texture_contrast <= 0.5:
            raise ValidationError("texture_contrast must lie in [0, 0.5]")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")
        if self.frame_rate <= 0:
            raise ValidationError("frame_rate must be > 0")
        if self.contrast and len(self.contrast) != self.n_frames:
            raise ValidationError(
                f"contrast schedule has {len(self.contrast)} entries for "
                f"{self.n_frames} frames")
        if any(c <= 0 for c in self.contrast):
            raise ValidationError("contrast factors must be > 0")
        if layout is Layout.COLOR and self.tint not in COLOURS_RGB:
            raise ValidationError(f"unknown tint '{self.tint}'")
        if not 0 <= self.chroma_noise <= 0.05:
            raise ValidationError("chroma_noise must lie in [0, 0.05]")
        if not 0 <= self.sky_rows < self.height:
            raise ValidationError(
                f"sky_rows must lie in [0, {self.height - 1}], got "
                f"{self.sky_rows}")
        if not 0 <= self.sky_amplitude <= 0.5:
            raise ValidationError("sky_amplitude must lie in [0, 0.5]")
        if self.sky_falloff <= 0:
            raise ValidationError("sky_falloff must be > 0")
        if len(self.pan) != 2 or not all(
                isinstance(v, (int, np.integer)) for v in self.pan):
            raise ValidationError(
                f"pan must be two whole pixel counts, got {self.pan}")
        for index, obj in enumerate(self.objects):
            if obj.size < 1:
                raise ValidationError(f"object {index}: size must be >= 1")
            if layout is Layout.COLOR and obj.colour not in COLOURS_RGB:
                raise ValidationError(
                    f"object {index}: unknown colour '{obj.colour}'")
            for t in (0, self.n_frames - 1):
                x0, y0 = obj.x + obj.vx * t, obj.y + obj.vy * t
                if x0 < 0 or y0 < 0 or x0 + obj.size > self.width \
                   or y0 + obj.size > self.height:
                    raise ValidationError(
                        f"object {index} leaves the frame at frame {t} "
                        f"(top-left {x0}, {y0})")
        for index, occ in enumerate(self.occluders):
            if occ.width < 1 or occ.x < 0 or occ.x + occ.width > self.width:
                raise ValidationError(
                    f"occluder {index} (x={occ.x}, width={occ.width}) is "
                    "outside the frame")
        return self


class RenderedScene(NamedTuple):
    sequence: ComplementedSequence
    truth: FlowField
    # (T, H, W): False on object pixels hidden behind an occluder
    visible: np.ndarray
    # (T, H, W): visible object pixels
    object_mask: np.ndarray
    # (H, W)
    occluder_mask: np.ndarray
    fixations: FixationSet
    spec: SceneSpec


class OcclusionInterval(NamedTuple):
    first_partial: int
    last_partial: int
    partial_frames: int
    first_full: int
    last_full: int
    full_frames: int


def value_noise(width, height, seed, cell=8, channels=1):
    """Smoothed bicubic value noise in [0, 1], shaped (H, W, channels)."""
    rng = np.random.default_rng(seed)
    grid_w = width // cell + 3
    grid_h = height // cell + 3
    grid = rng.uniform(0, 1, size=(1, grid_h, grid_w, channels))
    fine = resample_volume(grid, grid_w * cell, grid_h * cell)[0]
    fine = fine[cell:cell + height, cell:cell + width]
    fine = ndimage.gaussian_filter(fine, sigma=(1, 1, 0), mode='nearest')
    low, high = fine.min(), fine.max()
    if high > low:
        fine = (fine - low) / (high - low)
    else:
        fine = np.full_like(fine, 0.5)
    return fine


def _luminance(spec):
    base = value_noise(spec.width, spec.height, spec.texture_seed,
                       spec.texture_cell)
    values = spec.background_level + spec.texture_contrast * (2 * base - 1)
    if spec.sky_rows:
        depth = np.arange(spec.sky_rows - 1, -1, -1, dtype=np.float64)
        shade = spec.background_level + spec.sky_amplitude * np.exp(
            -depth / spec.sky_falloff)
        values[:spec.sky_rows] = shade[:, None, None]
    return values


def _background(spec, n_channels):
    """(H, W, channels). Colour channels are proportional to the luminance
    except for the weak chroma texture, which the sky does not get."""
    luminance = _luminance(spec)
    if n_channels == 1:
        return luminance
    tint = np.array(COLOURS_RGB[spec.tint])
    colour = luminance * (tint / tint.max())
    if spec.chroma_noise > 0:
        chroma = value_noise(spec.width, spec.height, spec.texture_seed + 1,
                             spec.texture_cell, channels=3)
        ground = slice(spec.sky_rows, None)
        colour[ground] += spec.chroma_noise * (2 * chroma[ground] - 1)
    return colour


def _appearance(spec, obj, index, n_channels):
    if n_channels == 3:
        colour = np.array(COLOURS_RGB[obj.colour]) * obj.intensity
    else:
        colour = np.array([obj.intensity])
    patch = np.broadcast_to(colour, (obj.size, obj.size, n_channels)).copy()
    if obj.textured:
        cell = max(2, obj.size // 4)
        seed = spec.texture_seed + 1000 + index
        noise = value_noise(obj.size, obj.size, seed, cell)
        patch += obj.texture_contrast * (2 * noise - 1)
    return np.clip(patch, 0, 1)


def _occluder_value(occ, n_channels):
    if n_channels == 3:
        return np.array(darken_rgb(COLOURS_RGB[occ.colour]))
    return np.array([occ.intensity])


def _object_box(obj, t):
    x0 = obj.x + obj.vx * t
    y0 = obj.y + obj.vy * t
    return x0, y0, x0 + obj.size, y0 + obj.size


def render(spec):
    """Frames, exact forward flow at frames 0…T−2, visibility and object
    masks, and a fixation at each object's centre in every frame. A panning
    background carries the pan as its flow; occluders stay at rest."""
    spec.validate()
    n_channels = Layout.parse(spec.layout).image_channels
    background = _background(spec, n_channels)
    patches = [
        _appearance(spec, obj, i, n_channels)
        for i, obj in enumerate(spec.objects)
    ]
    occluder_mask = np.zeros((spec.height, spec.width), dtype=bool)
    for occ in spec.occluders:
        occluder_mask[:, occ.x:occ.x + occ.width] = True
    noise_rng = np.random.default_rng(spec.noise_seed)

    shape = (spec.n_frames, spec.height, spec.width)
    frames = np.empty(shape + (n_channels, ))
    object_mask = np.zeros(shape, dtype=bool)
    visible = np.ones(shape, dtype=bool)
    u1 = np.zeros(shape)
    u2 = np.zeros(shape)
    records = []
    pan_x, pan_y = (int(v) for v in spec.pan)
    for t in range(spec.n_frames):
        canvas = np.roll(background, (t * pan_y, t * pan_x), axis=(0, 1))
        u1[t] = pan_x
        u2[t] = pan_y
        covered = np.zeros((spec.height, spec.width), dtype=bool)
        for i, (obj, patch) in enumerate(zip(spec.objects, patches)):
            x0, y0, x1, y1 = _object_box(obj, t)
            canvas[y0:y1, x0:x1] = patch
            covered[y0:y1, x0:x1] = True
            u1[t, y0:y1, x0:x1] = obj.vx
            u2[t, y0:y1, x0:x1] = obj.vy
            centre_x = x0 + (obj.size - 1) / 2
            centre_y = y0 + (obj.size - 1) / 2
            records.append((f'object{i}', t / spec.frame_rate,
                            (t + 0.5) / spec.frame_rate, centre_x, centre_y))
        for occ in spec.occluders:
            canvas[:, occ.x:occ.x + occ.width] = _occluder_value(occ,
                                                                 n_channels)
        hidden = covered & occluder_mask
        object_mask[t] = covered & ~occluder_mask
        visible[t] = ~hidden
        u1[t][occluder_mask] = 0.0
        u2[t][occluder_mask] = 0.0
        if spec.contrast:
            canvas = canvas * spec.contrast[t]
        if spec.noise > 0:
            canvas = canvas + spec.noise * noise_rng.standard_normal(
                canvas.shape)
        frames[t] = np.clip(canvas, 0, 1)

    sequence = ComplementedSequence(frames, spec.layout)
    truth = FlowField(u1[:-1], u2[:-1])
    logging.debug(f"Rendered {spec.n_frames} frames of {spec.width}×"
                  f"{spec.height} with {len(spec.objects)} object(s)")
    return RenderedScene(sequence, truth, visible, object_mask, occluder_mask,
                         FixationSet(records), spec)


def occlusion_interval(spec, object_index=0, occluder_index=0):
    """Frames in which the object is at least partly behind the occluder, and
    frames in which it is entirely hidden. Bounds are -1 when empty."""
    obj = spec.objects[object_index]
    occ = spec.occluders[occluder_index]
    partial, full = [], []
    for t in range(spec.n_frames):
        x0, _, x1, _ = _object_box(obj, t)
        overlap = min(x1, occ.x + occ.width) - max(x0, occ.x)
        if overlap > 0:
            partial.append(t)
        if overlap == obj.size:
            full.append(t)

    def bounds(frames):
        return (frames[0], frames[-1]) if frames else (-1, -1)

    return OcclusionInterval(*bounds(partial), len(partial), *bounds(full),
                             len(full))


_OBJECT_FIELDS = set(MovingObject._fields)
_OCCLUDER_FIELDS = set(Occluder._fields)
_SCALAR_FIELDS = set(SceneSpec._fields) - {'objects', 'occluders', 'contrast',
                                             'pan'}


def _parse_record(text, fields, what, source):
    values = {}
    for token in text.split():
        if '=' not in token:
            raise ValidationError(
                f"{source}: expected name=value in {what} '{text}'")
        name, raw = token.split('=', 1)
        if name not in fields:
            raise ValidationError(
                f"{source}: unknown {what} field '{name}'; options are "
                f"{', '.join(sorted(fields))}")
        values[name] = parse_value(raw)
    return values


def parse_scene_config(path):
    """SceneSpec from a `key = value` file. `object` and `occluder` keys may
    repeat and hold space-separated `name=value` fields, e.g.

        object = x=10 y=30 size=2 vx=1 intensity=0.9
        occluder = x=30 width=3
        contrast = 1.0, 1.0, 0.5, ...
        pan = 1, 0"""
    kwargs = {}
    objects, occluders = [], []
    for key, value in read_config_pairs(path):
        key = key.replace('-', '_')
        if key == 'object':
            objects.append(
                MovingObject(**_parse_record(value, _OBJECT_FIELDS, 'object',
                                             path)))
        elif key == 'occluder':
            occluders.append(
                Occluder(**_parse_record(value, _OCCLUDER_FIELDS, 'occluder',
                                         path)))
        elif key == 'contrast':
            kwargs['contrast'] = tuple(
                float(part) for part in value.replace(',', ' ').split())
        elif key == 'pan':
            kwargs['pan'] = tuple(
                parse_value(part) for part in value.replace(',', ' ').split())
        elif key in _SCALAR_FIELDS:
            kwargs[key] = parse_value(value)
        else:
            raise ValidationError(f"unknown scene key '{key}' in '{path}'")
    return SceneSpec(objects=tuple(objects), occluders=tuple(occluders),
                     **kwargs).validate()


def write_scene(scene, directory):
    """Frame rasters, truth flows (`truth_%04d.flo`), visibility masks
    (`visible_%04d.png`) and `fixations.csv`. Returns the written paths by
    kind."""
    os.makedirs(directory, exist_ok=True)
    frames = save_sequence(scene.sequence, directory)
    truth = save_flow_sequence(scene.truth, directory, prefix=TRUTH_PREFIX)
    masks = []
    for t in range(scene.visible.shape[0]):
        path = os.path.join(directory, f'visible_{t:04d}.png')
        write_raster(path, scene.visible[t].astype(np.float64))
        masks.append(path)
    fixations = os.path.join(directory, 'fixations.csv')
    save_fixations(scene.fixations, fixations)
    logging.info(f"Wrote {scene.sequence.n_frames}-frame scene to "
                 f"'{directory}'")
    return {
        'frames': frames,
        'truth': os.path.join(directory, f'{TRUTH_PREFIX}_*.flo'),
        'masks': os.path.join(directory, 'visible_*.png'),
        'fixations': fixations,
        'n_truth': len(truth),
        'n_masks': len(masks),
    }


def occlusion_scene_spec(scene_vars=None, size=64, margin=6, layout='gray',
                         frame_rate=DEFAULT_FRAME_RATE):
    """A small square crossing a central bar at one pixel per frame, with
    `margin` unoccluded frames before and after the crossing."""
    if scene_vars is None:
        scene_vars = OcclusionSceneVars.defaults()
    obj_size = scene_vars.object_size
    bar_width = scene_vars.occluder_width
    bar_x = size // 2 - bar_width // 2
    start_x = bar_x - obj_size - margin
    n_frames = bar_width + obj_size + 2 * margin + 1
    row = int(round(scene_vars.path_row * size)) - obj_size // 2
    return SceneSpec(
        width=size,
        height=size,
        n_frames=n_frames,
        layout=layout,
        texture_seed=scene_vars.texture_seed,
        texture_contrast=scene_vars.texture_contrast,
        objects=(MovingObject(x=start_x, y=row, size=obj_size, vx=1, vy=0,
                              intensity=scene_vars.object_intensity), ),
        occluders=(Occluder(x=bar_x, width=bar_width,
                            intensity=scene_vars.occluder_intensity), ),
        frame_rate=frame_rate,
    ).validate()


def translation_scene_spec(scene_vars=None, size=64, n_frames=6,
                           velocity=(1, 0), layout='gray', contrast=1.0):
    """A textured square translating over a textured background; `contrast`
    scales every frame."""
    if scene_vars is None:
        scene_vars = TranslationSceneVars.defaults()
    vx, vy = velocity
    obj_size = scene_vars.object_size
    travel_x = vx * (n_frames - 1)
    travel_y = vy * (n_frames - 1)
    start_x = (size - obj_size - travel_x) // 2
    start_y = (size - obj_size - travel_y) // 2
    return SceneSpec(
        width=size,
        height=size,
        n_frames=n_frames,
        layout=layout,
        texture_seed=scene_vars.texture_seed,
        texture_contrast=scene_vars.texture_contrast,
        objects=(MovingObject(x=start_x, y=start_y, size=obj_size, vx=vx,
                              vy=vy, intensity=scene_vars.object_intensity,
                              textured=True, texture_contrast=0.2), ),
        contrast=(contrast, ) * n_frames if contrast != 1.0 else (),
    ).validate()


def static_scene_spec(size=64, n_frames=5, seed=0, layout='gray'):
    """Still textured ground under a sky that occupies the top three eighths
    of the frame."""
    return SceneSpec(width=size, height=size, n_frames=n_frames,
                     layout=layout, texture_seed=seed,
                     sky_rows=size * 3 // 8).validate()


def pan_scene_spec(size=64, n_frames=6, seed=0, layout='gray',
                   velocity=(1, 0)):
    """Textured background moving as a whole by `velocity` per frame."""
    return SceneSpec(width=size, height=size, n_frames=n_frames,
                     layout=layout, texture_seed=seed,
                     pan=tuple(velocity)).validate()


SCENE_PRESETS = {
    'occlusion': occlusion_scene_spec,
    'translation': translation_scene_spec,
    'static': static_scene_spec,
    'pan': pan_scene_spec,
}
