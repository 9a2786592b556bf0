"""Dynamic saliency: flow magnitude per transition, plus the simpler motion
models used for comparison."""

import glob
import logging
import os

import cv2
import numpy as np

from salflow.core import (Normalization, SaliencyMap, indexed_paths,
                          load_saliency, normalize_unit_range, save_saliency,
                          write_raster)
from salflow.errors import ValidationError
from salflow.style import heat_preview

__all__ = [
    'DynamicSaliencySequence',
    'magnitude',
    'phase_spectrum_motion',
    'static_saliency_model',
    'save_dynamic_saliency',
    'load_dynamic_saliency',
]

DYNSAL_PREFIX = 'dynsal'


class DynamicSaliencySequence:
    """Raw, non-negative maps shaped (K, H, W); `unit_range` is a per-frame
    min-max copy for previews only (metrics normalise internally)."""
    __slots__ = ('raw', )

    def __init__(self, raw):
        raw = np.array(raw, dtype=np.float64)
        if raw.ndim == 2:
            raw = raw[None]
        if raw.ndim != 3:
            raise ValidationError(
                f"dynamic saliency must be K×H×W, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise ValidationError("dynamic saliency has non-finite values")
        if raw.size and raw.min() < 0:
            raise ValidationError("dynamic saliency must be non-negative")
        raw.flags.writeable = False
        self.raw = raw

    def __len__(self):
        return self.raw.shape[0]

    @property
    def height(self):
        return self.raw.shape[1]

    @property
    def width(self):
        return self.raw.shape[2]

    def map(self, k):
        return SaliencyMap(self.raw[k], Normalization.RAW)

    @property
    def maps(self):
        return [self.map(k) for k in range(len(self))]

    @property
    def unit_range(self):
        return np.stack(
            [normalize_unit_range(m).values for m in self.maps])


def magnitude(flow):
    return DynamicSaliencySequence(np.hypot(flow.u1, flow.u2))


def phase_spectrum_motion(sequence, smoothing_sigma=2.5):
    """Phase-only reconstruction energy of the absolute difference between
    consecutive gray frames; no flow is estimated."""
    gray = sequence.image_data.mean(axis=3)
    maps = []
    for k in range(sequence.n_frames - 1):
        diff = np.abs(gray[k + 1] - gray[k])
        if np.ptp(diff) <= 1e-12:
            maps.append(np.zeros_like(diff))
            continue
        spectrum = np.fft.fft2(diff)
        energy = np.abs(np.fft.ifft2(np.exp(1j * np.angle(spectrum))))**2
        maps.append(
            cv2.GaussianBlur(energy, (0, 0), sigmaX=smoothing_sigma,
                             borderType=cv2.BORDER_REPLICATE))
    return DynamicSaliencySequence(np.stack(maps))


def static_saliency_model(sequence):
    """The saliency channel itself at frames 0..T−2, aligned with flow
    samples."""
    if not sequence.layout.has_saliency:
        raise ValidationError(
            f"layout '{sequence.layout.value}' has no saliency channel")
    return DynamicSaliencySequence(
        np.maximum(sequence.saliency_data[:-1], 0.0))


def save_dynamic_saliency(dyn_sal, directory, previews=True,
                          prefix=DYNSAL_PREFIX):
    """Raw maps as `.sal` files, plus 8-bit heat-map previews of the min-max
    variant. Returns the written `.sal` paths."""
    os.makedirs(directory, exist_ok=True)
    unit = dyn_sal.unit_range if previews else None
    paths = []
    for k in range(len(dyn_sal)):
        stem = os.path.join(directory, f'{prefix}_{k:04d}')
        save_saliency(stem + '.sal', dyn_sal.raw[k])
        if previews:
            write_raster(stem + '.png', heat_preview(unit[k]))
        paths.append(stem + '.sal')
    logging.info(f"Wrote {len(paths)} dynamic saliency maps to '{directory}'")
    return paths


def load_dynamic_saliency(pattern):
    """Load `.sal` maps (as written by `save_dynamic_saliency`). A directory is
    accepted in place of a pattern."""
    if os.path.isdir(pattern):
        pattern = os.path.join(pattern, '*.sal')
    elif not glob.has_magic(pattern) and not pattern.endswith('.sal'):
        raise ValidationError(
            f"expected a directory or a pattern of .sal files, got "
            f"'{pattern}'")
    paths = indexed_paths(pattern)
    return DynamicSaliencySequence(np.stack([load_saliency(p) for p in paths]))
