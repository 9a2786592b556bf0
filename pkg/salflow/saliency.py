"""Static saliency providers and complementation of a sequence with one
saliency channel per frame."""

import abc
import collections
import concurrent.futures
import logging
import math

import cv2
import numpy as np
from scipy import ndimage

from salflow.core import (ComplementedSequence, Frame, Normalization,
                          SaliencyMap, indexed_paths, load_saliency,
                          normalize_unit_range, read_raster, resample_bicubic,
                          round_half_up)
from salflow.errors import SequenceIOError, ValidationError

__all__ = [
    'SaliencyProvider',
    'SpectralResidualProvider',
    'ExternalFileProvider',
    'PROVIDERS',
    'make_provider',
    'compute_static_saliency',
    'compute_sequence_saliency',
    'complement',
]


def _image_plane(frame):
    if frame.channels not in (1, 3):
        raise ValidationError(
            f"static saliency needs a gray or colour frame, got "
            f"{frame.channels} channels")
    return frame.values.mean(axis=2)


class SaliencyProvider(abc.ABC):
    """Produces one [0, 1] map per frame, with the frame's dimensions."""
    kind = None

    @abc.abstractmethod
    def saliency_map(self, frame, index=None):
        """Return a unit-range SaliencyMap for `frame`. `index` is the frame's
        position in its sequence; file-backed providers need it."""
        pass


class SpectralResidualProvider(SaliencyProvider):
    """Log-amplitude spectral residual of the zero-mean gray image, computed at
    a reduced working width and resampled back up.

    The mean is removed and the DC term dropped from the reconstruction, so
    adding a constant to the frame leaves the map unchanged."""
    kind = 'spectral'

    def __init__(self, working_width=64, smoothing_sigma=2.5, average_size=3):
        if working_width < 1:
            raise ValidationError("working_width must be positive")
        if smoothing_sigma <= 0:
            raise ValidationError("smoothing_sigma must be positive")
        if average_size < 1 or average_size % 2 != 1:
            raise ValidationError("average_size must be a positive odd int")
        self.working_width = working_width
        self.smoothing_sigma = smoothing_sigma
        self.average_size = average_size

    @property
    def smoothing_radius(self):
        """Radius of the postsmoothing kernel in working-resolution pixels."""
        return int(math.ceil(3 * self.smoothing_sigma))

    def working_size(self, width, height):
        work_w = min(self.working_width, width)
        work_h = max(1, round_half_up(height * work_w / width))
        return work_w, work_h

    def saliency_map(self, frame, index=None):
        plane = _image_plane(frame)
        height, width = plane.shape
        work_w, work_h = self.working_size(width, height)
        if (work_w, work_h) != (width, height):
            plane = cv2.resize(plane, (work_w, work_h),
                               interpolation=cv2.INTER_AREA)
        plane = plane - plane.mean()
        if np.ptp(plane) <= 1e-12:
            return SaliencyMap(np.zeros((height, width)),
                               Normalization.UNIT_RANGE)

        spectrum = np.fft.fft2(plane)
        log_amplitude = np.log(np.abs(spectrum) + 1e-12)
        # the DC bin of a zero-mean image is rounding noise; give it the
        # neighbourhood level so it does not leak into the local average
        rows = np.array([-1, -1, -1, 0, 0, 1, 1, 1]) % work_h
        cols = np.array([-1, 0, 1, -1, 1, -1, 0, 1]) % work_w
        log_amplitude[0, 0] = log_amplitude[rows, cols].mean()
        local_mean = ndimage.uniform_filter(log_amplitude, self.average_size,
                                            mode='wrap')
        residual = log_amplitude - local_mean
        recon = np.exp(residual + 1j * np.angle(spectrum))
        recon[0, 0] = 0
        energy = np.abs(np.fft.ifft2(recon))**2
        energy = cv2.GaussianBlur(energy, (0, 0),
                                  sigmaX=self.smoothing_sigma,
                                  borderType=cv2.BORDER_REPLICATE)
        if energy.shape != (height, width):
            energy = resample_bicubic(energy, width, height)
        return normalize_unit_range(SaliencyMap(energy))


class ExternalFileProvider(SaliencyProvider):
    """Maps precomputed elsewhere (e.g. by GBVS), one file per frame: `.sal`
    sidecars or gray rasters, ordered by the index in their file names."""
    kind = 'external'

    def __init__(self, pattern):
        self.pattern = pattern
        self.paths = indexed_paths(pattern)

    def saliency_map(self, frame, index=None):
        if index is None:
            raise ValidationError("external saliency needs a frame index")
        if not 0 <= index < len(self.paths):
            raise SequenceIOError(
                f"no external saliency map for frame {index} (pattern "
                f"'{self.pattern}' matched {len(self.paths)} files)")
        path = self.paths[index]
        if path.endswith('.sal'):
            values = load_saliency(path)
        else:
            values = read_raster(path).mean(axis=2)
        if values.shape != frame.values.shape[:2]:
            raise ValidationError(
                f"saliency map '{path}' is {values.shape[1]}×"
                f"{values.shape[0]}, frame is {frame.width}×{frame.height}")
        return normalize_unit_range(SaliencyMap(values))


PROVIDERS = collections.OrderedDict([
    (SpectralResidualProvider.kind, SpectralResidualProvider),
    (ExternalFileProvider.kind, ExternalFileProvider),
])


def make_provider(kind, **kwargs):
    try:
        provider_cls = PROVIDERS[kind]
    except KeyError:
        raise ValidationError(
            f"unknown saliency provider '{kind}', options are "
            f"{', '.join(PROVIDERS)}")
    return provider_cls(**kwargs)


def compute_static_saliency(frame, provider, index=None):
    if not isinstance(frame, Frame):
        frame = Frame(frame)
    saliency_map = provider.saliency_map(frame, index=index)
    assert saliency_map.values.shape == frame.values.shape[:2], \
        (saliency_map.values.shape, frame.values.shape)
    return saliency_map


def compute_sequence_saliency(sequence, provider, workers=1):
    """One map per frame of a non-complemented sequence. Frames are
    independent, so `workers` > 1 maps them on a thread pool; the result does
    not depend on the worker count."""
    if sequence.layout.has_saliency:
        raise ValidationError(
            f"sequence already has layout '{sequence.layout.value}'")
    frames = [Frame(sequence.image_data[t]) for t in range(sequence.n_frames)]
    indices = range(len(frames))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            maps = list(
                pool.map(compute_static_saliency, frames,
                         [provider] * len(frames), indices))
    else:
        maps = [
            compute_static_saliency(f, provider, i)
            for f, i in zip(frames, indices)
        ]
    logging.debug(f"Computed {len(maps)} '{provider.kind}' saliency maps")
    return maps


def complement(sequence, maps):
    """Append one saliency channel per frame; existing channels are copied
    bitwise and maps are min-max normalised first."""
    maps = list(maps)
    new_layout = sequence.layout.with_saliency()
    if len(maps) != sequence.n_frames:
        raise ValidationError(
            f"got {len(maps)} saliency maps for {sequence.n_frames} frames")
    planes = []
    for t, saliency_map in enumerate(maps):
        if not isinstance(saliency_map, SaliencyMap):
            saliency_map = SaliencyMap(saliency_map)
        if saliency_map.values.shape != (sequence.height, sequence.width):
            raise ValidationError(
                f"saliency map {t} has shape {saliency_map.values.shape}, "
                f"frames are {(sequence.height, sequence.width)}")
        planes.append(normalize_unit_range(saliency_map).values)
    data = np.concatenate([sequence.data, np.stack(planes)[..., None]],
                          axis=3)
    return ComplementedSequence(data, new_layout)
