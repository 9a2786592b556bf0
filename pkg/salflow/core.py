"""Domain types, raster/flow/saliency file I/O, and the grid arithmetic that
the rest of the package shares.

Array conventions: a sequence is stored as one float64 array shaped
(T, H, W, channels); x1 is the column (horizontal) axis and x2 the row
(vertical) axis. Flow fields are stored as two (K, H, W) arrays holding u1
(horizontal) and u2 (vertical) displacement in pixels per frame step."""

import enum
import glob
import logging
import math
import os
import re
import struct

import cv2
import numpy as np

from salflow.errors import SequenceIOError, ValidationError

__all__ = [
    'Layout',
    'Normalization',
    'Frame',
    'ComplementedSequence',
    'FlowField',
    'SaliencyMap',
    'normalize_unit_range',
    'z_score',
    'load_sequence',
    'save_sequence',
    'load_saliency',
    'save_saliency',
    'sidecar_path',
    'frame_index',
    'indexed_paths',
    'load_flow',
    'save_flow',
    'load_flow_sequence',
    'save_flow_sequence',
    'resample_bicubic',
    'resample_volume',
    'spatial_gradient',
]

# Middlebury .flo tag; the four bytes spell 'PIEH' when read as ASCII
FLO_TAG = 202021.25
FLO_TAG_BYTES = b'PIEH'
# components above this magnitude mark unknown pixels in ground-truth files
UNKNOWN_FLOW_THRESHOLD = 1e9
SALIENCY_TAG = b'SALM'
SALIENCY_EXT = '.sal'
FRAME_PREFIX = 'frame'
FLOW_PREFIX = 'flow'
# trailing run of digits in a file stem is the frame index
_INDEX_RE = re.compile(r'(\d+)\D*$')


class Layout(str, enum.Enum):
    """Channel layout of a sequence. The saliency channel, when present, is
    always the last one."""
    GRAY = 'gray'
    GRAY_SALIENCY = 'gray+saliency'
    COLOR = 'color'
    COLOR_SALIENCY = 'color+saliency'
    HSV = 'hsv'
    HSV_SALIENCY = 'hsv+saliency'

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            options = ', '.join(layout.value for layout in cls)
            raise ValidationError(
                f"unknown layout '{value}'; options are {options}")

    @property
    def has_saliency(self):
        return self.value.endswith('+saliency')

    @property
    def base(self):
        return Layout(self.value.split('+')[0])

    @property
    def image_channels(self):
        return 1 if self.base is Layout.GRAY else 3

    @property
    def channels(self):
        return self.image_channels + int(self.has_saliency)

    def with_saliency(self):
        if self.has_saliency:
            raise ValidationError(
                f"layout '{self.value}' already carries a saliency channel")
        return Layout(self.value + '+saliency')


class Normalization(str, enum.Enum):
    RAW = 'raw'
    UNIT_RANGE = 'unit-range'
    Z_SCORED = 'z-scored'


def _readonly(array):
    array.flags.writeable = False
    return array


def _check_finite(array, what):
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{what} contains non-finite values")


class Frame:
    """One image (plus optional saliency channel) with values in [0, 1]."""
    __slots__ = ('values', )

    def __init__(self, values):
        values = np.array(values, dtype=np.float64)
        if values.ndim == 2:
            values = values[..., None]
        if values.ndim != 3 or values.shape[2] not in (1, 2, 3, 4):
            raise ValidationError(
                f"frame must be H×W×σ with σ in 1..4, got {values.shape}")
        _check_finite(values, "frame")
        if values.size and (values.min() < 0 or values.max() > 1):
            raise ValidationError("frame values must lie in [0, 1]")
        self.values = _readonly(values)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]

    def __repr__(self):
        return (f'Frame(width={self.width}, height={self.height}, '
                f'channels={self.channels})')


class ComplementedSequence:
    """T ≥ 2 frames sharing one layout, stored as a (T, H, W, σ) array."""
    __slots__ = ('data', 'layout')

    def __init__(self, data, layout, *, _unchecked_range=False):
        layout = Layout.parse(layout)
        data = np.array(data, dtype=np.float64)
        if data.ndim == 3:
            data = data[..., None]
        if data.ndim != 4:
            raise ValidationError(
                f"sequence must be T×H×W×σ, got shape {data.shape}")
        if data.shape[0] < 2:
            raise ValidationError(
                "a sequence needs at least two frames for a temporal "
                f"derivative, got {data.shape[0]}")
        if data.shape[3] != layout.channels:
            raise ValidationError(
                f"layout '{layout.value}' needs {layout.channels} channels, "
                f"got {data.shape[3]}")
        _check_finite(data, "sequence")
        if not _unchecked_range and (data.min() < 0 or data.max() > 1):
            raise ValidationError("sequence values must lie in [0, 1]")
        self.data = _readonly(data)
        self.layout = layout

    @classmethod
    def from_frames(cls, frames, layout):
        frames = list(frames)
        if not frames:
            raise ValidationError("empty sequence")
        shapes = {f.values.shape for f in frames}
        if len(shapes) != 1:
            raise ValidationError(
                f"frames disagree on shape: {sorted(shapes)}")
        return cls(np.stack([f.values for f in frames]), layout)

    def with_data(self, data):
        """Same layout, new values (used for derived levels, whose bicubic
        overshoot may leave [0, 1] slightly)."""
        return type(self)(data, self.layout, _unchecked_range=True)

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def channels(self):
        return self.data.shape[3]

    @property
    def image_data(self):
        return self.data[..., :self.layout.image_channels]

    @property
    def saliency_data(self):
        if not self.layout.has_saliency:
            return None
        return self.data[..., -1]

    def frame(self, t):
        return Frame(self.data[t])

    @property
    def frames(self):
        return [self.frame(t) for t in range(self.n_frames)]

    def __repr__(self):
        return (f'ComplementedSequence(layout={self.layout.value!r}, '
                f'T={self.n_frames}, width={self.width}, '
                f'height={self.height})')


class FlowField:
    """Flow samples shaped (K, H, W); `valid` marks pixels with known flow
    (always all-true for computed flow, sentinel-masked for loaded truth)."""
    __slots__ = ('u1', 'u2', 'valid')

    def __init__(self, u1, u2, valid=None):
        u1 = np.array(u1, dtype=np.float64)
        u2 = np.array(u2, dtype=np.float64)
        if u1.ndim == 2:
            u1, u2 = u1[None], u2[None]
        if u1.ndim != 3 or u1.shape != u2.shape:
            raise ValidationError(
                f"flow components must share a K×H×W shape, got {u1.shape} "
                f"and {u2.shape}")
        _check_finite(u1, "flow u1")
        _check_finite(u2, "flow u2")
        if valid is None:
            valid = np.ones(u1.shape, dtype=bool)
        else:
            valid = np.array(valid, dtype=bool)
            if valid.ndim == 2:
                valid = valid[None]
            if valid.shape != u1.shape:
                raise ValidationError("valid mask shape differs from flow")
        self.u1 = _readonly(u1)
        self.u2 = _readonly(u2)
        self.valid = _readonly(valid)

    @classmethod
    def zeros(cls, n_samples, height, width):
        shape = (n_samples, height, width)
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def concatenate(cls, fields):
        fields = list(fields)
        return cls(np.concatenate([f.u1 for f in fields]),
                   np.concatenate([f.u2 for f in fields]),
                   np.concatenate([f.valid for f in fields]))

    @property
    def n_samples(self):
        return self.u1.shape[0]

    @property
    def height(self):
        return self.u1.shape[1]

    @property
    def width(self):
        return self.u1.shape[2]

    def sample(self, k):
        return FlowField(self.u1[k], self.u2[k], self.valid[k])

    def __repr__(self):
        return (f'FlowField(K={self.n_samples}, width={self.width}, '
                f'height={self.height})')


class SaliencyMap:
    __slots__ = ('values', 'state')

    def __init__(self, values, state=Normalization.RAW):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(
                f"saliency map must be 2-D, got shape {values.shape}")
        _check_finite(values, "saliency map")
        state = Normalization(state)
        if state is Normalization.UNIT_RANGE \
           and values.size and (values.min() < 0 or values.max() > 1):
            raise ValidationError("unit-range map has values outside [0, 1]")
        self.values = _readonly(values)
        self.state = state

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


def normalize_unit_range(saliency_map):
    """Min-max normalise to [0, 1]. Constant maps become all-zero. Maps that
    are already unit-range are returned unchanged."""
    if saliency_map.state is Normalization.UNIT_RANGE:
        return saliency_map
    values = saliency_map.values
    low, high = values.min(), values.max()
    if high > low:
        values = (values - low) / (high - low)
    else:
        values = np.zeros_like(values)
    return SaliencyMap(values, Normalization.UNIT_RANGE)


def z_score(saliency_map):
    """Zero mean, unit population standard deviation."""
    if saliency_map.state is Normalization.Z_SCORED:
        return saliency_map
    values = saliency_map.values
    std = values.std()
    if std == 0:
        raise ValidationError("cannot z-score a constant saliency map")
    return SaliencyMap((values - values.mean()) / std, Normalization.Z_SCORED)


def frame_index(path):
    stem = os.path.splitext(os.path.basename(path))[0]
    match = _INDEX_RE.search(stem)
    if match is None:
        raise SequenceIOError(f"no frame index in file name '{path}'")
    return int(match.group(1))


def sidecar_path(frame_path):
    """Saliency sidecar sharing the frame's index: frame_0003.png →
    frame_0003.sal"""
    return os.path.splitext(frame_path)[0] + SALIENCY_EXT


def indexed_paths(pattern, skip_ext=None):
    paths = glob.glob(pattern)
    if skip_ext is not None:
        paths = [p for p in paths if not p.endswith(skip_ext)]
    if not paths:
        raise SequenceIOError(f"empty sequence: no files match '{pattern}'")
    indexed = sorted((frame_index(p), p) for p in paths)
    indices = [i for i, _ in indexed]
    if len(set(indices)) != len(indices):
        raise SequenceIOError(f"duplicate frame indices in '{pattern}'")
    expected = range(indices[0], indices[0] + len(indices))
    for want, got in zip(expected, indices):
        if want != got:
            raise SequenceIOError(f"missing frame {want} in '{pattern}'")
    return [p for _, p in indexed]


def read_raster(path):
    """Decode a raster to float64 RGB or gray in [0, 1], shaped H×W×c."""
    if not os.path.exists(path):
        raise SequenceIOError(f"file not found: '{path}'")
    image = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if image is None:
        raise SequenceIOError(f"cannot decode raster '{path}'")
    if image.dtype == np.uint8:
        max_code = 255.0
    elif image.dtype == np.uint16:
        max_code = 65535.0
    else:
        raise SequenceIOError(
            f"unsupported sample type {image.dtype} in '{path}'")
    if image.ndim == 2:
        image = image[..., None]
    elif image.shape[2] == 4:
        # alpha carries no intensity
        image = image[..., 2::-1]
    elif image.shape[2] == 3:
        image = image[..., ::-1]
    return image.astype(np.float64) / max_code


def write_raster(path, values, bit_depth=8):
    """Encode values in [0, 1] (H×W or H×W×{1,3}, RGB order)."""
    if bit_depth == 8:
        max_code, dtype = 255, np.uint8
    elif bit_depth == 16:
        max_code, dtype = 65535, np.uint16
    else:
        raise ValidationError(f"bit depth must be 8 or 16, got {bit_depth}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3 and values.shape[2] == 1:
        values = values[..., 0]
    codes = np.round(np.clip(values, 0, 1) * max_code).astype(dtype)
    if codes.ndim == 3:
        codes = np.ascontiguousarray(codes[..., ::-1])
    if not cv2.imwrite(path, codes):
        raise SequenceIOError(f"could not write raster '{path}'")


def load_sequence(pattern, layout):
    """Load one raster per frame from a glob pattern. The trailing integer of
    each file name is its frame index and indices must be contiguous. For
    layouts with a saliency channel, each frame needs a `.sal` sidecar."""
    layout = Layout.parse(layout)
    paths = indexed_paths(pattern, skip_ext=SALIENCY_EXT)
    frames = []
    shape = None
    for path in paths:
        image = read_raster(path)
        if shape is None:
            shape = image.shape[:2]
        elif image.shape[:2] != shape:
            raise ValidationError(
                f"dimension mismatch: '{path}' is {image.shape[1]}×"
                f"{image.shape[0]}, expected {shape[1]}×{shape[0]}")
        if layout.base is Layout.GRAY:
            if image.shape[2] == 3:
                image = image.mean(axis=2, keepdims=True)
        elif image.shape[2] != 3:
            raise ValidationError(
                f"layout '{layout.value}' needs colour rasters, "
                f"'{path}' has {image.shape[2]} channel(s)")
        if layout.has_saliency:
            saliency = load_saliency(sidecar_path(path))
            if saliency.shape != shape:
                raise ValidationError(
                    f"saliency sidecar for '{path}' has shape "
                    f"{saliency.shape}, expected {shape}")
            if saliency.min() < 0 or saliency.max() > 1:
                saliency = normalize_unit_range(SaliencyMap(saliency)).values
            image = np.concatenate([image, saliency[..., None]], axis=2)
        frames.append(image)
    logging.debug(f"Loaded {len(frames)} frames from '{pattern}'")
    return ComplementedSequence(np.stack(frames), layout)


def save_sequence(sequence, directory, bit_depth=8, prefix=FRAME_PREFIX):
    """Write `prefix_%04d.png` rasters (plus `.sal` sidecars for the saliency
    channel). Returns the glob pattern that reloads the sequence."""
    os.makedirs(directory, exist_ok=True)
    n_image = sequence.layout.image_channels
    for t in range(sequence.n_frames):
        path = os.path.join(directory, f'{prefix}_{t:04d}.png')
        write_raster(path, sequence.data[t, :, :, :n_image], bit_depth)
        if sequence.layout.has_saliency:
            save_saliency(sidecar_path(path), sequence.data[t, :, :, -1])
    return os.path.join(directory, f'{prefix}_*.png')


def save_saliency(path, values):
    """Single-band float32 raw with a 12-byte header (tag, width, height)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValidationError(
            f"saliency map must be 2-D, got shape {values.shape}")
    _check_finite(values, "saliency map")
    height, width = values.shape
    with open(path, 'wb') as fp:
        fp.write(struct.pack('<4sii', SALIENCY_TAG, width, height))
        fp.write(values.astype('<f4').tobytes())


def load_saliency(path):
    try:
        with open(path, 'rb') as fp:
            payload = fp.read()
    except FileNotFoundError:
        raise SequenceIOError(f"saliency file not found: '{path}'")
    if len(payload) < 12:
        raise SequenceIOError(f"truncated header in '{path}'")
    tag, width, height = struct.unpack('<4sii', payload[:12])
    if tag != SALIENCY_TAG:
        raise SequenceIOError(f"malformed magic tag {tag!r} in '{path}'")
    if width < 1 or height < 1:
        raise SequenceIOError(f"bad dimensions {width}×{height} in '{path}'")
    n_bytes = 4 * width * height
    if len(payload) - 12 < n_bytes:
        raise SequenceIOError(f"truncated payload in '{path}'")
    values = np.frombuffer(payload, dtype='<f4', count=width * height,
                           offset=12)
    return values.reshape(height, width).astype(np.float64)


def _flow_components(flow, index):
    if isinstance(flow, FlowField):
        return flow.u1[index], flow.u2[index]
    u1, u2 = (np.asarray(c, dtype=np.float64) for c in flow)
    if u1.ndim == 3:
        u1, u2 = u1[index], u2[index]
    if u1.shape != u2.shape or u1.ndim != 2:
        raise ValidationError("flow components must be matching 2-D planes")
    _check_finite(u1, "flow u1")
    _check_finite(u2, "flow u2")
    return u1, u2


def save_flow(flow, path, index=0):
    """Write one flow sample as a Middlebury .flo file. `flow` is a FlowField
    or a (u1, u2) pair of planes."""
    u1, u2 = _flow_components(flow, index)
    height, width = u1.shape
    interleaved = np.stack([u1, u2], axis=-1).astype('<f4')
    with open(path, 'wb') as fp:
        fp.write(FLO_TAG_BYTES)
        fp.write(struct.pack('<ii', width, height))
        fp.write(interleaved.tobytes())


def load_flow(path):
    """Read a .flo file. Components beyond the unknown-flow threshold (or
    non-finite) are zeroed and flagged invalid."""
    try:
        with open(path, 'rb') as fp:
            payload = fp.read()
    except FileNotFoundError:
        raise SequenceIOError(f"flow file not found: '{path}'")
    if len(payload) < 12:
        raise SequenceIOError(f"truncated header in '{path}'")
    tag = np.frombuffer(payload[:4], dtype='<f4')[0]
    if tag != np.float32(FLO_TAG):
        raise SequenceIOError(
            f"malformed magic tag {payload[:4]!r} in '{path}'")
    width, height = struct.unpack('<ii', payload[4:12])
    if width < 1 or height < 1:
        raise SequenceIOError(f"bad dimensions {width}×{height} in '{path}'")
    count = 2 * width * height
    if len(payload) - 12 < 4 * count:
        raise SequenceIOError(f"truncated payload in '{path}'")
    data = np.frombuffer(payload, dtype='<f4', count=count, offset=12)
    data = data.reshape(height, width, 2).astype(np.float64)
    with np.errstate(invalid='ignore'):
        invalid = ~np.isfinite(data).all(axis=2) \
            | (np.abs(data) > UNKNOWN_FLOW_THRESHOLD).any(axis=2)
    data[invalid] = 0.0
    return FlowField(data[..., 0], data[..., 1], ~invalid)


def save_flow_sequence(flow, directory, prefix=FLOW_PREFIX):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k in range(flow.n_samples):
        path = os.path.join(directory, f'{prefix}_{k:04d}.flo')
        save_flow(flow, path, index=k)
        paths.append(path)
    return paths


def load_flow_sequence(pattern):
    paths = indexed_paths(pattern)
    return FlowField.concatenate(load_flow(p) for p in paths)


def resample_volume(data, new_width, new_height):
    """Bicubic resampling (cv2 INTER_CUBIC: pixel centres aligned, edge
    samples replicated) of the spatial axes of a (T, H, W, C) array, one
    frame and channel at a time."""
    if new_width < 1 or new_height < 1:
        raise ValidationError(
            f"target size must be at least 1×1, got {new_width}×{new_height}")
    data = np.asarray(data, dtype=np.float64)
    n_frames, height, width, n_channels = data.shape
    if (height, width) == (new_height, new_width):
        return np.array(data)
    out = np.empty((n_frames, new_height, new_width, n_channels))
    for t in range(n_frames):
        for c in range(n_channels):
            out[t, :, :, c] = cv2.resize(
                np.ascontiguousarray(data[t, :, :, c]),
                (new_width, new_height),
                interpolation=cv2.INTER_CUBIC)
    return out


def resample_bicubic(plane, new_width, new_height):
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValidationError(f"expected a 2-D plane, got {plane.shape}")
    return resample_volume(plane[None, :, :, None], new_width,
                           new_height)[0, :, :, 0]


def spatial_gradient(values):
    """(∂/∂x1, ∂/∂x2) of an array whose trailing axes are (H, W, C): central
    differences inside, one-sided at the borders, unit spacing."""
    values = np.asarray(values, dtype=np.float64)
    row_axis, col_axis = values.ndim - 3, values.ndim - 2
    grads = []
    for axis in (col_axis, row_axis):
        if values.shape[axis] < 2:
            grads.append(np.zeros_like(values))
        else:
            grads.append(np.gradient(values, axis=axis))
    return tuple(grads)


def round_half_up(value):
    return int(math.floor(value + 0.5))
