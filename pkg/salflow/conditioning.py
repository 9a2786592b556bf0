"""Per-pixel condition numbers of the spatial Jacobian of a (complemented)
frame, and the fraction of well-conditioned pixels."""

import itertools
from typing import NamedTuple

import numpy as np
import pandas as pd

from salflow.core import Frame, spatial_gradient
from salflow.errors import ValidationError

__all__ = [
    'DEFAULT_THRESHOLD',
    'JacobianField',
    'ConditionReport',
    'jacobian',
    'condition_map',
    'fraction_below',
    'condition_statistics',
    'condition_table',
]

DEFAULT_THRESHOLD = 1000.0
# smaller singular values count as zero
SINGULAR_FLOOR = 1e-12


class JacobianField(NamedTuple):
    """(H, W, σ, 2) array; [..., i, 0] is ∂f_i/∂x1 and [..., i, 1] is
    ∂f_i/∂x2."""
    values: np.ndarray

    @property
    def channels(self):
        return self.values.shape[2]


class ConditionReport(NamedTuple):
    condition: np.ndarray
    threshold: float
    fraction_below: float


def jacobian(frame):
    if not isinstance(frame, Frame):
        frame = Frame(frame)
    dx1, dx2 = spatial_gradient(frame.values)
    return JacobianField(np.stack([dx1, dx2], axis=-1))


def _fraction(condition, threshold):
    if condition.size == 0:
        return 0.0
    below = np.isfinite(condition) & (condition < threshold)
    return 100.0 * np.count_nonzero(below) / condition.size


def condition_map(field, threshold=DEFAULT_THRESHOLD):
    """Ratio of the two singular values of each σ×2 matrix, from the
    eigenvalues of the Gram matrix JᵀJ. The determinant is summed over 2×2
    minors (Cauchy–Binet) so that it is never negative. Single-channel
    Jacobians have rank at most one and get +inf everywhere."""
    values = np.asarray(field.values, dtype=np.float64)
    if values.ndim != 4 or values.shape[3] != 2:
        raise ValidationError(
            f"expected an H×W×σ×2 Jacobian, got shape {values.shape}")
    height, width, channels = values.shape[:3]
    if channels == 1:
        condition = np.full((height, width), np.inf)
        return ConditionReport(condition, threshold,
                               _fraction(condition, threshold))
    j1, j2 = values[..., 0], values[..., 1]
    g11 = np.sum(j1 * j1, axis=-1)
    g22 = np.sum(j2 * j2, axis=-1)
    g12 = np.sum(j1 * j2, axis=-1)
    det = np.zeros((height, width))
    for i, k in itertools.combinations(range(channels), 2):
        det += (j1[..., i] * j2[..., k] - j1[..., k] * j2[..., i])**2
    half_trace = (g11 + g22) / 2
    spread = np.sqrt(((g11 - g22) / 2)**2 + g12**2)
    lam_max = half_trace + spread
    with np.errstate(divide='ignore', invalid='ignore'):
        lam_min = np.where(lam_max > 0, det / lam_max, 0.0)
        s_max = np.sqrt(lam_max)
        s_min = np.sqrt(np.maximum(lam_min, 0.0))
        condition = np.where(s_min < SINGULAR_FLOOR, np.inf, s_max / s_min)
    return ConditionReport(condition, threshold,
                           _fraction(condition, threshold))


def fraction_below(report, threshold=None):
    """Percentage of pixels whose finite condition number is below
    `threshold` (the report's own threshold by default)."""
    if threshold is None:
        return report.fraction_below
    return _fraction(report.condition, threshold)


def condition_statistics(sequence, name='', threshold=DEFAULT_THRESHOLD,
                         frame_index=0):
    """One table row for a frame of `sequence`."""
    if not 0 <= frame_index < sequence.n_frames:
        raise ValidationError(
            f"frame {frame_index} out of range for {sequence.n_frames} frames")
    report = condition_map(jacobian(sequence.frame(frame_index)), threshold)
    return {
        'sequence': name,
        'layout': sequence.layout.value,
        'frame': frame_index,
        'threshold': threshold,
        'fraction_below': report.fraction_below,
    }


def condition_table(rows):
    return pd.DataFrame.from_records(
        list(rows),
        columns=['sequence', 'layout', 'frame', 'threshold', 'fraction_below'])
