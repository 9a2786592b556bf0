"""Fixation ingestion and the scores used to compare saliency models: AUC,
NSS, and average angular / endpoint error against ground-truth flow."""

import abc
import collections
import io
import math
from typing import NamedTuple
import warnings

import numpy as np
import pandas as pd
from scipy import integrate, stats
from statsmodels.stats.weightstats import DescrStatsW

from salflow.core import SaliencyMap
from salflow.errors import (NSSUndefinedError, SequenceIOError,
                            UndefinedClassifierError, ValidationError)

__all__ = [
    'FIXATION_COLUMNS',
    'FixationSet',
    'FixationMatrix',
    'ScoreCurve',
    'FlowError',
    'load_fixations',
    'save_fixations',
    'rasterize_fixations',
    'auc',
    'exact_roc_auc',
    'nss',
    'average_angular_error',
    'endpoint_error',
    'score_models',
    'curves_table',
    'ScoringProtocol',
    'latexify_results',
]

FIXATION_COLUMNS = ['viewer', 'start_s', 'end_s', 'x', 'y']
N_THRESHOLDS = 100
# Gaze-event classification thresholds of the recording setup, kept for
# reference only: fixations were ingested already parsed.
FIXATION_DISPERSION_DEG = 0.1
SACCADE_VELOCITY_DEG_S = 30.0
SACCADE_ACCELERATION_DEG_S2 = 8000.0
# absorbs float error in t·rate before flooring (e.g. 0.28 · 25)
_FRAME_EPS = 1e-9


def _values(saliency_map):
    if isinstance(saliency_map, SaliencyMap):
        return saliency_map.values
    return np.asarray(saliency_map, dtype=np.float64)


class FixationSet:
    """Fixation records with columns viewer, start_s, end_s, x, y (x is the
    column, y the row, both in pixels)."""
    __slots__ = ('records', )

    def __init__(self, records):
        if not isinstance(records, pd.DataFrame):
            records = pd.DataFrame.from_records(list(records),
                                                columns=FIXATION_COLUMNS)
        missing = [c for c in FIXATION_COLUMNS if c not in records.columns]
        if missing:
            raise ValidationError(
                f"fixation records lack column(s) {', '.join(missing)}")
        records = records[FIXATION_COLUMNS].reset_index(drop=True)
        for index, row in records.iterrows():
            if not (0 <= row.start_s < row.end_s):
                raise ValidationError(
                    f"fixation record {index}: need 0 <= start_s < end_s, got "
                    f"{row.start_s}..{row.end_s}")
        self.records = records

    def __len__(self):
        return len(self.records)


def load_fixations(path):
    try:
        records = pd.read_csv(path)
    except FileNotFoundError:
        raise SequenceIOError(f"fixation file not found: '{path}'")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as ex:
        raise SequenceIOError(f"cannot parse fixation file '{path}': {ex}")
    return FixationSet(records)


def save_fixations(fixations, path):
    fixations.records.to_csv(path, index=False)


class FixationMatrix(NamedTuple):
    """Boolean (T, H, W) matrix of fixated pixels per frame."""
    mask: np.ndarray
    frame_rate: float

    @property
    def n_frames(self):
        return self.mask.shape[0]

    def pooled(self, k, window=0):
        """OR of frames k − window … k + window (clipped to the video)."""
        lo = max(0, k - window)
        hi = min(self.n_frames, k + window + 1)
        return np.any(self.mask[lo:hi], axis=0)

    def positions(self, k, window=0):
        return np.argwhere(self.pooled(k, window))


def frame_span(start_s, end_s, frame_rate):
    """Inclusive 0-based frame range touched by a fixation."""
    first = int(math.floor(start_s * frame_rate + _FRAME_EPS))
    last = int(math.floor(end_s * frame_rate + _FRAME_EPS))
    return first, last


def rasterize_fixations(fixations, frame_rate, width, height, n_frames):
    """Mark every frame floor(t0·rate)…floor(t1·rate) of each record at its
    (rounded) pixel; viewers are OR-combined."""
    if frame_rate <= 0:
        raise ValidationError(f"frame rate must be > 0, got {frame_rate}")
    mask = np.zeros((n_frames, height, width), dtype=bool)
    for index, row in fixations.records.iterrows():
        col = int(math.floor(row.x + 0.5))
        line = int(math.floor(row.y + 0.5))
        if not (0 <= col < width and 0 <= line < height):
            raise ValidationError(
                f"fixation record {index}: ({row.x}, {row.y}) lies outside "
                f"the {width}×{height} frame")
        first, last = frame_span(row.start_s, row.end_s, frame_rate)
        if last >= n_frames:
            raise ValidationError(
                f"fixation record {index}: ends at frame {last}, video has "
                f"{n_frames} frames")
        mask[first:last + 1, line, col] = True
    return FixationMatrix(mask, frame_rate)


def _split(saliency_map, fixated):
    values = _values(saliency_map)
    fixated = np.asarray(fixated, dtype=bool)
    if fixated.shape != values.shape:
        raise ValidationError(
            f"fixation mask shape {fixated.shape} differs from map shape "
            f"{values.shape}")
    n_pos = np.count_nonzero(fixated)
    if n_pos == 0 or n_pos == fixated.size:
        raise UndefinedClassifierError(
            "undefined classifier: fixation mask is all "
            f"{'true' if n_pos else 'false'}")
    return values[fixated], values[~fixated]


def auc(saliency_map, fixated, n_thresholds=N_THRESHOLDS):
    """Area under the ROC curve from `n_thresholds` thresholds spread evenly
    over the map's value range. A pixel is positive when its value is at
    least the threshold."""
    pos, neg = _split(saliency_map, fixated)
    values = _values(saliency_map)
    thresholds = np.linspace(values.min(), values.max(), n_thresholds)
    tp = np.mean(pos[None, :] >= thresholds[:, None], axis=1)
    fp = np.mean(neg[None, :] >= thresholds[:, None], axis=1)
    fp = np.concatenate([[0.0], fp, [1.0]])
    tp = np.concatenate([[0.0], tp, [1.0]])
    order = np.lexsort((tp, fp))
    return float(integrate.trapezoid(tp[order], fp[order]))


def exact_roc_auc(saliency_map, fixated):
    """Exact ROC area via the rank-sum statistic; ties count one half."""
    pos, neg = _split(saliency_map, fixated)
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    n_pos, n_neg = len(pos), len(neg)
    rank_sum = ranks[:n_pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def nss(saliency_map, fixations):
    """Mean z-scored saliency (population std) at fixated pixels. `fixations`
    is a boolean mask or an N×2 array of (row, col) positions."""
    values = _values(saliency_map)
    fixations = np.asarray(fixations)
    if fixations.dtype == bool:
        if fixations.shape != values.shape:
            raise ValidationError(
                f"fixation mask shape {fixations.shape} differs from map "
                f"shape {values.shape}")
        picked = values[fixations]
    else:
        fixations = fixations.reshape(-1, 2).astype(int)
        if values.ndim != 2:
            raise ValidationError(
                f"fixation positions need a 2-D map, got {values.shape}")
        height, width = values.shape
        outside = (fixations[:, 0] < 0) | (fixations[:, 0] >= height) \
            | (fixations[:, 1] < 0) | (fixations[:, 1] >= width)
        if outside.any():
            row, col = fixations[np.argmax(outside)]
            raise ValidationError(
                f"fixation (row {row}, col {col}) lies outside the "
                f"{width}×{height} map")
        picked = values[fixations[:, 0], fixations[:, 1]]
    if picked.size == 0:
        raise ValidationError("NSS needs at least one fixation")
    std = values.std()
    if std == 0:
        raise NSSUndefinedError()
    return float(np.mean((picked - values.mean()) / std))


class FlowError(NamedTuple):
    mean: float
    per_pixel: np.ndarray
    valid: np.ndarray


def _flow_pair(flow, truth, valid):
    if (flow.n_samples, flow.height, flow.width) \
       != (truth.n_samples, truth.height, truth.width):
        raise ValidationError(
            f"flow {flow!r} and truth {truth!r} differ in shape")
    mask = flow.valid & truth.valid
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        mask = mask & valid.reshape(mask.shape)
    if not mask.any():
        raise ValidationError("no valid pixels to compare")
    return mask


def average_angular_error(flow, truth, valid=None):
    """Angle in degrees between the space-time vectors (u1, u2, 1) and
    (v1, v2, 1), averaged over valid pixels."""
    mask = _flow_pair(flow, truth, valid)
    a = np.stack([flow.u1, flow.u2, np.ones_like(flow.u1)], axis=-1)
    b = np.stack([truth.u1, truth.u2, np.ones_like(truth.u1)], axis=-1)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    angles = np.degrees(np.arctan2(cross, dot))
    return FlowError(float(angles[mask].mean()), angles, mask)


def endpoint_error(flow, truth, valid=None):
    mask = _flow_pair(flow, truth, valid)
    errors = np.hypot(flow.u1 - truth.u1, flow.u2 - truth.u2)
    return FlowError(float(errors[mask].mean()), errors, mask)


class ScoreCurve(NamedTuple):
    model: str
    frames: np.ndarray
    auc: np.ndarray
    nss: np.ndarray
    skipped: int

    @property
    def mean_auc(self):
        return float(np.mean(self.auc)) if len(self.auc) else math.nan

    @property
    def mean_nss(self):
        return float(np.mean(self.nss)) if len(self.nss) else math.nan


def score_models(models, fixations, frames=None, fixation_window=0,
                 frame_offset=0, constant_nss=None):
    """Per-frame AUC and NSS of each model against a FixationMatrix.

    Args:
        models (mapping): name -> DynamicSaliencySequence or (K, H, W) array.
        fixations (FixationMatrix): map k is scored against fixation frame
            k + frame_offset, pooled over ± fixation_window frames.
        frames (iterable or None): map indices to score (all by default).
        constant_nss (float or None): NSS recorded for a constant map; by
            default a constant map raises NSSUndefinedError.

    Returns:
        curves (OrderedDict): name -> ScoreCurve. Frames with an all-true or
            all-false fixation mask are skipped and counted."""
    curves = collections.OrderedDict()
    for name, model in models.items():
        raw = np.asarray(getattr(model, 'raw', model), dtype=np.float64)
        if raw.shape[1:] != fixations.mask.shape[1:]:
            raise ValidationError(
                f"model '{name}' maps are {raw.shape[2]}×{raw.shape[1]}, "
                f"fixations are {fixations.mask.shape[2]}×"
                f"{fixations.mask.shape[1]}")
        indices = range(raw.shape[0]) if frames is None else frames
        kept, auc_values, nss_values = [], [], []
        skipped = 0
        for k in indices:
            fix_frame = k + frame_offset
            if not 0 <= fix_frame < fixations.n_frames:
                raise ValidationError(
                    f"map {k} of '{name}' has no fixation frame {fix_frame}")
            mask = fixations.pooled(fix_frame, fixation_window)
            try:
                auc_value = auc(raw[k], mask)
            except UndefinedClassifierError:
                skipped += 1
                continue
            try:
                nss_value = nss(raw[k], mask)
            except NSSUndefinedError:
                if constant_nss is None:
                    raise NSSUndefinedError(
                        f"NSS undefined: map {k} of model '{name}' is "
                        "constant")
                nss_value = constant_nss
            kept.append(k)
            auc_values.append(auc_value)
            nss_values.append(nss_value)
        if skipped:
            warnings.warn(
                f"Skipped {skipped} frame(s) of model '{name}' whose fixation "
                "mask was all true or all false")
        curves[name] = ScoreCurve(name, np.array(kept, dtype=int),
                                  np.array(auc_values), np.array(nss_values),
                                  skipped)
    return curves


def curves_table(curves):
    """Long-format frame of per-frame scores, one row per (model, frame)."""
    records = [
        collections.OrderedDict([
            ('model', curve.model),
            ('frame', int(frame)),
            ('auc', auc_value),
            ('nss', nss_value),
        ]) for curve in curves.values()
        for frame, auc_value, nss_value in zip(curve.frames, curve.auc,
                                               curve.nss)
    ]
    return pd.DataFrame.from_records(records,
                                     columns=['model', 'frame', 'auc', 'nss'])


class ScoringProtocol(abc.ABC):
    """Aggregates per-scene mean AUC and NSS of several models over a fixed
    number of scenes. Subclasses say how to score one model on every scene;
    this class does the statistics."""
    _called_init = False
    metrics = ('auc', 'nss')

    def __init__(self, model_names, n_scenes):
        self.model_names = list(model_names)
        self.n_scenes = n_scenes
        self._called_init = True

    @property
    @abc.abstractmethod
    def run_id(self):
        """String identifying the experiment; it fills the `run_id` column of
        the frame returned by `do_eval`."""
        pass

    @abc.abstractmethod
    def obtain_scores(self, model_name):
        """Return one ScoreCurve per scene for `model_name`. Should never
        return fewer than `self.n_scenes` curves; extra ones are ignored."""
        pass

    def do_eval(self, verbose=False):
        if not self._called_init:
            raise ValidationError(
                "ScoringProtocol.__init__() was not called. Did you include a "
                "super().__init__(…) call in your subclass?")

        records = []
        for model_name in self.model_names:
            curves = list(self.obtain_scores(model_name))
            if len(curves) < self.n_scenes:
                raise ValidationError(
                    f".obtain_scores() returned only {len(curves)} curves, "
                    f"but we asked for {self.n_scenes}")
            if len(curves) > self.n_scenes:
                # mixing scene counts across models would make CI widths
                # incomparable
                warnings.warn(
                    f"Asked for {self.n_scenes} scenes but got {len(curves)} "
                    f"curves instead. Will truncate to only consider the "
                    f"first {self.n_scenes}.")
                curves = curves[:self.n_scenes]
            for metric in self.metrics:
                scores = np.array(
                    [getattr(curve, f'mean_{metric}') for curve in curves])
                interval = DescrStatsW(scores).tconfint_mean(
                    0.05, 'two-sided')
                std = np.std(scores, ddof=1) if len(scores) > 1 else math.nan
                records.append(
                    collections.OrderedDict([
                        ('model', model_name),
                        ('metric', metric),
                        ('mean_score', float(np.mean(scores))),
                        ('ci95_lower', interval[0]),
                        ('ci95_upper', interval[1]),
                        ('std_score', std),
                        ('n_scenes', len(scores)),
                        ('run_id', self.run_id),
                    ]))
        frame = pd.DataFrame.from_records(records)

        if verbose:
            print(f"Final mean scores for '{self.run_id}':")
            print(frame[['model', 'metric', 'mean_score', 'ci95_lower',
                         'ci95_upper']])

        return frame


def latexify_results(eval_data, id_column='model'):
    """LaTeX table from a `ScoringProtocol.do_eval()` frame: one row per
    value of `id_column`, one column per metric."""
    metrics = eval_data['metric'].unique()
    col_names = [r'\textbf{%s}' % m.upper() for m in metrics]
    row_names = eval_data[id_column].unique()

    fp = io.StringIO()
    print(r"\centering", file=fp)
    print(r"\begin{tabular}{l@{\hspace{1em}}%s}" % ("c" * len(col_names)),
          file=fp)
    print(r"\toprule", file=fp)
    print(r'\textbf{Model} & ', end='', file=fp)
    print(' & '.join(col_names), end='', file=fp)
    print('\\\\', file=fp)
    print(r'\midrule', file=fp)

    for row_name in row_names:
        row_mask = eval_data[id_column] == row_name
        stat_parts = []
        for metric in metrics:
            full_mask = row_mask & (eval_data['metric'] == metric)
            relevant_rows = list(eval_data[full_mask].iterrows())
            if len(relevant_rows) != 1:
                raise ValidationError(
                    f"got {len(relevant_rows)} rows corresponding to "
                    f"{id_column}={row_name} and metric={metric}, but "
                    f"expected one (maybe IDs in column {id_column} aren't "
                    f"unique?)")
            (_, row), = relevant_rows
            stat_parts.append(
                f'{row["mean_score"]:.2f} ($\\pm$ {row["std_score"]:.2f})')
        print(r'\textbf{%s} & ' % row_name, end='', file=fp)
        print(' & '.join(stat_parts), end='', file=fp)
        print('\\\\', file=fp)
    print(r'\bottomrule', file=fp)
    print(r'\end{tabular}', file=fp)

    return fp.getvalue()
