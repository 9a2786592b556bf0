"""Tools for downloading the public Middlebury optical-flow data and locating
frames and ground-truth flows inside it."""
import datetime
import logging
import os
import shutil
import tempfile
import zipfile

import requests

from salflow.core import (SALIENCY_EXT, frame_index, indexed_paths, load_flow,
                          load_sequence)
from salflow.errors import SequenceIOError

__all__ = [
    'DownloadError',
    'try_download_middlebury',
    'sequence_pattern',
    'truth_path',
    'load_middlebury_frames',
    'TABLE_SEQUENCES',
    'REPORTED_COLOR_FRACTIONS',
]

MIDDLEBURY_ZIP_BASE = "https://vision.middlebury.edu/flow/data/comp/zip"
ARCHIVES = ('other-color-allframes', 'other-gt-flow')
DEFAULT_LOCATION = "middlebury"
DONE_FILE = ".download-done"
# sequences whose color-only well-conditioned fractions were published, with
# those percentages (threshold 1000)
TABLE_SEQUENCES = ('Grove3', 'Hydrangea', 'Urban2')
REPORTED_COLOR_FRACTIONS = {'Grove3': 4.20, 'Hydrangea': 2.48, 'Urban2': 0.31}
# the ground-truth flow maps frame10 to frame11
TRUTH_FRAME = 10
REQUEST_TIMEOUT_S = 60.0
MIB = float(1024**2)
PROGRESS_STEP = 10 * 1024**2


class DownloadError(SequenceIOError):
    pass


def try_download_middlebury(dest=DEFAULT_LOCATION, archives=ARCHIVES,
                            progress=True, timeout=REQUEST_TIMEOUT_S):
    """Download and extract each archive into `dest`, unless a done-marker
    says it is already there.

    Args:
        dest (str): directory to extract into.
        archives ([str]): archive names under MIDDLEBURY_ZIP_BASE.
        progress (bool): log download progress at INFO level.
        timeout (float): seconds to wait for the server between bytes."""
    os.makedirs(dest, exist_ok=True)
    for archive in archives:
        marker = os.path.join(dest, f"{DONE_FILE}-{archive}")
        if os.path.exists(marker):
            logging.info(f"Skipping '{archive}': found '{marker}'")
            continue

        url = f"{MIDDLEBURY_ZIP_BASE}/{archive}.zip"
        with tempfile.TemporaryFile() as scratch:
            n_bytes = _stream_to(url, scratch, progress, timeout)
            logging.info(f"Fetched {archive}.zip ({n_bytes / MIB:.2f}MiB)")
            scratch.seek(0)
            n_files = _recursive_extract(scratch, dest)
        logging.info(f"Extracted {n_files} files into '{dest}'")

        stamp = datetime.datetime.now().isoformat(timespec='seconds')
        with open(marker, "w") as fp:
            fp.write(f"url = {url}\nfiles = {n_files}\nfetched = {stamp}\n")


def _stream_to(url, dest_fp, progress, timeout, chunk_size=64 * 1024):
    """Copy the body at `url` into `dest_fp`; returns the byte count."""
    n_bytes = 0
    reported = 0
    try:
        with requests.get(url, stream=True, timeout=timeout) as res:
            res.raise_for_status()
            expected = int(res.headers.get('Content-Length') or 0)
            for chunk in res.iter_content(chunk_size):
                dest_fp.write(chunk)
                n_bytes += len(chunk)
                if progress and n_bytes - reported >= PROGRESS_STEP:
                    reported = n_bytes
                    total = f" of {expected / MIB:.1f}" if expected else ""
                    logging.info(f"{url}: {n_bytes / MIB:.1f}{total}MiB")
    except (OSError, requests.RequestException) as ex:
        raise DownloadError(f"could not download '{url}': {ex}")
    return n_bytes


def _recursive_extract(zip_fp, dest_dir, member_prefix=None):
    """Extract the files under `member_prefix` (everything by default) of a zip
    archive into `dest_dir`, dropping the prefix and overwriting as necessary.
    Returns the number of files written."""
    prefix = tuple(member_prefix.strip('/').split('/')) if member_prefix \
        else ()
    n_files = 0
    with zipfile.ZipFile(zip_fp) as archive:
        for info in archive.infolist():
            if info.is_dir():
                continue
            # member names always use '/'
            parts = tuple(info.filename.split('/'))
            if parts[:len(prefix)] != prefix or len(parts) == len(prefix):
                continue
            out_path = os.path.join(dest_dir, *parts[len(prefix):])
            os.makedirs(os.path.dirname(out_path), exist_ok=True)
            logging.debug(f"Extracting '{info.filename}' -> '{out_path}'")
            with archive.open(info) as src, open(out_path, 'wb') as dst:
                shutil.copyfileobj(src, dst)
            n_files += 1
    return n_files


def sequence_pattern(root, name):
    return os.path.join(root, 'other-data', name, 'frame*.png')


def truth_path(root, name):
    return os.path.join(root, 'other-gt-flow', name, f'flow{TRUTH_FRAME}.flo')


def load_middlebury_frames(root, name, layout='color'):
    """The frames of one sequence, plus the ground-truth flow and the
    sequence-local index of the frame it starts from."""
    pattern = sequence_pattern(root, name)
    sequence = load_sequence(pattern, layout)
    paths = indexed_paths(pattern, skip_ext=SALIENCY_EXT)
    first_index = frame_index(paths[0])
    path = truth_path(root, name)
    truth = load_flow(path) if os.path.exists(path) else None
    return sequence, truth, TRUTH_FRAME - first_index
