"""Saving and loading solver runs (manifest, flow, convergence log) as gzipped
cloudpickle archives."""
import gzip
import pickle
from typing import List, NamedTuple, Optional

import cloudpickle

from salflow.core import FlowField
from salflow.errors import SequenceIOError
from salflow.manifest import RunManifest

__all__ = ['SavedRun', 'save_run', 'load_runs']

RUN_SUFFIX = '.pkl.gz'


class SavedRun(NamedTuple):
    manifest: RunManifest
    flow: FlowField
    # LevelReport rows of the solve
    convergence: List[tuple]
    dynamic_saliency: Optional[object] = None


def save_run(run, path):
    """Archive bytes depend only on the run's content: the gzip header
    carries no file name and a zero mtime."""
    with open(path, 'wb') as raw_fp:
        with gzip.GzipFile(filename='', fileobj=raw_fp, mode='wb',
                           mtime=0) as fp:
            cloudpickle.dump(run, fp)
    return path


def load_runs(run_paths, verbose=False):
    """Use GzipFile & cloudpickle to generate a sequence of SavedRuns from a
    sequence of file paths."""
    n_runs = len(run_paths)
    for r_num, r_path in enumerate(run_paths, start=1):
        if verbose:
            print(f"Loading '{r_path}' ({r_num}/{n_runs})")
        try:
            with gzip.GzipFile(r_path, 'rb') as fp:
                run = cloudpickle.load(fp)
        except FileNotFoundError:
            raise SequenceIOError(f"run archive not found: '{r_path}'")
        except (OSError, EOFError, pickle.UnpicklingError) as ex:
            raise SequenceIOError(f"cannot read run archive '{r_path}': {ex}")
        yield run
