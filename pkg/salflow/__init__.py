# flake8: noqa
from salflow.core import (ComplementedSequence, FlowField, Layout,
                          load_flow, load_sequence, save_flow)
from salflow.dynsal import magnitude
from salflow.evaluation import auc, average_angular_error, nss
from salflow.middlebury import try_download_middlebury  # noqa: F401
from salflow.presets import PRESETS, get_preset, register_presets
from salflow.saliency import SpectralResidualProvider, complement
from salflow.saved_runs import load_runs
from salflow.solver import SolverConfig, solve_sequence, two_frame_baseline
from salflow.version import __version__
