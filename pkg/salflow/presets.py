"""Registry of named model presets (layout + solver settings + mode)."""

import collections
import re
from typing import NamedTuple

from salflow.core import Layout
from salflow.errors import ValidationError
from salflow.solver import SolverConfig

__all__ = [
    'ModelName',
    'ModelPreset',
    'PRESETS',
    'register_presets',
    'get_preset',
]

_MODEL_NAME_RE = re.compile(
    r'^(?P<model>SpatioTemporal|TwoFrame)-(?P<data>Gray|GraySal|Color|ColorSal)'
    r'-(?P<setting>[^-]+)-(?P<version>v\d+)$')
_DATA_LAYOUTS = {
    'Gray': Layout.GRAY,
    'GraySal': Layout.GRAY_SALIENCY,
    'Color': Layout.COLOR,
    'ColorSal': Layout.COLOR_SALIENCY,
}
_REGISTERED = False
# filled in by register_presets()
PRESETS = collections.OrderedDict()


class ModelName:
    """Parses preset names, which look like this (per _MODEL_NAME_RE):

        <model>-<data>-<setting>-<version>

    Where:
        - model is SpatioTemporal (whole-window solve) or TwoFrame
          (independent transitions, spatial regulariser only).
        - data is Gray, GraySal, Color or ColorSal, i.e. the channel layout.
        - setting names the parameter regime (Quant, Occlusion, Appendix).
        - version is -v0, -v1, etc."""
    def __init__(self, model_name):
        match = _MODEL_NAME_RE.match(model_name)
        if match is None:
            raise ValidationError(
                f"model name '{model_name}' does not match "
                "<model>-<data>-<setting>-v<N>")
        groups = match.groupdict()
        self.model_name = model_name
        self.model = groups['model']
        self.data = groups['data']
        self.setting = groups['setting']
        self.version = groups['version']
        self.layout = _DATA_LAYOUTS[self.data]
        self.two_frame = self.model == 'TwoFrame'


class ModelPreset(NamedTuple):
    name: str
    layout: Layout
    config: SolverConfig
    two_frame: bool


def _setting_overrides(setting, data):
    if setting == 'Quant':
        return dict(alpha=40.0, lam=1.0)
    if setting == 'Occlusion':
        return dict(alpha=30.0 if data == 'ColorSal' else 40.0, lam=10.0)
    if setting == 'Appendix':
        alpha = {'GraySal': 0.8, 'ColorSal': 0.01, 'Color': 1.5}[data]
        return dict(alpha=alpha, tau=0.01)
    raise ValidationError(f"unknown setting '{setting}'")


def register_presets():
    """Fill PRESETS with every supported combination. Safe to call twice."""
    global _REGISTERED
    if _REGISTERED:
        return False
    _REGISTERED = True

    variants = [
        ('Quant', ('Gray', 'GraySal', 'Color', 'ColorSal')),
        ('Occlusion', ('Gray', 'GraySal', 'Color', 'ColorSal')),
        ('Appendix', ('GraySal', 'ColorSal', 'Color')),
    ]
    for setting, data_kinds in variants:
        for data in data_kinds:
            for model in ('SpatioTemporal', 'TwoFrame'):
                name = f'{model}-{data}-{setting}-v0'
                parsed = ModelName(name)
                config = SolverConfig()._replace(
                    **_setting_overrides(setting, data))
                if parsed.two_frame:
                    config = config._replace(temporal_window=2, lam=0.0)
                PRESETS[name] = ModelPreset(name, parsed.layout,
                                            config.validate(),
                                            parsed.two_frame)
    return True


def get_preset(name):
    register_presets()
    try:
        return PRESETS[name]
    except KeyError:
        ModelName(name)
        raise ValidationError(
            f"no preset named '{name}'; options are {', '.join(PRESETS)}")
