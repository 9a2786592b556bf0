"""Plain-text `key = value` configuration files and the run manifests every
command writes next to its outputs."""

import collections
import os
from typing import NamedTuple

from salflow.errors import SequenceIOError, ValidationError
from salflow.version import __version__

__all__ = [
    'MANIFEST_NAME',
    'RunManifest',
    'read_config_pairs',
    'parse_value',
    'load_config',
    'write_manifest',
    'read_manifest',
]

MANIFEST_NAME = 'manifest.txt'
_SECTIONS = ('config', 'inputs', 'outputs', 'timings', 'summary')


def read_config_pairs(path):
    """(key, raw value) pairs in file order. `#` starts a comment; repeated
    keys are kept."""
    try:
        with open(path, 'r') as fp:
            lines = fp.readlines()
    except FileNotFoundError:
        raise SequenceIOError(f"config file not found: '{path}'")
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValidationError(
                f"{path}:{lineno}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ValidationError(f"{path}:{lineno}: empty key")
        pairs.append((key, value))
    return pairs


def parse_value(text):
    """int, float, bool or None where the text reads as one; else the
    string."""
    lowered = text.lower()
    if lowered in ('none', 'null', ''):
        return None
    if lowered == 'true':
        return True
    if lowered == 'false':
        return False
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def load_config(path, allowed_keys=None):
    """Single-valued config as an ordered dict of raw strings. Keys may be
    written with dashes or underscores."""
    values = collections.OrderedDict()
    for key, value in read_config_pairs(path):
        key = key.replace('-', '_')
        if allowed_keys is not None and key not in allowed_keys:
            raise ValidationError(
                f"unknown key '{key}' in '{path}'; options are "
                f"{', '.join(sorted(allowed_keys))}")
        if key in values:
            raise ValidationError(f"key '{key}' repeated in '{path}'")
        values[key] = value
    return values


class RunManifest(NamedTuple):
    command: str
    config: dict
    inputs: dict
    outputs: dict
    timings: dict
    summary: dict
    version: str = __version__


def write_manifest(manifest, directory):
    """Write `manifest.txt` into `directory`; keys are sorted within each
    section so identical runs produce identical config blocks."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, 'w') as fp:
        print("# salflow run manifest", file=fp)
        print(f"command = {manifest.command}", file=fp)
        print(f"version = {manifest.version}", file=fp)
        for section in _SECTIONS:
            for key, value in sorted(getattr(manifest, section).items()):
                print(f"{section}.{key} = {value}", file=fp)
    return path


def read_manifest(path):
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    sections = {section: collections.OrderedDict() for section in _SECTIONS}
    header = {}
    for key, value in read_config_pairs(path):
        section, _, name = key.partition('.')
        if name and section in sections:
            sections[section][name] = parse_value(value)
        elif key in ('command', 'version'):
            header[key] = value
        else:
            raise ValidationError(f"unexpected manifest key '{key}' in "
                                  f"'{path}'")
    if 'command' not in header:
        raise SequenceIOError(f"manifest '{path}' has no command")
    return RunManifest(command=header['command'],
                       version=header.get('version', ''),
                       **sections)
