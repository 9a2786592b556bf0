"""Declarative randomisation variables for synthetic scenes. A scene-variables
class lists `SceneVar` attributes; the metaclass collects them so that a whole
scene configuration can be instantiated from defaults or drawn from a seeded
generator in one call. Draws happen in declaration order, so one seed always
gives one scene."""

import collections

# names that can't be used for variables
RESERVED_NAMES = frozenset(
    ['defaults', 'sample', 'variables', 'as_dict', 'replace'])


def _declares_variable(name, value):
    if name.startswith('_') or name in RESERVED_NAMES:
        return False
    return not (callable(value) or isinstance(
        value, (property, classmethod, staticmethod)))


class _SceneVariablesMeta(type):
    """Moves `SceneVar` class attributes into an ordered `variables` dict.
    Instances get plain attributes of the same names holding concrete
    values."""
    def __new__(mcs, name, bases, namespace, _base=False):
        variables = collections.OrderedDict()
        if not _base:
            for attr, value in list(namespace.items()):
                if not _declares_variable(attr, value):
                    continue
                if not isinstance(value, SceneVar):
                    raise TypeError(
                        f"{name}.{attr} = {value!r} should be a SceneVar")
                variables[attr] = namespace.pop(attr)
        cls = super().__new__(mcs, name, bases, dict(namespace))
        cls.variables = variables
        return cls


class SceneVariablesBase(metaclass=_SceneVariablesMeta, _base=True):
    def __init__(self, *, _var_values):
        """Not to be called directly; use sample() or defaults()."""
        missing = self.variables.keys() - _var_values.keys()
        extra = _var_values.keys() - self.variables.keys()
        if missing or extra:
            raise ValueError(f"{type(self).__name__} needs exactly its "
                             f"variables (missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)})")
        for attr in self.variables:
            setattr(self, attr, _var_values[attr])

    @classmethod
    def defaults(cls):
        return cls(_var_values={
            attr: var.default
            for attr, var in cls.variables.items()
        })

    @classmethod
    def sample(cls, rng):
        """Draw every variable from `rng` (a numpy Generator)."""
        return cls(_var_values={
            attr: var.sample(rng)
            for attr, var in cls.variables.items()
        })

    def replace(self, **overrides):
        unknown = sorted(set(overrides) - set(self.variables))
        if unknown:
            raise ValueError(f"unknown scene variables: {unknown}")
        return type(self)(_var_values={**self.as_dict(), **overrides})

    def as_dict(self):
        return collections.OrderedDict(
            (attr, getattr(self, attr)) for attr in self.variables)

    def __repr__(self):
        fields = ', '.join(f'{k}={v}' for k, v in self.as_dict().items())
        return f'{type(self).__name__}({fields})'


class SceneVar:
    """Default value and inclusive uniform sampling bounds of one variable."""
    def __init__(self, default, bounds, integer=False):
        lower, upper = bounds
        if not lower <= default <= upper:
            raise ValueError(
                f"default {default} lies outside [{lower}, {upper}]")
        self.default = default
        self.lower = lower
        self.upper = upper
        self.integer = integer

    def sample(self, rng):
        if self.integer:
            return int(rng.integers(self.lower, self.upper, endpoint=True))
        return float(rng.uniform(self.lower, self.upper))


class OcclusionSceneVars(SceneVariablesBase):
    """A small square crossing a static vertical bar left to right at one
    pixel per frame."""
    object_size = SceneVar(2, (2, 3), integer=True)
    occluder_width = SceneVar(3, (3, 5), integer=True)
    # vertical position of the object's path, as a fraction of the height
    path_row = SceneVar(0.5, (0.35, 0.65))
    object_intensity = SceneVar(0.9, (0.75, 1.0))
    occluder_intensity = SceneVar(0.1, (0.0, 0.25))
    texture_contrast = SceneVar(0.15, (0.08, 0.2))
    texture_seed = SceneVar(0, (0, 2**31 - 1), integer=True)


class TranslationSceneVars(SceneVariablesBase):
    """A textured square translating over a textured background."""
    object_size = SceneVar(16, (12, 20), integer=True)
    object_intensity = SceneVar(0.7, (0.6, 0.8))
    texture_contrast = SceneVar(0.15, (0.1, 0.2))
    texture_seed = SceneVar(0, (0, 2**31 - 1), integer=True)
