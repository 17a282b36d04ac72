"""Experiment configuration stored as JSON."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .green import StepDistribution, load_steps
from .group_model import BUILTIN_MODELS, builtin_model, load_model

DEFAULT_BUDGETS = {
    "walk_steps": 2000,
    "replicas": 200,
    "sphere_depth": 12,
    "horizon": 12,
    "mc_trials": 100_000,
    "hitting_walks": 100_000,
    "confine_walks": 5000,
    "validate_depth": 10,
    "max_elements": 2_000_000,
    "localdim_walks": 200,
    "localdim_steps": 400,
}


@dataclass
class ExperimentConfig:
    model: str = "F2"
    steps: object = "uniform"          # "uniform", a step-file path, or {word: probability}
    automaton: str | None = None
    seed: int = 0
    budgets: dict = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    theta_grid: dict = field(default_factory=lambda: {"lo": -2.0, "hi": 2.0, "step": 0.05})
    shadow_radius: int = 0
    gibbs: dict = field(default_factory=lambda: {"apexes": 200, "max_length": 8, "bound": 0.1})
    hitting: dict = field(default_factory=lambda: {"n": [8, 9, 10], "a": [0.25, 0.5, 0.75]})
    confinement: dict = field(default_factory=lambda: {"a": 0.2, "n_max": 14})
    output_dir: str = "out"
    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        merged = dict(DEFAULT_BUDGETS)
        merged.update(self.budgets or {})
        self.budgets = merged
        for key, val in self.budgets.items():
            if not isinstance(val, int) or val <= 0:
                raise ConfigError(f"budget {key!r} must be a positive integer, got {val!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        g = self.theta_grid
        if not (g.get("step", 0) > 0 and g.get("hi", 0) >= g.get("lo", 0)):
            raise ConfigError("theta_grid needs lo <= hi and step > 0")
        if self.shadow_radius < 0:
            raise ConfigError("shadow_radius must be non-negative")

    # --------------------------------------------------------------- I/O
    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, data, base_dir="."):
        known = {f.name for f in fields(cls)} - {"base_dir"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**copy.deepcopy(data), base_dir=str(base_dir))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def digest(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def override(self, **kw):
        d = self.to_dict()
        for k, v in kw.items():
            if v is None:
                continue
            if k in DEFAULT_BUDGETS:
                d["budgets"][k] = v
            else:
                d[k] = v
        return ExperimentConfig.from_dict(d, base_dir=self.base_dir)

    # ------------------------------------------------------------ resolution
    def _path(self, ref):
        p = Path(ref)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def resolve_model(self):
        if self.model in BUILTIN_MODELS:
            return builtin_model(self.model)
        path = self._path(self.model)
        if path.exists():
            return load_model(path)
        data = _data_file(self.model)
        if data is not None:
            return load_model(data)
        raise ConfigError(f"model file not found: {path}")

    def resolve_steps(self, model):
        ref = self.steps
        if isinstance(ref, dict):
            return StepDistribution(model, {("" if w == "1" else w): Fraction(str(p))
                                            for w, p in ref.items()})
        if ref == "uniform":
            return StepDistribution.uniform(model)
        path = self._path(ref)
        if path.exists():
            return load_steps(path, model)
        data = _data_file(ref)
        if data is not None:
            return load_steps(data, model)
        raise ConfigError(f"step file not found: {path}")

    def resolve_automaton(self, model):
        from .automaton import builtin_automaton, load_automaton
        if self.automaton is None:
            return builtin_automaton(model)
        path = self._path(self.automaton)
        if not path.exists():
            raise ConfigError(f"automaton file not found: {path}")
        aut = load_automaton(path, model)
        aut.check_labels(model)
        return aut

    def output_path(self):
        return self._path(self.output_dir)


def _data_file(name):
    """Packaged data file ``data/<name>`` if it exists (e.g. "biased_m2.steps")."""
    if "/" in name or "\\" in name:
        return None
    ref = resources.files("hyperwalk") / "data" / name
    return ref if ref.is_file() else None
