"""Run configuration: a nested YAML file mapped onto dataclass sections.

Unknown keys are rejected so that a typo cannot silently fall back to a
default.  Built-in presets cover the two benchmark setups; any preset or file
can be adjusted with dotted ``section.key=value`` overrides.
"""

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import InvalidConfig
from .fnn.losses import LOSS_MODES
from .fnn.network import ACTIVATIONS

CONTROLLER_KINDS = ("zero", "sdre", "linear_k0", "nn")
PREDICTORS = ("model", "sdre", "zero")


@dataclass
class SystemConfig:
    name: str = "allen_cahn"
    params: dict = field(default_factory=dict)


@dataclass
class SamplingConfig:
    N_s: int = 1000
    start_index: int = 1
    lower: object = None  # None: the system's box
    upper: object = None
    tolerance: float = 1e-9

    def validate(self):
        if int(self.N_s) != self.N_s or self.N_s < 1:
            raise InvalidConfig(f"sampling.N_s must be a positive integer, got {self.N_s}")
        if int(self.start_index) != self.start_index or self.start_index < 1:
            raise InvalidConfig("sampling.start_index must be an integer >= 1")
        if not self.tolerance > 0:
            raise InvalidConfig("sampling.tolerance must be positive")


@dataclass
class TrainingConfig:
    loss_mode: str = "value"
    hidden_layers: int = 3
    width: int = 500
    activation: str = "relu"
    mu_V: float = 1.0
    mu_dV: float = 1.0
    epochs: int = 10
    batch_size: int = 100
    lbfgs_memory: int = 10
    iters_per_batch: int = 10
    train_fraction: float = 0.8
    split_seed: int = 0
    seed: int = 0

    def validate(self):
        if self.loss_mode not in LOSS_MODES:
            raise InvalidConfig(f"training.loss_mode must be one of {LOSS_MODES}")
        if self.activation not in ACTIVATIONS:
            raise InvalidConfig(f"training.activation must be one of {tuple(ACTIVATIONS)}")
        for name in ("hidden_layers", "width", "epochs", "batch_size", "lbfgs_memory", "iters_per_batch"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidConfig(f"training.{name} must be a positive integer, got {v}")
        if self.mu_V < 0 or self.mu_dV < 0 or self.mu_V + self.mu_dV == 0:
            raise InvalidConfig("training.mu_V and mu_dV must be >= 0 and not both zero")
        if not 0 < self.train_fraction < 1:
            raise InvalidConfig("training.train_fraction must lie in (0, 1)")
        if self.seed < 0 or self.split_seed < 0:
            raise InvalidConfig("seeds must be non-negative")


@dataclass
class EvaluationConfig:
    N_eval: int = 10000
    predictor: str = "model"

    def validate(self):
        if int(self.N_eval) != self.N_eval or self.N_eval < 2:
            raise InvalidConfig("evaluation.N_eval must be an integer >= 2")
        if self.predictor not in PREDICTORS:
            raise InvalidConfig(f"evaluation.predictor must be one of {PREDICTORS}")


@dataclass
class SimulationConfig:
    controllers: list = field(default_factory=lambda: ["zero", "sdre", "linear_k0", "nn"])
    x0: object = field(default_factory=lambda: {"kind": "zeros"})
    T: float = 10.0
    dt: float = 0.01
    refresh_steps: int = 1
    substeps: object = "auto"

    def validate(self):
        if not (self.T > 0 and self.dt > 0):
            raise InvalidConfig("simulation.T and dt must be positive")
        if int(self.refresh_steps) != self.refresh_steps or self.refresh_steps < 1:
            raise InvalidConfig("simulation.refresh_steps must be an integer >= 1")
        if self.substeps != "auto" and (int(self.substeps) != self.substeps or self.substeps < 1):
            raise InvalidConfig("simulation.substeps must be 'auto' or a positive integer")
        if not self.controllers:
            raise InvalidConfig("simulation.controllers is empty")
        for c in self.controllers:
            kind = c.get("kind") if isinstance(c, dict) else c
            if kind not in CONTROLLER_KINDS:
                raise InvalidConfig(f"unknown controller {kind!r}; expected one of {CONTROLLER_KINDS}")


@dataclass
class PathsConfig:
    runs_root: str = "runs"
    run_dir: object = None  # None: <runs_root>/<name>
    dataset: object = None  # None: <run_dir>/dataset.csv
    model: object = None  # None: <run_dir>/model.ckpt


SECTIONS = {
    "system": SystemConfig,
    "sampling": SamplingConfig,
    "training": TrainingConfig,
    "evaluation": EvaluationConfig,
    "simulation": SimulationConfig,
    "paths": PathsConfig,
}


@dataclass
class RunConfig:
    name: str = "run"
    system: SystemConfig = field(default_factory=SystemConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfig("config must be a mapping")
        unknown = set(data) - set(SECTIONS) - {"name"}
        if unknown:
            raise InvalidConfig(f"unknown config sections: {sorted(unknown)}")
        kw = {"name": str(data.get("name", "run"))}
        for key, section in SECTIONS.items():
            body = data.get(key) or {}
            if not isinstance(body, dict):
                raise InvalidConfig(f"section {key!r} must be a mapping")
            allowed = {f.name for f in fields(section)}
            bad = set(body) - allowed
            if bad:
                raise InvalidConfig(f"unknown keys in {key!r}: {sorted(bad)}")
            kw[key] = section(**copy.deepcopy(body))
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if not self.name or "/" in self.name:
            raise InvalidConfig("name must be a non-empty string without '/'")
        for key in ("sampling", "training", "evaluation", "simulation"):
            getattr(self, key).validate()

    def run_dir(self):
        if self.paths.run_dir is not None:
            return Path(self.paths.run_dir)
        return Path(self.paths.runs_root) / self.name

    def dataset_path(self):
        return Path(self.paths.dataset) if self.paths.dataset else self.run_dir() / "dataset.csv"

    def model_path(self):
        return Path(self.paths.model) if self.paths.model else self.run_dir() / "model.ckpt"


_ALLEN_CAHN = {"name": "allen_cahn", "params": {}}
_CUCKER_SMALE = {"name": "cucker_smale", "params": {}}
_AC_SIM = {"x0": {"kind": "allen_cahn_bump"}, "T": 10.0, "dt": 0.01}
_CS_SIM = {"x0": {"kind": "spaced", "lo": 0.0, "hi": 0.4}, "T": 10.0, "dt": 0.01}

PRESETS = {
    "test1_value": {
        "name": "test1_value",
        "system": _CUCKER_SMALE,
        "sampling": {"N_s": 1000},
        "training": {"loss_mode": "value", "hidden_layers": 3, "width": 400, "activation": "relu",
                     "mu_V": 0.1, "mu_dV": 2.0, "epochs": 41},
        "simulation": _CS_SIM,
    },
    "test1_direct": {
        "name": "test1_direct",
        "system": _CUCKER_SMALE,
        "sampling": {"N_s": 1000},
        "training": {"loss_mode": "direct", "hidden_layers": 2, "width": 400, "activation": "tanh",
                     "epochs": 20},
        "simulation": _CS_SIM,
    },
    "test2_value": {
        "name": "test2_value",
        "system": _ALLEN_CAHN,
        "sampling": {"N_s": 1000},
        "training": {"loss_mode": "value", "hidden_layers": 3, "width": 500, "activation": "relu",
                     "mu_V": 0.9, "mu_dV": 7.0, "epochs": 71},
        "simulation": _AC_SIM,
    },
    "test2_direct": {
        "name": "test2_direct",
        "system": _ALLEN_CAHN,
        "sampling": {"N_s": 1000},
        "training": {"loss_mode": "direct", "hidden_layers": 4, "width": 500, "activation": "relu",
                     "epochs": 50},
        "simulation": _AC_SIM,
    },
}


def parse_override(text):
    """Split ``section.key=value`` and parse the value as YAML."""
    if "=" not in text:
        raise InvalidConfig(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = key.strip().split(".")
    if not all(path):
        raise InvalidConfig(f"bad override key {key!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"bad override value {raw!r}: {exc}") from None
    return path, value


def apply_overrides(data, overrides):
    data = copy.deepcopy(data)
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"override {text!r} descends into a non-mapping")
        node[path[-1]] = value
    return data


def load_config(source=None, overrides=()):
    """Build a RunConfig from a YAML path or preset name plus overrides."""
    if source is None:
        data = {}
    elif source in PRESETS and not Path(source).exists():
        data = copy.deepcopy(PRESETS[source])
    else:
        try:
            with open(source) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {source}: {exc}") from None
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"{source}: invalid YAML: {exc}") from None
    return RunConfig.from_dict(apply_overrides(data, overrides))


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
