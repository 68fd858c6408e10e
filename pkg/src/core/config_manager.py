import os
import json
import hashlib
from dataclasses import dataclass, field, asdict, fields
from typing import Dict, Any, Optional, List, Tuple

from core.errors import ConfigInvalid
from core.presets import FLOW_NAMES
from core.quasimorphisms import QUASIMORPHISM_NAMES

SCHEMA_VERSION = 1
SEED_ENV_VAR = "PARAMORPHISM_SEED"
EXPERIMENTS = ("p1", "p2", "p3", "p4", "length", "frag", "nondeg", "cocycle", "ishida", "d1", "antisymmetry",
               "determinism")

# Keys that change where results go or how fast they come, never what they are
_UNHASHED_KEYS = ("out", "workers")


def parse_k_range(value) -> List[int]:
    """Accept '1..20', '1,2,5', a single int or a list of ints"""
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    text = str(value).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigInvalid(f"Invalid k range '{value}'") from e


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigInvalid(f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from e


@dataclass
class ExperimentConfig:
    """One experiment run. All defaults are listed here; files and flags override them."""
    experiment: str = "p2"
    flow: str = "eggbeater"
    flow_params: Dict[str, Any] = field(default_factory=dict)
    qm: str = "cross-linking"
    qm_params: Dict[str, Any] = field(default_factory=dict)
    n: int = 4
    samples: int = 2000
    k_range: List[int] = field(default_factory=lambda: list(range(1, 21)))
    seed: int = 0
    out: str = "out"
    workers: int = 1
    step_size: float = 0.01
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(f"Unknown config keys: {', '.join(unknown)}")
        values = dict(data)
        if "k_range" in values:
            values["k_range"] = parse_k_range(values["k_range"])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def hashed_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in self.to_dict().items() if k not in _UNHASHED_KEYS}

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; stable under key reordering"""
        canonical = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_experiment_config(config: ExperimentConfig) -> Tuple[bool, str]:
    """Validate an experiment configuration"""
    if config.schema_version != SCHEMA_VERSION:
        return False, f"Unsupported schema_version {config.schema_version} (expected {SCHEMA_VERSION})"
    if config.experiment not in EXPERIMENTS:
        return False, f"Invalid experiment. Must be one of: {', '.join(EXPERIMENTS)}"
    if config.flow not in FLOW_NAMES:
        return False, f"Invalid flow. Must be one of: {', '.join(FLOW_NAMES)}"
    if config.qm not in QUASIMORPHISM_NAMES:
        return False, f"Invalid quasimorphism. Must be one of: {', '.join(QUASIMORPHISM_NAMES)}"
    if not isinstance(config.n, int) or config.n <= 3:
        return False, f"n > 3 is required, got n={config.n}"
    if config.n > 8:
        return False, f"n up to 8 is supported, got n={config.n}"
    if not isinstance(config.samples, int) or config.samples < 10:
        return False, f"samples must be an integer >= 10, got {config.samples}"
    ks = config.k_range
    if not ks or any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
        return False, f"k_range must be increasing positive integers, got {ks}"
    if not isinstance(config.workers, int) or config.workers < 1:
        return False, f"workers must be >= 1, got {config.workers}"
    if not (isinstance(config.step_size, (int, float)) and 0.0 < config.step_size <= 0.1):
        return False, f"step_size must lie in (0, 0.1], got {config.step_size}"
    if not isinstance(config.flow_params, dict) or not isinstance(config.qm_params, dict):
        return False, "flow_params and qm_params must be objects"
    return True, "Configuration is valid"


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a flat JSON experiment file"""
    if not os.path.exists(path):
        raise ConfigInvalid(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigInvalid(f"Config file {path} must hold a JSON object")
    return data


def resolve_config(file_data: Optional[Dict[str, Any]] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Defaults, then env seed, then file keys, then flags; the result is validated"""
    data: Dict[str, Any] = {"seed": default_seed()}
    data.update(file_data or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("flow_params", "qm_params"):
            merged = dict(data.get(key, {}))
            merged.update(value)
            data[key] = merged
        else:
            data[key] = value
    try:
        config = ExperimentConfig.from_dict(data)
    except TypeError as e:
        raise ConfigInvalid(f"Invalid config: {e}") from e
    ok, message = validate_experiment_config(config)
    if not ok:
        raise ConfigInvalid(message)
    return config


class ConfigManager:
    """JSON-based configuration manager: global settings plus named experiment profiles"""

    def __init__(self, config_dir: str = "config"):
        self.config_dir = config_dir
        self.global_config_file = os.path.join(config_dir, "config.json")
        self.experiments_dir = os.path.join(config_dir, "experiments")

        os.makedirs(config_dir, exist_ok=True)
        os.makedirs(self.experiments_dir, exist_ok=True)

        self.global_config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self):
        """Load global configuration from JSON file"""
        if os.path.exists(self.global_config_file):
            with open(self.global_config_file, "r", encoding="utf-8") as f:
                try:
                    self.global_config = json.load(f)
                except Exception:
                    # If corrupted, recreate defaults
                    self._create_default_global_config()
        else:
            self._create_default_global_config()

    def _create_default_global_config(self):
        self.global_config = {
            "log_level": "INFO",
            "log_file": "logs/paramorphism.log",
            "output_dir": "out",
            "ledger_path": "out/runs.db",
            "template_dir": "templates",
        }
        self.save_config()

    def save_config(self):
        """Save global configuration to JSON file"""
        with open(self.global_config_file, "w", encoding="utf-8") as f:
            json.dump(self.global_config, f, indent=2, ensure_ascii=False)

    def _get_experiment_path(self, name: str) -> str:
        safe_name = name.strip().lower()
        return os.path.join(self.experiments_dir, f"{safe_name}.json")

    def get_experiment_config(self, name: str) -> Dict[str, Any]:
        """Raw JSON of a named experiment profile"""
        path = self._get_experiment_path(name)
        if not os.path.exists(path):
            raise ValueError(f"Experiment profile '{name}' not found")
        return load_config_file(path)

    def save_experiment_config(self, name: str, config: ExperimentConfig):
        """Persist a profile; output location and worker count stay machine-local"""
        data = config.hashed_dict()
        with open(self._get_experiment_path(name), "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)

    def get_available_experiments(self) -> List[str]:
        names = [os.path.splitext(f)[0] for f in os.listdir(self.experiments_dir) if f.endswith(".json")]
        return sorted(names)

    def delete_experiment(self, name: str) -> bool:
        path = self._get_experiment_path(name)
        if os.path.exists(path):
            os.remove(path)
            return True
        return False

    def validate_experiment(self, name: str) -> Tuple[bool, str]:
        try:
            resolve_config(self.get_experiment_config(name))
        except (ValueError, ConfigInvalid) as e:
            return False, str(e)
        return True, "Configuration is valid"

    def get_log_config(self) -> Dict[str, str]:
        return {
            "level": self.global_config.get("log_level", "INFO"),
            "file": self.global_config.get("log_file", "logs/paramorphism.log"),
        }

    def get_ledger_path(self) -> str:
        return os.path.abspath(self.global_config.get("ledger_path", "out/runs.db"))

    def get_output_dir(self) -> str:
        return self.global_config.get("output_dir", "out")

    def get_template_dir(self) -> str:
        """Optional directory whose Jinja2 templates override the built-in report layout"""
        return self.global_config.get("template_dir", "templates")

    def create_sample_profiles(self):
        """Write the growth, boundedness and length experiments as ready-made profiles"""
        growth = ExperimentConfig(experiment="p2", flow="eggbeater", flow_params={"pattern": "A13"},
                                  qm="cross-linking", samples=5000, seed=7)
        rotation = ExperimentConfig(experiment="p2", flow="rotation", flow_params={"angle": 1.0},
                                    qm="cross-linking", samples=2000, k_range=list(range(1, 11)))
        bounded = ExperimentConfig(experiment="p3", flow="eggbeater", qm="cross-linking", samples=2000)
        length = ExperimentConfig(experiment="length", flow="rotation", flow_params={"angle": 1.0})
        collar = ExperimentConfig(experiment="frag", flow="collar", flow_params={"rate": 1.0, "modes": [[2, 0.3]]})

        self.save_experiment_config("eggbeater_growth", growth)
        self.save_experiment_config("rotation_growth", rotation)
        self.save_experiment_config("equator_bounded", bounded)
        self.save_experiment_config("rotation_length", length)
        self.save_experiment_config("collar_scaling", collar)
