"""
Toolkit Configuration
Defaults, experiment configuration files and environment settings shared by every subcommand
"""

import configparser
import dataclasses
import hashlib
import io
import logging
import os
from dataclasses import dataclass, field

from errors import ConfigError

logger = logging.getLogger(__name__)

# Toolkit configuration
TOOLKIT_NAME = 'tevhom'
TOOLKIT_VERSION = '0.3.0'
DEFAULT_OUTPUT_DIR = 'results'
LEDGER_FILENAME = 'runs.db'
THREADS_ENV_VAR = 'TEVHOM_THREADS'
MAX_DEFAULT_WORKERS = 4

# Scattering / detection defaults
DEFAULT_NOISE = 0.01
DEFAULT_DIRECTIONS = 64
DEFAULT_NUM_Z = 25
DEFAULT_K_STEP = 0.005
DEFAULT_SPIKE_FACTOR = 5.0
DEFAULT_SEED = 0

# Mesh policy: h <= epsilon / CELLS_PER_PERIOD for oscillating media
CELLS_PER_PERIOD = 8
DEFAULT_H_MAX = 0.1
DEFAULT_CELL_DIVISIONS = 32
DEFAULT_TAU_STEPS = 200

KNOWN_METHODS = ('auto', 'analytic', 'pencil', 'fourth')
KNOWN_MODES = ('index', 'tensor', 'ratio')
KNOWN_BRANCHES = ('below', 'above')
KNOWN_NORMS = ('herglotz', 'density')


def worker_count():
    """Number of worker threads for sweeps, from TEVHOM_THREADS or the CPU count"""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == '':
        return max(1, min(MAX_DEFAULT_WORKERS, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value


# Which INI section each field lives in
_SECTIONS = {
    'domain': ('domain',),
    'medium': ('preset', 'epsilons'),
    'solver': ('k_min', 'k_max', 'count', 'method', 'h_max', 'cell_divisions',
               'tau_steps', 'strict_regime'),
    'scatter': ('delta', 'directions', 'num_z', 'k_step', 'spike_factor', 'norm', 'seed'),
    'recon': ('mode', 'k1', 'branch'),
    'output': ('output_dir',),
}


@dataclass
class ExperimentConfig:
    """Everything a subcommand needs; round-trips through emit()/parse()"""

    domain: str = 'disk:1'
    preset: str = 'constant:1,3'
    epsilons: tuple = (1.0,)
    k_min: float = 0.5
    k_max: float = 3.0
    count: int = 1
    method: str = 'auto'
    h_max: float = DEFAULT_H_MAX
    cell_divisions: int = DEFAULT_CELL_DIVISIONS
    tau_steps: int = DEFAULT_TAU_STEPS
    strict_regime: bool = True
    delta: float = DEFAULT_NOISE
    directions: int = DEFAULT_DIRECTIONS
    num_z: int = DEFAULT_NUM_Z
    k_step: float = DEFAULT_K_STEP
    spike_factor: float = DEFAULT_SPIKE_FACTOR
    norm: str = 'herglotz'
    seed: int = None
    mode: str = 'index'
    k1: float = None
    branch: str = 'below'
    output_dir: str = DEFAULT_OUTPUT_DIR
    extras: dict = field(default_factory=dict)

    def updated(self, **overrides):
        """Copy with the non-None overrides applied (command-line flags win over the file)"""
        changes = {key: value for key, value in overrides.items() if value is not None}
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    def validate(self):
        """Check every numeric field against the preconditions of the module it feeds"""
        from coeffs import parse_preset
        from mesh import Domain

        problems = []
        try:
            Domain.parse(self.domain)
        except Exception as e:
            problems.append(f"domain: {e}")
        try:
            parse_preset(self.preset)
        except Exception as e:
            problems.append(f"preset: {e}")

        if not self.epsilons:
            problems.append("epsilons: at least one value required")
        for eps in self.epsilons:
            if not eps > 0:
                problems.append(f"epsilons: {eps} is not positive")
        if not self.k_min > 0:
            problems.append(f"k_min must be positive, got {self.k_min}")
        if not self.k_max > self.k_min:
            problems.append(f"k window ({self.k_min}, {self.k_max}) is empty")
        if self.count < 1:
            problems.append(f"count must be at least 1, got {self.count}")
        if self.method not in KNOWN_METHODS:
            problems.append(f"method must be one of {KNOWN_METHODS}, got {self.method!r}")
        if not self.h_max > 0:
            problems.append(f"h_max must be positive, got {self.h_max}")
        if self.cell_divisions < 2:
            problems.append(f"cell_divisions must be at least 2, got {self.cell_divisions}")
        if self.tau_steps < 2:
            problems.append(f"tau_steps must be at least 2, got {self.tau_steps}")
        if not self.delta >= 0:
            problems.append(f"delta must be nonnegative, got {self.delta}")
        if self.directions not in (16, 32, 64, 128, 256):
            problems.append(f"directions must be a power of two in [16, 256], got {self.directions}")
        if self.num_z < 1:
            problems.append(f"num_z must be at least 1, got {self.num_z}")
        if not self.k_step > 0:
            problems.append(f"k_step must be positive, got {self.k_step}")
        if not self.spike_factor > 1:
            problems.append(f"spike_factor must exceed 1, got {self.spike_factor}")
        if self.norm not in KNOWN_NORMS:
            problems.append(f"norm must be one of {KNOWN_NORMS}, got {self.norm!r}")
        if self.seed is not None and self.seed < 0:
            problems.append(f"seed must be nonnegative, got {self.seed}")
        if self.mode not in KNOWN_MODES:
            problems.append(f"mode must be one of {KNOWN_MODES}, got {self.mode!r}")
        if self.k1 is not None and not self.k1 > 0:
            problems.append(f"k1 must be positive, got {self.k1}")
        if self.branch not in KNOWN_BRANCHES:
            problems.append(f"branch must be one of {KNOWN_BRANCHES}, got {self.branch!r}")

        if problems:
            raise ConfigError('; '.join(problems))
        return self

    def emit(self):
        """Canonical INI text; parse(emit()) reproduces the config"""
        parser = configparser.ConfigParser(interpolation=None)
        for section, keys in _SECTIONS.items():
            parser[section] = {key: _format_value(getattr(self, key)) for key in keys}
        if self.extras:
            parser['extras'] = {key: str(value) for key, value in sorted(self.extras.items())}
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    @classmethod
    def parse(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e}")

        types = {f.name: f.type for f in dataclasses.fields(cls)}
        defaults = cls()
        values = {}
        for section in parser.sections():
            if section == 'extras':
                values['extras'] = dict(parser[section])
                continue
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser[section].items():
                if key not in _SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                values[key] = _parse_value(key, raw, types[key], getattr(defaults, key))
        return cls(**values)

    @classmethod
    def load(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return cls.parse(f.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")

    def config_hash(self):
        return hashlib.sha256(self.emit().encode('utf-8')).hexdigest()[:16]

    def to_dict(self):
        return dataclasses.asdict(self)


def _format_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ', '.join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key, raw, declared, default):
    raw = raw.strip()
    if raw == '':
        return None
    try:
        if key == 'epsilons':
            return tuple(_parse_number(part) for part in raw.split(',') if part.strip())
        if isinstance(default, bool) or declared is bool or declared == 'bool':
            lowered = raw.lower()
            if lowered not in ('true', 'false', 'yes', 'no', '1', '0'):
                raise ValueError(raw)
            return lowered in ('true', 'yes', '1')
        if declared in (int, 'int'):
            return int(raw)
        if declared in (float, 'float'):
            return _parse_number(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}")
    return raw


def _parse_number(text):
    """Floats, plus simple fractions such as 1/3"""
    text = text.strip()
    if '/' in text:
        num, den = text.split('/', 1)
        return float(num) / float(den)
    return float(text)


if __name__ == "__main__":
    print(ExperimentConfig().emit())
