"""
Run configuration for the command-line pipeline.

A run is described by a YAML mapping of key: value pairs; command-line
flags override file values, and the effective configuration is written
next to the outputs so the run can be repeated.
"""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from affinity.diagonal import UPDATE_RULES
from affinity.variants import METHODS, NORMALIZATION_MODES, resolve_method
from analysis.comparison import COMPARISON_MODES, SIZE_MEASURES
from etl.matrix import ConfigurationError, resolve_diagonal_strategy
from etl.records import RECORD_FORMATS

OUTPUT_FORMATS = ('csv', 'json')


@dataclass
class RunConfig:
    """Configuration for one pipeline step."""
    # Inputs
    inputs: List[str] = field(default_factory=list)
    aliases: Optional[str] = None
    input_format: Optional[str] = None  # inferred from the file suffix when None
    year_from: Optional[int] = None
    year_to: Optional[int] = None

    # Matrix and variants
    diagonal: str = 'zero'
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    normalize: str = 'power'
    normalize_m7: bool = False
    tolerance: float = 1e-9
    max_iter: int = 1000
    update_rule: str = 'neutral'
    allow_nonconverged: bool = False

    # Analysis
    targets: List[str] = field(default_factory=list)
    top_n: int = 10
    comparison_mode: str = 'row'
    size_measures: List[str] = field(default_factory=lambda: list(SIZE_MEASURES))
    missing_as_floor: bool = False

    # Outputs
    out: Optional[str] = None
    output_format: str = 'csv'

    def __post_init__(self):
        self.methods = [resolve_method(m) for m in self.methods]
        if not self.methods:
            raise ConfigurationError("methods must not be empty")
        self.diagonal = resolve_diagonal_strategy(self.diagonal)

        if self.normalize not in NORMALIZATION_MODES:
            raise ConfigurationError(f"Unknown normalization: {self.normalize}. Use one of {NORMALIZATION_MODES}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigurationError(f"Unknown output format: {self.output_format}. Use one of {OUTPUT_FORMATS}")
        if self.input_format is not None and self.input_format not in RECORD_FORMATS:
            raise ConfigurationError(f"Unknown input format: {self.input_format}. Use one of {RECORD_FORMATS}")
        if self.update_rule not in UPDATE_RULES:
            raise ConfigurationError(f"Unknown update rule: {self.update_rule}. Use one of {UPDATE_RULES}")
        if self.comparison_mode not in COMPARISON_MODES:
            raise ConfigurationError(f"Unknown comparison mode: {self.comparison_mode}")
        unknown = [m for m in self.size_measures if m not in SIZE_MEASURES]
        if unknown:
            raise ConfigurationError(f"Unknown size measures: {unknown}. Use {list(SIZE_MEASURES)}")

        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.top_n < 1:
            raise ConfigurationError(f"top_n must be >= 1, got {self.top_n}")

        if self.out is not None:
            out = Path(self.out).resolve()
            for path in self.inputs + ([self.aliases] if self.aliases else []):
                if Path(path).resolve() == out:
                    raise ConfigurationError(f"Input path {path} is the output directory")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _map_paths(values: Dict[str, Any], convert) -> Dict[str, Any]:
    values = dict(values)
    if values.get('inputs') is not None:
        values['inputs'] = [convert(p) for p in values['inputs']]
    if values.get('aliases') is not None:
        values['aliases'] = convert(values['aliases'])
    return values


def load_config(path: str) -> Dict[str, Any]:
    """
    Read a YAML run configuration.

    Relative paths under `inputs` and `aliases` are taken relative to the
    directory holding the config file, so a written config.yaml can be fed
    back with --config from any working directory.

    Returns:
        Mapping of RunConfig field names to values
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}

    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must contain a key: value mapping")

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"Unknown config keys in {path}: {unknown}")
    if isinstance(data.get('inputs'), str):
        data['inputs'] = [data['inputs']]

    base = path.parent
    return _map_paths(data, lambda p: str(base / p))


def build_config(file_values: Optional[Dict[str, Any]] = None, **overrides) -> RunConfig:
    """Merge file values with flag overrides (flags win; None means unset)."""
    values = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def dump_config(config: RunConfig) -> str:
    """
    Effective configuration as YAML with sorted keys.

    `out` is omitted because the copy is written inside it, and input paths
    are written relative to the output directory. The copy therefore reads
    the same wherever the run directory sits.
    """
    values = config.to_dict()
    out = values.pop('out')
    if out is not None:
        out_dir = Path(out).resolve()
        values = _map_paths(
            values, lambda p: Path(os.path.relpath(Path(p).resolve(), out_dir)).as_posix()
        )
    return yaml.safe_dump(values, sort_keys=True, default_flow_style=False)
