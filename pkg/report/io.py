"""
File formats for the pipeline.

- Matrix: CSV with country codes as header row/column (full precision)
  plus a JSON sidecar {labels, diagonal_strategy, n_all_papers}
- Stats: CSV, one row per country
- VariantResult: CSV at 6 significant digits (missing = empty field) plus a
  JSON sidecar {method, normalized, diagonal_strategy, labels, values}
  holding the full-precision values
- Reports: CSV or JSON, fixed column order, sorted keys

Outputs are staged in an OutputSet and written together, never over an
existing file.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from affinity.variants import VariantResult
from etl.matrix import STATS_COLUMNS, CoauthMatrix, ConfigurationError, CountryStats

logger = logging.getLogger(__name__)

MATRIX_CSV = 'matrix.csv'
MATRIX_SIDECAR = 'matrix.json'
STATS_CSV = 'stats.csv'
INGEST_REPORT = 'ingest_report.json'
CONFIG_COPY = 'config.yaml'

SIGNIFICANT_DIGITS = 6


def format_number(value: Any) -> str:
    """6 significant digits, half-even; '' for missing."""
    if value is None or value is pd.NA:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ''
        text = f"{float(value):.{SIGNIFICANT_DIGITS}g}"
        return '0' if text == '-0' else text
    return str(value)


def format_frame(df: pd.DataFrame) -> pd.DataFrame:
    """Every cell rendered as a fixed-precision string."""
    return df.map(format_number)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if value is None or value is pd.NA:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if math.isnan(value) else float(value)
    return value


def to_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + '\n'


def frame_to_csv(df: pd.DataFrame, index: bool = False) -> str:
    return format_frame(df).to_csv(index=index, lineterminator='\n')


# ============================================================================
# OUTPUT STAGING
# ============================================================================

class OutputSet:
    """Files staged in memory, written in one go to a fresh location."""

    def __init__(self):
        self.files: Dict[str, str] = {}

    def add(self, name: str, text: str):
        if name in self.files:
            raise ValueError(f"Output {name} staged twice")
        self.files[name] = text

    def add_json(self, name: str, obj: Any):
        self.add(name, to_json(obj))

    def add_table(self, stem: str, df: pd.DataFrame, output_format: str, json_obj: Any = None):
        """Stage a report table as <stem>.csv or <stem>.json."""
        if output_format == 'json':
            self.add_json(f"{stem}.json", json_obj if json_obj is not None else _records(df))
        else:
            self.add(f"{stem}.csv", frame_to_csv(df))

    def write(self, out_dir: str) -> List[Path]:
        """
        Write all staged files under out_dir.

        Raises:
            FileExistsError: if any target already exists (nothing is written)
        """
        out = Path(out_dir)
        targets = {name: out / name for name in sorted(self.files)}
        existing = [str(p) for p in targets.values() if p.exists()]
        if existing:
            raise FileExistsError(f"Refusing to overwrite existing outputs: {existing}")

        out.mkdir(parents=True, exist_ok=True)
        for name, path in targets.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(self.files[name])
        logger.info("Wrote %d files to %s", len(targets), out)
        return list(targets.values())


def _records(df: pd.DataFrame) -> List[Dict]:
    return [_jsonable(row) for row in df.to_dict(orient='records')]


# ============================================================================
# MATRIX / STATS / VARIANTS
# ============================================================================

def matrix_csv(matrix: CoauthMatrix) -> str:
    cells = matrix.cells
    if np.all(cells == np.round(cells)):
        cells = cells.astype('int64')
    df = pd.DataFrame(cells, index=list(matrix.labels), columns=list(matrix.labels))
    df.index.name = 'country'
    return df.to_csv(lineterminator='\n')


def matrix_sidecar(matrix: CoauthMatrix) -> Dict:
    return {
        'labels': list(matrix.labels),
        'diagonal_strategy': matrix.diagonal_strategy,
        'n_all_papers': int(matrix.n_all_papers),
    }


def stats_csv(stats: CountryStats) -> str:
    df = stats.table.reset_index()
    return frame_to_csv(df)


def variant_csv(result: VariantResult) -> str:
    df = result.to_frame()
    df.index.name = 'country'
    return format_frame(df).to_csv(lineterminator='\n')


def variant_sidecar(result: VariantResult) -> Dict:
    return {
        'method': result.method,
        'normalized': result.normalized,
        'diagonal_strategy': result.diagonal_strategy,
        'labels': list(result.labels),
        'values': result.values.tolist(),
    }


def variant_stem(method: str, normalized: str = 'none') -> str:
    return method if normalized == 'none' else f"{method}_{normalized}"


def floor_missing(result: VariantResult, floor: float = -1.0) -> VariantResult:
    """Missing off-diagonal cells set to the 'no collaboration' floor."""
    values = result.values.copy()
    off = ~np.eye(len(result.labels), dtype=bool)
    values[off & np.isnan(values)] = floor
    return VariantResult(result.method, result.labels, values, result.diagonal_strategy, result.normalized)


# ============================================================================
# READERS
# ============================================================================

def find_input(name: str, inputs: Sequence[str], what: str) -> Path:
    """Locate `name` inside the first input directory holding it."""
    for base in inputs:
        base = Path(base)
        candidate = base / name if base.is_dir() else None
        if candidate is not None and candidate.exists():
            return candidate
    raise ConfigurationError(f"Missing input: {what} ({name} not found in {list(inputs)})")


def read_json(path: Path) -> Any:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def read_matrix(inputs: Sequence[str]) -> CoauthMatrix:
    sidecar = read_json(find_input(MATRIX_SIDECAR, inputs, 'matrix sidecar'))
    df = pd.read_csv(find_input(MATRIX_CSV, inputs, 'matrix'), dtype={'country': str}, keep_default_na=False)
    labels = sidecar['labels']
    df = df.set_index('country')
    df.columns = df.columns.astype(str)
    df = df.reindex(index=labels, columns=labels)
    if df.isna().any().any():
        raise ConfigurationError("Matrix CSV does not match the labels in its sidecar")
    return CoauthMatrix(
        labels=tuple(labels),
        cells=df.to_numpy(dtype=float),
        diagonal_strategy=sidecar['diagonal_strategy'],
        n_all_papers=int(sidecar['n_all_papers']),
        diagonal_resolved=sidecar['diagonal_strategy'] != 'iterative',
    )


def read_stats(inputs: Sequence[str], required: bool = True) -> Optional[CountryStats]:
    try:
        path = find_input(STATS_CSV, inputs, 'country stats')
    except ConfigurationError:
        if required:
            raise
        return None
    df = pd.read_csv(path, dtype={'country': str}, keep_default_na=False)
    return CountryStats(df.set_index('country')[[c for c in STATS_COLUMNS if c != 'pct_intl']])


def read_variant(inputs: Sequence[str], method: str, normalized: str = 'none') -> VariantResult:
    stem = variant_stem(method, normalized)
    data = read_json(find_input(f"{stem}.json", inputs, f"{stem} variant"))
    values = np.array(
        [[np.nan if v is None else v for v in row] for row in data['values']], dtype=float
    )
    return VariantResult(
        method=data['method'],
        labels=tuple(data['labels']),
        values=values.reshape(len(data['labels']), len(data['labels'])),
        diagonal_strategy=data['diagonal_strategy'],
        normalized=data['normalized'],
    )


def iter_variants(inputs: Sequence[str], methods: Iterable[str], normalize: str) -> List[VariantResult]:
    """Normalized files where present (per `normalize`), raw otherwise."""
    results = []
    for method in methods:
        if normalize != 'none':
            try:
                results.append(read_variant(inputs, method, normalize))
                continue
            except ConfigurationError:
                pass
        results.append(read_variant(inputs, method))
    return results
