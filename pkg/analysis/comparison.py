"""
Variant comparison battery

- compare_variants: Pearson/Spearman between every pair of PAI variants,
  per target row (default) or over the flattened off-diagonal cells
- size_dependence: correlation between a target's partner values and the
  partners' size (all papers or international papers), with R^2 of the
  linear fit and the scatter points
- value_rank_table: per-partner value and descending rank for each variant
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats as sps

from affinity.variants import VariantResult
from analysis.correlation import CorrelationUndefined, pair_series, pearson, spearman
from etl.matrix import ConfigurationError, CountryStats

logger = logging.getLogger(__name__)

COMPARISON_MODES = ('row', 'flat')

SIZE_MEASURES = {
    'all_papers': 'total_papers',
    'intl_papers': 'intl_papers',
}

NPAI_FLOOR = -1.0


@dataclass
class ComparisonReport:
    """Correlation table for one target (or the whole matrix in flat mode)."""
    target: Optional[str]
    mode: str
    table: pd.DataFrame

    def to_dict(self) -> Dict:
        return {
            'target': self.target,
            'mode': self.mode,
            'pairs': _records(self.table),
        }


@dataclass
class SizeDependence:
    """Size-vs-PAI correlation for one target, variant and size measure."""
    method: str
    target: str
    size_measure: str
    pearson: Optional[float]
    spearman: Optional[float]
    n_used: int
    r_squared: Optional[float] = None
    reason: Optional[str] = None
    scatter: pd.DataFrame = field(default_factory=pd.DataFrame)

    def as_row(self) -> Dict:
        return {
            'method': self.method,
            'target': self.target,
            'size_measure': self.size_measure,
            'pearson': self.pearson,
            'spearman': self.spearman,
            'r_squared': self.r_squared,
            'n_used': self.n_used,
            'reason': self.reason,
        }


def _records(df: pd.DataFrame) -> List[Dict]:
    """DataFrame rows as dicts with NaN turned into None."""
    return [
        {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in row.items()}
        for row in df.to_dict(orient='records')
    ]


def _floor(result: VariantResult) -> Optional[float]:
    return NPAI_FLOOR if result.normalized != 'none' else None


def _vector(result: VariantResult, target: Optional[str], mode: str) -> pd.Series:
    if mode == 'row':
        return result.row(target)
    n = len(result.labels)
    off = ~np.eye(n, dtype=bool)
    index = [f"{a}|{b}" for a in result.labels for b in result.labels]
    return pd.Series(result.values.ravel(), index=index)[off.ravel()]


def correlate_results(
    x: VariantResult,
    y: VariantResult,
    target: Optional[str] = None,
    mode: str = 'row'
) -> Dict:
    """
    Pearson and Spearman between two results over the same aligned pairs.

    Returns:
        Dict with method_x, method_y, pearson, spearman, n_used, reason
        (coefficients NaN and reason set when undefined)
    """
    if mode not in COMPARISON_MODES:
        raise ConfigurationError(f"Unknown comparison mode: {mode}. Use one of {COMPARISON_MODES}")
    if x.labels != y.labels:
        raise ConfigurationError(f"{x.name} and {y.name} do not share labels")
    if mode == 'row' and target is None:
        raise ConfigurationError("Row comparison needs a target country")

    paired = pair_series(_vector(x, target, mode), _vector(y, target, mode), _floor(x), _floor(y))
    row = {
        'method_x': x.name,
        'method_y': y.name,
        'pearson': np.nan,
        'spearman': np.nan,
        'n_used': len(paired),
        'reason': None,
    }
    try:
        row['pearson'] = pearson(paired)
        row['spearman'] = spearman(paired)
    except CorrelationUndefined as e:
        row['reason'] = e.reason
    return row


def compare_variants(
    target: Optional[str],
    results: Sequence[VariantResult],
    mode: str = 'row'
) -> ComparisonReport:
    """
    Correlate every pair of variants.

    Args:
        target: Country whose partner row is compared (ignored in flat mode)
        results: VariantResults sharing labels; pairs follow the given order
        mode: 'row' (target's partners) or 'flat' (all off-diagonal cells)

    Returns:
        ComparisonReport with one row per method pair
    """
    results = list(results)
    if target is not None and results:
        results[0].index(target)

    rows = [correlate_results(x, y, target, mode) for x, y in itertools.combinations(results, 2)]
    table = pd.DataFrame(rows, columns=['method_x', 'method_y', 'pearson', 'spearman', 'n_used', 'reason'])
    logger.info("Compared %d variant pairs for %s", len(rows), target or 'all cells')
    return ComparisonReport(target=target if mode == 'row' else None, mode=mode, table=table)


def size_dependence(
    variant: VariantResult,
    stats: CountryStats,
    target: str,
    size_measure: str = 'all_papers'
) -> SizeDependence:
    """
    Correlate a target's partner values against partner size.

    Partners without collaboration are removed first: NPAI == -1 for a
    normalized variant, PAI == 0 (the same cells) for a raw one.

    Args:
        variant: Raw or normalized VariantResult
        stats: Country stats supplying partner sizes
        target: Country code
        size_measure: 'all_papers' or 'intl_papers'

    Returns:
        SizeDependence; pearson/spearman None with a reason when undefined
    """
    if size_measure not in SIZE_MEASURES:
        raise ConfigurationError(f"Unknown size measure: {size_measure}. Use one of {list(SIZE_MEASURES)}")

    values = variant.row(target)
    sizes = pd.Series(stats.column(SIZE_MEASURES[size_measure], values.index), index=values.index)
    floor = NPAI_FLOOR if variant.normalized != 'none' else 0.0
    paired = pair_series(sizes, values, floor_y=floor)

    scatter = pd.DataFrame({'partner': paired.labels, 'size': paired.x, 'value': paired.y})
    result = SizeDependence(
        method=variant.name,
        target=target,
        size_measure=size_measure,
        pearson=None,
        spearman=None,
        n_used=len(paired),
        scatter=scatter,
    )
    try:
        result.pearson = pearson(paired)
        result.spearman = spearman(paired)
        result.r_squared = float(sps.linregress(paired.x, paired.y).rvalue ** 2)
    except CorrelationUndefined as e:
        result.reason = e.reason
    return result


def value_rank_table(target: str, results: Sequence[VariantResult]) -> pd.DataFrame:
    """
    Per-partner value and descending rank (ties share the lowest rank)
    for each variant: the data behind value/rank curves.
    """
    frames = []
    for result in results:
        row = result.row(target)
        frames.append(pd.DataFrame({
            'method': result.name,
            'partner': row.index,
            'value': row.to_numpy(),
            'rank': row.rank(method='min', ascending=False).astype('Int64').to_numpy(),
        }))
    if not frames:
        return pd.DataFrame(columns=['method', 'partner', 'value', 'rank'])
    return pd.concat(frames, ignore_index=True)
