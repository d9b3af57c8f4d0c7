"""
Probabilistic Affinity Index (PAI) variants

Implements the seven PAI definitions compared in the analysis:

| Method | Annotation                | Diagonal     |
|--------|---------------------------|--------------|
| M1     | non_overlapping_0         | zero         |
| M2     | overlapping_0             | zero         |
| M3     | overlapping_iterative     | iterative    |
| M4     | overlapping_all           | all_papers   |
| M5     | overlapping_international | intl_papers  |
| M6     | overlapping_intra         | intra_papers |
| M7     | self_exclusive            | zero         |

M1(i,j) = n_all * n_ij / (n_i * n_j)  with n_i paper-level international counts
Mr(i,j) = n(..) * n_ij / (m_i * m_j)    with m_i matrix margins (r = 2..6)
M7(i,j) = n_ij * (n(..) - m_i) / (m_i * m_j)

and the two NPAI normalizations onto [-1, 1):
power  (PAI^2 - 1) / (PAI^2 + 1)
linear (PAI - 1) / (PAI + 1)

Missing cells (zero denominators) are NaN throughout.
"""

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from affinity.diagonal import DiagonalFixpointReport, iterate_diagonal
from etl.matrix import (
    CoauthMatrix,
    ConfigurationError,
    CountryStats,
    UnknownCountryError,
)

logger = logging.getLogger(__name__)

METHODS = ('M1', 'M2', 'M3', 'M4', 'M5', 'M6', 'M7')
SIMILARITY_METHODS = ('SALTON',)

METHOD_ANNOTATIONS = {
    'M1': 'non_overlapping_0',
    'M2': 'overlapping_0',
    'M3': 'overlapping_iterative',
    'M4': 'overlapping_all',
    'M5': 'overlapping_international',
    'M6': 'overlapping_intra',
    'M7': 'self_exclusive',
}

METHOD_DIAGONAL = {
    'M1': 'zero',
    'M2': 'zero',
    'M3': 'iterative',
    'M4': 'all_papers',
    'M5': 'intl_papers',
    'M6': 'intra_papers',
    'M7': 'zero',
}

OVERLAPPING_METHOD = {
    'zero': 'M2',
    'iterative': 'M3',
    'all_papers': 'M4',
    'intl_papers': 'M5',
    'intra_papers': 'M6',
}

NORMALIZATION_MODES = ('none', 'power', 'linear')


class NormalizationError(ValueError):
    """Normalizing an already normalized result."""


def resolve_method(name: str) -> str:
    method = name.strip().upper()
    if method not in METHODS:
        raise ConfigurationError(f"Unknown method: {name}. Use one of {list(METHODS)}")
    return method


@dataclass(frozen=True, eq=False)
class VariantResult:
    """A PAI (or NPAI) matrix tagged with how it was produced."""
    method: str
    labels: Tuple[str, ...]
    values: np.ndarray
    diagonal_strategy: str = 'zero'
    normalized: str = 'none'

    def __post_init__(self):
        if self.method not in METHODS + SIMILARITY_METHODS:
            raise ConfigurationError(f"Unknown method: {self.method}")
        if self.normalized not in NORMALIZATION_MODES:
            raise ConfigurationError(f"Unknown normalization: {self.normalized}")
        values = np.array(self.values, dtype=float)
        n = len(self.labels)
        if values.size == 0:
            values = values.reshape(0, 0)
        if values.shape != (n, n):
            raise ValueError(f"values shape {values.shape} does not match {n} labels")
        values.flags.writeable = False
        object.__setattr__(self, 'labels', tuple(self.labels))
        object.__setattr__(self, 'values', values)

    @property
    def name(self) -> str:
        return self.method if self.normalized == 'none' else f"{self.method}_{self.normalized}"

    def index(self, code: str) -> int:
        try:
            return self.labels.index(code)
        except ValueError:
            raise UnknownCountryError(code, self.labels)

    def row(self, target: str, exclude_self: bool = True) -> pd.Series:
        """Values of the target's row, indexed by partner."""
        i = self.index(target)
        row = pd.Series(self.values[i], index=list(self.labels), name=self.name)
        if exclude_self:
            row = row.drop(target)
        return row

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.labels), columns=list(self.labels))


# ============================================================================
# RAW PAI
# ============================================================================

def _pair_ratio(links: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """n_ij / (s_i * s_j), NaN on rows/columns with s == 0."""
    valid = sizes > 0
    denom = np.outer(sizes, sizes)
    ratio = np.full(links.shape, np.nan)
    mask = np.outer(valid, valid)
    ratio[mask] = links[mask] / denom[mask]
    return ratio


def _warn_all_zero(method: str):
    msg = f"{method}: matrix has no links; every cell is missing"
    logger.warning(msg)
    warnings.warn(msg)


def pai_m1(matrix: CoauthMatrix, stats: CountryStats) -> VariantResult:
    """
    Non-overlapping PAI.

    Args:
        matrix: Zero-diagonal co-authorship matrix
        stats: Country stats; intl_papers supplies n_i

    Returns:
        VariantResult for M1 (diagonal 0, missing where n_i == 0)
    """
    if matrix.diagonal_strategy != 'zero':
        raise ConfigurationError(
            f"M1 requires a zero-diagonal matrix, got '{matrix.diagonal_strategy}'"
        )
    n_i = stats.column('intl_papers', matrix.labels)

    values = matrix.n_all_papers * _pair_ratio(matrix.cells, n_i)
    valid = n_i > 0
    values[np.diag_indices_from(values)] = np.where(valid, 0.0, np.nan)

    return VariantResult('M1', matrix.labels, values, 'zero')


def pai_overlapping(matrix: CoauthMatrix) -> VariantResult:
    """
    Overlapping PAI (M2-M6, chosen by the matrix's diagonal strategy).

    Every cell is computed, the diagonal included.

    Args:
        matrix: Matrix with its diagonal already populated

    Returns:
        VariantResult; rows/columns with zero margin are missing
    """
    if not matrix.diagonal_resolved:
        raise ConfigurationError(
            "Iterative diagonal not resolved; run iterate_diagonal() first"
        )
    method = OVERLAPPING_METHOD[matrix.diagonal_strategy]
    if matrix.total == 0:
        _warn_all_zero(method)

    values = matrix.total * _pair_ratio(matrix.cells, matrix.margins)
    return VariantResult(method, matrix.labels, values, matrix.diagonal_strategy)


def pai_m7(matrix: CoauthMatrix) -> VariantResult:
    """
    Self-exclusive PAI. Asymmetric: M7(i,j) / M7(j,i) = (T - m_i) / (T - m_j).

    Args:
        matrix: Zero-diagonal co-authorship matrix

    Returns:
        VariantResult for M7
    """
    if matrix.diagonal_strategy != 'zero':
        raise ConfigurationError(
            f"M7 requires a zero-diagonal matrix, got '{matrix.diagonal_strategy}'"
        )
    if matrix.total == 0:
        _warn_all_zero('M7')

    margins = matrix.margins
    values = (matrix.total - margins)[:, np.newaxis] * _pair_ratio(matrix.cells, margins)
    return VariantResult('M7', matrix.labels, values, 'zero')


# ============================================================================
# NORMALIZATION
# ============================================================================

def normalize(pai: VariantResult, mode: str = 'power') -> VariantResult:
    """
    Map PAI onto [-1, 1) with 0 as the neutral value.

    Args:
        pai: Raw (unnormalized) result
        mode: 'power' for (PAI^2 - 1)/(PAI^2 + 1), 'linear' for (PAI - 1)/(PAI + 1)

    Returns:
        Normalized VariantResult; missing cells stay missing
    """
    if pai.normalized != 'none':
        raise NormalizationError(f"{pai.name} is already normalized ({pai.normalized})")
    if mode not in ('power', 'linear'):
        raise ConfigurationError(f"Unknown normalization mode: {mode}. Use 'power' or 'linear'")
    if pai.method == 'M7':
        msg = "M7 is conventionally reported without normalization; normalizing anyway"
        logger.warning(msg)
        warnings.warn(msg)

    p = pai.values
    if mode == 'power':
        p = p * p
    with np.errstate(invalid='ignore'):
        values = (p - 1.0) / (p + 1.0)

    return replace(pai, values=values, normalized=mode)


# ============================================================================
# DISPATCH
# ============================================================================

def compute_variant(
    method: str,
    matrix: CoauthMatrix,
    stats: Optional[CountryStats] = None,
    tolerance: float = 1e-9,
    max_iter: int = 1000,
    update_rule: str = 'neutral'
) -> Tuple[VariantResult, Optional[DiagonalFixpointReport]]:
    """
    Compute one method from any matrix sharing the same links.

    The diagonal is re-derived for the method, so a single ingested matrix
    serves all seven variants.

    Args:
        method: 'M1'..'M7'
        matrix: Co-authorship matrix (any diagonal strategy)
        stats: Country stats (required for M1, M4, M5, M6)
        tolerance, max_iter, update_rule: Diagonal sweep settings for M3

    Returns:
        (VariantResult, DiagonalFixpointReport for M3 else None)
    """
    method = resolve_method(method)
    if method in ('M1', 'M4', 'M5', 'M6') and stats is None:
        raise ConfigurationError(f"{method} requires the country stats input")

    if method == 'M1':
        return pai_m1(matrix.zero_diagonal(), stats), None
    if method == 'M7':
        return pai_m7(matrix.zero_diagonal()), None
    if method == 'M3':
        iterated, report = iterate_diagonal(matrix, tolerance, max_iter, update_rule)
        return pai_overlapping(iterated), report

    return pai_overlapping(matrix.with_diagonal(METHOD_DIAGONAL[method], stats)), None


def compute_variants(
    methods: Sequence[str],
    matrix: CoauthMatrix,
    stats: Optional[CountryStats] = None,
    **kwargs
) -> dict:
    """Compute several methods; returns {method: (VariantResult, report)}."""
    return {resolve_method(m): compute_variant(m, matrix, stats, **kwargs) for m in methods}
