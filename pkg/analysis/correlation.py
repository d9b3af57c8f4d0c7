"""
Pearson and Spearman correlation over aligned country vectors.

Vectors are paired by country label; pairs with a missing value on
either side, or with a floor value (NPAI = -1, "no collaboration"), are
excluded with a logged reason before any coefficient is computed.
Undefined coefficients raise CorrelationUndefined instead of returning NaN.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

MIN_PAIRS = 3


class CorrelationUndefined(ValueError):
    """Correlation cannot be computed (too few pairs, zero variance)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass
class PairedVector:
    """Two value sequences aligned on the same country labels."""
    labels: List[str]
    x: np.ndarray
    y: np.ndarray
    exclusion_log: List[Tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.labels = list(self.labels)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (len(self.labels) == len(self.x) == len(self.y)):
            raise ValueError(
                f"Misaligned vectors: {len(self.labels)} labels, {len(self.x)} x, {len(self.y)} y"
            )

    def __len__(self):
        return len(self.labels)

    def complete(self) -> Tuple[np.ndarray, np.ndarray]:
        """x, y restricted to pairs with both values present."""
        keep = ~(np.isnan(self.x) | np.isnan(self.y))
        return self.x[keep], self.y[keep]


def pair_series(
    x: pd.Series,
    y: pd.Series,
    floor_x: Optional[float] = None,
    floor_y: Optional[float] = None
) -> PairedVector:
    """
    Align two label-indexed series and apply the exclusion rules.

    Order: labels missing on either side first, then pairs where x equals
    floor_x or y equals floor_y.

    Args:
        x, y: Series indexed by country code
        floor_x, floor_y: Value marking "no collaboration" (e.g. -1 for NPAI)

    Returns:
        PairedVector with the surviving labels in sorted order
    """
    labels = sorted(set(x.index) | set(y.index))
    xa = x.reindex(labels).to_numpy(dtype=float)
    ya = y.reindex(labels).to_numpy(dtype=float)

    missing = np.isnan(xa) | np.isnan(ya)
    floored = np.zeros(len(labels), dtype=bool)
    if floor_x is not None:
        floored |= xa == floor_x
    if floor_y is not None:
        floored |= ya == floor_y
    floored &= ~missing
    keep = ~(missing | floored)

    log = [(labels[i], 'missing') for i in np.flatnonzero(missing)]
    log += [(labels[i], 'no collaboration') for i in np.flatnonzero(floored)]

    return PairedVector(
        labels=[labels[i] for i in np.flatnonzero(keep)],
        x=xa[keep],
        y=ya[keep],
        exclusion_log=log,
    )


def _checked(v: PairedVector) -> Tuple[np.ndarray, np.ndarray]:
    x, y = v.complete()
    if len(x) < MIN_PAIRS:
        raise CorrelationUndefined(f"insufficient overlap ({len(x)} usable pairs, need {MIN_PAIRS})")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise CorrelationUndefined("zero variance")
    return x, y


def _defined(r: float) -> float:
    if not np.isfinite(r):
        raise CorrelationUndefined("zero variance")
    return float(r)


def pearson(v: PairedVector) -> float:
    """Product-moment correlation of the complete pairs of v."""
    x, y = _checked(v)
    return _defined(stats.pearsonr(x, y).statistic)


def spearman(v: PairedVector) -> float:
    """Rank correlation; tied values share their average rank."""
    x, y = _checked(v)
    return _defined(stats.spearmanr(x, y).statistic)
