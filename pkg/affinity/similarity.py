"""
Size-dependent companions to PAI: the Affinity Index (AFI) and the
Salton/Ochiai similarity between countries.
"""

import numpy as np
import pandas as pd

from affinity.variants import VariantResult
from etl.matrix import CoauthMatrix, CountryStats


class ZeroMarginError(ValueError):
    """The country has no international co-authorship links."""

    def __init__(self, code: str):
        self.code = code
        super().__init__(f"Country '{code}' has no international co-authorship links")


def afi(matrix: CoauthMatrix, target: str) -> pd.Series:
    """
    Share of the target's international links held by each partner.

    AFI(target, j) = n_target,j / sum_k n_target,k, taken on the
    zero-diagonal matrix, so the values sum to 1 over partners.

    Args:
        matrix: Co-authorship matrix (its diagonal is ignored)
        target: Country code

    Returns:
        Series indexed by partner code (target excluded), in label order
    """
    i = matrix.index(target)
    links = matrix.off_diagonal()[i]
    margin = links.sum()
    if margin <= 0:
        raise ZeroMarginError(target)

    shares = pd.Series(links / margin, index=list(matrix.labels), name='afi')
    return shares.drop(target)


def salton_ochiai(stats: CountryStats, matrix: CoauthMatrix) -> VariantResult:
    """
    Salton (Ochiai) similarity r_ij = n_ij / sqrt(N_i * N_j).

    N_i is the country's total paper count. Self-similarity is left
    missing, as are pairs involving a country without papers.

    Args:
        stats: Country stats (total_papers)
        matrix: Co-authorship matrix (its diagonal is ignored)

    Returns:
        VariantResult with method 'SALTON'
    """
    totals = stats.column('total_papers', matrix.labels)
    valid = totals > 0
    root = np.sqrt(totals)

    values = np.full((matrix.size, matrix.size), np.nan)
    mask = np.outer(valid, valid)
    values[mask] = matrix.off_diagonal()[mask] / np.outer(root, root)[mask]
    np.fill_diagonal(values, np.nan)

    return VariantResult('SALTON', matrix.labels, values, 'zero')
