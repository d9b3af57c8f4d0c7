"""
Country Statistics and Co-authorship Matrix Construction

Computes, under full counting:
- Per-country indicators (total papers, internationally collaborative
  papers, intra-country collaborative papers, % international, number of
  partner countries)
- The symmetric country x country link matrix n_ij, with the main
  diagonal filled by one of five strategies

The matrix also carries n_all_papers, the number of internationally
collaborative papers, which cannot be recovered from the cells once a
paper spans three or more countries.
"""

import logging
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from etl.records import PublicationRecord

logger = logging.getLogger(__name__)

DIAGONAL_STRATEGIES = ('zero', 'iterative', 'all_papers', 'intl_papers', 'intra_papers')

# Short names accepted on the command line
DIAGONAL_ALIASES = {
    'zero': 'zero',
    'iterative': 'iterative',
    'all': 'all_papers',
    'intl': 'intl_papers',
    'intra': 'intra_papers',
}

# Diagonal strategies read straight from the stats table
STATS_DIAGONAL_SOURCE = {
    'all_papers': 'total_papers',
    'intl_papers': 'intl_papers',
    'intra_papers': 'intra_collab_papers',
}

STATS_COLUMNS = ['total_papers', 'intl_papers', 'intra_collab_papers', 'pct_intl', 'n_partners']


class ConfigurationError(ValueError):
    """Inconsistent or unknown configuration (strategy, method, inputs)."""


class UnknownCountryError(ValueError):
    """A requested country code is not among the labels."""

    def __init__(self, code: str, valid: Sequence[str]):
        self.code = code
        self.valid = list(valid)
        super().__init__(f"Unknown country '{code}'. Valid codes: {', '.join(self.valid)}")


def resolve_diagonal_strategy(name: str) -> str:
    strategy = DIAGONAL_ALIASES.get(name, name)
    if strategy not in DIAGONAL_STRATEGIES:
        raise ConfigurationError(
            f"Unknown diagonal strategy: {name}. Use one of {list(DIAGONAL_ALIASES)}"
        )
    return strategy


# ============================================================================
# COUNTRY STATISTICS
# ============================================================================

class CountryStats:
    """
    Per-country indicator table, indexed by country code (sorted).

    Columns:
    - total_papers: all papers with the country
    - intl_papers: papers whose country set has size >= 2 and contains it
    - intra_collab_papers: papers with >= 2 authors and country set == {c}
    - pct_intl: 100 * intl_papers / total_papers
    - n_partners: distinct collaborating countries
    """

    def __init__(self, table: pd.DataFrame):
        table = table.copy()
        for col in ('total_papers', 'intl_papers', 'intra_collab_papers'):
            if col not in table.columns:
                raise ConfigurationError(f"Stats table missing column: {col}")
        if 'n_partners' not in table.columns:
            table['n_partners'] = 0
        for col in ('total_papers', 'intl_papers', 'intra_collab_papers', 'n_partners'):
            table[col] = table[col].astype('int64')

        if (table['intl_papers'] > table['total_papers']).any():
            bad = table.index[table['intl_papers'] > table['total_papers']].tolist()
            raise ValueError(f"intl_papers exceeds total_papers for {bad}")
        if (table['intra_collab_papers'] > table['total_papers'] - table['intl_papers']).any():
            bad = table.index[table['intra_collab_papers'] > table['total_papers'] - table['intl_papers']].tolist()
            raise ValueError(f"intra_collab_papers exceeds domestic papers for {bad}")

        totals = table['total_papers'].astype(float)
        table['pct_intl'] = np.where(
            totals > 0, 100.0 * table['intl_papers'] / totals.where(totals > 0, 1.0), 0.0
        )
        table.index = table.index.astype(str)
        table.index.name = 'country'
        self.table = table[STATS_COLUMNS].sort_index()

    @classmethod
    def from_counts(cls, counts: Dict[str, Dict[str, int]]) -> 'CountryStats':
        """
        Build stats from externally known totals.

        Args:
            counts: country -> {'total_papers', 'intl_papers', optional
                'intra_collab_papers', optional 'n_partners'}
        """
        rows = {
            code: {
                'total_papers': c['total_papers'],
                'intl_papers': c['intl_papers'],
                'intra_collab_papers': c.get('intra_collab_papers', 0),
                'n_partners': c.get('n_partners', 0),
            }
            for code, c in counts.items()
        }
        df = pd.DataFrame.from_dict(rows, orient='index',
                                    columns=['total_papers', 'intl_papers', 'intra_collab_papers', 'n_partners'])
        return cls(df)

    @classmethod
    def empty(cls) -> 'CountryStats':
        return cls(pd.DataFrame(columns=['total_papers', 'intl_papers', 'intra_collab_papers', 'n_partners']))

    @property
    def labels(self) -> List[str]:
        return list(self.table.index)

    def __len__(self):
        return len(self.table)

    def __contains__(self, code):
        return code in self.table.index

    def column(self, name: str, labels: Sequence[str]) -> np.ndarray:
        """Values of one column aligned to `labels`."""
        missing = [c for c in labels if c not in self.table.index]
        if missing:
            raise ConfigurationError(f"Stats table has no row for: {missing}")
        return self.table.loc[list(labels), name].to_numpy(dtype=float)

    def row(self, code: str) -> pd.Series:
        if code not in self.table.index:
            raise UnknownCountryError(code, self.labels)
        return self.table.loc[code]


def build_stats(records: Iterable[PublicationRecord]) -> CountryStats:
    """
    Tally per-country indicators under full counting.

    Args:
        records: Normalized publication records

    Returns:
        CountryStats (empty table for an empty corpus)
    """
    total = Counter()
    intl = Counter()
    intra = Counter()
    partners: Dict[str, set] = {}

    for record in records:
        for code in record.countries:
            total[code] += 1
        if record.is_international:
            for code in record.countries:
                intl[code] += 1
                partners.setdefault(code, set()).update(record.countries - {code})
        elif record.author_count >= 2:
            (code,) = record.countries
            intra[code] += 1

    if not total:
        return CountryStats.empty()

    return CountryStats.from_counts({
        code: {
            'total_papers': total[code],
            'intl_papers': intl[code],
            'intra_collab_papers': intra[code],
            'n_partners': len(partners.get(code, ())),
        }
        for code in total
    })


# ============================================================================
# CO-AUTHORSHIP MATRIX
# ============================================================================

@dataclass(frozen=True, eq=False)
class CoauthMatrix:
    """
    Symmetric nonnegative country x country link matrix.

    `diagonal_resolved` is False only for an 'iterative' matrix whose
    diagonal has not yet been run to its fixed point.
    """
    labels: Tuple[str, ...]
    cells: np.ndarray
    diagonal_strategy: str = 'zero'
    n_all_papers: int = 0
    diagonal_resolved: bool = True

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        labels = tuple(self.labels)
        n = len(labels)
        if cells.size == 0:
            cells = cells.reshape(0, 0)
        if cells.shape != (n, n):
            raise ValueError(f"cells shape {cells.shape} does not match {n} labels")
        if len(set(labels)) != n:
            raise ValueError("duplicate country labels")
        if np.isnan(cells).any() or (cells < 0).any():
            raise ValueError("cells must be nonnegative numbers")
        if not np.array_equal(cells, cells.T):
            raise ValueError("cells must be symmetric")
        if self.diagonal_strategy not in DIAGONAL_STRATEGIES:
            raise ConfigurationError(f"Unknown diagonal strategy: {self.diagonal_strategy}")
        cells.flags.writeable = False
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'cells', cells)

    @property
    def size(self) -> int:
        return len(self.labels)

    @cached_property
    def margins(self) -> np.ndarray:
        """Row sums including the diagonal."""
        return self.cells.sum(axis=1)

    @cached_property
    def total(self) -> float:
        """n(..): every cell, diagonal included."""
        return float(self.cells.sum())

    @cached_property
    def _positions(self) -> Dict[str, int]:
        return {code: i for i, code in enumerate(self.labels)}

    def index(self, code: str) -> int:
        try:
            return self._positions[code]
        except KeyError:
            raise UnknownCountryError(code, self.labels)

    def off_diagonal(self) -> np.ndarray:
        cells = self.cells.copy()
        np.fill_diagonal(cells, 0.0)
        return cells

    def zero_diagonal(self) -> 'CoauthMatrix':
        if self.diagonal_strategy == 'zero':
            return self
        return replace(self, cells=self.off_diagonal(), diagonal_strategy='zero', diagonal_resolved=True)

    def with_diagonal(self, strategy: str, stats: Optional[CountryStats] = None) -> 'CoauthMatrix':
        """
        Same links, main diagonal re-filled per `strategy`.

        'iterative' yields a zero diagonal flagged unresolved; run
        affinity.diagonal.iterate_diagonal to reach the fixed point.
        """
        strategy = resolve_diagonal_strategy(strategy)
        cells = self.off_diagonal()

        if strategy in STATS_DIAGONAL_SOURCE:
            if stats is None:
                raise ConfigurationError(f"Diagonal strategy '{strategy}' requires country stats")
            np.fill_diagonal(cells, stats.column(STATS_DIAGONAL_SOURCE[strategy], self.labels))

        return replace(
            self,
            cells=cells,
            diagonal_strategy=strategy,
            diagonal_resolved=(strategy != 'iterative'),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.cells, index=list(self.labels), columns=list(self.labels))


def build_matrix(
    records: Sequence[PublicationRecord],
    diagonal_strategy: str = 'zero',
    stats: Optional[CountryStats] = None
) -> CoauthMatrix:
    """
    Build the full-counting co-authorship matrix.

    Every internationally collaborative paper adds one link to each
    unordered pair of its countries. Labels cover every country in the
    corpus, in lexicographic order.

    Args:
        records: Normalized publication records
        diagonal_strategy: zero, iterative, all_papers, intl_papers or intra_papers
            (short forms all/intl/intra accepted)
        stats: Precomputed stats for the stats-sourced diagonals; built
            from `records` when omitted

    Returns:
        CoauthMatrix
    """
    strategy = resolve_diagonal_strategy(diagonal_strategy)
    records = list(records)
    labels = sorted({code for r in records for code in r.countries})
    position = {code: i for i, code in enumerate(labels)}

    intl = [r for r in records if r.is_international]
    rows, cols = [], []
    for paper_idx, record in enumerate(intl):
        for code in record.countries:
            rows.append(paper_idx)
            cols.append(position[code])

    cells = np.zeros((len(labels), len(labels)))
    if intl:
        # Paper x country incidence; O^T O counts shared papers per pair
        incidence = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(intl), len(labels))
        )
        cells = (incidence.T @ incidence).toarray()
        np.fill_diagonal(cells, 0.0)

    matrix = CoauthMatrix(
        labels=tuple(labels),
        cells=cells,
        diagonal_strategy='zero',
        n_all_papers=len(intl),
    )
    logger.info("Built %dx%d matrix from %d international papers", len(labels), len(labels), len(intl))

    if strategy == 'zero':
        return matrix
    if strategy in STATS_DIAGONAL_SOURCE and stats is None:
        stats = build_stats(records)
    return matrix.with_diagonal(strategy, stats)
