"""
Country name disambiguation for publication records.

Maps the raw affiliation country strings found in bibliographic exports
onto canonical country codes. Lookup is case-insensitive after trimming,
canonical codes always map to themselves, and names with no entry come
back as UNMAPPED instead of passing through unchanged.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

UNMAPPED = None

DEFAULT_ALIASES_PATH = Path(__file__).parent / 'codes' / 'country_aliases.csv'


def _key(raw: str) -> str:
    return raw.strip().casefold()


@dataclass
class CountryAliasTable:
    """Raw name → canonical code lookup with a tally of misses."""
    entries: Dict[str, str] = field(default_factory=dict)
    unmapped: Counter = field(default_factory=Counter)

    def __post_init__(self):
        entries = {}
        for raw, code in self.entries.items():
            code = code.strip()
            if not code:
                raise ValueError(f"Alias '{raw}' maps to an empty country code")
            entries[_key(raw)] = code
        # Idempotence: every canonical code resolves to itself
        for code in set(entries.values()):
            entries.setdefault(_key(code), code)
        self.entries = entries

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> 'CountryAliasTable':
        return cls(entries=dict(pairs))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'CountryAliasTable':
        """
        Load a two-column (raw,canonical) alias CSV.

        Args:
            path: CSV file with a header row naming the columns raw and canonical

        Returns:
            CountryAliasTable
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Alias table not found: {path}")

        df = pd.read_csv(path, dtype=str, keep_default_na=False)
        missing_cols = {'raw', 'canonical'} - set(df.columns)
        if missing_cols:
            raise ValueError(f"Alias table {path} missing columns: {sorted(missing_cols)}")

        table = cls.from_pairs(zip(df['raw'], df['canonical']))
        logger.debug("Loaded %d aliases from %s", len(table.entries), path)
        return table

    @property
    def codes(self) -> list:
        return sorted(set(self.entries.values()))

    def lookup(self, raw: str) -> Optional[str]:
        return self.entries.get(_key(raw), UNMAPPED)


def load_aliases(path: Optional[Union[str, Path]] = None) -> CountryAliasTable:
    """Load the alias table at `path`, or the bundled default table."""
    return CountryAliasTable.from_csv(path or DEFAULT_ALIASES_PATH)


def normalize_country(raw: str, aliases: CountryAliasTable) -> Optional[str]:
    """
    Canonicalize a raw country string.

    Args:
        raw: Country name or code as it appears in the record
        aliases: Loaded alias table

    Returns:
        Canonical country code, or UNMAPPED when the table has no entry
        (misses are tallied in aliases.unmapped)
    """
    code = aliases.lookup(raw)
    if code is UNMAPPED:
        aliases.unmapped[raw.strip()] += 1
    return code
