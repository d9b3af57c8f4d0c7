"""
Publication Record Ingestion

Reads publication records from JSONL or CSV exports and canonicalizes
their affiliation countries:
- JSONL: one object per line {id, year, countries: [...], authors}
- CSV: columns id,year,authors,countries with countries joined by ';'

Each record keeps the deduplicated union of its authors' countries
(multi-affiliated authors contribute every affiliation). Records whose
country set is empty after canonicalization are rejected with a reason
and tallied in an IngestionReport.
"""

import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, FrozenSet, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import pandas as pd

from etl.aliases import UNMAPPED, CountryAliasTable, load_aliases, normalize_country

logger = logging.getLogger(__name__)

RECORD_FORMATS = ('jsonl', 'csv')
CSV_COLUMNS = ('id', 'year', 'authors', 'countries')


class RecordParseError(ValueError):
    """A line could not be read in the declared format."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class RecordRejected(ValueError):
    """A well-formed record was dropped (e.g. no usable country)."""

    def __init__(self, record_id: str, reason: str):
        self.record_id = record_id
        self.reason = reason
        super().__init__(f"record {record_id} rejected: {reason}")


@dataclass(frozen=True)
class PublicationRecord:
    """One paper with its deduplicated set of affiliation countries."""
    id: str
    year: int
    countries: FrozenSet[str]
    author_count: int = 1

    def __post_init__(self):
        if not self.countries:
            raise RecordRejected(self.id, "empty country set")
        if self.author_count < 1:
            raise ValueError(f"record {self.id}: author_count must be >= 1, got {self.author_count}")
        object.__setattr__(self, 'countries', frozenset(self.countries))

    @property
    def is_international(self) -> bool:
        return len(self.countries) >= 2


@dataclass
class IngestionReport:
    """Audit trail of one ingestion run."""
    records_read: int = 0
    records_rejected: int = 0
    unmapped_names: Dict[str, int] = field(default_factory=dict)
    rejections: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def rejection_rate(self) -> float:
        if self.records_read == 0:
            return 0.0
        return self.records_rejected / self.records_read

    def reject(self, error: RecordRejected):
        self.records_rejected += 1
        self.rejections.append((error.record_id, error.reason))

    def merge_unmapped(self, counts: Dict[str, int]):
        for name, n in counts.items():
            self.unmapped_names[name] = self.unmapped_names.get(name, 0) + n

    def to_dict(self) -> Dict:
        return {
            'records_read': self.records_read,
            'records_rejected': self.records_rejected,
            'unmapped_names': dict(sorted(self.unmapped_names.items())),
        }


# ============================================================================
# FIELD COERCION
# ============================================================================

def _as_int(value, name: str, line_number: int) -> int:
    if isinstance(value, bool):
        raise RecordParseError(line_number, f"field '{name}' must be an integer, got {value!r}")
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise RecordParseError(line_number, f"field '{name}' must be an integer, got {value!r}")
    if not as_float.is_integer():
        raise RecordParseError(line_number, f"field '{name}' must be an integer, got {value!r}")
    return int(as_float)


def _canonical_countries(raw_countries: Iterable[str], aliases: CountryAliasTable) -> FrozenSet[str]:
    codes = (normalize_country(str(raw), aliases) for raw in raw_countries if str(raw).strip())
    return frozenset(code for code in codes if code is not UNMAPPED)


def _make_record(fields: Dict, line_number: int, aliases: CountryAliasTable) -> PublicationRecord:
    record_id = fields.get('id')
    if record_id is None or str(record_id).strip() == '':
        raise RecordParseError(line_number, "missing field 'id'")
    record_id = str(record_id).strip()

    if 'countries' not in fields:
        raise RecordParseError(line_number, f"record {record_id}: missing field 'countries'")
    raw_countries = fields['countries']
    if isinstance(raw_countries, str):
        raw_countries = raw_countries.split(';')
    if not isinstance(raw_countries, (list, tuple)):
        raise RecordParseError(line_number, f"record {record_id}: 'countries' must be a list")

    if 'year' not in fields:
        raise RecordParseError(line_number, f"record {record_id}: missing field 'year'")
    year = _as_int(fields['year'], 'year', line_number)

    authors = fields.get('authors', fields.get('author_count'))
    if authors is None:
        raise RecordParseError(line_number, f"record {record_id}: missing field 'authors'")
    author_count = _as_int(authors, 'authors', line_number)
    if author_count < 1:
        raise RecordParseError(line_number, f"record {record_id}: authors must be >= 1")

    countries = _canonical_countries(raw_countries, aliases)
    if not countries:
        reason = "empty country set" if not raw_countries else "no country left after normalization"
        raise RecordRejected(record_id, reason)

    return PublicationRecord(id=record_id, year=year, countries=countries, author_count=author_count)


# ============================================================================
# FORMAT READERS
# ============================================================================

def _numbered_lines(stream: Union[BinaryIO, TextIO]) -> Iterable[Tuple[int, str]]:
    """Physical lines with 1-based numbers; bytes are decoded line by line."""
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode('utf-8-sig' if line_number == 1 else 'utf-8')
            except UnicodeDecodeError as e:
                raise RecordParseError(line_number, f"invalid UTF-8 at byte {e.start}")
        yield line_number, line


def _iter_jsonl(stream) -> Iterable[Tuple[int, Dict]]:
    for line_number, line in _numbered_lines(stream):
        if not line.strip():
            continue
        try:
            fields = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordParseError(line_number, f"invalid JSON ({e.msg})")
        if not isinstance(fields, dict):
            raise RecordParseError(line_number, "expected a JSON object")
        yield line_number, fields


def _is_blank(value) -> bool:
    return value is None or pd.isna(value) or str(value).strip() == ''


def _iter_csv(stream) -> Iterable[Tuple[int, Dict]]:
    text = ''.join(line for _, line in _numbered_lines(stream))
    try:
        df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        return
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise RecordParseError(int(match.group(1)) if match else 0, str(e).strip())

    missing_cols = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing_cols:
        raise RecordParseError(1, f"missing columns: {missing_cols}")

    # Header is line 1; quoted fields may span several physical lines
    line_number = 2
    for row in df.to_dict(orient='records'):
        if not all(_is_blank(v) for v in row.values()):
            yield line_number, row
        line_number += 1 + sum(v.count('\n') for v in row.values() if isinstance(v, str))


def parse_records(
    stream: Union[BinaryIO, TextIO],
    fmt: str = 'jsonl',
    aliases: Optional[CountryAliasTable] = None,
    report: Optional[IngestionReport] = None,
    strict: bool = True
) -> List[PublicationRecord]:
    """
    Parse publication records from a byte stream.

    Args:
        stream: Binary (utf-8) or text stream
        fmt: 'jsonl' or 'csv'
        aliases: Alias table; None loads the bundled default table
        report: IngestionReport to update (counts, rejections, unmapped names)
        strict: Raise RecordRejected on the first rejected record instead of
            recording it in the report

    Returns:
        Records in input order
    """
    if fmt not in RECORD_FORMATS:
        raise ValueError(f"Unknown record format: {fmt}. Use one of {RECORD_FORMATS}")

    report = report if report is not None else IngestionReport()
    reader = _iter_jsonl if fmt == 'jsonl' else _iter_csv
    aliases = aliases if aliases is not None else load_aliases()
    misses_before = Counter(aliases.unmapped)
    records = []

    for line_number, fields in reader(stream):
        report.records_read += 1
        try:
            records.append(_make_record(fields, line_number, aliases))
        except RecordRejected as e:
            if strict:
                raise
            report.reject(e)
            logger.debug("Rejected %s: %s", e.record_id, e.reason)

    unmapped = aliases.unmapped - misses_before
    report.merge_unmapped(unmapped)
    logger.info(
        "Parsed %d records (%d rejected, %d unmapped names)",
        report.records_read, report.records_rejected, len(unmapped)
    )
    return records


def filter_years(
    records: Sequence[PublicationRecord],
    first: Optional[int] = None,
    last: Optional[int] = None
) -> List[PublicationRecord]:
    """Keep records published within [first, last] (either bound optional)."""
    return [
        r for r in records
        if (first is None or r.year >= first) and (last is None or r.year <= last)
    ]
