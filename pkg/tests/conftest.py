"""
Pytest Fixtures and Test Utilities for the PAI analysis toolkit
Provides toy corpora, random matrix batteries, and shared assertions.
"""

import pytest
import numpy as np
import pandas as pd
from typing import Dict, List
import tempfile
import os
import json
import shutil

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))

from etl.records import PublicationRecord
from etl.matrix import CoauthMatrix, build_matrix, build_stats


# ============================================================================
# TOY CORPORA
# ============================================================================

def make_record(record_id: str, countries, authors: int = 2, year: int = 2010) -> PublicationRecord:
    return PublicationRecord(id=record_id, year=year, countries=frozenset(countries), author_count=authors)


@pytest.fixture
def toy_records() -> List[PublicationRecord]:
    """Three bilateral papers: P1{A,B}, P2{A,C}, P3{B,C}."""
    return [
        make_record('P1', {'A', 'B'}),
        make_record('P2', {'A', 'C'}),
        make_record('P3', {'B', 'C'}),
    ]


@pytest.fixture
def toy_records_domestic(toy_records) -> List[PublicationRecord]:
    """Toy corpus plus P4{A} with two authors (an intra-country collaboration)."""
    return toy_records + [make_record('P4', {'A'}, authors=2)]


@pytest.fixture
def toy_matrix(toy_records) -> CoauthMatrix:
    return build_matrix(toy_records, 'zero')


@pytest.fixture
def toy_stats(toy_records_domestic):
    return build_stats(toy_records_domestic)


@pytest.fixture
def toy_jsonl_lines() -> List[Dict]:
    return [
        {'id': 'P1', 'year': 2010, 'countries': ['A', 'B'], 'authors': 2},
        {'id': 'P2', 'year': 2011, 'countries': ['A', 'C'], 'authors': 3},
        {'id': 'P3', 'year': 2012, 'countries': ['B', 'C'], 'authors': 2},
        {'id': 'P4', 'year': 2013, 'countries': ['A'], 'authors': 2},
    ]


# ============================================================================
# RANDOM GENERATORS
# ============================================================================

def random_corpus(seed: int, n_records: int = 60, n_countries: int = 8,
                  max_countries_per_paper: int = 4) -> List[PublicationRecord]:
    """Random corpus over country codes K00..K{n-1}."""
    rng = np.random.default_rng(seed)
    codes = [f"K{i:02d}" for i in range(n_countries)]
    records = []
    for i in range(n_records):
        k = int(rng.integers(1, max_countries_per_paper + 1))
        countries = rng.choice(codes, size=min(k, n_countries), replace=False)
        records.append(make_record(f"R{i:04d}", set(countries.tolist()),
                                   authors=int(rng.integers(1, 6)),
                                   year=int(rng.integers(2008, 2016))))
    return records


def random_link_matrix(rng: np.random.Generator, n: int, density: float,
                       max_links: int = 50, positive: bool = False) -> CoauthMatrix:
    """Symmetric zero-diagonal integer link matrix."""
    low = 1 if positive else 0
    upper = rng.integers(low, max_links + 1, size=(n, n)).astype(float)
    if not positive:
        upper *= rng.random((n, n)) < density
    upper = np.triu(upper, 1)
    cells = upper + upper.T
    labels = tuple(f"C{i:03d}" for i in range(n))
    return CoauthMatrix(labels=labels, cells=cells, diagonal_strategy='zero', n_all_papers=int(upper.sum()))


@pytest.fixture(scope='session')
def matrix_battery() -> List[CoauthMatrix]:
    """100 random matrices, sizes 5-100, sparse and dense."""
    rng = np.random.default_rng(42)
    battery = []
    for k in range(100):
        n = int(rng.integers(5, 101))
        density = [0.1, 0.4, 1.0][k % 3]
        battery.append(random_link_matrix(rng, n, density))
    return battery


# ============================================================================
# FILE FIXTURES
# ============================================================================

def write_jsonl(path: Path, lines: List[Dict]) -> Path:
    with open(path, 'w', encoding='utf-8') as f:
        for line in lines:
            f.write(json.dumps(line) + '\n')
    return path


@pytest.fixture
def temp_output_dir():
    """
    Create temporary directory for test outputs.

    Yields:
        Path to temporary directory
    """
    temp_dir = tempfile.mkdtemp()
    yield temp_dir

    # Cleanup
    if os.path.exists(temp_dir):
        shutil.rmtree(temp_dir)


# ============================================================================
# UTILITY FUNCTIONS
# ============================================================================

def assert_dataframe_schema(df: pd.DataFrame, required_columns: List[str]):
    """Assert that DataFrame has required columns."""
    missing = set(required_columns) - set(df.columns)
    assert not missing, f"Missing columns: {missing}"


def assert_symmetric(values: np.ndarray, atol: float = 1e-12):
    """Symmetric wherever both cells are present."""
    both = ~(np.isnan(values) | np.isnan(values.T))
    np.testing.assert_allclose(values[both], values.T[both], rtol=0, atol=atol)


def assert_in_range(values: np.ndarray, low: float, high: float, name: str = "values"):
    present = values[~np.isnan(values)]
    assert np.all(present >= low) and np.all(present <= high), \
        f"{name} outside [{low}, {high}]: min={present.min()}, max={present.max()}"
