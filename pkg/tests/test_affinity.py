"""
Unit Tests for the affinity indices
Tests PAI variants M1-M7, the iterative diagonal, NPAI normalization,
AFI and Salton/Ochiai similarity.
"""

import warnings

import pytest
import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from affinity.diagonal import DiagonalFixpointReport, iterate_diagonal
from affinity.similarity import ZeroMarginError, afi, salton_ochiai
from affinity.variants import (
    METHODS,
    NormalizationError,
    VariantResult,
    compute_variant,
    compute_variants,
    normalize,
    pai_m1,
    pai_m7,
    pai_overlapping,
)
from etl.matrix import CoauthMatrix, ConfigurationError, CountryStats, UnknownCountryError, build_matrix, build_stats
from conftest import assert_in_range, assert_symmetric, make_record, random_corpus, random_link_matrix


def _two_country(c: float = 1.0) -> CoauthMatrix:
    return CoauthMatrix(labels=('A', 'B'), cells=np.array([[0.0, c], [c, 0.0]]), n_all_papers=int(c))


def _synthetic_stats(matrix: CoauthMatrix, rng: np.random.Generator) -> CountryStats:
    """Stats consistent enough to drive the M4-M6 diagonals of a bare link matrix."""
    intl = matrix.margins.astype(int)
    intra = rng.integers(0, 20, size=matrix.size)
    total = intl + intra + rng.integers(0, 20, size=matrix.size)
    return CountryStats.from_counts({
        code: {'total_papers': int(total[i]), 'intl_papers': int(intl[i]), 'intra_collab_papers': int(intra[i])}
        for i, code in enumerate(matrix.labels)
    })


# ============================================================================
# M1: NON-OVERLAPPING
# ============================================================================

class TestNonOverlapping:
    """Test M1 = n_all * n_ij / (n_i * n_j)."""

    def test_toy_value(self, toy_records, toy_matrix):
        result = pai_m1(toy_matrix, build_stats(toy_records))
        assert result.method == 'M1'
        assert result.values[0, 1] == pytest.approx(0.75, abs=1e-12)
        np.testing.assert_array_equal(np.diag(result.values), [0.0, 0.0, 0.0])

    def test_no_links_gives_zero(self):
        records = [make_record('P1', {'A', 'B'}), make_record('P2', {'C', 'D'})]
        result = pai_m1(build_matrix(records), build_stats(records))
        assert result.values[0, 2] == 0.0

    def test_no_international_papers_missing(self):
        records = [make_record('P1', {'A', 'B'}), make_record('P2', {'C'}, authors=3)]
        result = pai_m1(build_matrix(records), build_stats(records))
        assert np.isnan(result.values[2]).all()
        assert np.isnan(result.values[:, 2]).all()

    @pytest.mark.parametrize("seed", range(5))
    def test_duplicated_corpus_bit_identical(self, seed):
        records = random_corpus(seed)
        doubled = records + records

        once = pai_m1(build_matrix(records), build_stats(records))
        twice = pai_m1(build_matrix(doubled), build_stats(doubled))
        np.testing.assert_array_equal(once.values, twice.values)

    def test_requires_zero_diagonal(self, toy_records_domestic, toy_stats):
        with pytest.raises(ConfigurationError, match="zero-diagonal"):
            pai_m1(build_matrix(toy_records_domestic, 'all'), toy_stats)

    def test_label_mismatch(self, toy_matrix):
        stats = build_stats([make_record('P1', {'A', 'B'})])
        with pytest.raises(ConfigurationError, match="no row for"):
            pai_m1(toy_matrix, stats)


# ============================================================================
# M2-M6: OVERLAPPING
# ============================================================================

class TestOverlapping:
    """Test Mr = total * cells_ij / (margin_i * margin_j)."""

    def test_toy_m2(self, toy_matrix):
        result = pai_overlapping(toy_matrix)
        assert result.method == 'M2'
        assert result.values[0, 1] == pytest.approx(1.5, abs=1e-12)
        np.testing.assert_array_equal(np.diag(result.values), [0.0, 0.0, 0.0])

    def test_toy_m4(self, toy_records_domestic):
        result = pai_overlapping(build_matrix(toy_records_domestic, 'all_papers'))
        assert result.method == 'M4'
        assert result.values[0, 1] == pytest.approx(0.65, abs=1e-12)

    @pytest.mark.parametrize("c", [1.0, 2.0, 7.0, 1000.0])
    def test_two_country_scale_cancels(self, c):
        result = pai_overlapping(_two_country(c))
        assert result.values[0, 1] == pytest.approx(2.0, abs=1e-12)

    def test_all_zero_matrix_warns(self):
        matrix = CoauthMatrix(labels=('A', 'B'), cells=np.zeros((2, 2)))
        with pytest.warns(UserWarning, match="no links"):
            result = pai_overlapping(matrix)
        assert np.isnan(result.values).all()

    def test_unresolved_iterative_rejected(self, toy_records):
        with pytest.raises(ConfigurationError, match="iterate_diagonal"):
            pai_overlapping(build_matrix(toy_records, 'iterative'))

    @pytest.mark.parametrize("strategy,method", [
        ('zero', 'M2'), ('all_papers', 'M4'), ('intl_papers', 'M5'), ('intra_papers', 'M6'),
    ])
    def test_method_follows_diagonal(self, toy_records_domestic, strategy, method):
        result = pai_overlapping(build_matrix(toy_records_domestic, strategy))
        assert result.method == method
        assert result.diagonal_strategy == strategy
        assert_symmetric(result.values)

    def test_weighted_sum_is_one(self, matrix_battery):
        rng = np.random.default_rng(3)
        for matrix in matrix_battery:
            stats = _synthetic_stats(matrix, rng)
            sources = {
                'M2': matrix,
                'M3': iterate_diagonal(matrix)[0],
                'M4': matrix.with_diagonal('all', stats),
                'M5': matrix.with_diagonal('intl', stats),
                'M6': matrix.with_diagonal('intra', stats),
            }
            for method, source in sources.items():
                result, _ = compute_variant(method, matrix, stats)
                if source.total == 0:
                    continue
                weights = np.outer(source.margins, source.margins) / source.total ** 2
                assert np.nansum(weights * result.values) == pytest.approx(1.0, abs=1e-9)


# ============================================================================
# M3: ITERATIVE DIAGONAL
# ============================================================================

class TestIterativeDiagonal:
    """Test the neutral fixed-point sweep."""

    def test_two_country_fixed_point(self):
        matrix, report = iterate_diagonal(_two_country())

        assert isinstance(report, DiagonalFixpointReport)
        assert report.converged
        assert report.max_residual <= 1e-9
        np.testing.assert_allclose(np.diag(matrix.cells), [1.0, 1.0], atol=1e-8)
        np.testing.assert_allclose(pai_overlapping(matrix).values, np.ones((2, 2)), atol=1e-8)

    def test_uniform_three_country_fixed_point(self, toy_matrix):
        matrix, report = iterate_diagonal(toy_matrix)

        assert report.converged
        assert report.max_residual <= 1e-9
        np.testing.assert_allclose(np.diag(matrix.cells), [1.0, 1.0, 1.0], atol=1e-8)
        np.testing.assert_allclose(pai_overlapping(matrix).values, np.ones((3, 3)), atol=1e-8)

    def test_isolated_country(self):
        cells = np.array([[0, 2, 0], [2, 0, 0], [0, 0, 0]], dtype=float)
        matrix, report = iterate_diagonal(CoauthMatrix(labels=('A', 'B', 'C'), cells=cells))
        result = pai_overlapping(matrix)

        assert report.converged
        assert matrix.cells[2, 2] == 0.0
        assert np.isnan(result.values[2]).all()
        assert np.isnan(result.values[:, 2]).all()

    def test_no_links_converges_immediately(self):
        matrix, report = iterate_diagonal(CoauthMatrix(labels=('A',), cells=np.zeros((1, 1))))
        assert report.converged
        assert report.iterations == 0

    def test_off_diagonal_untouched(self, toy_records_domestic):
        source = build_matrix(toy_records_domestic, 'all_papers')
        matrix, _ = iterate_diagonal(source)
        np.testing.assert_array_equal(matrix.off_diagonal(), source.off_diagonal())
        assert matrix.diagonal_strategy == 'iterative'
        assert matrix.diagonal_resolved

    def test_row_order_independent(self):
        rng = np.random.default_rng(11)
        matrix = random_link_matrix(rng, 12, 0.5)
        perm = rng.permutation(12)
        shuffled = CoauthMatrix(
            labels=tuple(matrix.labels[i] for i in perm),
            cells=matrix.cells[np.ix_(perm, perm)],
        )

        a, _ = iterate_diagonal(matrix)
        b, _ = iterate_diagonal(shuffled)
        np.testing.assert_allclose(np.diag(b.cells), np.diag(a.cells)[perm], rtol=1e-12)

    def test_nonconvergence_reported(self, toy_matrix):
        with pytest.warns(UserWarning, match="did not converge"):
            matrix, report = iterate_diagonal(toy_matrix, max_iter=3)

        assert not report.converged
        assert not report.settled
        assert report.iterations == 3
        assert report.max_residual > 1e-9
        assert matrix.diagonal_resolved

    def test_literal_rule_settles_without_converging(self):
        _, report = iterate_diagonal(_two_country(), update_rule='literal')

        assert report.update_rule == 'literal'
        assert report.settled
        assert report.max_change <= report.tolerance
        assert not report.converged
        assert report.max_residual == pytest.approx(1.0 / 3.0)

    @pytest.mark.parametrize("update_rule,max_iter", [
        ('neutral', 1000), ('neutral', 2), ('literal', 1000), ('literal', 1),
    ])
    def test_converged_means_residual_within_tolerance(self, toy_matrix, update_rule, max_iter):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            _, report = iterate_diagonal(toy_matrix, max_iter=max_iter, update_rule=update_rule)

        assert report.converged == (report.max_residual <= report.tolerance)
        if update_rule == 'neutral':
            assert report.settled == report.converged

    @pytest.mark.parametrize("kwargs,message", [
        ({'tolerance': 0.0}, "tolerance"),
        ({'max_iter': 0}, "max_iter"),
        ({'update_rule': 'halfway'}, "update rule"),
    ])
    def test_invalid_settings(self, toy_matrix, kwargs, message):
        with pytest.raises(ConfigurationError, match=message):
            iterate_diagonal(toy_matrix, **kwargs)

    @pytest.mark.slow
    def test_random_positive_matrices_converge(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            matrix = random_link_matrix(rng, int(rng.integers(10, 60)), 1.0, positive=True)
            _, report = iterate_diagonal(matrix)
            assert report.converged
            assert report.iterations <= 1000
            assert report.max_residual <= 1e-9

    def test_report_to_dict(self, toy_matrix):
        _, report = iterate_diagonal(toy_matrix)
        data = report.to_dict()
        assert set(data) == {'iterations', 'max_residual', 'converged', 'settled', 'tolerance',
                             'update_rule', 'max_change'}
        assert data['converged'] is True
        assert data['settled'] is True


# ============================================================================
# M7: SELF-EXCLUSIVE
# ============================================================================

class TestSelfExclusive:
    """Test M7 = n_ij * (total - margin_i) / (margin_i * margin_j)."""

    def test_toy_value(self, toy_matrix):
        result = pai_m7(toy_matrix)
        assert result.values[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_asymmetry_ratio(self):
        cells = np.array([[0, 3, 1], [3, 0, 2], [1, 2, 0]], dtype=float)
        matrix = CoauthMatrix(labels=('A', 'B', 'C'), cells=cells)
        values = pai_m7(matrix).values
        m, t = matrix.margins, matrix.total

        assert values[0, 1] / values[1, 0] == pytest.approx((t - m[0]) / (t - m[1]), rel=1e-12)

    def test_closed_form_link_to_m2(self, matrix_battery):
        for matrix in matrix_battery:
            if matrix.total == 0:
                continue
            m2 = pai_overlapping(matrix).values
            m7 = pai_m7(matrix).values
            expected = m2 * ((matrix.total - matrix.margins) / matrix.total)[:, np.newaxis]
            np.testing.assert_allclose(m7, expected, rtol=1e-12, atol=1e-12)

    def test_requires_zero_diagonal(self, toy_records_domestic):
        with pytest.raises(ConfigurationError, match="zero-diagonal"):
            pai_m7(build_matrix(toy_records_domestic, 'all'))


class TestScaleInvariance:
    """Uniform cell scaling leaves the overlapping and self-exclusive indices unchanged."""

    @pytest.mark.parametrize("c", [3.0, 0.5, 17.0])
    def test_scaled_cells(self, c):
        rng = np.random.default_rng(21)
        for _ in range(10):
            base = random_link_matrix(rng, int(rng.integers(5, 40)), 0.4)
            diag = rng.integers(0, 30, size=base.size).astype(float)
            with_diag = CoauthMatrix(labels=base.labels, cells=base.cells + np.diag(diag),
                                     diagonal_strategy='intl_papers')
            scaled = CoauthMatrix(labels=base.labels, cells=with_diag.cells * c,
                                  diagonal_strategy='intl_papers')

            np.testing.assert_allclose(pai_overlapping(scaled).values, pai_overlapping(with_diag).values,
                                       rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(pai_m7(scaled.zero_diagonal()).values, pai_m7(base).values,
                                       rtol=1e-12, atol=1e-12)

            dense = random_link_matrix(rng, int(rng.integers(10, 40)), 1.0, positive=True)
            m3_base, _ = compute_variant('M3', dense)
            m3_scaled, _ = compute_variant('M3', CoauthMatrix(labels=dense.labels, cells=dense.cells * c))
            np.testing.assert_allclose(m3_scaled.values, m3_base.values, rtol=1e-6, atol=1e-9)


# ============================================================================
# NORMALIZATION
# ============================================================================

class TestNormalize:
    """Test NPAI mappings onto [-1, 1)."""

    @staticmethod
    def _result(values, method='M2') -> VariantResult:
        values = np.asarray(values, dtype=float)
        return VariantResult(method, ('A', 'B'), values)

    @pytest.mark.parametrize("mode", ['power', 'linear'])
    def test_neutral_and_floor(self, mode):
        npai = normalize(self._result([[1.0, 0.0], [0.0, 1.0]]), mode)
        np.testing.assert_array_equal(npai.values, [[0.0, -1.0], [-1.0, 0.0]])
        assert npai.normalized == mode
        assert npai.name == f"M2_{mode}"

    def test_known_values(self):
        raw = self._result([[1.5, 1.5], [1.5, 1.5]])
        assert normalize(raw, 'power').values[0, 1] == pytest.approx(0.384615, abs=1e-6)
        assert normalize(raw, 'linear').values[0, 1] == pytest.approx(0.2, abs=1e-12)

    def test_missing_stays_missing(self):
        npai = normalize(self._result([[np.nan, 2.0], [2.0, np.nan]]))
        assert np.isnan(npai.values[0, 0])
        assert npai.values[0, 1] == pytest.approx(0.6)

    def test_double_normalization(self):
        npai = normalize(self._result([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(NormalizationError, match="already normalized"):
            normalize(npai, 'linear')

    def test_m7_warns(self):
        with pytest.warns(UserWarning, match="M7"):
            normalize(self._result([[0.0, 2.0], [2.0, 0.0]], method='M7'))

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError, match="normalization mode"):
            normalize(self._result([[1.0, 1.0], [1.0, 1.0]]), 'log')

    @pytest.mark.parametrize("mode", ['power', 'linear'])
    def test_range_and_monotonicity(self, mode):
        rng = np.random.default_rng(99)
        a = rng.exponential(3.0, size=10_000)
        b = rng.exponential(3.0, size=10_000)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        strict = lo < hi

        def npai(x):
            p = x ** 2 if mode == 'power' else x
            return (p - 1) / (p + 1)

        result = normalize(VariantResult('M2', tuple(f"C{i}" for i in range(100)),
                                         a.reshape(100, 100)), mode)
        assert_in_range(result.values, -1.0, 1.0)
        assert (result.values < 1.0).all()
        assert (npai(lo[strict]) < npai(hi[strict])).all()


# ============================================================================
# DISPATCH
# ============================================================================

class TestComputeVariant:
    """Test method dispatch from a single ingested matrix."""

    def test_toy_methods(self, toy_records, toy_matrix):
        stats = build_stats(toy_records)
        results = compute_variants(['m1', 'm2', 'm7'], toy_matrix, stats)

        assert list(results) == ['M1', 'M2', 'M7']
        assert results['M1'][0].values[0, 1] == pytest.approx(0.75)
        assert results['M2'][0].values[0, 1] == pytest.approx(1.5)
        assert results['M7'][0].values[0, 1] == pytest.approx(1.0)

    def test_m3_returns_report(self, toy_matrix):
        result, report = compute_variant('M3', toy_matrix)
        assert report is not None and report.converged
        np.testing.assert_allclose(result.values, np.ones((3, 3)), atol=1e-8)

    @pytest.mark.parametrize("method", ['M1', 'M4', 'M5', 'M6'])
    def test_stats_required(self, toy_matrix, method):
        with pytest.raises(ConfigurationError, match="requires the country stats"):
            compute_variant(method, toy_matrix)

    def test_any_source_diagonal(self, toy_records_domestic, toy_stats):
        from_zero = build_matrix(toy_records_domestic, 'zero')
        from_all = build_matrix(toy_records_domestic, 'all')
        for method in METHODS:
            a, _ = compute_variant(method, from_zero, toy_stats)
            b, _ = compute_variant(method, from_all, toy_stats)
            np.testing.assert_array_equal(a.values, b.values)

    def test_unknown_method(self, toy_matrix):
        with pytest.raises(ConfigurationError, match="Unknown method"):
            compute_variant('M8', toy_matrix)

    def test_row_accessor(self, toy_matrix):
        result, _ = compute_variant('M2', toy_matrix)
        row = result.row('A')
        assert list(row.index) == ['B', 'C']
        assert row.name == 'M2'
        with pytest.raises(UnknownCountryError):
            result.row('Z')


# ============================================================================
# AFI AND SALTON
# ============================================================================

class TestAffinityIndex:
    """Test AFI = n_tj / margin(t)."""

    def test_toy_values(self, toy_matrix):
        shares = afi(toy_matrix, 'A')
        assert shares.to_dict() == {'B': 0.5, 'C': 0.5}

    def test_single_partner(self):
        matrix = build_matrix([make_record('P1', {'A', 'B'}), make_record('P2', {'C', 'D'})])
        assert afi(matrix, 'A').to_dict() == {'B': 1.0, 'C': 0.0, 'D': 0.0}

    def test_sums_to_one(self, matrix_battery):
        for matrix in matrix_battery[:20]:
            for i, code in enumerate(matrix.labels):
                if matrix.margins[i] > 0:
                    assert afi(matrix, code).sum() == pytest.approx(1.0, abs=1e-12)

    def test_ignores_diagonal(self, toy_records_domestic):
        shares = afi(build_matrix(toy_records_domestic, 'all'), 'A')
        assert shares.to_dict() == {'B': 0.5, 'C': 0.5}

    def test_zero_margin(self):
        matrix = build_matrix([make_record('P1', {'A', 'B'}), make_record('P2', {'C'})])
        with pytest.raises(ZeroMarginError, match="'C'"):
            afi(matrix, 'C')

    def test_unknown_target(self, toy_matrix):
        with pytest.raises(UnknownCountryError):
            afi(toy_matrix, 'Z')


class TestSaltonOchiai:
    """Test r_ij = n_ij / sqrt(N_i * N_j)."""

    def test_toy_value(self, toy_records_domestic, toy_stats):
        result = salton_ochiai(toy_stats, build_matrix(toy_records_domestic))
        assert result.method == 'SALTON'
        assert result.values[0, 1] == pytest.approx(0.408248, abs=1e-6)
        assert np.isnan(np.diag(result.values)).all()

    def test_no_links_gives_zero(self):
        records = [make_record('P1', {'A', 'B'}), make_record('P2', {'C', 'D'})]
        result = salton_ochiai(build_stats(records), build_matrix(records))
        assert result.values[0, 2] == 0.0

    def test_bounded_and_symmetric(self):
        records = random_corpus(4, n_records=200)
        result = salton_ochiai(build_stats(records), build_matrix(records))
        assert_symmetric(result.values)
        assert_in_range(result.values, 0.0, 1.0, name='salton')

    def test_zero_total_missing(self):
        stats = CountryStats.from_counts({
            'A': {'total_papers': 0, 'intl_papers': 0},
            'B': {'total_papers': 2, 'intl_papers': 0},
        })
        matrix = CoauthMatrix(labels=('A', 'B'), cells=np.zeros((2, 2)))
        with warnings.catch_warnings():
            warnings.simplefilter('error')
            result = salton_ochiai(stats, matrix)
        assert np.isnan(result.values).all()
