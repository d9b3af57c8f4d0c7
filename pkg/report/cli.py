"""
Command-line pipeline for PAI analysis

Subcommands follow the four analysis steps, each re-runnable on its own:

    ingest     records -> matrix.csv/json, stats.csv, ingest_report.json
    pai        matrix (+ stats) -> one raw and one normalized file per method
    compare    variants -> Pearson/Spearman tables per target
    rank       matrix + variants -> AFI-gated partner rankings
    size-corr  variants + stats -> size dependence table and scatter data

Usage:
    python -m report.cli ingest --input records.jsonl --aliases aliases.csv --out run/ingest
    python -m report.cli pai --input run/ingest --methods m1,m2,m7 --out run/pai
    python -m report.cli compare --input run/pai --target USA --out run/compare
    python -m report.cli rank --input run/ingest --input run/pai --target USA --top-n 20 --out run/rank
    python -m report.cli size-corr --input run/ingest --input run/pai --target USA --out run/size

Every failure prints one line `pai-analysis: error[<kind>]: <message>`
to stderr and exits nonzero.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import pandas as pd

from affinity.diagonal import iterate_diagonal
from affinity.similarity import ZeroMarginError
from affinity.variants import compute_variant, normalize
from analysis.comparison import compare_variants, size_dependence, value_rank_table
from analysis.ranking import rank_partners
from etl.aliases import load_aliases
from etl.matrix import ConfigurationError, UnknownCountryError, build_matrix, build_stats
from etl.records import IngestionReport, RecordParseError, RecordRejected, filter_years, parse_records
from report import io
from report.config import RunConfig, build_config, dump_config, load_config

logger = logging.getLogger(__name__)

PROG = 'pai-analysis'

EXIT_CODES = {
    'config': 2,
    'input': 3,
    'io': 4,
    'convergence': 5,
    'target': 6,
}

REJECTION_WARN_RATE = 0.5


class ConvergenceFailure(RuntimeError):
    """Iterative diagonal did not converge (outputs were still written)."""


# ============================================================================
# COMMANDS
# ============================================================================

def _record_format(path: str, config: RunConfig) -> str:
    if config.input_format:
        return config.input_format
    return 'csv' if Path(path).suffix.lower() == '.csv' else 'jsonl'


def _soft_warning(msg: str):
    logger.warning(msg)
    warnings.warn(msg)


def _check_settled(unsettled: List[str], config: RunConfig):
    if unsettled and not config.allow_nonconverged:
        raise ConvergenceFailure(
            f"diagonal did not converge for {unsettled} within {config.max_iter} sweeps"
        )


def cmd_ingest(config: RunConfig) -> List[Path]:
    """Records -> matrix, stats and ingestion report."""
    if not config.inputs:
        raise ConfigurationError("ingest needs at least one --input record file")

    aliases = load_aliases(config.aliases)
    report = IngestionReport()
    records = []
    for path in config.inputs:
        with open(path, 'rb') as f:
            records.extend(parse_records(f, _record_format(path, config), aliases, report, strict=False))
    records = filter_years(records, config.year_from, config.year_to)

    if report.records_read == 0:
        _soft_warning("No records read; writing an empty matrix")
    if report.rejection_rate > REJECTION_WARN_RATE:
        _soft_warning(f"{report.records_rejected} of {report.records_read} records rejected")

    stats = build_stats(records)
    matrix = build_matrix(records, config.diagonal, stats)

    outputs = io.OutputSet()
    unsettled = []
    if config.diagonal == 'iterative':
        matrix, fixpoint = iterate_diagonal(matrix, config.tolerance, config.max_iter, config.update_rule)
        outputs.add_json('diagonal_fixpoint.json', fixpoint.to_dict())
        if not fixpoint.settled:
            unsettled.append('iterative')

    outputs.add(io.MATRIX_CSV, io.matrix_csv(matrix))
    outputs.add_json(io.MATRIX_SIDECAR, io.matrix_sidecar(matrix))
    outputs.add(io.STATS_CSV, io.stats_csv(stats))
    outputs.add_json(io.INGEST_REPORT, report.to_dict())
    outputs.add(io.CONFIG_COPY, dump_config(config))
    written = outputs.write(config.out)
    _check_settled(unsettled, config)
    return written


def cmd_pai(config: RunConfig) -> List[Path]:
    """Matrix (+ stats) -> raw and normalized variant files."""
    matrix = io.read_matrix(config.inputs)
    needs_stats = any(m in ('M1', 'M4', 'M5', 'M6') for m in config.methods)
    stats = io.read_stats(config.inputs, required=needs_stats)

    outputs = io.OutputSet()
    unsettled = []
    for method in config.methods:
        result, fixpoint = compute_variant(
            method, matrix, stats, config.tolerance, config.max_iter, config.update_rule
        )
        stem = io.variant_stem(method)
        outputs.add(f"{stem}.csv", io.variant_csv(result))
        outputs.add_json(f"{stem}.json", io.variant_sidecar(result))

        if fixpoint is not None:
            outputs.add_json(f"{stem}_fixpoint.json", fixpoint.to_dict())
            if not fixpoint.settled:
                unsettled.append(method)

        if config.normalize != 'none' and (method != 'M7' or config.normalize_m7):
            npai = normalize(result, config.normalize)
            if config.missing_as_floor:
                npai = io.floor_missing(npai)
            stem = io.variant_stem(method, config.normalize)
            outputs.add(f"{stem}.csv", io.variant_csv(npai))
            outputs.add_json(f"{stem}.json", io.variant_sidecar(npai))

    outputs.add(io.CONFIG_COPY, dump_config(config))
    written = outputs.write(config.out)
    _check_settled(unsettled, config)
    return written


def _require_targets(config: RunConfig):
    if not config.targets:
        raise ConfigurationError("at least one --target is required")


def cmd_compare(config: RunConfig) -> List[Path]:
    """Variants -> correlation table per target (or one flat table)."""
    results = io.iter_variants(config.inputs, config.methods, config.normalize)
    outputs = io.OutputSet()

    if config.comparison_mode == 'flat':
        report = compare_variants(None, results, mode='flat')
        outputs.add_table('compare_all', report.table, config.output_format, report.to_dict())
    else:
        _require_targets(config)
        for target in config.targets:
            report = compare_variants(target, results)
            outputs.add_table(f"compare_{target}", report.table, config.output_format, report.to_dict())
            outputs.add_table(f"value_rank_{target}", value_rank_table(target, results), config.output_format)

    outputs.add(io.CONFIG_COPY, dump_config(config))
    return outputs.write(config.out)


def cmd_rank(config: RunConfig) -> List[Path]:
    """Matrix + variants -> AFI-gated ranking per target and variant."""
    _require_targets(config)
    matrix = io.read_matrix(config.inputs)
    results = io.iter_variants(config.inputs, config.methods, config.normalize)

    outputs = io.OutputSet()
    for target in config.targets:
        matrix.index(target)
        for result in results:
            ranked = rank_partners(target, matrix, result, config.top_n)
            outputs.add_table(f"rank_{target}_{result.name}", ranked.entries,
                              config.output_format, ranked.to_dict())

    outputs.add(io.CONFIG_COPY, dump_config(config))
    return outputs.write(config.out)


def cmd_size_corr(config: RunConfig) -> List[Path]:
    """Variants + stats -> size dependence table and scatter data."""
    _require_targets(config)
    stats = io.read_stats(config.inputs)
    results = io.iter_variants(config.inputs, config.methods, config.normalize)

    outputs = io.OutputSet()
    rows = []
    for target in config.targets:
        for result in results:
            for measure in config.size_measures:
                dep = size_dependence(result, stats, target, measure)
                rows.append(dep.as_row())
                outputs.add(f"scatter_{target}_{result.name}_{measure}.csv", io.frame_to_csv(dep.scatter))

    table = pd.DataFrame(rows, columns=['method', 'target', 'size_measure', 'pearson', 'spearman',
                                        'r_squared', 'n_used', 'reason'])
    outputs.add_table('size_corr', table, config.output_format)
    outputs.add(io.CONFIG_COPY, dump_config(config))
    return outputs.write(config.out)


COMMANDS = {
    'ingest': cmd_ingest,
    'pai': cmd_pai,
    'compare': cmd_compare,
    'rank': cmd_rank,
    'size-corr': cmd_size_corr,
}


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _split_list(values: Optional[List[str]]) -> Optional[List[str]]:
    if values is None:
        return None
    return [part.strip() for v in values for part in v.split(',') if part.strip()]


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors surface as ConfigurationError instead of exiting."""

    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML run configuration (flags override it)')
    common.add_argument('--input', action='append', dest='inputs',
                        help='Record file (ingest) or earlier output directory; repeatable')
    common.add_argument('--aliases', help='Two-column (raw,canonical) country alias CSV')
    common.add_argument('--input-format', choices=['jsonl', 'csv'])
    common.add_argument('--year-from', type=int)
    common.add_argument('--year-to', type=int)
    common.add_argument('--diagonal', choices=['zero', 'iterative', 'all', 'intl', 'intra'])
    common.add_argument('--methods', nargs='+', help='Methods m1..m7 (comma or space separated)')
    common.add_argument('--normalize', choices=['none', 'power', 'linear'])
    common.add_argument('--normalize-m7', action='store_true', default=None,
                        help='Also write a normalized M7 file')
    common.add_argument('--missing-as-floor', action='store_true', default=None,
                        help='Write missing NPAI cells as -1 (no collaboration)')
    common.add_argument('--target', action='append', dest='targets',
                        help='Target country code; repeatable or comma separated')
    common.add_argument('--top-n', type=int)
    common.add_argument('--tolerance', type=float)
    common.add_argument('--max-iter', type=int)
    common.add_argument('--literal-diagonal', action='store_true', default=None,
                        help='Use the literal n_ii = margin/total update (comparison only)')
    common.add_argument('--allow-nonconverged', action='store_true', default=None)
    common.add_argument('--comparison-mode', choices=['row', 'flat'])
    common.add_argument('--size-measures', nargs='+', help='all_papers and/or intl_papers')
    common.add_argument('--out', help='Output directory')
    common.add_argument('--format', dest='output_format', choices=['csv', 'json'])
    common.add_argument('-v', '--verbose', action='store_true')

    parser = _ArgumentParser(
        prog=PROG,
        description='Probabilistic Affinity Index analysis of country co-authorship'
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=func.__doc__)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config(args.config) if args.config else {}
    config = build_config(
        file_values,
        inputs=args.inputs,
        aliases=args.aliases,
        input_format=args.input_format,
        year_from=args.year_from,
        year_to=args.year_to,
        diagonal=args.diagonal,
        methods=_split_list(args.methods),
        normalize=args.normalize,
        normalize_m7=args.normalize_m7,
        missing_as_floor=args.missing_as_floor,
        targets=_split_list(args.targets),
        top_n=args.top_n,
        tolerance=args.tolerance,
        max_iter=args.max_iter,
        update_rule='literal' if args.literal_diagonal else None,
        allow_nonconverged=args.allow_nonconverged,
        comparison_mode=args.comparison_mode,
        size_measures=_split_list(args.size_measures),
        out=args.out,
        output_format=args.output_format,
    )
    if config.out is None:
        raise ConfigurationError("--out is required")
    return config


def _fail(kind: str, error: BaseException) -> int:
    message = ' '.join(str(error).split())
    print(f"{PROG}: error[{kind}]: {message}", file=sys.stderr)
    return EXIT_CODES[kind]


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as e:
        return _fail('config', e)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s',
    )

    try:
        config = config_from_args(args)
        written = COMMANDS[args.command](config)
    except (UnknownCountryError, ZeroMarginError) as e:
        return _fail('target', e)
    except ConfigurationError as e:
        return _fail('config', e)
    except ConvergenceFailure as e:
        return _fail('convergence', e)
    except (RecordParseError, RecordRejected) as e:
        return _fail('input', e)
    except OSError as e:
        return _fail('io', e)
    except ValueError as e:
        return _fail('input', e)

    logger.info("%s: wrote %d files", args.command, len(written))
    return 0


if __name__ == '__main__':
    sys.exit(main())
