"""
Iterative diagonal reconstitution for overlapping PAI (M3).

Starting from a zero diagonal, each sweep sets every n(i,i) from the
previous sweep's margins and total until the diagonal's own PAI is
neutral (total * n_ii / margin_i^2 == 1). All updates within a sweep
use the previous margins, so the result does not depend on row order.

Two update rules:
- neutral: n_ii <- margin_i^2 / total (fixed point has PAI(i,i) = 1)
- literal: n_ii <- margin_i / total (the printed rule, kept for comparison;
  its fixed point is not neutral)
"""

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from etl.matrix import CoauthMatrix, ConfigurationError

logger = logging.getLogger(__name__)

UPDATE_RULES = ('neutral', 'literal')


@dataclass(frozen=True)
class DiagonalFixpointReport:
    """
    Outcome of the diagonal sweep loop.

    converged holds exactly when max_residual <= tolerance. settled records
    whether the chosen rule's own stopping test was met before the sweep
    budget ran out; under the literal rule a run can settle without
    converging.
    """
    iterations: int
    max_residual: float    # max_i |PAI(i,i) - 1| over countries with links
    converged: bool
    tolerance: float
    update_rule: str = 'neutral'
    max_change: float = 0.0  # relative diagonal change in the last sweep
    settled: bool = False

    def to_dict(self) -> dict:
        return {
            'iterations': self.iterations,
            'max_residual': self.max_residual,
            'converged': self.converged,
            'settled': self.settled,
            'tolerance': self.tolerance,
            'update_rule': self.update_rule,
            'max_change': self.max_change,
        }


def _diagonal_residual(links: np.ndarray, diag: np.ndarray, active: np.ndarray) -> float:
    if not active.any():
        return 0.0
    margins = links + diag
    total = links.sum() + diag.sum()
    pai_diag = total * diag[active] / margins[active] ** 2
    return float(np.max(np.abs(pai_diag - 1.0)))


def _relative_change(old: np.ndarray, new: np.ndarray, active: np.ndarray) -> float:
    if not active.any():
        return 0.0
    scale = np.maximum(np.abs(new[active]), np.finfo(float).tiny)
    return float(np.max(np.abs(new[active] - old[active]) / scale))


def iterate_diagonal(
    matrix: CoauthMatrix,
    tolerance: float = 1e-9,
    max_iter: int = 1000,
    update_rule: str = 'neutral'
) -> Tuple[CoauthMatrix, DiagonalFixpointReport]:
    """
    Run the diagonal to its fixed point.

    Args:
        matrix: Co-authorship matrix; only its off-diagonal cells are used
        tolerance: Stop once max_i |PAI(i,i) - 1| <= tolerance (neutral rule)
            or the relative diagonal change <= tolerance (literal rule)
        max_iter: Sweep budget
        update_rule: 'neutral' or 'literal'

    Returns:
        (matrix with the converged diagonal, DiagonalFixpointReport).
        When the budget runs out the last iterate is returned with
        settled=False. converged is set from the final residual under
        either rule.
    """
    if tolerance <= 0:
        raise ConfigurationError(f"tolerance must be > 0, got {tolerance}")
    if max_iter < 1:
        raise ConfigurationError(f"max_iter must be >= 1, got {max_iter}")
    if update_rule not in UPDATE_RULES:
        raise ConfigurationError(f"Unknown update rule: {update_rule}. Use one of {UPDATE_RULES}")

    off = matrix.off_diagonal()
    links = off.sum(axis=1)
    active = links > 0
    diag = np.zeros(matrix.size)

    settled = not active.any()
    change = 0.0
    sweeps = 0

    while not settled:
        if update_rule == 'neutral':
            settled = _diagonal_residual(links, diag, active) <= tolerance
        else:
            settled = sweeps > 0 and change <= tolerance
        if settled or sweeps >= max_iter:
            break

        margins = links + diag
        total = links.sum() + diag.sum()
        if update_rule == 'neutral':
            new_diag = np.where(active, margins ** 2 / total, 0.0)
        else:
            new_diag = np.where(active, margins / total, 0.0)

        change = _relative_change(diag, new_diag, active)
        diag = new_diag
        sweeps += 1

    residual = _diagonal_residual(links, diag, active)
    report = DiagonalFixpointReport(
        iterations=sweeps,
        max_residual=residual,
        converged=residual <= tolerance,
        tolerance=tolerance,
        update_rule=update_rule,
        max_change=change,
        settled=bool(settled),
    )

    if report.converged:
        logger.info("Diagonal converged after %d sweeps (residual %.3g)", sweeps, residual)
    elif settled:
        logger.info("Diagonal settled after %d sweeps under the %s rule; diagonal PAI is not neutral "
                    "(residual %.3g)", sweeps, update_rule, residual)
    else:
        msg = (f"Diagonal did not converge in {max_iter} sweeps "
               f"(residual {residual:.3g}, last change {change:.3g})")
        logger.warning(msg)
        warnings.warn(msg)

    cells = off + np.diag(diag)
    iterated = replace(matrix, cells=cells, diagonal_strategy='iterative', diagonal_resolved=True)
    return iterated, report
