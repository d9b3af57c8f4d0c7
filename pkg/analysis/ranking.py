"""
AFI-gated preferred partner ranking.

PAI on its own favours small partners, so the candidate set is first cut
to the target's top-n partners by AFI (share of the target's links), and
only those are ranked by PAI.
"""

from dataclasses import dataclass
from typing import Dict

import pandas as pd

from affinity.similarity import afi
from affinity.variants import VariantResult
from etl.matrix import CoauthMatrix, ConfigurationError


@dataclass
class RankedPartnerList:
    target: str
    variant: str
    afi_cutoff_n: int
    entries: pd.DataFrame  # rank, partner, afi, pai

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> Dict:
        entries = []
        for row in self.entries.to_dict(orient='records'):
            entries.append({
                'rank': None if pd.isna(row['rank']) else int(row['rank']),
                'partner': row['partner'],
                'afi': float(row['afi']),
                'pai': None if pd.isna(row['pai']) else float(row['pai']),
            })
        return {
            'target': self.target,
            'variant': self.variant,
            'afi_cutoff_n': self.afi_cutoff_n,
            'entries': entries,
        }


def rank_partners(
    target: str,
    matrix: CoauthMatrix,
    variant: VariantResult,
    n: int
) -> RankedPartnerList:
    """
    Rank the target's top-n AFI partners by PAI.

    Args:
        target: Country code with at least one link
        matrix: Co-authorship matrix (AFI source)
        variant: PAI/NPAI result on the same labels
        n: AFI cutoff; larger than the partner count means all partners

    Returns:
        RankedPartnerList ordered by PAI descending; tied PAI values share
        the lowest rank and are listed by country code
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    if tuple(variant.labels) != tuple(matrix.labels):
        raise ConfigurationError(f"{variant.name} labels do not match the matrix")

    shares = afi(matrix, target)
    candidates = pd.DataFrame({'partner': shares.index, 'afi': shares.to_numpy()})
    candidates = candidates[candidates['afi'] > 0]
    top = (candidates
           .sort_values(['afi', 'partner'], ascending=[False, True], kind='mergesort')
           .head(n))

    pai = variant.row(target)
    top = top.assign(pai=pai.reindex(top['partner']).to_numpy())
    top = top.sort_values(['pai', 'partner'], ascending=[False, True], kind='mergesort', na_position='last')
    top['rank'] = top['pai'].rank(method='min', ascending=False).astype('Int64')

    entries = top[['rank', 'partner', 'afi', 'pai']].reset_index(drop=True)
    return RankedPartnerList(target=target, variant=variant.name, afi_cutoff_n=n, entries=entries)
