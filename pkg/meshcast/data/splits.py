"""
Case-level train / validation / test splits.
"""

import math
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel

from ..utils.errors import SplitError

MIN_CASES = 5


class CaseSplit(BaseModel):
    train: List[str]
    val: List[str]
    test: List[str]

    def all_ids(self) -> List[str]:
        return self.train + self.val + self.test


def split_cases(case_ids: Sequence[str], seed: int, train_fraction: float = 0.8,
                val_fraction: float = 0.1) -> CaseSplit:
    """Seeded 8:2 train-pool/test split, then 9:1 train/val within the pool.

    Splitting is by case id only, so no subject contributes slices to two
    splits.
    """
    ids = sorted(set(case_ids))
    if len(ids) != len(case_ids):
        raise SplitError("Duplicate case ids")
    if len(ids) < MIN_CASES:
        raise SplitError(f"Need at least {MIN_CASES} cases to split, got {len(ids)}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    pool_size = int(math.floor(len(ids) * train_fraction + 1e-9))
    pool, test = shuffled[:pool_size], shuffled[pool_size:]
    train_size = int(math.floor(len(pool) * (1.0 - val_fraction) + 1e-9))
    train_size = min(train_size, len(pool) - 1)
    return CaseSplit(train=sorted(pool[:train_size]), val=sorted(pool[train_size:]), test=sorted(test))
