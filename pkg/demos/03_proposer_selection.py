"""
Stake-weighted proposers and slashing
=====================================

Proposers are drawn with probability proportional to stake. Slashing a
validator shrinks its stake and with it its share of blocks.
"""

import numpy as np

from maritime_ledger import Validator, ValidatorSet, select_proposer, slash

vset = ValidatorSet((Validator("A", 1), Validator("B", 3)))
rng = np.random.default_rng(0)


def shares(vs, n=100_000):
    picks = np.array([select_proposer(vs, rng).id for _ in range(n)])
    return {v.id: float(np.mean(picks == v.id)) for v in vs.validators}


print("stakes 1:3", shares(vset))

vset = slash(vset, "B", 2 / 3)
print("B slashed by 2/3, stake", round(vset.get("B").stake, 6), shares(vset))
