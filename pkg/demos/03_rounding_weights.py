"""Turning real stake into small integer weights without losing guarantees.

Threshold sharing works on integer units, so stake must be rounded. A rounded
profile is sound when every coalition below the secrecy stake has too little
weight, and every coalition at the recovery stake has enough. This script
rounds a skewed 12-party stake vector for two threshold pairs and then checks
all 4096 coalitions.
"""

from __future__ import annotations

import math
from fractions import Fraction

from btcsim.rounding import WeightProfile, feasible_interval, round_dual, verify_profile


def pair(total: int, a: str, b: str) -> tuple[int, int]:
    return math.ceil(Fraction(a) * total), math.ceil(Fraction(b) * total)


def main() -> None:
    stakes = [4200, 2100, 1300, 900, 880, 600, 410, 300, 120, 75, 40, 9]
    total = sum(stakes)
    slow, fast = pair(total, "0.5", "0.66"), pair(total, "0.667", "0.83")
    prof = round_dual(stakes, *slow, *fast)
    print(f"stakes {stakes} (total {total})")
    print(f"weights {list(prof.weights)} (total {prof.total_weight})")
    print(f"slow threshold {prof.w_slow} in {feasible_interval(stakes, prof.weights, *slow)}")
    print(f"fast threshold {prof.w_fast} in {feasible_interval(stakes, prof.weights, *fast)}")
    res = verify_profile(stakes, prof, mode="exhaustive")
    print(f"exhaustive check over {res.checked} coalitions: {'sound' if res.passed else 'BROKEN'}")

    lo, _ = feasible_interval(stakes, prof.weights, *slow)
    bad = WeightProfile(prof.weights, lo - 1, stake_pairs=(slow,))
    res = verify_profile(stakes, bad, mode="exhaustive")
    c = res.counterexample
    print(
        f"threshold {lo - 1} fails {res.violated}: parties {list(c)} hold "
        f"{sum(stakes[i] for i in c)} stake (< {slow[0]}) but {sum(prof.weights[i] for i in c)} units"
    )


if __name__ == "__main__":
    main()
