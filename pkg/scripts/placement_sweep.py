"""Compare cross-cloud transfers of majority placement against every fixed placement.

For each fan-out of up to N targets over three platforms, prints how many
assignments each placement choice handles optimally.

Usage: python scripts/placement_sweep.py [--max-targets 6]
"""

import argparse
import itertools
from collections import Counter

from multifaas.ir import majority_platform
from multifaas.runtime import cross_cloud_transfers

PLATFORMS = ("P1", "P2", "P3")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-targets", type=int, default=6)
    args = ap.parse_args()
    optimal: Counter = Counter()
    excess: Counter = Counter()
    cases = 0
    for n in range(1, args.max_targets + 1):
        for me in PLATFORMS:
            for targets in itertools.product(PLATFORMS, repeat=n):
                cases += 1
                cost = {p: cross_cloud_transfers(me, list(targets), p) for p in PLATFORMS}
                best = min(cost.values())
                choices = {"majority": majority_platform([me, *targets], prefer=me), "self": me, **{p: p for p in PLATFORMS}}
                for label, p in choices.items():
                    optimal[label] += cost[p] == best
                    excess[label] += cost[p] - best
    print(f"{cases} fan-out assignments")
    print(f"{'placement':10}{'optimal':>10}{'excess transfers':>18}")
    for label in ("majority", "self", *PLATFORMS):
        print(f"{label:10}{optimal[label]:>10}{excess[label]:>18}")


if __name__ == "__main__":
    main()
