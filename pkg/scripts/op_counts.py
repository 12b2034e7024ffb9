"""Print per-instance datastore operation counts for the iot-N and mc-K workflows.

Usage: python scripts/op_counts.py [--iot 10] [--mc 32] [--group-size 10]
"""

import argparse

from multifaas import fixtures
from multifaas.ir import compile_subgraphs
from multifaas.naming import FunctionId
from multifaas.oracle import run_once
from multifaas.runtime import RuntimeConfig


def table(sim, title: str) -> None:
    print(f"\n{title}")
    print(f"{'instance':28}{'W':>4}{'R':>4}{'OW':>4}{'OR':>4}{'inv':>5}{'xcloud':>8}")
    for key, m in sorted(sim.meters.items()):
        fid = FunctionId.parse(key)
        if fid.name == "gc":
            continue
        print(f"{fid.local:28}{m.writes:>4}{m.reads:>4}{m.object_writes:>4}{m.object_reads:>4}{m.invokes:>5}{m.cross_cloud:>8}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iot", type=int, default=10)
    ap.add_argument("--mc", type=int, default=32)
    ap.add_argument("--group-size", type=int, default=10)
    args = ap.parse_args()
    config = RuntimeConfig(group_size=args.group_size)
    topo = fixtures.default_topology()
    for name in (f"iot-{args.iot}", f"mc-{args.mc}"):
        wf = fixtures.workflow(name)
        sim = run_once(compile_subgraphs(wf), wf.entry, topo, config=config)
        table(sim, name)


if __name__ == "__main__":
    main()
