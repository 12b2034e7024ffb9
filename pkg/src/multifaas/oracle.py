"""Exactly-once oracle: observable checks and exhaustive crash enumeration.

The four observables checked on every run:

* ``a`` each output checkpoint is created at most once per store and every
  read returns the created value;
* ``b`` invocation lists never hold duplicates and every successor an
  instance invoked is recorded in that instance's list;
* ``c`` coordinated targets (fan-in aggregators, collaboration downstreams)
  are invoked by at most one distinct caller;
* ``d`` the run completes, produces the same set of output checkpoints as a
  fault-free reference run and leaves no keys under its workflow prefixes.
"""

from __future__ import annotations

import re
import time
from collections import defaultdict
from dataclasses import dataclass, field

from .ir import BYBATCH, BYREDUNDANT, FANIN, GC_FUNCTION, SubGraph
from .naming import FunctionId
from .runtime import ATOMIC, Registry, RuntimeConfig, deploy
from .sim import CRASH_POINTS, CrashSpec, FaultPlan, PlatformSpec, SimCloud, Topology

COORDINATED_MODES = (FANIN, BYBATCH, BYREDUNDANT)
PROTOCOL_POINTS = CRASH_POINTS[:4]
_UUID = re.compile(r"[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}")


@dataclass(frozen=True)
class Violation:
    observable: str
    detail: str
    scenario: str = ""

    def to_dict(self) -> dict:
        return {"observable": self.observable, "detail": self.detail, "scenario": self.scenario}


@dataclass
class Verdict:
    workflow: str
    runs: int = 0
    violations: list[Violation] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "workflow": self.workflow,
            "runs": self.runs,
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
        }


def normalize(key: str) -> str:
    """Replace workflow ids so keys from different runs compare equal."""
    return _UUID.sub("W", key)


def created_outputs(sim: SimCloud) -> set[str]:
    """Normalized keys of every created output checkpoint.

    Platforms are left out so a run relocated by failover compares equal to
    a fault-free one.
    """
    return {normalize(r["key"]) for r in sim.history if r["op"] == "store_output_data" and r["result"] is True}


def check_observables(
    sim: SimCloud,
    reference: set[str] | None = None,
    coordination: str = ATOMIC,
    scenario: str = "",
) -> list[Violation]:
    out: list[Violation] = []

    def bad(obs: str, detail: str) -> None:
        out.append(Violation(obs, detail, scenario))

    # (a) single creation and stable reads
    created: dict[tuple, object] = {}
    for r in sim.history:
        loc = (r["platform"], r["kind"], r["key"])
        if r["op"] == "store_output_data" and r["result"] is True:
            if loc in created:
                bad("a", f"{r['key']} created twice on {r['platform']}:{r['kind']}")
            elsewhere = {k[0] for k in created if k[2] == r["key"] and k[0] != r["platform"]}
            if elsewhere:
                bad("a", f"{r['key']} created on {r['platform']} and on {sorted(elsewhere)}")
            created[loc] = r["args"]["data"]
        elif r["op"] == "delete_prefix":
            for k in [k for k in created if k[0] == r["platform"] and k[1] == r["kind"] and k[2].startswith(r["key"])]:
                del created[k]
    seen: dict[tuple, object] = {}
    for r in sim.history:
        loc = (r["platform"], r["kind"], r["key"])
        if r["op"] == "store_output_data" and r["result"] is True:
            seen[loc] = r["args"]["data"]
        elif r["op"] == "get_value" and r["key"].endswith("-output") and r["result"] is not None:
            if loc in seen and r["result"] != seen[loc]:
                bad("a", f"read of {r['key']} returned a value other than the first created")
        elif r["op"] == "delete_prefix":
            for k in [k for k in seen if k[0] == r["platform"] and k[1] == r["kind"] and k[2].startswith(r["key"])]:
                del seen[k]

    # (b) invocation lists
    final_lists: dict[str, list[str]] = {}
    for r in sim.history:
        if r["op"] == "append_and_get_list" and isinstance(r["result"], list):
            lst = r["result"]
            if len(lst) != len(set(lst)):
                bad("b", f"duplicate names in {r['key']}")
            if r["key"].endswith("-ivk"):
                final_lists[r["key"]] = lst
    callers: dict[str, set[str]] = defaultdict(set)
    for r in sim.history:
        if r["op"] != "async_invoke" or isinstance(r["result"], dict) and "error" in r["result"]:
            continue
        a = r["args"]
        ivk = f"{a['callerId']}-ivk" if a.get("callerId") else None
        if ivk is not None and a["label"] not in final_lists.get(ivk, ()):
            bad("b", f"{r['caller']} invoked {a['label']} without recording it")
        if a["mode"] in COORDINATED_MODES and r["key"] != GC_FUNCTION:
            target = str(FunctionId(a["workflowId"], r["key"], a["step"], tuple(a["branch"])))
            callers[target].add(ivk or r["caller"])

    # (c) coordinated targets
    if coordination == ATOMIC:
        for target, who in sorted(callers.items()):
            if len(who) > 1:
                bad("c", f"{normalize(target)} invoked by {len(who)} distinct callers")

    # (d) completion, output set, residue
    for run in sim.runs:
        if run.failed:
            bad("d", f"{run.session} failed")
    if reference is not None:
        got = created_outputs(sim)
        if got != reference:
            missing = sorted(reference - got)[:3]
            extra = sorted(got - reference)[:3]
            bad("d", f"output set differs from reference (missing {missing}, extra {extra})")
    residue = sum(sim.residue().values())
    if residue and not any(r.failed for r in sim.runs):
        bad("d", f"{residue} keys left under the run's workflow prefixes")
    return out


# -- runs --------------------------------------------------------------------


def run_once(
    subgraphs: dict[str, SubGraph],
    entry: str,
    topology: Topology,
    plan: FaultPlan | None = None,
    seed: int = 0,
    config: RuntimeConfig | None = None,
    registry: Registry | None = None,
    policy="random",
    payload: bytes = b"input",
    max_events: int = 1_000_000,
) -> SimCloud:
    sim = SimCloud(topology, plan, seed, policy)
    deploy(sim, subgraphs, registry, config)
    sim.submit(entry, subgraphs[entry].function.platform, payload)
    sim.run_until_quiescent(max_events)
    return sim


def with_budget(topology: Topology, budget: int) -> Topology:
    return Topology(
        tuple(PlatformSpec(p.id, p.payload_limit_bytes, budget, p.table_store, p.object_store) for p in topology.platforms),
        topology.latency,
    )


def crash_scenarios(reference: SimCloud, budget: int, points=PROTOCOL_POINTS, include_gc: bool = True) -> list[CrashSpec]:
    """Every (instance, crash point, retry count) combination for one run."""
    invokes: dict[str, int] = defaultdict(int)
    deletes: dict[str, int] = defaultdict(int)
    for r in reference.history:
        if r["op"] == "async_invoke":
            invokes[r["caller"]] += 1
        elif r["op"] == "delete_prefix":
            deletes[r["caller"]] += 1
    instances = sorted({FunctionId.parse(k).local for k in reference.executions})
    specs = []
    for local in instances:
        is_gc = FunctionId.parse(f"w/{local}").name == GC_FUNCTION
        if is_gc:
            if include_gc:
                for k in range(1, deletes[local] + 1):
                    for times in range(1, budget + 1):
                        specs.append(CrashSpec(local, "mid-gc-sweep", k, times))
            continue
        for point in points:
            ks = range(1, invokes[local] + 1) if point == "mid-invoke-batch" else [None]
            for k in ks:
                for times in range(1, budget + 1):
                    specs.append(CrashSpec(local, point, k, times))
    return specs


def enumerate_crash_points(
    subgraphs: dict[str, SubGraph],
    entry: str,
    topology: Topology,
    budget: int = 2,
    seed: int = 0,
    config: RuntimeConfig | None = None,
    name: str = "workflow",
    include_gc: bool = True,
) -> Verdict:
    """Re-run the workflow once per crash scenario and check the observables."""
    start = time.perf_counter()
    topo = with_budget(topology, budget)
    config = config or RuntimeConfig(retry_budget=budget)
    verdict = Verdict(name)
    ref = run_once(subgraphs, entry, topo, None, seed, config)
    verdict.runs += 1
    reference = created_outputs(ref)
    verdict.violations += check_observables(ref, reference, config.coordination, "fault-free")
    for spec in crash_scenarios(ref, budget, include_gc=include_gc):
        sim = run_once(subgraphs, entry, topo, FaultPlan(crashes=(spec,)), seed, config)
        verdict.runs += 1
        label = f"{spec.function}@{spec.point}" + (f"({spec.k})" if spec.k is not None else "") + f"x{spec.times}"
        verdict.violations += check_observables(sim, reference, config.coordination, label)
    verdict.seconds = time.perf_counter() - start
    return verdict
