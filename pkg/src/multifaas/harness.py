"""Scenario runner, report model and fixture emission behind the CLI.

A scenario is a JSON document::

    {"name": "failover", "workflow": "failover", "topology": "default",
     "faultPlan": {"wrongInvocations": [{"edge": ["A", "B"], "window": [10, 20]}]},
     "seed": 7, "repetitions": 1, "submissions": 100, "failover": true,
     "config": {"groupSize": 10}, "payloadBytes": 1024,
     "assertions": ["completed", "failover-extra-ops"], "expect": {}}

``workflow``, ``topology`` and ``faultPlan`` accept a bundled name, a path
to a JSON file, or an inline object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from . import fixtures
from .ir import (
    BYBATCH,
    BYREDUNDANT,
    FANIN,
    GC,
    InvalidWorkflow,
    SubGraph,
    WorkflowDef,
    compile_subgraphs,
    parse_workflow_def,
    workflow_from_dict,
)
from .naming import FunctionId
from .oracle import Verdict, check_observables, enumerate_crash_points
from .runtime import RuntimeConfig, deploy
from .sim import FaultPlan, InvalidPlan, OpCounts, SimCloud, Topology

ASSERTIONS = ("completed", "op-counts", "exactly-once", "gc-residue", "failover-extra-ops", "expected-failures")
REPORT_VERSION = 1


class ConfigError(Exception):
    """Bad scenario input; maps to exit status 2."""


@dataclass
class ScenarioSpec:
    name: str
    workflow: WorkflowDef
    topology: Topology
    fault_plan: FaultPlan = FaultPlan()
    seed: int = 0
    repetitions: int = 1
    submissions: int = 1
    failover: bool = True
    config: RuntimeConfig = RuntimeConfig()
    payload_bytes: int = 1024
    assertions: tuple[str, ...] = ("completed", "exactly-once", "gc-residue")
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1 or self.submissions < 1:
            raise ConfigError("repetitions and submissions must be >= 1")
        unknown = [a for a in self.assertions if a not in ASSERTIONS]
        if unknown:
            raise ConfigError(f"unknown assertions {unknown}")


# -- loading -----------------------------------------------------------------


def _load_json(ref: Any, base: Path | None) -> Any:
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_workflow(ref: Any, base: Path | None = None) -> WorkflowDef:
    try:
        if isinstance(ref, dict):
            return workflow_from_dict(ref)
        if isinstance(ref, str) and not ref.endswith(".json"):
            return fixtures.workflow(ref)
        path = Path(ref) if base is None or Path(ref).is_absolute() else base / ref
        try:
            return parse_workflow_def(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
    except InvalidWorkflow as exc:
        where = "".join(f" at {d.position[0]}:{d.position[1]}" for d in exc.diagnostics if d.position)
        raise ConfigError(f"invalid workflow{where}: {exc}") from None
    except KeyError as exc:
        raise ConfigError(str(exc)) from None


def load_topology(ref: Any, base: Path | None = None) -> Topology:
    try:
        if ref in (None, "default"):
            return fixtures.default_topology()
        return Topology.from_dict(ref if isinstance(ref, dict) else _load_json(ref, base))
    except InvalidPlan as exc:
        raise ConfigError(str(exc)) from None


def load_plan(ref: Any, base: Path | None = None) -> FaultPlan:
    if ref is None:
        return FaultPlan()
    try:
        return FaultPlan.from_dict(ref if isinstance(ref, dict) else _load_json(ref, base))
    except InvalidPlan as exc:
        raise ConfigError(str(exc)) from None


def scenario_from_dict(d: dict, base: Path | None = None) -> ScenarioSpec:
    if not isinstance(d, dict) or "workflow" not in d:
        raise ConfigError("a scenario needs at least a 'workflow'")
    try:
        config = RuntimeConfig.from_dict(d.get("config", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad config: {exc}") from None
    topology = load_topology(d.get("topology"), base)
    plan = load_plan(d.get("faultPlan"), base)
    try:
        plan.validate(topology)
    except InvalidPlan as exc:
        raise ConfigError(str(exc)) from None
    return ScenarioSpec(
        name=d.get("name", "scenario"),
        workflow=load_workflow(d["workflow"], base),
        topology=topology,
        fault_plan=plan,
        seed=int(d.get("seed", 0)),
        repetitions=int(d.get("repetitions", 1)),
        submissions=int(d.get("submissions", 1)),
        failover=bool(d.get("failover", True)),
        config=config,
        payload_bytes=int(d.get("payloadBytes", 1024)),
        assertions=tuple(d.get("assertions", ScenarioSpec.assertions)),
        expect=dict(d.get("expect", {})),
    )


def load_scenario(ref: str) -> ScenarioSpec:
    if ref in BUNDLED_SCENARIOS:
        return scenario_from_dict(BUNDLED_SCENARIOS[ref]())
    path = Path(ref)
    if not path.exists():
        raise ConfigError(f"no scenario file or bundled scenario named {ref!r}")
    return scenario_from_dict(_load_json(path, None), path.parent)


# -- expected op counts --------------------------------------------------------


def expected_checkpoint_ops(sg: SubGraph, group_size: int = 10) -> tuple[int, int] | None:
    """Fault-free table (writes, reads) a node spends on checkpoints and coordination.

    Input pulls are not included.  Collaboration nodes have no fixed count.
    """
    mode = sg.invoke.mode
    if mode in (BYBATCH, BYREDUNDANT):
        return None
    if mode == FANIN:
        return 5, 4
    k = len(sg.next_funcs) if mode != "Cycle" else 1
    return 1 + 1 + math.ceil(k / group_size), 2


def _per_run_ops(sim: SimCloud) -> dict[str, dict[str, OpCounts]]:
    """Meters regrouped as run workflow id -> local id -> counts."""
    out: dict[str, dict[str, OpCounts]] = {}
    for key, counts in sim.meters.items():
        try:
            fid = FunctionId.parse(key)
        except ValueError:
            continue
        out.setdefault(fid.workflow_id, {})[fid.local] = counts
    return out


def _input_reads(sim: SimCloud) -> dict[str, int]:
    """Table reads each instance (keyed by full id) spent pulling upstream outputs."""
    n: dict[str, int] = {}
    for r in sim.history:
        if r["op"] != "get_value" or r["kind"] != "table" or not r["key"].endswith("-output"):
            continue
        wid = r["key"].split("/", 1)[0]
        me = f"{wid}/{r['caller']}"
        if r["key"] != f"{me}-output":
            n[me] = n.get(me, 0) + 1
    return n


# -- running -------------------------------------------------------------------


@dataclass
class Report:
    scenario: str
    seed: int
    runs: list[dict]
    op_counts: dict[str, dict]
    assertions: dict[str, dict]
    duplicates: dict[str, int]
    egress: dict[str, int]
    events: int

    @property
    def passed(self) -> bool:
        return all(a["pass"] for a in self.assertions.values())

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "scenario": self.scenario,
            "seed": self.seed,
            "passed": self.passed,
            "events": self.events,
            "runs": self.runs,
            "opCounts": self.op_counts,
            "assertions": self.assertions,
            "duplicates": self.duplicates,
            "egress": self.egress,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [f"scenario {self.scenario}  seed {self.seed}  events {self.events}"]
        failed = sum(1 for r in self.runs if r["status"] != "completed")
        lines.append(f"runs {len(self.runs)}  failed {failed}")
        width = max([len(k) for k in self.assertions] + [9])
        lines.append(f"{'assertion'.ljust(width)}  result  detail")
        for name, a in sorted(self.assertions.items()):
            lines.append(f"{name.ljust(width)}  {'pass' if a['pass'] else 'FAIL':6}  {a['detail']}")
        cols = ["writes", "reads", "objectWrites", "objectReads", "invokes", "crossCloudTransfers", "faasClients"]
        short = ["W", "R", "OW", "OR", "inv", "xcloud", "faas"]
        name_w = max([len(k) for k in self.op_counts] + [8])
        lines.append("")
        lines.append("instance".ljust(name_w) + "".join(s.rjust(8) for s in short))
        for k, v in sorted(self.op_counts.items()):
            lines.append(k.ljust(name_w) + "".join(str(v[c]).rjust(8) for c in cols))
        return "\n".join(lines) + "\n"


def _strip_failover(subgraphs: dict[str, SubGraph]) -> dict[str, SubGraph]:
    out = {}
    for name, sg in subgraphs.items():
        out[name] = replace(
            sg,
            function=replace(sg.function, failover=()),
            next_funcs=tuple(replace(n, failover=()) for n in sg.next_funcs),
        )
    return out


def _verdict(ok: bool, detail: str) -> dict:
    return {"pass": bool(ok), "detail": detail}


def run_scenario(spec: ScenarioSpec) -> Report:
    """Execute every repetition and evaluate the requested assertions."""
    subgraphs = compile_subgraphs(spec.workflow)
    if not spec.failover:
        subgraphs = _strip_failover(subgraphs)
    entry = spec.workflow.entry
    entry_platform = spec.workflow.functions[entry].platform
    runs: list[dict] = []
    totals: dict[str, OpCounts] = {}
    checks: dict[str, list[str]] = {a: [] for a in spec.assertions}
    duplicates: dict[str, int] = {}
    egress = {"crossCloudTransfers": 0}
    events = 0
    for rep in range(spec.repetitions):
        sim = SimCloud(spec.topology, spec.fault_plan, spec.seed + rep)
        deploy(sim, subgraphs, None, spec.config)
        payload = bytes(spec.payload_bytes)
        for _ in range(spec.submissions):
            try:
                sim.submit(entry, entry_platform, payload)
            except Exception as exc:  # surfaced as a failed run
                runs.append({"repetition": rep, "run": f"run-{len(sim.runs):05d}", "status": "rejected", "error": str(exc)})
                continue
            sim.run_until_quiescent()
        report = sim.report()
        events += report.events
        for r in report.runs:
            runs.append({"repetition": rep, "run": r["run"], "status": r["status"], "terminalReached": r["terminalReached"]})
        for k, v in report.duplicates.items():
            local = FunctionId.parse(k).local
            duplicates[local] = duplicates.get(local, 0) + v
        per_run = _per_run_ops(sim)
        for ops in per_run.values():
            for local, c in ops.items():
                totals[local] = totals.get(local, OpCounts()) + c
                egress["crossCloudTransfers"] += c.cross_cloud
        _evaluate(spec, sim, subgraphs, per_run, checks)
    assertions = {}
    for name, problems in checks.items():
        assertions[name] = _verdict(not problems, "; ".join(problems[:5]) if problems else "ok")
    return Report(
        scenario=spec.name,
        seed=spec.seed,
        runs=runs,
        op_counts={k: v.to_dict() for k, v in sorted(totals.items())},
        assertions=assertions,
        duplicates=dict(sorted(duplicates.items())),
        egress=egress,
        events=events,
    )


def _evaluate(spec, sim: SimCloud, subgraphs, per_run, checks: dict[str, list[str]]) -> None:
    failed = [r for r in sim.runs if r.failed]
    if "completed" in checks:
        for r in failed:
            checks["completed"].append(f"{r.session} failed")
        for r in sim.runs:
            if not r.failed and not r.terminal_reached:
                checks["completed"].append(f"{r.session} never reached the terminal")
    if "expected-failures" in checks:
        want = int(spec.expect.get("failedRuns", 0))
        if len(failed) != want:
            checks["expected-failures"].append(f"{len(failed)} failed runs, expected {want}")
    if "exactly-once" in checks:
        for v in check_observables(sim, None, spec.config.coordination):
            checks["exactly-once"].append(f"({v.observable}) {v.detail}")
    if "gc-residue" in checks:
        prefixes = [r.workflow_id + "/" for r in sim.runs if not r.failed]
        residue = sum(sim.residue(prefixes).values())
        if residue:
            checks["gc-residue"].append(f"{residue} keys left")
    if "op-counts" in checks:
        pulls = _input_reads(sim)
        for wid, ops in per_run.items():
            for local, c in ops.items():
                name = FunctionId.parse(f"{wid}/{local}").name
                if name not in subgraphs:
                    continue
                want = expected_checkpoint_ops(subgraphs[name], spec.config.group_size)
                if want is None:
                    continue
                got = (c.writes, c.reads - pulls.get(f"{wid}/{local}", 0))
                if got != want:
                    checks["op-counts"].append(f"{local}: {got[0]}W{got[1]}R, expected {want[0]}W{want[1]}R")
    if "failover-extra-ops" in checks:
        _check_failover(sim, per_run, checks["failover-extra-ops"])


def _check_failover(sim: SimCloud, per_run, problems: list[str]) -> None:
    """Compare each run that hit an invocation failure with a clean run."""
    failed_invokes: dict[str, set[str]] = {}
    for r in sim.history:
        if r["op"] == "async_invoke" and isinstance(r["result"], dict) and "error" in r["result"]:
            failed_invokes.setdefault(r["args"]["workflowId"], set()).add(r["caller"])
    clean = [r.workflow_id for r in sim.runs if r.workflow_id not in failed_invokes and not r.failed]
    affected = [r.workflow_id for r in sim.runs if r.workflow_id in failed_invokes]
    if not affected:
        problems.append("no run exercised failover")
        return
    if not clean:
        problems.append("no clean run to compare against")
        return
    base = per_run[clean[0]]
    for wid in affected:
        for caller in sorted(failed_invokes[wid]):
            got, ref = per_run[wid][caller], base.get(caller)
            if ref is None:
                problems.append(f"{caller} missing from the clean run")
                continue
            diff = {k: got.to_dict()[k] - ref.to_dict()[k] for k in got.to_dict()}
            want = {k: 0 for k in diff} | {"faasClients": 1, "invokes": 1, "crossCloudTransfers": 1}
            if diff != want:
                nonzero = {k: v for k, v in diff.items() if v}
                problems.append(f"{caller}: extra ops {nonzero}")


def failover_extra_ops(report_sim: SimCloud) -> list[dict]:
    """Per affected edge, the invoker's extra operations relative to a clean run."""
    per_run = _per_run_ops(report_sim)
    failed: dict[str, set[str]] = {}
    for r in report_sim.history:
        if r["op"] == "async_invoke" and isinstance(r["result"], dict) and "error" in r["result"]:
            failed.setdefault(r["args"]["workflowId"], set()).add(r["caller"])
    clean = next(r.workflow_id for r in report_sim.runs if r.workflow_id not in failed)
    rows = []
    for wid, callers in failed.items():
        for c in sorted(callers):
            got, ref = per_run[wid][c].to_dict(), per_run[clean][c].to_dict()
            rows.append({"workflowId": wid, "invoker": c, **{k: got[k] - ref[k] for k in got if got[k] != ref[k]}})
    return rows


def verify_exactly_once(workflow: str | WorkflowDef, budget: int = 2, mutant: str | None = None, seed: int = 0) -> Verdict:
    wf = workflow if isinstance(workflow, WorkflowDef) else load_workflow(workflow)
    subgraphs = compile_subgraphs(wf)
    instances = _instance_count(wf)
    if instances > 8:
        raise ConfigError(f"{wf.name} has {instances} function instances; exhaustive checking is limited to 8")
    config = RuntimeConfig(retry_budget=budget, mutant=mutant)
    return enumerate_crash_points(subgraphs, wf.entry, fixtures.default_topology(budget), budget, seed, config, wf.name)


def _instance_count(wf: WorkflowDef) -> int:
    sim = SimCloud(fixtures.default_topology(), None, 0)
    subgraphs = compile_subgraphs(wf)
    deploy(sim, subgraphs)
    sim.submit(wf.entry, wf.functions[wf.entry].platform)
    sim.run_until_quiescent()
    return sum(1 for k in sim.executions if FunctionId.parse(k).name != "gc")


# -- bundled scenarios and fixture files ---------------------------------------


def _scenario(name: str, workflow: str, **kw) -> dict:
    d = {"name": name, "workflow": workflow, "topology": "default", "seed": 7}
    d.update(kw)
    return d


BUNDLED_SCENARIOS = {
    "iot-10": lambda: _scenario("iot-10", "iot-10", assertions=["completed", "op-counts", "exactly-once", "gc-residue"]),
    "mc-32": lambda: _scenario("mc-32", "mc-32", assertions=["completed", "op-counts", "exactly-once", "gc-residue"]),
    "diamond": lambda: _scenario("diamond", "diamond", assertions=["completed", "op-counts", "exactly-once", "gc-residue"]),
    "seq-3": lambda: _scenario("seq-3", "seq-3", assertions=["completed", "op-counts", "exactly-once", "gc-residue"]),
    "failover": lambda: _scenario(
        "failover",
        "failover",
        submissions=100,
        faultPlan={"wrongInvocations": [{"edge": ["A", "B"], "window": [10, 20]}]},
        assertions=["completed", "failover-extra-ops", "exactly-once", "gc-residue"],
    ),
    "failover-disabled": lambda: _scenario(
        "failover-disabled",
        "failover",
        submissions=100,
        failover=False,
        faultPlan={"wrongInvocations": [{"edge": ["A", "B"], "window": [10, 20]}]},
        assertions=["expected-failures"],
        expect={"failedRuns": 10},
    ),
}


def emit_fixtures(out: str | Path, names: list[str] | None = None) -> list[Path]:
    """Write bundled workflows, the default topology and scenarios under ``out``."""
    out = Path(out)
    written = []
    for sub in ("workflows", "topologies", "scenarios"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for name in names or list(fixtures.BUNDLED):
        path = out / "workflows" / f"{name}.json"
        path.write_text(json.dumps(fixtures.workflow_doc(name), indent=2) + "\n")
        written.append(path)
    path = out / "topologies" / "default.json"
    path.write_text(json.dumps(fixtures.default_topology().to_dict(), indent=2) + "\n")
    written.append(path)
    for name, make in BUNDLED_SCENARIOS.items():
        doc = make()
        wf = doc["workflow"]
        if isinstance(wf, str) and (out / "workflows" / f"{wf}.json").exists():
            doc["workflow"] = f"../workflows/{wf}.json"
        doc["topology"] = "../topologies/default.json"
        path = out / "scenarios" / f"{name}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        written.append(path)
    return written


def report_diff(a: dict, b: dict, path: str = "") -> list[str]:
    """Paths at which two report documents differ."""
    if type(a) is not type(b):
        return [f"{path or '/'}: {a!r} != {b!r}"]
    if isinstance(a, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}/{k}: present in only one report")
            else:
                out += report_diff(a[k], b[k], f"{path}/{k}")
        return out
    if isinstance(a, list):
        if len(a) != len(b):
            return [f"{path}: lengths {len(a)} != {len(b)}"]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out += report_diff(x, y, f"{path}/{i}")
        return out
    return [] if a == b else [f"{path}: {a!r} != {b!r}"]
