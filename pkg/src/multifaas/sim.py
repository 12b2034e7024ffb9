"""A deterministic simulated multi-cloud implementing the shim protocols.

Every function execution runs in its own greenlet.  Shim operations yield
to the scheduler before and after they take effect, so a seeded scheduler
decides the interleaving of concurrent executions.  Time is the number of
scheduler steps taken so far.
"""

from __future__ import annotations

import hashlib
import json
import random
import uuid
from collections import defaultdict
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from fnmatch import fnmatchcase
from typing import Any

from greenlet import greenlet

from .envelope import JointObject
from .naming import FunctionId
from .shim import (
    OBJECT,
    TABLE,
    TABLE_ITEM_LIMIT,
    AcceptToken,
    Bitmap,
    DsSpec,
    FaaSSpec,
    IndexOutOfRange,
    MissingBitmap,
    MissingList,
    ObjectStub,
    PayloadTooLarge,
    PlatformUnavailable,
    ShimError,
    UnknownFunction,
    UnknownPlatform,
    ValueTooLarge,
)

CRASH_POINTS = (
    "before-output-ckpt",
    "after-output-before-invoke",
    "mid-invoke-batch",
    "after-invoke-before-ivk-append",
    "mid-gc-sweep",
)
GC_NAME = "gc"

Handler = Callable[[JointObject, "ExecContext"], None]


class InvalidPlan(ValueError):
    pass


class EventBudgetExceeded(RuntimeError):
    pass


class InjectedCrash(Exception):
    """Raised inside a function at a configured crash point."""


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class PlatformSpec:
    id: str
    payload_limit_bytes: int = 262_144
    retry_budget: int = 2
    table_store: bool = True
    object_store: bool = True

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "payloadLimitBytes": self.payload_limit_bytes,
            "retryBudget": self.retry_budget,
            "tableStore": self.table_store,
            "objectStore": self.object_store,
        }


@dataclass(frozen=True)
class LatencyModel:
    """Delivery delay in ticks: ``base`` plus a seeded draw from ``[0, jitter]``,
    plus ``cross_cloud`` when the request crosses platforms."""

    base: int = 0
    jitter: int = 0
    cross_cloud: int = 0


@dataclass(frozen=True)
class Topology:
    platforms: tuple[PlatformSpec, ...]
    latency: LatencyModel = LatencyModel()

    def __post_init__(self):
        if not self.platforms:
            raise InvalidPlan("topology needs at least one platform")
        for p in self.platforms:
            if p.payload_limit_bytes <= 0 or p.retry_budget < 0:
                raise InvalidPlan(f"platform {p.id}: limits must be positive and retryBudget >= 0")
        if len({p.id for p in self.platforms}) != len(self.platforms):
            raise InvalidPlan("duplicate platform ids")

    def get(self, pid: str) -> PlatformSpec:
        for p in self.platforms:
            if p.id == pid:
                return p
        raise UnknownPlatform(pid)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.platforms]

    def to_dict(self) -> dict:
        return {"platforms": [p.to_dict() for p in self.platforms], "latency": asdict(self.latency)}

    @classmethod
    def from_dict(cls, d: dict) -> Topology:
        try:
            plats = tuple(
                PlatformSpec(
                    p["id"],
                    int(p.get("payloadLimitBytes", 262_144)),
                    int(p.get("retryBudget", 2)),
                    bool(p.get("tableStore", True)),
                    bool(p.get("objectStore", True)),
                )
                for p in d["platforms"]
            )
            lat = d.get("latency", {})
            return cls(plats, LatencyModel(int(lat.get("base", 0)), int(lat.get("jitter", 0)), int(lat.get("cross_cloud", 0))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidPlan):
                raise
            raise InvalidPlan(f"bad topology: {exc}") from exc


@dataclass(frozen=True)
class Outage:
    """Platform unavailable for events (or submissions, with ``unit="run"``)
    in ``[start, end)``."""

    platform: str
    start: int
    end: int
    unit: str = "event"


@dataclass(frozen=True)
class CrashSpec:
    """Crash the first ``times`` attempts of matching instances at ``point``.

    ``function`` is an fnmatch pattern over the local id (``B_1``, ``C_2-bindex-0``).
    """

    function: str
    point: str
    k: int | None = None
    times: int = 1


@dataclass(frozen=True)
class WrongInvocation:
    """Invocations along ``src -> dst`` on the primary platform fail with
    UnknownFunction for submissions in ``[start, end)``."""

    src: str
    dst: str
    start: int
    end: int


@dataclass(frozen=True)
class Duplicate:
    """Deliver matching requests ``copies`` extra times."""

    function: str
    copies: int = 1


@dataclass(frozen=True)
class FaultPlan:
    outages: tuple[Outage, ...] = ()
    crashes: tuple[CrashSpec, ...] = ()
    wrong_invocations: tuple[WrongInvocation, ...] = ()
    duplicates: tuple[Duplicate, ...] = ()

    def to_dict(self) -> dict:
        return {
            "outages": [asdict(o) for o in self.outages],
            "crashes": [asdict(c) for c in self.crashes],
            "wrongInvocations": [{"edge": [w.src, w.dst], "window": [w.start, w.end]} for w in self.wrong_invocations],
            "duplicates": [asdict(d) for d in self.duplicates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> FaultPlan:
        try:
            return cls(
                tuple(Outage(o["platform"], int(o["start"]), int(o["end"]), o.get("unit", "event")) for o in d.get("outages", ())),
                tuple(CrashSpec(c["function"], c["point"], c.get("k"), int(c.get("times", 1))) for c in d.get("crashes", ())),
                tuple(
                    WrongInvocation(w["edge"][0], w["edge"][1], int(w["window"][0]), int(w["window"][1]))
                    for w in d.get("wrongInvocations", ())
                ),
                tuple(Duplicate(x["function"], int(x.get("copies", 1))) for x in d.get("duplicates", ())),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidPlan(f"bad fault plan: {exc}") from exc

    def validate(self, topology: Topology) -> None:
        ids = set(topology.ids)
        for o in self.outages:
            if o.platform not in ids:
                raise InvalidPlan(f"outage names unknown platform {o.platform!r}")
            if o.unit not in ("event", "run") or o.end < o.start:
                raise InvalidPlan(f"bad outage window {o}")
        for c in self.crashes:
            if c.point not in CRASH_POINTS:
                raise InvalidPlan(f"unknown crash point {c.point!r}")
            if c.times < 1:
                raise InvalidPlan("crash times must be >= 1")


# -- metering ----------------------------------------------------------------


@dataclass
class OpCounts:
    writes: int = 0
    reads: int = 0
    object_writes: int = 0
    object_reads: int = 0
    invokes: int = 0
    cross_cloud: int = 0
    faas_clients: int = 0
    ds_clients: int = 0
    deletes: int = 0

    def to_dict(self) -> dict:
        return {
            "writes": self.writes,
            "reads": self.reads,
            "objectWrites": self.object_writes,
            "objectReads": self.object_reads,
            "invokes": self.invokes,
            "crossCloudTransfers": self.cross_cloud,
            "faasClients": self.faas_clients,
            "dsClients": self.ds_clients,
            "deletes": self.deletes,
        }

    def __add__(self, other: OpCounts) -> OpCounts:
        return OpCounts(*(a + b for a, b in zip(asdict(self).values(), asdict(other).values())))


def _digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()[:16]


def _render(value: Any) -> Any:
    """JSON-friendly rendering of a stored value or op result."""
    if isinstance(value, bytes):
        return _digest(value)
    if isinstance(value, Bitmap):
        return {"bits": [int(b) for b in value.bits], "closer": value.closer}
    if isinstance(value, ObjectStub):
        return {"stub": value.key, "platform": value.platform}
    if isinstance(value, (list, tuple)):
        return list(value)
    return value


# -- tasks -------------------------------------------------------------------


@dataclass
class Task:
    id: int
    kind: str  # "delivery" or "driver"
    platform: str
    function: str
    env: JointObject | None = None
    fid: FunctionId | None = None
    attempt: int = 0
    ready_at: int = 0
    glet: greenlet | None = None
    fn: Callable[[], Any] | None = None
    session: str | None = None
    result: Any = None
    error: BaseException | None = None

    @property
    def caller(self) -> str:
        return self.fid.local if self.fid is not None else self.function

    @property
    def workflows(self) -> tuple[str, ...]:
        if self.env is None:
            return ()
        return (self.env.workflow_id, *self.env.extra_gc)


@dataclass
class ExecContext:
    """What a deployed handler sees of the platform it runs on."""

    sim: SimCloud
    platform: str
    function: str
    fid: FunctionId
    attempt: int
    session: str | None

    def ds_create(self, spec: DsSpec) -> SimDataStore:
        return self.sim.ds_create(spec)

    def faas_create(self, spec: FaaSSpec) -> SimFaaSClient:
        return self.sim.faas_create(spec)

    def at(self, point: str, k: int | None = None) -> None:
        self.sim._crash_hook(point, k)

    def note_user_call(self) -> None:
        self.sim.user_calls[str(self.fid)] += 1


@dataclass
class RunRecord:
    index: int
    session: str
    workflow_id: str
    entry: str
    platform: str
    failed: bool = False
    terminal_reached: bool = False

    @property
    def status(self) -> str:
        return "failed" if self.failed else "completed"


@dataclass
class RunReport:
    seed: int
    events: int
    runs: list[dict]
    op_counts: dict[str, dict]
    executions: dict[str, int]
    user_calls: dict[str, int]
    failures: list[dict]
    stores: dict[str, dict]
    residue: dict[str, int]

    @property
    def duplicates(self) -> dict[str, int]:
        return {k: v - 1 for k, v in self.executions.items() if v > 1}

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "events": self.events,
            "runs": self.runs,
            "opCounts": self.op_counts,
            "executions": self.executions,
            "userCalls": self.user_calls,
            "duplicates": self.duplicates,
            "failures": self.failures,
            "stores": self.stores,
            "residue": self.residue,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# -- shim handles ------------------------------------------------------------


class SimDataStore:
    def __init__(self, sim: SimCloud, platform: str, kind: str):
        self.sim = sim
        self.platform = platform
        self.kind = kind
        self._data = sim._stores[(platform, kind)]

    def _op(self, op: str, key: str, args: Any, meter: str, apply: Callable[[], Any]) -> Any:
        return self.sim._shim_op(op, key, args, self.platform, self.kind, meter, apply)

    def _need_table(self, op: str) -> None:
        if self.kind != TABLE:
            raise ShimError(f"{op} requires a table store")

    def store_output_data(self, key: str, data: bytes) -> bool:
        if not key:
            raise ValueError("empty key")
        if self.kind == TABLE and not isinstance(data, ObjectStub) and len(data) > TABLE_ITEM_LIMIT:
            raise ValueTooLarge(len(data))

        def apply():
            if key in self._data:
                return False
            self._data[key] = data
            return True

        shown = _render(data)
        return self._op("store_output_data", key, {"data": shown}, "object_writes" if self.kind == OBJECT else "writes", apply)

    def get_value(self, key: str) -> Any:
        def apply():
            v = self._data.get(key)
            return list(v) if isinstance(v, list) else v

        return self._op("get_value", key, {}, "object_reads" if self.kind == OBJECT else "reads", apply)

    def create_invocation_list(self, key: str) -> bool:
        self._need_table("create_invocation_list")

        def apply():
            if key in self._data:
                return False
            self._data[key] = []
            return True

        return self._op("create_invocation_list", key, {}, "writes", apply)

    def append_and_get_list(self, key: str, names: list[str]) -> list[str]:
        self._need_table("append_and_get_list")
        names = list(names)

        def apply():
            cur = self._data.get(key)
            if not isinstance(cur, list):
                raise MissingList(key)
            for n in names:
                if n not in cur:
                    cur.append(n)
            return list(cur)

        return self._op("append_and_get_list", key, {"names": names}, "writes", apply)

    def create_bitmap(self, size: int, key: str) -> bool:
        self._need_table("create_bitmap")
        if size < 1:
            raise ValueError("bitmap size must be >= 1")

        def apply():
            if key in self._data:
                return False
            self._data[key] = Bitmap((False,) * size)
            return True

        return self._op("create_bitmap", key, {"size": size}, "writes", apply)

    def update_bitmap(self, index: int, key: str) -> Bitmap:
        self._need_table("update_bitmap")

        def apply():
            bm = self._data.get(key)
            if not isinstance(bm, Bitmap):
                raise MissingBitmap(key)
            if not 0 <= index < len(bm.bits):
                raise IndexOutOfRange(f"{index} not in [0, {len(bm.bits)})")
            if bm.bits[index]:
                return bm
            bits = tuple(True if i == index else b for i, b in enumerate(bm.bits))
            closer = index if all(bits) else None
            bm = Bitmap(bits, closer)
            self._data[key] = bm
            return bm

        return self._op("update_bitmap", key, {"index": index}, "writes", apply)

    def delete_prefix(self, prefix: str) -> int:
        def apply():
            doomed = sorted(k for k in self._data if k.startswith(prefix))
            for k in doomed:
                del self._data[k]
            return len(doomed)

        return self._op("delete_prefix", prefix, {}, "deletes", apply)


class SimFaaSClient:
    def __init__(self, sim: SimCloud, platform: str):
        self.sim = sim
        self.platform = platform

    def async_invoke(self, function: str, payload: JointObject) -> AcceptToken:
        return self.sim._invoke(self.platform, function, payload)


# -- the simulator -----------------------------------------------------------


class SimCloud:
    """Single-owner event loop over simulated platforms, stores and queues."""

    def __init__(self, topology: Topology, fault_plan: FaultPlan | None = None, seed: int = 0, policy: str | Callable = "random"):
        self.topology = topology
        self.plan = fault_plan or FaultPlan()
        self.plan.validate(topology)
        self.seed = seed
        self.rng = random.Random(seed)
        self.policy = policy
        self.now = 0
        self._stores: dict[tuple[str, str], dict[str, Any]] = {}
        for p in topology.platforms:
            if p.table_store:
                self._stores[(p.id, TABLE)] = {}
            if p.object_store:
                self._stores[(p.id, OBJECT)] = {}
        self._deployed: dict[tuple[str, str], Handler] = {}
        self._ready: list[Task] = []
        self._waiting: list[Task] = []
        self._current: Task | None = None
        self._sched: greenlet | None = None
        self._task_ids = 0
        self._req_ids = 0
        self.history: list[dict] = []
        self.meters: dict[str, OpCounts] = defaultdict(OpCounts)
        self.executions: dict[str, int] = defaultdict(int)
        self.user_calls: dict[str, int] = defaultdict(int)
        self.failures: list[dict] = []
        self.runs: list[RunRecord] = []
        self._sessions: dict[str, RunRecord] = {}
        self._pending: dict[str, int] = defaultdict(int)
        self._crash_counts: dict[tuple[int, str], int] = defaultdict(int)
        self.terminals: set[str] = set()
        # primary platform per function, which scopes wrong-invocation faults
        self._primary: dict[str, str] = {}

    # -- deployment and submission -----------------------------------------

    def deploy(self, platform: str, function: str, handler: Handler, primary: bool = True) -> None:
        self.topology.get(platform)
        self._deployed[(platform, function)] = handler
        if primary:
            self._primary.setdefault(function, platform)

    def deployed(self, platform: str, function: str) -> bool:
        return (platform, function) in self._deployed

    def new_workflow_id(self) -> str:
        return str(uuid.UUID(int=self.rng.getrandbits(128), version=4))

    def submit(
        self, function: str, platform: str, payload: bytes = b"", session: str | None = None, request: str | None = None
    ) -> str:
        """Enqueue a fresh workflow run at ``function`` and return its run id.

        Runs submitted with the same ``request`` are redundant replicas of it.
        """
        index = len(self.runs)
        if self._down(platform, index):
            raise PlatformUnavailable(platform)
        if not self.deployed(platform, function):
            raise UnknownFunction(function, platform)
        wid = self.new_workflow_id()
        session = session or f"run-{index:05d}"
        rec = RunRecord(index, session, wid, function, platform)
        self.runs.append(rec)
        self._sessions[session] = rec
        env = JointObject(workflow_id=wid, session=session, payload=payload, label=function, request=request)
        self._enqueue(platform, function, env, delay=0)
        return session

    def spawn(self, fn: Callable[[], Any], platform: str, name: str = "driver") -> Task:
        """Run ``fn`` as a scheduled task (used by tests to race raw shim ops)."""
        self.topology.get(platform)
        task = self._new_task("driver", platform, name)
        task.fn = fn
        self._ready.append(task)
        return task

    # -- backend protocol ----------------------------------------------------

    def ds_create(self, spec: DsSpec) -> SimDataStore:
        self.topology.get(spec.platform)
        if not spec.credentials:
            raise ShimError("missing credentials")
        self._meter("ds_clients")
        if self._down(spec.platform):
            raise PlatformUnavailable(spec.platform)
        if (spec.platform, spec.kind) not in self._stores:
            raise ShimError(f"{spec.platform} has no {spec.kind} store")
        return SimDataStore(self, spec.platform, spec.kind)

    def faas_create(self, spec: FaaSSpec) -> SimFaaSClient:
        self.topology.get(spec.platform)
        if not spec.credentials:
            raise ShimError("missing credentials")
        self._meter("faas_clients")
        if self._down(spec.platform):
            raise PlatformUnavailable(spec.platform)
        return SimFaaSClient(self, spec.platform)

    # -- internals -------------------------------------------------------------

    def _run_index(self) -> int | None:
        t = self._current
        if t is None or t.session is None:
            return None
        rec = self._sessions.get(t.session)
        return rec.index if rec else None

    def _down(self, platform: str, run_index: int | None = None) -> bool:
        if run_index is None:
            run_index = self._run_index()
        for o in self.plan.outages:
            if o.platform != platform:
                continue
            if o.unit == "event" and o.start <= self.now < o.end:
                return True
            if o.unit == "run" and run_index is not None and o.start <= run_index < o.end:
                return True
        return False

    def _meter(self, counter: str, target_platform: str | None = None) -> None:
        t = self._current
        caller = str(t.fid) if t is not None and t.fid is not None else (t.function if t else "<driver>")
        m = self.meters[caller]
        setattr(m, counter, getattr(m, counter) + 1)
        if t is not None and target_platform is not None and target_platform != t.platform:
            m.cross_cloud += 1

    def _yield(self) -> None:
        if self._sched is not None and greenlet.getcurrent() is not self._sched:
            self._sched.switch()

    def _shim_op(self, op, key, args, platform, kind, meter, apply):
        begin = self.now
        self._yield()
        self._meter(meter, platform)
        t = self._current
        rec = {
            "op": op,
            "key": key,
            "args": args,
            "platform": platform,
            "kind": kind,
            "caller": t.caller if t else "<driver>",
            "begin": begin,
        }
        try:
            if self._down(platform):
                raise PlatformUnavailable(platform)
            result = apply()
        except ShimError as exc:
            rec["result"] = {"error": type(exc).__name__}
            rec["end"] = self.now
            self.history.append(rec)
            raise
        rec["result"] = _render(result)
        self._yield()
        rec["end"] = self.now
        self.history.append(rec)
        return result

    def _invoke(self, platform: str, function: str, env: JointObject) -> AcceptToken:
        begin = self.now
        self._yield()
        self._meter("invokes", platform)
        t = self._current
        rec = {
            "op": "async_invoke",
            "key": function,
            "args": {
                "label": env.label,
                "step": env.step,
                "branch": list(env.branch),
                "workflowId": env.workflow_id,
                "mode": env.invoke_mode,
                "callerId": env.caller,
                "data": env.data_mode,
            },
            "platform": platform,
            "kind": "faas",
            "caller": t.caller if t else "<driver>",
            "begin": begin,
        }
        try:
            if self._down(platform):
                raise PlatformUnavailable(platform)
            if not self.deployed(platform, function):
                raise UnknownFunction(function, platform)
            run_index = self._run_index()
            if t is not None and t.fid is not None and run_index is not None:
                for w in self.plan.wrong_invocations:
                    if (
                        w.src == t.fid.name
                        and w.dst == function
                        and w.start <= run_index < w.end
                        and platform == self._primary.get(function, platform)
                    ):
                        raise UnknownFunction(function, platform)
            limit = self.topology.get(platform).payload_limit_bytes
            size = env.wire_size()
            if size > limit:
                raise PayloadTooLarge(size, limit)
        except ShimError as exc:
            rec["result"] = {"error": type(exc).__name__}
            rec["end"] = self.now
            self.history.append(rec)
            raise
        self._req_ids += 1
        token = AcceptToken(f"req-{self._req_ids:06d}", platform)
        delay = self.topology.latency.base
        if self.topology.latency.jitter:
            delay += self.rng.randint(0, self.topology.latency.jitter)
        if t is not None and t.platform != platform:
            delay += self.topology.latency.cross_cloud
        copies = 1
        local = FunctionId(env.workflow_id, function, env.step, env.branch).local
        for d in self.plan.duplicates:
            if fnmatchcase(local, d.function):
                copies += d.copies
        for _ in range(copies):
            self._enqueue(platform, function, env, delay)
        rec["result"] = {"token": token.request_id}
        self._yield()
        rec["end"] = self.now
        self.history.append(rec)
        return token

    def _new_task(self, kind: str, platform: str, function: str) -> Task:
        self._task_ids += 1
        return Task(self._task_ids, kind, platform, function)

    def _enqueue(self, platform: str, function: str, env: JointObject, delay: int) -> None:
        task = self._new_task("delivery", platform, function)
        task.env = env
        task.session = env.session or None
        task.fid = FunctionId(env.workflow_id, function, env.step, env.branch)
        task.ready_at = self.now + delay
        if function != GC_NAME:
            for w in task.workflows:
                self._pending[w] += 1
        self._waiting.append(task)

    def _release(self, task: Task) -> None:
        if task.kind == "delivery" and task.function != GC_NAME:
            for w in task.workflows:
                self._pending[w] -= 1

    def _crash_hook(self, point: str, k: int | None) -> None:
        t = self._current
        if t is None or t.fid is None:
            return
        local = t.fid.local
        for i, c in enumerate(self.plan.crashes):
            if c.point != point or (c.k is not None and c.k != k):
                continue
            if not fnmatchcase(local, c.function):
                continue
            key = (i, str(t.fid))
            if self._crash_counts[key] < c.times:
                self._crash_counts[key] += 1
                raise InjectedCrash(f"{local} at {point}" + (f"({k})" if k is not None else ""))

    def _eligible(self, task: Task) -> bool:
        if task.ready_at > self.now:
            return False
        if task.kind == "delivery" and task.function == GC_NAME:
            return all(self._pending[w] == 0 for w in task.workflows)
        return True

    def _pick(self) -> Task:
        if callable(self.policy):
            i = self.policy(self._ready)
        elif self.policy == "fifo":
            i = 0
        else:
            i = self.rng.randrange(len(self._ready))
        return self._ready.pop(i)

    def _promote(self) -> None:
        still = []
        for t in self._waiting:
            (self._ready if self._eligible(t) else still).append(t)
        self._waiting = still

    def _start(self, task: Task) -> None:
        if task.kind == "driver":
            fn = task.fn

            def body():
                try:
                    task.result = fn()
                except Exception as exc:  # reported back to the test driver
                    task.error = exc

            task.glet = greenlet(body, parent=self._sched)
            return
        handler = self._deployed.get((task.platform, task.function))
        env = task.env
        task.attempt += 1
        self.executions[str(task.fid)] += 1

        def body():
            if self._down(task.platform):
                raise PlatformUnavailable(task.platform)
            if handler is None:
                raise UnknownFunction(task.function, task.platform)
            ctx = ExecContext(self, task.platform, task.function, task.fid, task.attempt, task.session)
            handler(env, ctx)

        task.glet = greenlet(body, parent=self._sched)

    def _finish(self, task: Task, error: BaseException | None) -> None:
        if task.kind == "driver":
            return
        if error is None:
            if task.function in self.terminals and task.session in self._sessions:
                self._sessions[task.session].terminal_reached = True
            self._release(task)
            return
        budget = self.topology.get(task.platform).retry_budget
        if task.attempt <= budget:
            task.glet = None
            task.ready_at = self.now + 1
            self._waiting.append(task)
            return
        self.failures.append(
            {"function": str(task.fid), "platform": task.platform, "attempts": task.attempt, "error": f"{type(error).__name__}: {error}"}
        )
        rec = self._sessions.get(task.session or "")
        if rec is not None:
            rec.failed = True
        self._release(task)

    def run_until_quiescent(self, max_events: int = 1_000_000) -> RunReport:
        self._sched = greenlet.getcurrent()
        try:
            while True:
                self._promote()
                if not self._ready:
                    if not self._waiting:
                        break
                    future = [t.ready_at for t in self._waiting if t.ready_at > self.now]
                    if not future:
                        raise EventBudgetExceeded("tasks are blocked with nothing runnable")
                    self.now = min(future)
                    continue
                if self.now >= max_events:
                    raise EventBudgetExceeded(f"exceeded {max_events} events")
                task = self._pick()
                self.now += 1
                if task.glet is None:
                    self._start(task)
                self._current = task
                error = None
                try:
                    task.glet.switch()
                except Exception as exc:  # the function failed; the platform retries
                    error = exc
                finally:
                    self._current = None
                if task.glet.dead:
                    self._finish(task, error)
                else:
                    self._ready.append(task)
        finally:
            self._sched = None
        return self.report()

    # -- reporting -------------------------------------------------------------

    def store_snapshot(self) -> dict[str, dict]:
        return {
            f"{p}:{k}": {key: _render(v) for key, v in sorted(data.items())}
            for (p, k), data in sorted(self._stores.items())
        }

    def residue(self, prefixes: list[str] | None = None) -> dict[str, int]:
        if prefixes is None:
            prefixes = [r.workflow_id + "/" for r in self.runs]
        out = {}
        for (p, k), data in sorted(self._stores.items()):
            out[f"{p}:{k}"] = sum(1 for key in data if any(key.startswith(px) for px in prefixes))
        return out

    def report(self) -> RunReport:
        return RunReport(
            seed=self.seed,
            events=self.now,
            runs=[
                {"run": r.session, "workflowId": r.workflow_id, "status": r.status, "terminalReached": r.terminal_reached}
                for r in self.runs
            ],
            op_counts={k: v.to_dict() for k, v in sorted(self.meters.items())},
            executions=dict(sorted(self.executions.items())),
            user_calls=dict(sorted(self.user_calls.items())),
            failures=list(self.failures),
            stores=self.store_snapshot(),
            residue=self.residue(),
        )

    def history_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.history)

    def raw_store(self, platform: str, kind: str = TABLE) -> dict[str, Any]:
        """Direct read-only view of a store, bypassing metering (for oracles)."""
        return self._stores[(platform, kind)]


# -- linearizability ---------------------------------------------------------

_ABSENT = object()


def _apply_seq(state: dict, rec: dict) -> Any:
    """Sequential specification of the shim ops, over rendered values."""
    op, key, args = rec["op"], rec["key"], rec["args"]
    cur = state.get(key, _ABSENT)
    if op in ("store_output_data", "create_invocation_list", "create_bitmap"):
        if cur is not _ABSENT:
            return False
        if op == "store_output_data":
            state[key] = args["data"]
        elif op == "create_invocation_list":
            state[key] = []
        else:
            state[key] = {"bits": [0] * args["size"], "closer": None}
        return True
    if op == "get_value":
        return None if cur is _ABSENT else cur
    if op == "append_and_get_list":
        if not isinstance(cur, list):
            return {"error": "MissingList"}
        new = list(cur)
        for n in args["names"]:
            if n not in new:
                new.append(n)
        state[key] = new
        return new
    if op == "update_bitmap":
        if not isinstance(cur, dict) or "bits" not in cur:
            return {"error": "MissingBitmap"}
        i = args["index"]
        if not 0 <= i < len(cur["bits"]):
            return {"error": "IndexOutOfRange"}
        if cur["bits"][i]:
            return cur
        bits = list(cur["bits"])
        bits[i] = 1
        new = {"bits": bits, "closer": i if all(bits) else None}
        state[key] = new
        return new
    if op == "delete_prefix":
        doomed = [k for k in state if k.startswith(key)]
        for k in doomed:
            del state[k]
        return len(doomed)
    raise ValueError(f"no sequential spec for {op!r}")


def check_linearizable(records: list[dict], initial: dict | None = None) -> list[dict] | None:
    """Return a witness total order for ``records`` or None if none exists.

    Brute-force search in the style of Wing and Gong: repeatedly pick a
    minimal pending op (no other pending op ended before it began), replay
    it on the sequential spec and backtrack on a result mismatch.  Meant for
    small histories only.
    """
    ops = [dict(r) for r in records]
    n = len(ops)

    def search(done: frozenset, state: dict, order: list) -> list | None:
        if len(done) == n:
            return order
        pending = [i for i in range(n) if i not in done]
        for i in pending:
            if any(ops[j]["end"] < ops[i]["begin"] for j in pending if j != i):
                continue
            st = json.loads(json.dumps(state))
            got = _apply_seq(st, ops[i])
            if json.dumps(got, sort_keys=True) != json.dumps(ops[i]["result"], sort_keys=True):
                continue
            found = search(done | {i}, st, order + [ops[i]])
            if found is not None:
                return found
        return None

    return search(frozenset(), dict(initial or {}), [])


def load_history(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]

