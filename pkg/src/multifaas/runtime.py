"""The function-side orchestrator.

Each deployed function is wrapped by :class:`FunctionRuntime`.  A wrapped
execution recomputes its unique id from the incoming envelope, pulls its
input, runs the user function behind an output checkpoint and then invokes
its successors behind an invocation checkpoint.  Retries and duplicate
deliveries therefore reproduce the first execution's observable effects.
"""

from __future__ import annotations

import hashlib
import json
import math
import uuid
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from .envelope import JointObject, Ref
from .ir import (
    BYBATCH,
    BYREDUNDANT,
    CHOICE,
    CYCLE,
    FANIN,
    GC,
    GC_FUNCTION,
    MAP,
    PARALLEL,
    SEQUENCE,
    TERMINAL,
    NextFunctionInfo,
    SubGraph,
    majority_platform,
)
from .naming import FunctionId, KeySet, collab_key, derive_keys, pop_and_merge, push_branch
from .shim import (
    OBJECT,
    TABLE,
    DsSpec,
    FaaSSpec,
    NoHooks,
    ObjectStub,
    PayloadTooLarge,
    PlatformUnavailable,
    ShimError,
    UnknownFunction,
    ValueTooLarge,
)

ATOMIC = "atomic"
READ_AFTER_WRITE = "read-after-write"
SKIPPED = ":skipped"
JOINED = ":joined"
CONTRIBUTED = ":contributed"
REDUNDANT = ":redundant"
UNREACHABLE = ":unreachable"
CONSUMED = "consumed:"
CONTRIB_PREFIX = "c:"
MUTANTS = ("skip-ivk-append",)

_COLLAB_NS = uuid.UUID("6f1c1b52-7d1e-4a8e-9a43-0b0e6c1f2a10")


class MissingUpstreamCheckpoint(RuntimeError):
    pass


class AllPlatformsFailed(RuntimeError):
    pass


class UserFunctionError(RuntimeError):
    pass


@dataclass(frozen=True)
class RuntimeConfig:
    coordination: str = ATOMIC
    envelope_allowance_bytes: int = 4096
    group_size: int = 10
    retry_budget: int = 2
    mutant: str | None = None

    def __post_init__(self):
        if self.coordination not in (ATOMIC, READ_AFTER_WRITE):
            raise ValueError(f"coordination must be {ATOMIC!r} or {READ_AFTER_WRITE!r}")
        if self.group_size < 1 or self.envelope_allowance_bytes < 0 or self.retry_budget < 0:
            raise ValueError("groupSize >= 1, envelopeAllowanceBytes >= 0, retryBudget >= 0")
        if self.mutant is not None and self.mutant not in MUTANTS:
            raise ValueError(f"unknown mutant {self.mutant!r}")

    @classmethod
    def from_dict(cls, d: dict) -> RuntimeConfig:
        return cls(
            coordination=d.get("coordination", ATOMIC),
            envelope_allowance_bytes=int(d.get("envelopeAllowanceBytes", 4096)),
            group_size=int(d.get("groupSize", 10)),
            retry_budget=int(d.get("retryBudget", 2)),
            mutant=d.get("mutant"),
        )

    def to_dict(self) -> dict:
        return {
            "coordination": self.coordination,
            "envelopeAllowanceBytes": self.envelope_allowance_bytes,
            "groupSize": self.group_size,
            "retryBudget": self.retry_budget,
            "mutant": self.mutant,
        }


# -- user functions ----------------------------------------------------------


@dataclass
class UserContext:
    """What user code sees.  ``store_output`` lets a function upload its own
    result; the first writer wins either way."""

    name: str
    fid: FunctionId
    attempt: int
    iteration: int
    output_key: str
    _store: Callable[[bytes], bool] | None = None
    is_stored: bool = False

    def store_output(self, data: bytes) -> bool:
        created = self._store(data) if self._store else False
        self.is_stored = True
        return created


UserFn = Callable[[list[bytes], UserContext], bytes]
Predicate = Callable[[bytes, int], int]
LoopPredicate = Callable[[bytes, int], bool]


def _h(*parts: bytes) -> bytes:
    return hashlib.sha256(b"|".join(parts)).digest()


def _stamp(inputs: list[bytes], u: UserContext) -> bytes:
    return _h(*inputs, u.fid.local.encode()).hex().encode()


def _pad(size: int) -> UserFn:
    def fn(inputs: list[bytes], u: UserContext) -> bytes:
        seed = _h(*inputs, u.fid.local.encode())
        return (seed * (size // len(seed) + 1))[:size]

    return fn


def _nonce(inputs: list[bytes], u: UserContext) -> bytes:
    # deliberately differs between attempts
    return _h(*inputs, u.fid.local.encode(), str(u.attempt).encode()).hex().encode()


def _identity(inputs: list[bytes], u: UserContext) -> bytes:
    return b"".join(inputs)


def _self_store(inputs: list[bytes], u: UserContext) -> bytes:
    out = _stamp(inputs, u)
    u.store_output(out)
    return out


@dataclass
class Registry:
    """User functions and predicates addressed by id from sub-graphs."""

    handlers: dict[str, UserFn] = field(default_factory=dict)
    predicates: dict[str, Predicate] = field(default_factory=dict)
    loop_predicates: dict[str, LoopPredicate] = field(default_factory=dict)

    @classmethod
    def default(cls) -> Registry:
        return cls(
            {"identity": _identity, "stamp": _stamp, "nonce": _nonce, "pad1k": _pad(1024), "self-store": _self_store},
            {"first": lambda out, n: 0, "last": lambda out, n: n - 1, "hash": lambda out, n: _h(out)[0] % n},
            {"always": lambda out, i: True, "never": lambda out, i: False},
        )

    def handler(self, name: str) -> UserFn:
        if name in self.handlers:
            return self.handlers[name]
        if name.startswith("blob:"):
            return _pad(int(name.split(":", 1)[1]))
        raise KeyError(f"no user function {name!r}")


# -- placement and transfer ---------------------------------------------------


def resolve_placement(subgraph: SubGraph) -> DsSpec:
    """Majority platform over the function and its successors."""
    plats = [subgraph.function.platform] + [n.platform for n in subgraph.next_funcs if n.invoke_mode != GC]
    return DsSpec(majority_platform(plats, prefer=subgraph.function.platform), subgraph.transfer.ds)


def choose_transfer(size: int, target: NextFunctionInfo, transfer_by_ds: bool = False, allowance: int = 4096) -> str:
    if not transfer_by_ds and size + allowance <= target.payload_limit:
        return "direct"
    return "indirect"


def cross_cloud_transfers(self_platform: str, targets: list[str], store: str) -> int:
    """Cross-platform operations for one fan-out when shared data lives at ``store``:
    the producer's write plus one read per consumer."""
    return int(store != self_platform) + sum(1 for t in targets if t != store)


# -- state -------------------------------------------------------------------


@dataclass(frozen=True)
class WorkflowState:
    workflow_id: str
    step: int
    branch: tuple[int, ...]
    fid: FunctionId
    subgraph: SubGraph
    keys: KeySet
    iteration: int
    platform: str
    ckpt_platform: str
    ckpt_kind: str


@dataclass(frozen=True)
class ExecOutcome:
    output: bytes
    is_stored: bool
    from_checkpoint: bool


@dataclass(frozen=True)
class _Planned:
    label: str
    target: NextFunctionInfo | None
    env: JointObject | None


class _Clients:
    """Per-execution client cache."""

    def __init__(self, backend):
        self.backend = backend
        self._ds: dict[tuple[str, str], Any] = {}
        self._faas: dict[str, Any] = {}

    def ds(self, platform: str, kind: str = TABLE):
        if (platform, kind) not in self._ds:
            self._ds[(platform, kind)] = self.backend.ds_create(DsSpec(platform, kind))
        return self._ds[(platform, kind)]

    def faas(self, platform: str):
        if platform not in self._faas:
            self._faas[platform] = self.backend.faas_create(FaaSSpec(platform))
        return self._faas[platform]


def _collab_entry(ref: Ref) -> str:
    return CONTRIB_PREFIX + json.dumps([ref.key, ref.platform, ref.kind])


def _parse_collab_entry(entry: str) -> Ref:
    key, platform, kind = json.loads(entry[len(CONTRIB_PREFIX):])
    return Ref(key, platform, kind)


class FunctionRuntime:
    """Wraps user functions with the checkpointing protocol.

    ``backend`` in each call is anything with ``ds_create``/``faas_create``
    plus optional ``at`` crash hooks and ``note_user_call``; the simulator's
    execution context satisfies this.
    """

    def __init__(self, subgraphs: dict[str, SubGraph], registry: Registry | None = None, config: RuntimeConfig | None = None):
        self.subgraphs = subgraphs
        self.registry = registry or Registry.default()
        self.config = config or RuntimeConfig()

    # -- entry points ----------------------------------------------------------

    def handle(self, env: JointObject, ctx) -> None:
        """Run one delivery of ``ctx.function`` on ``ctx.platform``."""
        clients = _Clients(ctx)
        hooks = ctx if hasattr(ctx, "at") else NoHooks()
        if ctx.function == GC_FUNCTION:
            self.run_gc(env, ctx.platform, clients, hooks)
            return
        sg = self.subgraphs[ctx.function]
        state = self.make_state(env, sg, ctx.platform)
        inputs = self.unwrap(env, state, clients)
        outcome = self.exec_with_output_checkpoint(state, inputs, clients, hooks, getattr(ctx, "attempt", 1), ctx)
        hooks.at("after-output-before-invoke")
        self.invoke_next(state, env, outcome, clients, hooks)

    def make_state(self, env: JointObject, sg: SubGraph, platform: str) -> WorkflowState:
        fid = FunctionId(env.workflow_id, sg.name, env.step, env.branch)
        t = sg.transfer
        ckpt = t.placement if t.transfer_by_ds else platform
        return WorkflowState(env.workflow_id, env.step, env.branch, fid, sg, derive_keys(fid), env.iteration, platform, ckpt, t.ds)

    # -- unwrap and output checkpoint -------------------------------------------

    def _read(self, clients: _Clients, ref: Ref) -> bytes | None:
        v = clients.ds(ref.platform, ref.kind).get_value(ref.key)
        if isinstance(v, ObjectStub):
            v = clients.ds(v.platform, OBJECT).get_value(v.key)
        return v

    def unwrap(self, env: JointObject, state: WorkflowState, clients: _Clients) -> list[bytes]:
        if env.payload is not None:
            return [env.payload]
        inputs = []
        for ref in env.refs:
            v = self._read(clients, ref)
            if v is None:
                raise MissingUpstreamCheckpoint(f"{state.fid}: no checkpoint at {ref.key} on {ref.platform}")
            inputs.append(v)
        return inputs

    def _store(self, clients: _Clients, state: WorkflowState, data: bytes) -> bool:
        store = clients.ds(state.ckpt_platform, state.ckpt_kind)
        try:
            return store.store_output_data(state.keys.output_key, data)
        except ValueTooLarge:
            clients.ds(state.ckpt_platform, OBJECT).store_output_data(state.keys.output_key, data)
            return store.store_output_data(state.keys.output_key, ObjectStub(state.keys.output_key, state.ckpt_platform))

    def exec_with_output_checkpoint(self, state, inputs, clients, hooks, attempt=1, ctx=None) -> ExecOutcome:
        ref = Ref(state.keys.output_key, state.ckpt_platform, state.ckpt_kind)
        stored = self._read(clients, ref)
        if stored is not None:
            return ExecOutcome(stored, True, True)
        fn = self.registry.handler(state.subgraph.function.handler)
        u = UserContext(state.subgraph.name, state.fid, attempt, state.iteration, state.keys.output_key)
        u._store = lambda data: self._store(clients, state, data)
        if ctx is not None and hasattr(ctx, "note_user_call"):
            ctx.note_user_call()
        try:
            output = fn(list(inputs), u)
        except ShimError:
            raise
        except Exception as exc:
            raise UserFunctionError(f"{state.fid}: {exc}") from exc
        if u.is_stored:
            return ExecOutcome(self._read(clients, ref), True, False)
        hooks.at("before-output-ckpt")
        if not self._store(clients, state, output):
            # lost a race against a concurrent attempt; adopt its value
            output = self._read(clients, ref)
        return ExecOutcome(output, True, False)

    # -- successor planning --------------------------------------------------------

    def _child(self, state: WorkflowState, env: JointObject, outcome: ExecOutcome, target: NextFunctionInfo, label: str, **control) -> JointObject:
        sg = state.subgraph
        if choose_transfer(len(outcome.output), target, sg.transfer.transfer_by_ds, self.config.envelope_allowance_bytes) == "direct":
            data = {"payload": outcome.output, "refs": ()}
        else:
            data = {"payload": None, "refs": (Ref(state.keys.output_key, state.ckpt_platform, state.ckpt_kind),)}
        base = dict(
            workflow_id=state.workflow_id,
            step=state.step + 1,
            branch=state.branch,
            session=env.session,
            invoke_mode=sg.invoke.mode,
            caller=str(state.fid),
            iteration=state.iteration if sg.invoke.mode == SEQUENCE else 0,
            label=label,
            request=env.request,
            extra_gc=env.extra_gc,
        )
        base.update(control)
        return JointObject(**base, **data)

    def plan(self, state: WorkflowState, env: JointObject, outcome: ExecOutcome) -> list[_Planned]:
        sg = state.subgraph
        mode = sg.invoke.mode
        nexts = sg.next_funcs
        out: list[_Planned] = []
        if mode == TERMINAL:
            for i, nf in enumerate(nexts):
                gc_env = JointObject(
                    workflow_id=state.workflow_id,
                    step=state.step + 1,
                    branch=push_branch(state.branch, i),
                    session=env.session,
                    invoke_mode=GC,
                    caller=str(state.fid),
                    label=f"gc@{nf.platform}",
                    extra_gc=env.extra_gc,
                )
                out.append(_Planned(gc_env.label, nf, gc_env))
        elif mode == PARALLEL:
            for i, nf in enumerate(nexts):
                out.append(_Planned(nf.name, nf, self._child(state, env, outcome, nf, nf.name, branch=push_branch(state.branch, i))))
        elif mode == MAP:
            for i, nf in enumerate(nexts):
                label = f"{nf.name}#{i}"
                out.append(_Planned(label, nf, self._child(state, env, outcome, nf, label, branch=push_branch(state.branch, i))))
        elif mode == CHOICE:
            pred = self.registry.predicates[sg.invoke.params["predicate"]]
            chosen = pred(outcome.output, len(nexts))
            if not 0 <= chosen < len(nexts):
                raise UserFunctionError(f"{state.fid}: predicate chose {chosen} of {len(nexts)}")
            for i, nf in enumerate(nexts):
                if i == chosen:
                    out.append(_Planned(nf.name, nf, self._child(state, env, outcome, nf, nf.name)))
                else:
                    out.append(_Planned(nf.name + SKIPPED, None, None))
        elif mode == CYCLE:
            head, exit_ = nexts
            bound = sg.invoke.params["bound"]
            pid = sg.invoke.params.get("predicate")
            again = state.iteration + 1 < bound
            if again and pid is not None:
                again = self.registry.loop_predicates[pid](outcome.output, state.iteration)
            if again:
                it = state.iteration + 1
                label = f"{head.name}@{it}"
                out.append(_Planned(label, head, self._child(state, env, outcome, head, label, iteration=it)))
            else:
                out.append(_Planned(exit_.name, exit_, self._child(state, env, outcome, exit_, exit_.name)))
        else:
            for nf in nexts:
                out.append(_Planned(nf.name, nf, self._child(state, env, outcome, nf, nf.name)))
        return out

    # -- invocation ----------------------------------------------------------------

    def failover_invoke(self, clients: _Clients, target: NextFunctionInfo, env: JointObject, fallback: Ref | None = None):
        errors = []
        for platform in (target.platform, *target.failover):
            try:
                client = clients.faas(platform)
                try:
                    return client.async_invoke(target.name, env)
                except PayloadTooLarge:
                    if fallback is None or env.payload is None:
                        raise
                    return client.async_invoke(target.name, env.evolve(payload=None, refs=(fallback,)))
            except (PlatformUnavailable, UnknownFunction) as exc:
                errors.append(f"{platform}: {exc}")
        raise AllPlatformsFailed(f"{target.name}: " + "; ".join(errors))

    def invoke_next(self, state: WorkflowState, env: JointObject, outcome: ExecOutcome, clients: _Clients, hooks) -> list[str]:
        mode = state.subgraph.invoke.mode
        if mode == FANIN:
            return self.coordinate_fan_in(state, env, outcome, clients, hooks)
        if mode in (BYBATCH, BYREDUNDANT):
            return self.coordinate_collab(state, env, outcome, clients, hooks)
        table = clients.ds(state.platform, TABLE)
        table.create_invocation_list(state.keys.ivk_key)
        recorded = set(table.get_value(state.keys.ivk_key) or ())
        planned = self.plan(state, env, outcome)
        fallback = Ref(state.keys.output_key, state.ckpt_platform, state.ckpt_kind)
        g = self.config.group_size
        invoked, count = [], 0
        for gi in range(math.ceil(len(planned) / g)):
            group = [p for p in planned[gi * g:(gi + 1) * g] if p.label not in recorded and p.label + UNREACHABLE not in recorded]
            if not group:
                continue
            labels = []
            for p in group:
                labels.append(p.label)
                if p.target is None:
                    continue
                if p.env.invoke_mode == GC:
                    try:
                        self.failover_invoke(clients, p.target, p.env)
                    except AllPlatformsFailed:
                        # the run's work is done; leave that platform's keys as residue
                        labels[-1] = p.label + UNREACHABLE
                        continue
                else:
                    self.failover_invoke(clients, p.target, p.env, fallback)
                invoked.append(p.label)
                count += 1
                hooks.at("mid-invoke-batch", count)
            hooks.at("after-invoke-before-ivk-append", gi + 1)
            if self.config.mutant != "skip-ivk-append":
                table.append_and_get_list(state.keys.ivk_key, labels)
        return invoked

    # -- fan-in ------------------------------------------------------------------

    def fan_in_layout(self, state: WorkflowState):
        """Locate this instance's slot and derive the aggregator id and inputs."""
        slots = state.subgraph.fanin_slots()
        mine = [
            i for i, s in enumerate(slots)
            if s.name == state.subgraph.name and tuple(state.branch[: len(s.path)]) == s.path and len(state.branch) >= len(s.path)
        ]
        if len(mine) != 1:
            raise ShimError(f"{state.fid}: cannot place instance among {len(slots)} fan-in slots")
        i = mine[0]
        me = slots[i]
        base_step = state.step - me.depth
        base = tuple(state.branch[len(me.path):])
        agg_branch = pop_and_merge([s.path + base for s in slots])
        agg_step = base_step + max(s.depth for s in slots) + 1
        agg_name = state.subgraph.invoke.params["aggregator"]
        agg = FunctionId(state.workflow_id, agg_name, agg_step, agg_branch)
        refs = tuple(
            Ref(derive_keys(FunctionId(state.workflow_id, s.name, base_step + s.depth, s.path + base)).output_key, s.store, s.kind)
            for s in slots
        )
        return i, len(slots), agg, refs

    def coordinate_fan_in(self, state, env, outcome, clients, hooks) -> list[str]:
        sg = state.subgraph
        target = sg.next_funcs[0]
        table = clients.ds(state.platform, TABLE)
        table.create_invocation_list(state.keys.ivk_key)
        recorded = set(table.get_value(state.keys.ivk_key) or ())
        if target.name in recorded or target.name + JOINED in recorded:
            return []
        index, size, agg, refs = self.fan_in_layout(state)
        bitmap_key = derive_keys(state.fid, agg).bitmap_key
        coord = clients.ds(sg.invoke.params["coordinationPlatform"], TABLE)
        coord.create_bitmap(size, bitmap_key)
        before = coord.get_value(bitmap_key)
        if before.bits[index]:
            snap = before
        else:
            snap = coord.update_bitmap(index, bitmap_key)
        after = coord.get_value(bitmap_key)
        if self.config.coordination == READ_AFTER_WRITE:
            triggered = after.complete
        else:
            triggered = snap.closer == index
        label = target.name if triggered else target.name + JOINED
        if triggered:
            agg_env = JointObject(
                workflow_id=state.workflow_id,
                step=agg.step,
                branch=agg.branch,
                session=env.session,
                invoke_mode=FANIN,
                refs=refs,
                caller=str(state.fid),
                label=target.name,
                request=env.request,
                extra_gc=env.extra_gc,
            )
            self.failover_invoke(clients, target, agg_env)
            hooks.at("mid-invoke-batch", 1)
        hooks.at("after-invoke-before-ivk-append", 1)
        if self.config.mutant != "skip-ivk-append":
            table.append_and_get_list(state.keys.ivk_key, [label])
        return [target.name] if triggered else []

    # -- collaboration -----------------------------------------------------------

    def coordinate_collab(self, state, env, outcome, clients, hooks) -> list[str]:
        sg = state.subgraph
        mode = sg.invoke.mode
        target = sg.next_funcs[0]
        table = clients.ds(state.platform, TABLE)
        table.create_invocation_list(state.keys.ivk_key)
        recorded = set(table.get_value(state.keys.ivk_key) or ())
        if any(r.startswith(target.name) for r in recorded):
            return []
        key = collab_key([sg.name, target.name], env.request if mode == BYREDUNDANT else None)
        coord = clients.ds(target.platform, TABLE)
        coord.create_invocation_list(key)
        mine = _collab_entry(Ref(state.keys.output_key, state.ckpt_platform, state.ckpt_kind))
        entries = coord.append_and_get_list(key, [mine])
        contribs = [e for e in entries if e.startswith(CONTRIB_PREFIX)]
        pos = contribs.index(mine)
        invoked: list[str] = []
        if mode == BYBATCH:
            n = sg.invoke.params["batchSize"]
            window = pos // n
            label = target.name + CONTRIBUTED
            if pos % n == n - 1:
                members = [_parse_collab_entry(e) for e in contribs[window * n:(window + 1) * n]]
                marker = f"{CONSUMED}{window}"
                if marker not in entries:
                    self._invoke_downstream(state, env, clients, target, f"{key}/{window}", tuple(members), hooks)
                    invoked.append(target.name)
                    coord.append_and_get_list(key, [marker])
                label = target.name
        else:
            if pos == 0:
                self._invoke_downstream(state, env, clients, target, key, (_parse_collab_entry(mine),), hooks)
                invoked.append(target.name)
                label = target.name
            else:
                label = target.name + REDUNDANT
        labels = [label]
        if mode == BYREDUNDANT and pos != 0:
            # the losing replica's data is never read; clean it up now
            labels += self._invoke_gc(state, env, clients)
        hooks.at("after-invoke-before-ivk-append", 1)
        if self.config.mutant != "skip-ivk-append":
            table.append_and_get_list(state.keys.ivk_key, labels)
        return invoked

    def _invoke_downstream(self, state, env, clients, target, window_key, refs, hooks) -> None:
        wid = str(uuid.uuid5(_COLLAB_NS, window_key))
        producers = tuple(sorted({r.key.split("/", 1)[0] for r in refs}))
        down = JointObject(
            workflow_id=wid,
            step=0,
            branch=(),
            session=env.session,
            invoke_mode=state.subgraph.invoke.mode,
            refs=refs,
            caller=str(state.fid),
            label=target.name,
            request=env.request,
            extra_gc=producers,
        )
        self.failover_invoke(clients, target, down)
        hooks.at("mid-invoke-batch", 1)

    def _invoke_gc(self, state, env, clients) -> list[str]:
        platforms = sorted({sg.function.platform for sg in self.subgraphs.values()} | {p for sg in self.subgraphs.values() for p in sg.function.failover})
        labels = []
        for i, p in enumerate(platforms):
            gc_env = JointObject(
                workflow_id=state.workflow_id,
                step=state.step + 1,
                branch=push_branch(state.branch, i),
                session=env.session,
                invoke_mode=GC,
                caller=str(state.fid),
                label=f"gc@{p}",
            )
            clients.faas(p).async_invoke(GC_FUNCTION, gc_env)
            labels.append(gc_env.label)
        return labels

    # -- garbage collection ----------------------------------------------------------

    def run_gc(self, env: JointObject, platform: str, clients: _Clients, hooks) -> dict[str, int]:
        deleted: dict[str, int] = {}
        n = 0
        for wid in (env.workflow_id, *env.extra_gc):
            for kind in (TABLE, OBJECT):
                try:
                    store = clients.ds(platform, kind)
                except ShimError as exc:
                    if isinstance(exc, PlatformUnavailable):
                        raise
                    continue
                deleted[f"{platform}:{kind}"] = deleted.get(f"{platform}:{kind}", 0) + store.delete_prefix(wid + "/")
                n += 1
                hooks.at("mid-gc-sweep", n)
        return deleted


def deploy(sim, subgraphs: dict[str, SubGraph], registry: Registry | None = None, config: RuntimeConfig | None = None) -> FunctionRuntime:
    """Install wrapped functions, their failover replicas and per-platform GC
    functions into a simulator."""
    rt = FunctionRuntime(subgraphs, registry, config)
    for name, sg in subgraphs.items():
        sim.deploy(sg.function.platform, name, rt.handle)
        for p in sg.function.failover:
            sim.deploy(p, name, rt.handle, primary=False)
        if sg.is_terminal:
            sim.terminals.add(name)
    for p in sim.topology.ids:
        sim.deploy(p, GC_FUNCTION, rt.handle)
    return rt
