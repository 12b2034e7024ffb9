"""Workflow documents and their compilation into per-function sub-graphs.

A workflow is a JSON document::

    {"name": "iot",
     "platforms": {"P1": {"payloadLimitBytes": 262144}, ...},
     "functions": {"A": {"platform": "P1", "failover": [], "memoryClass": "512",
                         "handler": "identity",
                         "transfer": {"transferByDs": false, "ds": "table",
                                      "placement": "auto"}}, ...},
     "edges": [{"from": "A", "to": "B", "mode": "Sequence", "params": {}}, ...],
     "entry": "A", "terminal": "C"}

``handler`` and ``transfer`` are optional.  The runtime only ever sees the
compiled :class:`SubGraph` objects, so hand-written sub-graph files (see
:func:`load_subgraphs`) work just as well as compiled ones.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any

from .naming import pop_and_merge, valid_name
from .shim import DS_KINDS, TABLE

SEQUENCE = "Sequence"
PARALLEL = "Parallel"
MAP = "Map"
FANIN = "FanIn"
CHOICE = "Choice"
CYCLE = "Cycle"
BYBATCH = "ByBatch"
BYREDUNDANT = "ByRedundant"
MODES = (SEQUENCE, PARALLEL, MAP, FANIN, CHOICE, CYCLE, BYBATCH, BYREDUNDANT)
TERMINAL = "Terminal"
GC = "GC"
GC_FUNCTION = "gc"
AUTO = "auto"

COLLAB_MODES = (BYBATCH, BYREDUNDANT)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    position: tuple[int, int] | None = None


class InvalidWorkflow(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{d.code}: {d.message}" for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


class CompileError(InvalidWorkflow):
    pass


@dataclass(frozen=True)
class PlatformDecl:
    id: str
    payload_limit_bytes: int


@dataclass(frozen=True)
class TransferPrimitive:
    transfer_by_ds: bool = False
    ds: str = TABLE
    placement: str = AUTO

    def to_dict(self) -> dict:
        return {"transferByDs": self.transfer_by_ds, "ds": self.ds, "placement": self.placement}

    @classmethod
    def from_dict(cls, d: dict) -> TransferPrimitive:
        return cls(bool(d.get("transferByDs", False)), d.get("ds", TABLE), d.get("placement", AUTO))


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    platform: str
    failover: tuple[str, ...] = ()
    memory_class: str = "default"
    handler: str = "identity"
    transfer: TransferPrimitive = TransferPrimitive()

    def to_dict(self) -> dict:
        return {
            "platform": self.platform,
            "failover": list(self.failover),
            "memoryClass": self.memory_class,
            "handler": self.handler,
            "transfer": self.transfer.to_dict(),
        }


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    mode: str = SEQUENCE
    params: dict = field(default_factory=dict, hash=False)

    def to_dict(self) -> dict:
        return {"from": self.src, "to": self.dst, "mode": self.mode, "params": dict(self.params)}


@dataclass
class WorkflowDef:
    name: str
    platforms: dict[str, PlatformDecl]
    functions: dict[str, FunctionDecl]
    edges: list[Edge]
    entry: str
    terminal: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "platforms": {p.id: {"payloadLimitBytes": p.payload_limit_bytes} for p in self.platforms.values()},
            "functions": {f.name: f.to_dict() for f in self.functions.values()},
            "edges": [e.to_dict() for e in self.edges],
            "entry": self.entry,
            "terminal": self.terminal,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# -- sub-graph types ---------------------------------------------------------


@dataclass(frozen=True)
class InvokePrimitive:
    mode: str
    targets: tuple[str, ...] = ()
    params: dict = field(default_factory=dict, hash=False)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "targets": list(self.targets), "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> InvokePrimitive:
        return cls(d["mode"], tuple(d.get("targets", ())), dict(d.get("params", {})))


@dataclass(frozen=True)
class NextFunctionInfo:
    name: str
    platform: str
    invoke_mode: str
    failover: tuple[str, ...] = ()
    payload_limit: int = 262_144

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "platform": self.platform,
            "invokeMode": self.invoke_mode,
            "failover": list(self.failover),
            "payloadLimit": self.payload_limit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> NextFunctionInfo:
        return cls(d["name"], d["platform"], d["invokeMode"], tuple(d.get("failover", ())), int(d["payloadLimit"]))


@dataclass(frozen=True)
class Slot:
    """One fan-in participant instance, positioned relative to the fan-out
    ancestor all participants share."""

    name: str
    path: tuple[int, ...]
    depth: int
    platform: str
    store: str
    kind: str = TABLE

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "path": list(self.path),
            "depth": self.depth,
            "platform": self.platform,
            "store": self.store,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Slot:
        return cls(d["name"], tuple(d["path"]), int(d["depth"]), d["platform"], d["store"], d.get("kind", TABLE))


@dataclass(frozen=True)
class SubGraph:
    function: FunctionDecl
    invoke: InvokePrimitive
    transfer: TransferPrimitive
    next_funcs: tuple[NextFunctionInfo, ...] = ()

    @property
    def name(self) -> str:
        return self.function.name

    @property
    def is_terminal(self) -> bool:
        return self.invoke.mode == TERMINAL

    def fanin_slots(self) -> list[Slot]:
        return [Slot.from_dict(s) for s in self.invoke.params.get("participants", ())]

    def to_dict(self) -> dict:
        return {
            "self": {"name": self.function.name, **self.function.to_dict()},
            "invoke": self.invoke.to_dict(),
            "transfer": self.transfer.to_dict(),
            "nextFuncs": [n.to_dict() for n in self.next_funcs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SubGraph:
        s = d["self"]
        fn = FunctionDecl(
            s["name"],
            s["platform"],
            tuple(s.get("failover", ())),
            s.get("memoryClass", "default"),
            s.get("handler", "identity"),
            TransferPrimitive.from_dict(s.get("transfer", {})),
        )
        return cls(
            fn,
            InvokePrimitive.from_dict(d["invoke"]),
            TransferPrimitive.from_dict(d.get("transfer", {})),
            tuple(NextFunctionInfo.from_dict(n) for n in d.get("nextFuncs", ())),
        )


def dump_subgraphs(subgraphs: dict[str, SubGraph]) -> str:
    return json.dumps({k: v.to_dict() for k, v in subgraphs.items()}, indent=2, sort_keys=True)


def load_subgraphs(text: str) -> dict[str, SubGraph]:
    return {k: SubGraph.from_dict(v) for k, v in json.loads(text).items()}


# -- parsing -----------------------------------------------------------------


def _diag(diags: list[Diagnostic], code: str, message: str, position=None) -> None:
    diags.append(Diagnostic(code, message, position))


def parse_workflow_def(text: str | bytes) -> WorkflowDef:
    """Parse and validate a workflow document.

    Never raises anything but :class:`InvalidWorkflow` on bad input.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidWorkflow([Diagnostic("SyntaxError", exc.msg, (exc.lineno, exc.colno))]) from None
    except (TypeError, ValueError, RecursionError) as exc:
        raise InvalidWorkflow([Diagnostic("SyntaxError", str(exc), (1, 1))]) from None
    try:
        wf = workflow_from_dict(doc)
    except InvalidWorkflow:
        raise
    except Exception as exc:  # defensive: parsing must be total
        raise InvalidWorkflow([Diagnostic("SchemaError", f"{type(exc).__name__}: {exc}")]) from None
    diags = check_workflow(wf)
    if diags:
        raise InvalidWorkflow(diags)
    return wf


def _obj(v: Any, what: str, diags: list[Diagnostic]) -> dict:
    if not isinstance(v, dict):
        _diag(diags, "SchemaError", f"{what} must be an object")
        return {}
    return v


def workflow_from_dict(doc: Any) -> WorkflowDef:
    diags: list[Diagnostic] = []
    doc = _obj(doc, "workflow document", diags)
    if diags:
        raise InvalidWorkflow(diags)
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        _diag(diags, "SchemaError", "'name' must be a non-empty string")
        name = ""

    platforms: dict[str, PlatformDecl] = {}
    for pid, spec in _obj(doc.get("platforms"), "'platforms'", diags).items():
        spec = _obj(spec, f"platform {pid!r}", diags)
        limit = spec.get("payloadLimitBytes")
        if not isinstance(limit, int) or isinstance(limit, bool) or limit <= 0:
            _diag(diags, "SchemaError", f"platform {pid!r}: payloadLimitBytes must be a positive integer")
            continue
        platforms[pid] = PlatformDecl(pid, limit)
    if not platforms and not diags:
        _diag(diags, "SchemaError", "at least one platform is required")

    functions: dict[str, FunctionDecl] = {}
    for fname, spec in _obj(doc.get("functions"), "'functions'", diags).items():
        spec = _obj(spec, f"function {fname!r}", diags)
        if not valid_name(fname):
            _diag(diags, "InvalidName", f"function name {fname!r} must match [A-Za-z0-9] with internal '.' or '_'")
            continue
        platform = spec.get("platform")
        if platform not in platforms:
            _diag(diags, "UnknownPlatform", f"function {fname!r} names unknown platform {platform!r}")
            continue
        failover = spec.get("failover", [])
        if not isinstance(failover, list):
            _diag(diags, "SchemaError", f"function {fname!r}: failover must be a list")
            continue
        bad = [p for p in failover if p not in platforms]
        if bad:
            _diag(diags, "UnknownPlatform", f"function {fname!r} fails over to unknown platform(s) {bad}")
            continue
        if platform in failover:
            _diag(diags, "InvalidFailover", f"function {fname!r} lists its primary platform as a failover")
            continue
        tspec = _obj(spec.get("transfer", {}), f"function {fname!r} transfer", diags)
        transfer = TransferPrimitive.from_dict(tspec)
        if transfer.ds not in DS_KINDS:
            _diag(diags, "SchemaError", f"function {fname!r}: ds must be one of {DS_KINDS}")
            continue
        if transfer.placement != AUTO and transfer.placement not in platforms:
            _diag(diags, "UnknownPlatform", f"function {fname!r}: placement {transfer.placement!r} is not a platform")
            continue
        functions[fname] = FunctionDecl(
            fname,
            platform,
            tuple(failover),
            str(spec.get("memoryClass", "default")),
            str(spec.get("handler", "identity")),
            transfer,
        )

    edges: list[Edge] = []
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        _diag(diags, "SchemaError", "'edges' must be a list")
        raw_edges = []
    for i, e in enumerate(raw_edges):
        e = _obj(e, f"edge #{i}", diags)
        src, dst = e.get("from"), e.get("to")
        mode = e.get("mode", SEQUENCE)
        params = e.get("params", {})
        if not isinstance(params, dict):
            _diag(diags, "SchemaError", f"edge #{i}: params must be an object")
            continue
        if mode not in MODES:
            _diag(diags, "UnknownMode", f"edge #{i}: unknown mode {mode!r}")
            continue
        if src not in functions or dst not in functions:
            _diag(diags, "DanglingEdge", f"edge {src!r}->{dst!r} references an undeclared function")
            continue
        edges.append(Edge(src, dst, mode, dict(params)))

    entry = doc.get("entry")
    if isinstance(entry, list):
        if len(entry) > 1:
            _diag(diags, "MultipleEntries", f"more than one entry: {entry}")
        entry = entry[0] if entry else None
    if entry not in functions:
        _diag(diags, "UnknownEntry", f"entry {entry!r} is not a declared function")
    terminal = doc.get("terminal")
    if terminal not in functions:
        _diag(diags, "UnknownTerminal", f"terminal {terminal!r} is not a declared function")
    if diags:
        raise InvalidWorkflow(diags)
    return WorkflowDef(name, platforms, functions, edges, entry, terminal)


# -- structural checks -------------------------------------------------------


class _Graph:
    def __init__(self, wf: WorkflowDef):
        self.wf = wf
        self.out: dict[str, list[Edge]] = defaultdict(list)
        self.fwd_in: dict[str, list[Edge]] = defaultdict(list)
        for e in wf.edges:
            self.out[e.src].append(e)
            if e.mode != CYCLE:
                self.fwd_in[e.dst].append(e)

    def fwd_out(self, name: str) -> list[Edge]:
        return [e for e in self.out[name] if e.mode != CYCLE]

    def mode(self, name: str) -> str:
        edges = self.out[name]
        if not edges:
            return TERMINAL
        if any(e.mode == CYCLE for e in edges):
            return CYCLE
        return edges[0].mode

    def is_aggregator(self, name: str) -> bool:
        return any(e.mode == FANIN for e in self.fwd_in[name])

    def topo_order(self) -> list[str] | None:
        indeg = {f: 0 for f in self.wf.functions}
        for ins in self.fwd_in.values():
            for e in ins:
                indeg[e.dst] += 1
        ready = [f for f in self.wf.functions if indeg[f] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for e in self.fwd_out(n):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
        return order if len(order) == len(self.wf.functions) else None

    def reachable(self, start: str) -> set[str]:
        seen, stack = {start}, [start]
        while stack:
            n = stack.pop()
            for e in self.fwd_out(n):
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return seen


def _positive_int(v: Any, minimum: int = 1) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= minimum


def _check_modes(g: _Graph, diags: list[Diagnostic]) -> None:
    for name in g.wf.functions:
        edges = g.out[name]
        if not edges:
            continue
        modes = [e.mode for e in edges]
        if CYCLE in modes:
            cyc = [e for e in edges if e.mode == CYCLE]
            rest = [e for e in edges if e.mode != CYCLE]
            if len(cyc) != 1 or len(rest) != 1 or rest[0].mode != SEQUENCE:
                _diag(diags, "InvalidCycle", f"{name}: a Cycle needs exactly one back edge and one Sequence exit")
                continue
            if not _positive_int(cyc[0].params.get("bound")):
                _diag(diags, "InvalidCycle", f"{name}: Cycle bound must be >= 1")
            continue
        if len(set(modes)) != 1:
            _diag(diags, "MixedModes", f"{name}: outgoing edges mix modes {sorted(set(modes))}")
            continue
        mode = modes[0]
        p = edges[0].params
        single = mode in (SEQUENCE, MAP, FANIN, BYBATCH, BYREDUNDANT)
        if single and len(edges) != 1:
            _diag(diags, "InvalidArity", f"{name}: {mode} takes exactly one target")
        if mode == MAP and not _positive_int(p.get("width")):
            _diag(diags, "InvalidParams", f"{name}: Map width must be >= 1")
        if mode == BYBATCH and not _positive_int(p.get("batchSize")):
            _diag(diags, "InvalidParams", f"{name}: ByBatch batchSize must be >= 1")
        if mode == BYREDUNDANT and not _positive_int(p.get("count"), 2):
            _diag(diags, "InvalidParams", f"{name}: ByRedundant count must be >= 2")
        if mode in (PARALLEL, CHOICE):
            targets = [e.dst for e in edges]
            if len(set(targets)) != len(targets):
                _diag(diags, "InvalidArity", f"{name}: {mode} targets must be distinct (use Map)")
        if mode == CHOICE:
            preds = {e.params.get("predicate") for e in edges}
            if len(preds) != 1 or not isinstance(next(iter(preds)), str):
                _diag(diags, "InvalidParams", f"{name}: Choice edges need one shared predicate id")


def _check_cycles(g: _Graph, diags: list[Diagnostic]) -> None:
    for e in g.wf.edges:
        if e.mode != CYCLE:
            continue
        tail, head = e.src, e.dst
        if head != tail and g.mode(head) != SEQUENCE:
            _diag(diags, "InvalidCycle", f"Cycle {tail}->{head}: the loop head must be a Sequence node")
            continue
        cur, ok = tail, False
        for _ in range(len(g.wf.functions) + 1):
            if cur == head:
                ok = True
                break
            ins = g.fwd_in[cur]
            if len(ins) != 1 or g.mode(ins[0].src) != SEQUENCE:
                break
            cur = ins[0].src
        if not ok:
            _diag(diags, "InvalidCycle", f"Cycle {tail}->{head}: loop body must be a Sequence chain from head to tail")


def _choice_origin(g: _Graph, pred: str, via: str) -> tuple[str, str] | None:
    """Walk up single-predecessor chains until a Choice node is found."""
    cur, child = pred, via
    for _ in range(len(g.wf.functions) + 1):
        if g.mode(cur) == CHOICE:
            return cur, child
        ins = g.fwd_in[cur]
        if len(ins) != 1:
            return None
        cur, child = ins[0].src, cur
    return None


def _check_joins(g: _Graph, diags: list[Diagnostic]) -> None:
    for name in g.wf.functions:
        ins = g.fwd_in[name]
        if len(ins) < 2:
            continue
        kinds = {e.mode == FANIN for e in ins}
        if kinds == {True}:
            continue
        if True in kinds:
            _diag(diags, "MixedJoin", f"{name}: mixes FanIn and non-FanIn incoming edges")
            continue
        origins = [_choice_origin(g, e.src, name) for e in ins]
        if None in origins or len({o[0] for o in origins}) != 1 or len({o[1] for o in origins}) != len(origins):
            _diag(diags, "InvalidJoin", f"{name}: several non-FanIn predecessors that are not exclusive Choice branches")


def check_workflow(wf: WorkflowDef) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    g = _Graph(wf)
    if wf.entry not in wf.functions:
        _diag(diags, "UnknownEntry", f"entry {wf.entry!r} is not declared")
        return diags
    if wf.terminal not in wf.functions:
        _diag(diags, "UnknownTerminal", f"terminal {wf.terminal!r} is not declared")
        return diags
    for e in wf.edges:
        if e.src not in wf.functions or e.dst not in wf.functions:
            _diag(diags, "DanglingEdge", f"edge {e.src!r}->{e.dst!r} references an undeclared function")
    if diags:
        return diags
    sources = [f for f in wf.functions if not g.fwd_in[f]]
    extra = [f for f in sources if f != wf.entry]
    if extra:
        _diag(diags, "MultipleEntries", f"functions without predecessors besides entry {wf.entry!r}: {extra}")
    if g.fwd_in[wf.entry]:
        _diag(diags, "EntryHasPredecessor", f"entry {wf.entry!r} has incoming edges")
    if g.topo_order() is None:
        _diag(diags, "CyclicWithoutCyclePrimitive", "edges form a cycle that is not declared with the Cycle primitive")
        return diags
    sinks = [f for f in wf.functions if not g.out[f]]
    if sinks != [wf.terminal]:
        _diag(diags, "MultipleTerminals", f"expected the single terminal {wf.terminal!r}, found sinks {sinks}")
    unreachable = set(wf.functions) - g.reachable(wf.entry)
    if unreachable:
        _diag(diags, "Unreachable", f"not reachable from entry: {sorted(unreachable)}")
    _check_modes(g, diags)
    if diags:
        return diags
    _check_cycles(g, diags)
    _check_joins(g, diags)
    return diags


# -- compilation -------------------------------------------------------------


def majority_platform(platforms: list[str], prefer: str | None = None) -> str:
    """Most frequent platform; ties go to ``prefer``, then the smallest id."""
    counts = Counter(platforms)
    best = max(counts.values())
    tied = sorted(p for p, c in counts.items() if c == best)
    if prefer in tied:
        return prefer
    return tied[0]


@dataclass
class _Anchor:
    node: str
    slots: list[Slot]
    merged: tuple[int, ...]
    depth: int


class _FanInSolver:
    """Positions fan-in participants relative to their shared fan-out ancestor."""

    def __init__(self, g: _Graph, placement: dict[str, str]):
        self.g = g
        self.placement = placement
        self.anchors: dict[str, _Anchor] = {}

    def lineage(self, node: str) -> list[tuple[str, list[tuple[tuple[int, ...], int]], bool]]:
        g = self.g
        variants: list[tuple[tuple[int, ...], int]] = [((), 0)]
        out = [(node, variants, False)]
        cur, barrier = node, False
        for _ in range(4 * len(g.wf.functions) + 4):
            if g.is_aggregator(cur):
                a = self.anchor(cur)
                variants = [(p + a.merged, d + a.depth) for p, d in variants]
                cur = a.node
                out.append((cur, variants, barrier))
                continue
            ins = g.fwd_in[cur]
            if len(ins) != 1:
                break
            parent = ins[0].src
            mode = g.mode(parent)
            if mode == PARALLEL:
                idx = [e.dst for e in g.fwd_out(parent)].index(cur)
                variants = [(p + (idx,), d + 1) for p, d in variants]
            elif mode == MAP:
                width = g.fwd_out(parent)[0].params["width"]
                variants = [(p + (i,), d + 1) for p, d in variants for i in range(width)]
            else:
                if mode != SEQUENCE:
                    barrier = True
                variants = [(p, d + 1) for p, d in variants]
            cur = parent
            out.append((cur, variants, barrier))
        return out

    def anchor(self, agg: str) -> _Anchor:
        if agg in self.anchors:
            return self.anchors[agg]
        g = self.g
        participants = [e.src for e in g.fwd_in[agg]]
        lines = [self.lineage(p) for p in participants]
        index = [{n: (v, b) for n, v, b in line} for line in lines]
        found = None
        for n, _, _ in lines[0]:
            if not all(n in ix for ix in index):
                continue
            if any(ix[n][1] for ix in index):
                raise CompileError([Diagnostic("UnsupportedFanInRegion", f"{agg}: Choice/Cycle/collaboration between fan-out and fan-in")])
            if all(path for ix in index for path, _ in ix[n][0]):
                found = n
                break
        if found is None:
            raise CompileError([Diagnostic("UnstructuredFanIn", f"{agg}: participants share no fan-out ancestor")])
        slots = []
        for p, ix in zip(participants, index):
            decl = g.wf.functions[p]
            for path, depth in sorted(ix[found][0], key=lambda v: tuple(reversed(v[0]))):
                slots.append(Slot(p, path, depth, decl.platform, self.placement[p], decl.transfer.ds))
        merged = pop_and_merge([s.path for s in slots])
        a = _Anchor(found, slots, merged, max(s.depth for s in slots) + 1)
        self.anchors[agg] = a
        return a


def compile_subgraphs(wf: WorkflowDef) -> dict[str, SubGraph]:
    """Compile a validated workflow into one sub-graph per function."""
    diags = check_workflow(wf)
    if diags:
        raise CompileError(diags)
    g = _Graph(wf)
    fns = wf.functions
    all_platforms = sorted(wf.platforms)

    def info(name: str, mode: str) -> NextFunctionInfo:
        d = fns[name]
        return NextFunctionInfo(name, d.platform, mode, d.failover, wf.platforms[d.platform].payload_limit_bytes)

    shapes: dict[str, tuple[str, tuple[str, ...], dict]] = {}
    for name in fns:
        mode = g.mode(name)
        edges = g.out[name]
        if mode == TERMINAL:
            shapes[name] = (TERMINAL, (), {})
        elif mode == CYCLE:
            back = next(e for e in edges if e.mode == CYCLE)
            exit_ = next(e for e in edges if e.mode != CYCLE)
            params = {"bound": back.params["bound"]}
            if "predicate" in back.params:
                params["predicate"] = back.params["predicate"]
            shapes[name] = (CYCLE, (back.dst, exit_.dst), params)
        elif mode == MAP:
            width = edges[0].params["width"]
            shapes[name] = (MAP, (edges[0].dst,) * width, {"width": width})
        elif mode == CHOICE:
            shapes[name] = (CHOICE, tuple(e.dst for e in edges), {"predicate": edges[0].params["predicate"]})
        elif mode == BYBATCH:
            shapes[name] = (BYBATCH, (edges[0].dst,), {"batchSize": edges[0].params["batchSize"]})
        elif mode == BYREDUNDANT:
            shapes[name] = (BYREDUNDANT, (edges[0].dst,), {"count": edges[0].params["count"]})
        else:
            shapes[name] = (mode, tuple(e.dst for e in edges), {})

    placement: dict[str, str] = {}
    transfers: dict[str, TransferPrimitive] = {}
    for name, (mode, targets, _) in shapes.items():
        decl = fns[name]
        t = decl.transfer
        if mode == FANIN:
            # participants hand their outputs to the aggregator by reference
            t = TransferPrimitive(True, t.ds, t.placement)
        if t.placement == AUTO:
            where = majority_platform([decl.platform] + [fns[x].platform for x in targets], prefer=decl.platform)
        else:
            where = t.placement
        placement[name] = where
        transfers[name] = TransferPrimitive(t.transfer_by_ds, t.ds, where)

    solver = _FanInSolver(g, placement)
    out: dict[str, SubGraph] = {}
    for name, (mode, targets, params) in shapes.items():
        decl = fns[name]
        if mode == FANIN:
            agg = targets[0]
            a = solver.anchor(agg)
            declared = g.out[name][0].params.get("arity")
            if declared is not None and declared != len(a.slots):
                raise CompileError([Diagnostic("FanInArityMismatch", f"{agg}: declared arity {declared} but {len(a.slots)} participants")])
            params = {
                "aggregator": agg,
                "participants": [s.to_dict() for s in a.slots],
                "coordinationPlatform": majority_platform([s.platform for s in a.slots], prefer=fns[agg].platform),
            }
        if mode == TERMINAL:
            nexts = tuple(
                NextFunctionInfo(GC_FUNCTION, p, GC, (), wf.platforms[p].payload_limit_bytes) for p in all_platforms
            )
        else:
            nexts = tuple(info(t, mode) for t in targets)
        out[name] = SubGraph(
            FunctionDecl(decl.name, decl.platform, decl.failover, decl.memory_class, decl.handler, transfers[name]),
            InvokePrimitive(mode, targets, params),
            transfers[name],
            nexts,
        )
    return out


def validate_subgraph_set(subgraphs: dict[str, SubGraph]) -> list[Diagnostic]:
    """Cross-sub-graph consistency checks; an empty list means consistent."""
    diags: list[Diagnostic] = []
    for name, sg in subgraphs.items():
        for nf in sg.next_funcs:
            if nf.invoke_mode == GC:
                continue
            if nf.name not in subgraphs:
                _diag(diags, "MissingSubGraph", f"{name} invokes {nf.name} which has no sub-graph")
    by_agg: dict[str, list[tuple[str, list]]] = defaultdict(list)
    for name, sg in subgraphs.items():
        if sg.invoke.mode == FANIN:
            by_agg[sg.invoke.params.get("aggregator")].append((name, sg.invoke.params.get("participants", [])))
    for agg, views in sorted(by_agg.items()):
        first = views[0][1]
        for name, parts in views:
            if parts != first:
                _diag(diags, "InconsistentFanIn", f"participants of {agg} disagree ({name} lists {len(parts)}, {views[0][0]} lists {len(first)})")
            if name not in {p["name"] for p in parts}:
                _diag(diags, "InconsistentFanIn", f"{name} is not in its own participant list for {agg}")
    return diags
