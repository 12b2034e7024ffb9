"""Bundled example workflows, topologies and scenarios."""

from __future__ import annotations

from .ir import WorkflowDef, workflow_from_dict
from .sim import PlatformSpec, Topology

P1, P2 = "P1", "P2"
LIMITS = {P1: 262_144, P2: 131_072}


def default_topology(retry_budget: int = 2) -> Topology:
    return Topology((PlatformSpec(P1, LIMITS[P1], retry_budget), PlatformSpec(P2, LIMITS[P2], retry_budget)))


def _platforms(*ids: str) -> dict:
    return {p: {"payloadLimitBytes": LIMITS.get(p, 262_144)} for p in ids}


def _fn(platform: str, handler: str = "stamp", failover: list[str] | None = None, **transfer) -> dict:
    d = {"platform": platform, "failover": failover or [], "memoryClass": "512", "handler": handler}
    if transfer:
        d["transfer"] = transfer
    return d


def _edge(src: str, dst: str, mode: str = "Sequence", **params) -> dict:
    return {"from": src, "to": dst, "mode": mode, "params": params}


def _build(doc: dict) -> WorkflowDef:
    return workflow_from_dict(doc)


def chain_doc(n: int, name: str = "seq", prefix: str = "F", handler: str = "stamp", platforms=(P1, P2)) -> dict:
    names = [f"{prefix}{i}" for i in range(n)]
    return {
        "name": name,
        "platforms": _platforms(P1, P2),
        "functions": {f: _fn(platforms[i % len(platforms)], handler) for i, f in enumerate(names)},
        "edges": [_edge(a, b) for a, b in zip(names, names[1:])],
        "entry": names[0],
        "terminal": names[-1],
    }


def seq3_doc() -> dict:
    return {
        "name": "seq-3",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "B": _fn(P2), "C": _fn(P1)},
        "edges": [_edge("A", "B"), _edge("B", "C")],
        "entry": "A",
        "terminal": "C",
    }


def iot_doc(n: int = 10) -> dict:
    """Synthetic sequence passing 1 KB alternately between two platforms."""
    return chain_doc(n, name=f"iot-{n}", prefix="iot", handler="pad1k")


def mc_doc(k: int = 32) -> dict:
    """Map-reduce style: one mapper fans out to ``k`` processors and an aggregator."""
    return {
        "name": f"mc-{k}",
        "platforms": _platforms(P1, P2),
        "functions": {
            "data_map": _fn(P1),
            "data_process": _fn(P1),
            "data_aggregation": _fn(P1),
        },
        "edges": [
            _edge("data_map", "data_process", "Map", width=k),
            _edge("data_process", "data_aggregation", "FanIn", arity=k),
        ],
        "entry": "data_map",
        "terminal": "data_aggregation",
    }


def diamond_doc() -> dict:
    return {
        "name": "diamond",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "B": _fn(P2), "C": _fn(P2), "D": _fn(P1)},
        "edges": [
            _edge("A", "B", "Parallel"),
            _edge("A", "C", "Parallel"),
            _edge("B", "D", "FanIn"),
            _edge("C", "D", "FanIn"),
        ],
        "entry": "A",
        "terminal": "D",
    }


def fanout3_doc() -> dict:
    return {
        "name": "fanout-3-fanin",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "B": _fn(P1), "C": _fn(P2), "D": _fn(P2), "E": _fn(P1)},
        "edges": [
            _edge("A", "B", "Parallel"),
            _edge("A", "C", "Parallel"),
            _edge("A", "D", "Parallel"),
            _edge("B", "E", "FanIn", arity=3),
            _edge("C", "E", "FanIn", arity=3),
            _edge("D", "E", "FanIn", arity=3),
        ],
        "entry": "A",
        "terminal": "E",
    }


def fanin_doc(n: int, platforms=(P1, P2)) -> dict:
    names = [f"W{i}" for i in range(n)]
    edges = [_edge("A", w, "Parallel") for w in names] + [_edge(w, "Z", "FanIn", arity=n) for w in names]
    return {
        "name": f"fanin-{n}",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "Z": _fn(P1), **{w: _fn(platforms[i % len(platforms)]) for i, w in enumerate(names)}},
        "edges": edges,
        "entry": "A",
        "terminal": "Z",
    }


def cycle2_doc() -> dict:
    return {
        "name": "cycle-2",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "B": _fn(P2), "C": _fn(P1), "D": _fn(P2)},
        "edges": [
            _edge("A", "B"),
            _edge("B", "C"),
            _edge("C", "B", "Cycle", bound=2),
            _edge("C", "D"),
        ],
        "entry": "A",
        "terminal": "D",
    }


def unique_id_doc() -> dict:
    """The worked naming example: nested fan-out merged by one fan-in."""
    return {
        "name": "unique-id",
        "platforms": _platforms(P1, P2),
        "functions": {n: _fn(P1) for n in ("S", "B", "C", "D", "E", "F", "A")},
        "edges": [
            _edge("S", "B"),
            _edge("B", "C", "Parallel"),
            _edge("B", "D", "Parallel"),
            _edge("C", "E", "Map", width=2),
            _edge("D", "F"),
            _edge("E", "A", "FanIn", arity=3),
            _edge("F", "A", "FanIn", arity=3),
        ],
        "entry": "S",
        "terminal": "A",
    }


def failover_doc() -> dict:
    """A -> B -> C where B is pre-deployed on a backup platform."""
    return {
        "name": "failover",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1, "pad1k"), "B": _fn(P1, "pad1k", failover=[P2]), "C": _fn(P1, "pad1k")},
        "edges": [_edge("A", "B"), _edge("B", "C")],
        "entry": "A",
        "terminal": "C",
    }


def batch_doc(batch_size: int = 4) -> dict:
    return {
        "name": f"batch-{batch_size}",
        "platforms": _platforms(P1, P2),
        "functions": {"P": _fn(P1), "K": _fn(P2), "T": _fn(P2)},
        "edges": [_edge("P", "K", "ByBatch", batchSize=batch_size), _edge("K", "T")],
        "entry": "P",
        "terminal": "T",
    }


def redundant_doc(count: int = 2) -> dict:
    return {
        "name": f"redundant-{count}",
        "platforms": _platforms(P1, P2),
        "functions": {"R": _fn(P1), "K": _fn(P2)},
        "edges": [_edge("R", "K", "ByRedundant", count=count)],
        "entry": "R",
        "terminal": "K",
    }


def choice_doc(predicate: str = "first") -> dict:
    return {
        "name": "choice",
        "platforms": _platforms(P1, P2),
        "functions": {"A": _fn(P1), "L": _fn(P1), "R": _fn(P2), "J": _fn(P1)},
        "edges": [
            _edge("A", "L", "Choice", predicate=predicate),
            _edge("A", "R", "Choice", predicate=predicate),
            _edge("L", "J"),
            _edge("R", "J"),
        ],
        "entry": "A",
        "terminal": "J",
    }


def workflow_doc(name: str) -> dict:
    """Look up a bundled workflow by name (``iot-N`` and ``mc-K`` are parametric)."""
    fixed = {
        "seq-3": seq3_doc,
        "diamond": diamond_doc,
        "fanout-3-fanin": fanout3_doc,
        "cycle-2": cycle2_doc,
        "unique-id": unique_id_doc,
        "failover": failover_doc,
        "choice": choice_doc,
    }
    if name in fixed:
        return fixed[name]()
    kind, _, num = name.rpartition("-")
    if num.isdigit():
        builders = {"iot": iot_doc, "mc": mc_doc, "fanin": fanin_doc, "batch": batch_doc, "redundant": redundant_doc}
        if kind in builders:
            return builders[kind](int(num))
    raise KeyError(f"no bundled workflow {name!r}")


def workflow(name: str) -> WorkflowDef:
    return _build(workflow_doc(name))


BUNDLED = ("iot-10", "mc-32", "diamond", "failover", "seq-3", "fanout-3-fanin", "cycle-2", "unique-id")
