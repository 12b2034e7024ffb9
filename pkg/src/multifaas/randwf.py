"""Seeded generator of random structured workflows.

Workflows are built from nested blocks (single nodes, fan-out/fan-in,
Map/fan-in, Choice and bounded Cycle) so every generated document is
valid.  The generator also returns how many function instances a
fault-free run executes, which the uniqueness checks compare against.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

PLATFORMS = ("P1", "P2")


@dataclass
class Generated:
    doc: dict
    instances: int


class _Builder:
    def __init__(self, rng: random.Random, max_width: int, max_bound: int):
        self.rng = rng
        self.max_width = max_width
        self.max_bound = max_bound
        self.functions: dict[str, dict] = {}
        self.edges: list[dict] = []

    def node(self) -> str:
        name = f"N{len(self.functions)}"
        self.functions[name] = {"platform": self.rng.choice(PLATFORMS), "failover": [], "memoryClass": "128"}
        return name

    def edge(self, src: str, dst: str, mode: str = "Sequence", **params) -> None:
        self.edges.append({"from": src, "to": dst, "mode": mode, "params": params})

    def block(self, depth: int, dynamic: bool) -> tuple[str, str, int]:
        """Build one block; returns (first, last, instances per enclosing instance)."""
        kinds = ["node", "node"]
        if depth < 3:
            kinds += ["par", "map"]
        if dynamic:
            kinds += ["choice", "cycle"]
        kind = self.rng.choice(kinds)
        if kind == "node":
            n = self.node()
            return n, n, 1
        if kind == "par":
            fan, join = self.node(), None
            branches = [self.block(depth + 1, False) for _ in range(self.rng.randint(1, 3))]
            join = self.node()
            total = 2
            for first, last, count in branches:
                self.edge(fan, first, "Parallel")
                self.edge(last, join, "FanIn")
                total += count
            return fan, join, total
        if kind == "map":
            width = self.rng.randint(1, self.max_width)
            fan = self.node()
            first, last, count = self.block(depth + 1, False)
            join = self.node()
            self.edge(fan, first, "Map", width=width)
            self.edge(last, join, "FanIn", arity=width)
            return fan, join, 2 + width * count
        if kind == "choice":
            head = self.node()
            arms = []
            for _ in range(self.rng.randint(2, 3)):
                chain = [self.node() for _ in range(self.rng.randint(1, 2))]
                for a, b in zip(chain, chain[1:]):
                    self.edge(a, b)
                arms.append(chain)
            join = self.node()
            for chain in arms:
                self.edge(head, chain[0], "Choice", predicate="first")
                self.edge(chain[-1], join)
            return head, join, 2 + len(arms[0])
        bound = self.rng.randint(1, self.max_bound)
        body = [self.node() for _ in range(self.rng.randint(1, 3))]
        for a, b in zip(body, body[1:]):
            self.edge(a, b)
        self.edge(body[-1], body[0], "Cycle", bound=bound)
        return body[0], body[-1], bound * len(body)


def random_workflow(seed: int, max_instances: int = 50, max_width: int = 8, max_bound: int = 4) -> Generated:
    """A valid random workflow with at most ``max_instances`` executed instances."""
    rng = random.Random(seed)
    while True:
        b = _Builder(rng, max_width, max_bound)
        entry = b.node()
        last, total = entry, 1
        for _ in range(rng.randint(1, 4)):
            first, end, count = b.block(0, True)
            b.edge(last, first)
            last, total = end, total + count
        terminal = b.node()
        b.edge(last, terminal)
        total += 1
        if total <= max_instances:
            doc = {
                "name": f"random-{seed}",
                "platforms": {p: {"payloadLimitBytes": 262_144} for p in PLATFORMS},
                "functions": b.functions,
                "edges": b.edges,
                "entry": entry,
                "terminal": terminal,
            }
            return Generated(doc, total)
