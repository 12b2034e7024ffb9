"""Unique function ids and the datastore keys derived from them.

An id is ``<workflowId>/<name>_<step>[-bindex-<b0>+<b1>+...]``.  Branch
stacks are tuples with the most recent fan-out level first, which is also
the order they are rendered in: a function pushed index 1 below a parent
at ``bindex-0`` renders as ``bindex-1+0``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

BranchStack = tuple[int, ...]

NAME_RE = re.compile(r"^[A-Za-z0-9]+(?:[._][A-Za-z0-9]+)*$")
_ID_RE = re.compile(
    r"^(?P<wid>[^/]+)/(?P<name>[A-Za-z0-9._]+)_(?P<step>\d+)"
    r"(?:-bindex-(?P<branch>\d+(?:\+\d+)*))?$"
)

OUTPUT_SUFFIX = "-output"
IVK_SUFFIX = "-ivk"
BITMAP_SUFFIX = "-bitmap"
COLLAB_NAMESPACE = "collab"


class EmptyStack(ValueError):
    """A fan-in participant arrived with no branch level left to pop."""


def valid_name(name: str) -> bool:
    return bool(NAME_RE.match(name))


def push_branch(stack: BranchStack, index: int) -> BranchStack:
    if index < 0:
        raise ValueError(f"branch index must be >= 0, got {index}")
    return (index, *stack)


def _merge_key(stack: BranchStack) -> tuple[int, BranchStack]:
    # deepest level wins, then the highest index read from the top down
    return (len(stack), stack)


def pop_and_merge(stacks: list[BranchStack]) -> BranchStack:
    """Pop one level from every fan-in branch and keep the greatest result."""
    if not stacks:
        raise EmptyStack("fan-in needs at least one participant")
    popped = []
    for s in stacks:
        if not s:
            raise EmptyStack("participant has an empty branch stack")
        popped.append(tuple(s[1:]))
    return max(popped, key=_merge_key)


def render_branch(stack: BranchStack) -> str:
    return "bindex-" + "+".join(str(i) for i in stack) if stack else ""


@dataclass(frozen=True, order=True)
class FunctionId:
    workflow_id: str
    name: str
    step: int
    branch: BranchStack = ()

    def __str__(self) -> str:
        return f"{self.workflow_id}/{self.local}"

    @property
    def local(self) -> str:
        """The rendered id without the ``workflowId/`` prefix."""
        s = f"{self.name}_{self.step}"
        if self.branch:
            s += "-" + render_branch(self.branch)
        return s

    @classmethod
    def parse(cls, text: str) -> FunctionId:
        m = _ID_RE.match(text)
        if m is None:
            raise ValueError(f"not a function id: {text!r}")
        branch = m.group("branch")
        stack = tuple(int(x) for x in branch.split("+")) if branch else ()
        return cls(m.group("wid"), m.group("name"), int(m.group("step")), stack)


def compute_function_id(
    workflow_id: str, name: str, step: int, stack: BranchStack = ()
) -> FunctionId:
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return FunctionId(workflow_id, name, step, tuple(stack))


@dataclass(frozen=True)
class KeySet:
    output_key: str
    ivk_key: str
    bitmap_key: str | None = None


def derive_keys(fid: FunctionId, aggregator: FunctionId | None = None) -> KeySet:
    """Checkpoint keys for ``fid``; ``aggregator`` is set for fan-in participants."""
    bitmap = f"{aggregator}{BITMAP_SUFFIX}" if aggregator is not None else None
    return KeySet(f"{fid}{OUTPUT_SUFFIX}", f"{fid}{IVK_SUFFIX}", bitmap)


def collab_key(names: list[str] | tuple[str, ...], request: str | None = None) -> str:
    """Coordination list key shared across workflows (never workflow-prefixed)."""
    key = f"{COLLAB_NAMESPACE}/" + "+".join(names)
    if request is not None:
        key += f"/{request}"
    return key
