"""Exactly-once workflow orchestration across simulated FaaS platforms."""

from .envelope import JointObject, Ref
from .ir import SubGraph, WorkflowDef, compile_subgraphs, parse_workflow_def, validate_subgraph_set
from .naming import FunctionId, compute_function_id, derive_keys, pop_and_merge, push_branch
from .runtime import FunctionRuntime, Registry, RuntimeConfig, deploy
from .sim import FaultPlan, SimCloud, Topology

__all__ = [
    "FaultPlan",
    "FunctionId",
    "FunctionRuntime",
    "JointObject",
    "Ref",
    "Registry",
    "RuntimeConfig",
    "SimCloud",
    "SubGraph",
    "Topology",
    "WorkflowDef",
    "compile_subgraphs",
    "compute_function_id",
    "deploy",
    "derive_keys",
    "parse_workflow_def",
    "pop_and_merge",
    "push_branch",
    "validate_subgraph_set",
]

__version__ = "0.1.0"
