import pytest

from multifaas import fixtures
from multifaas.harness import ConfigError, verify_exactly_once
from multifaas.ir import compile_subgraphs
from multifaas.oracle import (
    PROTOCOL_POINTS,
    check_observables,
    crash_scenarios,
    created_outputs,
    enumerate_crash_points,
    normalize,
    run_once,
    with_budget,
)
from multifaas.runtime import RuntimeConfig
from multifaas.sim import CRASH_POINTS

TOPO = fixtures.default_topology()


def _enumerate(name, budget=1, **kw):
    wf = fixtures.workflow(name)
    return enumerate_crash_points(compile_subgraphs(wf), wf.entry, TOPO, budget, name=name, **kw)


def test_protocol_points():
    assert PROTOCOL_POINTS == (
        "before-output-ckpt",
        "after-output-before-invoke",
        "mid-invoke-batch",
        "after-invoke-before-ivk-append",
    )
    assert CRASH_POINTS[-1] == "mid-gc-sweep"


def test_seq3_budget1_scenario_count():
    wf = fixtures.workflow("seq-3")
    ref = run_once(compile_subgraphs(wf), "A", with_budget(TOPO, 1))
    specs = crash_scenarios(ref, 1, include_gc=False)
    # 3 instances x 4 points; the terminal's two GC invocations give mid-invoke-batch one extra k
    assert len(specs) == 3 * 4 + 1
    assert {s.function for s in specs} == {"A_0", "B_1", "C_2"}
    v = _enumerate("seq-3", include_gc=False)
    assert v.passed and v.runs == 14


@pytest.mark.parametrize("name", ["seq-3", "fanout-3-fanin", "diamond", "cycle-2", "unique-id", "choice"])
def test_enumeration_finds_no_violations(name):
    v = _enumerate(name, budget=2)
    assert v.passed, [x.to_dict() for x in v.violations[:3]]


def test_mutant_is_caught():
    v = _enumerate("seq-3", budget=2, config=RuntimeConfig(retry_budget=2, mutant="skip-ivk-append"))
    assert not v.passed
    assert {x.observable for x in v.violations} >= {"b"}


def test_verify_rejects_large_workflows():
    with pytest.raises(ConfigError):
        verify_exactly_once("mc-32")


def test_verify_bundled():
    assert verify_exactly_once("fanout-3-fanin", budget=1).passed
    assert not verify_exactly_once("seq-3", budget=1, mutant="skip-ivk-append").passed


def test_normalize_strips_workflow_ids():
    assert normalize("3f1e0c2a-1111-4222-8333-444455556666/A_0-output") == "W/A_0-output"


def _clean_sim():
    wf = fixtures.workflow("seq-3")
    return run_once(compile_subgraphs(wf), "A", TOPO)


def test_observables_flag_double_creation():
    sim = _clean_sim()
    rec = next(r for r in sim.history if r["op"] == "store_output_data")
    sim.history.insert(sim.history.index(rec) + 1, dict(rec))
    assert [v.observable for v in check_observables(sim)] == ["a"]


def test_observables_flag_changed_read():
    sim = _clean_sim()
    rec = next(r for r in sim.history if r["op"] == "store_output_data")
    sim.history.insert(sim.history.index(rec) + 1, {**rec, "op": "get_value", "args": {}, "result": "sha256:other"})
    assert "a" in [v.observable for v in check_observables(sim)]


def test_observables_flag_list_duplicates_and_unrecorded_invokes():
    sim = _clean_sim()
    app = next(r for r in sim.history if r["op"] == "append_and_get_list")
    sim.history.append({**app, "result": ["B", "B"]})
    assert "b" in [v.observable for v in check_observables(sim)]
    sim = _clean_sim()
    inv = next(r for r in sim.history if r["op"] == "async_invoke")
    sim.history.append({**inv, "args": {**inv["args"], "label": "Ghost"}})
    assert "b" in [v.observable for v in check_observables(sim)]


def test_observables_flag_missing_outputs_and_residue():
    sim = _clean_sim()
    ref = created_outputs(sim) | {"W/X_9-output"}
    assert "d" in [v.observable for v in check_observables(sim, ref)]
    sim = _clean_sim()
    sim.raw_store("P1")[sim.runs[0].workflow_id + "/leftover"] = b"x"
    assert "d" in [v.observable for v in check_observables(sim)]


def test_observables_flag_two_aggregator_callers():
    wf = fixtures.workflow("fanout-3-fanin")
    sim = run_once(compile_subgraphs(wf), "A", TOPO)
    inv = next(r for r in sim.history if r["op"] == "async_invoke" and r["key"] == "E")
    other = next(r for r in sim.history if r["op"] == "append_and_get_list" and r["caller"] != inv["caller"] and r["key"].endswith("-ivk"))
    caller_id = other["key"][: -len("-ivk")]
    sim.history.append({**inv, "caller": other["caller"], "args": {**inv["args"], "callerId": caller_id, "label": "E"}})
    assert "c" in [v.observable for v in check_observables(sim)]
