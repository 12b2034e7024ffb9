import copy
import dataclasses
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from multifaas import fixtures, randwf
from multifaas.ir import (
    CYCLE,
    FANIN,
    GC,
    MAP,
    PARALLEL,
    SEQUENCE,
    TERMINAL,
    CompileError,
    InvalidWorkflow,
    check_workflow,
    compile_subgraphs,
    dump_subgraphs,
    load_subgraphs,
    majority_platform,
    parse_workflow_def,
    validate_subgraph_set,
    workflow_from_dict,
)


def parse(doc: dict):
    return parse_workflow_def(json.dumps(doc))


def codes(doc) -> list[str]:
    with pytest.raises(InvalidWorkflow) as ei:
        parse_workflow_def(doc if isinstance(doc, str) else json.dumps(doc))
    return ei.value.codes


# -- parse ---------------------------------------------------------------------


def test_parse_chain_on_two_platforms():
    wf = parse(fixtures.seq3_doc())
    assert (wf.entry, wf.terminal) == ("A", "C")
    assert [wf.functions[f].platform for f in "ABC"] == ["P1", "P2", "P1"]


def test_parse_iot_pipeline():
    wf = parse(fixtures.iot_doc(10))
    assert len(wf.edges) == 9
    assert all(e.mode == SEQUENCE for e in wf.edges)
    plats = [wf.functions[f"iot{i}"].platform for i in range(10)]
    assert plats == ["P1", "P2"] * 5


def test_iot_pipeline_has_ten_sequence_edges_including_the_gc_hop():
    # nine declared edges between ten functions; the terminal's tenth hop is the GC trigger
    sgs = compile_subgraphs(fixtures.workflow("iot-10"))
    seq = [n for n in sgs.values() if n.invoke.mode == SEQUENCE]
    assert len(seq) == 9 and sgs["iot9"].invoke.mode == TERMINAL


def test_dangling_edge():
    doc = fixtures.seq3_doc()
    doc["edges"].append({"from": "C", "to": "Z", "mode": "Sequence"})
    assert "DanglingEdge" in codes(doc)


def test_unknown_platform():
    doc = fixtures.seq3_doc()
    doc["functions"]["B"]["platform"] = "P9"
    assert "UnknownPlatform" in codes(doc)


def test_failover_must_exclude_primary():
    doc = fixtures.seq3_doc()
    doc["functions"]["B"]["failover"] = ["P2"]
    assert "InvalidFailover" in codes(doc)


def test_multiple_entries():
    doc = fixtures.seq3_doc()
    doc["functions"]["X"] = {"platform": "P1"}
    doc["edges"].append({"from": "X", "to": "C", "mode": "Sequence"})
    assert "MultipleEntries" in codes(doc)
    doc2 = fixtures.seq3_doc()
    doc2["entry"] = ["A", "B"]
    assert "MultipleEntries" in codes(doc2)


def test_syntax_error_has_position():
    with pytest.raises(InvalidWorkflow) as ei:
        parse_workflow_def('{"name": "x",\n  "platforms": }')
    d = ei.value.diagnostics[0]
    assert d.code == "SyntaxError" and d.position == (2, 16)


def test_undeclared_cycle():
    doc = fixtures.seq3_doc()
    doc["edges"].append({"from": "C", "to": "B", "mode": "Sequence"})
    assert set(codes(doc)) & {"CyclicWithoutCyclePrimitive", "MultipleTerminals"}


@pytest.mark.parametrize(
    "mutate,code",
    [
        (lambda d: d["edges"].__setitem__(0, {"from": "A", "to": "B", "mode": "Teleport"}), "UnknownMode"),
        (lambda d: d["functions"].__setitem__("bad-name", {"platform": "P1"}), "InvalidName"),
        (lambda d: d.__setitem__("terminal", "Q"), "UnknownTerminal"),
        (lambda d: d.__setitem__("platforms", {"P1": {"payloadLimitBytes": 0}}), "SchemaError"),
    ],
)
def test_schema_diagnostics(mutate, code):
    doc = fixtures.seq3_doc()
    mutate(doc)
    assert code in codes(doc)


def test_mode_checks():
    doc = fixtures.fanin_doc(3)
    doc["edges"][0]["mode"] = "Sequence"
    assert "MixedModes" in codes(doc)
    doc = fixtures.redundant_doc()
    for e in doc["edges"]:
        if e["mode"] == "ByRedundant":
            e["params"]["count"] = 1
    assert "InvalidParams" in codes(doc)
    doc = fixtures.cycle2_doc()
    for e in doc["edges"]:
        if e["mode"] == "Cycle":
            e["params"]["bound"] = 0
    assert "InvalidCycle" in codes(doc)


def test_join_without_fanin_or_choice_is_rejected():
    doc = fixtures.diamond_doc()
    for e in doc["edges"]:
        if e["mode"] == "FanIn":
            e["mode"] = "Sequence"
    assert "InvalidJoin" in codes(doc)


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=5),
    lambda c: st.lists(c, max_size=3) | st.dictionaries(st.text(max_size=5), c, max_size=3),
    max_leaves=10,
)


@given(st.text(max_size=200))
def test_parse_is_total_on_text(text):
    try:
        parse_workflow_def(text)
    except InvalidWorkflow:
        pass


@given(json_values)
def test_parse_is_total_on_json(value):
    try:
        parse_workflow_def(json.dumps(value))
    except InvalidWorkflow:
        pass


def _mutations(doc):
    """Structural corruptions of a valid document."""
    keys = ["name", "platforms", "functions", "edges", "entry", "terminal"]
    for k in keys:
        d = copy.deepcopy(doc)
        del d[k]
        yield d
        d = copy.deepcopy(doc)
        d[k] = 7
        yield d


@pytest.mark.parametrize("name", fixtures.BUNDLED)
def test_parse_is_total_on_corrupted_fixtures(name):
    for d in _mutations(fixtures.workflow_doc(name)):
        try:
            parse(d)
        except InvalidWorkflow as exc:
            assert exc.codes


# -- compile ---------------------------------------------------------------------


def test_mc_compiles_to_fan_out_and_fan_in():
    sgs = compile_subgraphs(fixtures.workflow("mc-32"))
    assert sgs["data_map"].invoke.mode == MAP
    assert sgs["data_map"].invoke.targets == ("data_process",) * 32
    fi = sgs["data_process"].invoke
    assert fi.mode == FANIN and fi.params["aggregator"] == "data_aggregation"
    assert len(fi.params["participants"]) == 32


def test_parallel_fan_out_keeps_declaration_order():
    sgs = compile_subgraphs(workflow_from_dict(fixtures.fanin_doc(32)))
    a = sgs["A"]
    assert a.invoke.mode == PARALLEL
    assert [n.name for n in a.next_funcs] == [f"W{i}" for i in range(32)] == list(a.invoke.targets)
    assert len(sgs["W0"].invoke.params["participants"]) == 32


def test_single_function_is_terminal():
    doc = {"name": "one", "platforms": {"P1": {"payloadLimitBytes": 1000}}, "functions": {"A": {"platform": "P1"}}, "edges": [], "entry": "A", "terminal": "A"}
    sg = compile_subgraphs(parse(doc))["A"]
    assert sg.is_terminal
    assert [(n.name, n.invoke_mode) for n in sg.next_funcs] == [("gc", GC)]


def test_terminal_next_funcs_are_the_gc_set():
    sgs = compile_subgraphs(fixtures.workflow("seq-3"))
    assert [(n.name, n.platform) for n in sgs["C"].next_funcs] == [("gc", "P1"), ("gc", "P2")]


def test_diamond_placement_goes_to_majority():
    sgs = compile_subgraphs(fixtures.workflow("diamond"))
    assert sgs["A"].transfer.placement == "P2"
    # a tally over {A, B, C}: two of three on P2
    assert majority_platform(["P1", "P2", "P2"], prefer="P1") == "P2"


def test_majority_tie_prefers_self_then_smallest():
    assert majority_platform(["P2", "P1"], prefer="P2") == "P2"
    assert majority_platform(["P3", "P2"], prefer="P9") == "P2"


def test_fanin_arity_mismatch():
    doc = fixtures.mc_doc(4)
    for e in doc["edges"]:
        if e["mode"] == "FanIn":
            e["params"]["arity"] = 5
    with pytest.raises(CompileError) as ei:
        compile_subgraphs(workflow_from_dict(doc))
    assert ei.value.codes == ["FanInArityMismatch"]


def test_cycle_compiles_to_head_and_exit():
    sgs = compile_subgraphs(fixtures.workflow("cycle-2"))
    c = sgs["C"].invoke
    assert c.mode == CYCLE and c.targets == ("B", "D") and c.params["bound"] == 2


def test_every_non_terminal_has_successors():
    for name in fixtures.BUNDLED:
        for sg in compile_subgraphs(fixtures.workflow(name)).values():
            assert len(sg.next_funcs) >= 1
            if not sg.is_terminal:
                assert [n.name for n in sg.next_funcs] == list(sg.invoke.targets)
            assert all(n.payload_limit > 0 for n in sg.next_funcs)


def test_validate_compiled_set_is_clean():
    for name in fixtures.BUNDLED:
        assert validate_subgraph_set(compile_subgraphs(fixtures.workflow(name))) == []


def test_validate_detects_inconsistent_fanin():
    sgs = compile_subgraphs(workflow_from_dict(fixtures.fanin_doc(4)))
    w0 = sgs["W0"]
    params = dict(w0.invoke.params, participants=w0.invoke.params["participants"][:3])
    sgs["W0"] = dataclasses.replace(w0, invoke=dataclasses.replace(w0.invoke, params=params))
    assert "InconsistentFanIn" in [d.code for d in validate_subgraph_set(sgs)]


def test_validate_detects_missing_subgraph():
    sgs = compile_subgraphs(fixtures.workflow("diamond"))
    del sgs["D"]
    diags = validate_subgraph_set(sgs)
    assert [d.code for d in diags if d.code == "MissingSubGraph"] and all("D" in d.message for d in diags)


@pytest.mark.parametrize("name", fixtures.BUNDLED)
def test_compile_is_deterministic_and_round_trips(name):
    wf = fixtures.workflow(name)
    a = dump_subgraphs(compile_subgraphs(wf))
    b = dump_subgraphs(compile_subgraphs(parse_workflow_def(wf.to_json())))
    assert a == b
    assert dump_subgraphs(load_subgraphs(a)) == a


@given(st.integers(0, 10_000))
def test_random_workflows_round_trip(seed):
    g = randwf.random_workflow(seed, max_instances=30)
    wf = parse(g.doc)
    assert check_workflow(wf) == []
    text = dump_subgraphs(compile_subgraphs(wf))
    assert dump_subgraphs(compile_subgraphs(parse_workflow_def(wf.to_json()))) == text
    assert dump_subgraphs(load_subgraphs(text)) == text
