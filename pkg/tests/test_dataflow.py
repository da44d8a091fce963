from __future__ import annotations

import javalang
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flakemend.java.declarations import Facet, declaration_diff, revert_declaration
from flakemend.java.parser import parse_member, parse_test_class
from flakemend.java.related import TargetNotFound, extract_related_code, helper_closure
from flakemend.java.statements import (NoEnclosingMethod, def_use, locate_statement, method_variables,
                                       split_statements, statement_at)
from flakemend.java.unordered import SuspectReason, UnorderedApis, backward_slice, find_unordered_suspects
from flakemend.model import FlakinessCategory, FlakyTestCase, TestId
from support import campaign_model, model_of

FQN = "com.example.flow.DataflowFixtureTest"


@pytest.fixture(scope="module")
def flow():
    return model_of("DataflowFixtureTest.java")


def _slice_lines(model, method, sink_line):
    stmts = split_statements(model, model.method(method))
    sink = statement_at(stmts, sink_line)
    variables = method_variables(model, model.method(method), stmts)
    return sorted({stmts[i].start_line for i in backward_slice(stmts, stmts.index(sink), variables)})


@pytest.mark.parametrize("method, sink, expected", [
    ("integersOnly", 25, [23, 24, 25]),
    ("disconnectedMap", 36, [32, 33, 34, 35, 36]),
    ("reassignedBeforeUse", 75, [73, 74, 75]),
    ("keySetIteration", 66, [60, 61, 62, 63, 64, 66]),
    ("stringifiedSet", 55, [51, 52, 53, 54, 55]),
])
def test_backward_slice(flow, method, sink, expected):
    assert _slice_lines(flow, method, sink) == expected


@pytest.mark.parametrize("method, sink, expected", [
    ("integersOnly", 25, []),
    ("disconnectedMap", 36, []),
    ("reflectiveFields", 46, [(41, SuspectReason.UNORDERED_API_CALL)]),
    ("stringifiedSet", 55, [(51, SuspectReason.UNORDERED_COLLECTION_CTOR),
                            (54, SuspectReason.STRINGIFIED_UNORDERED_VALUE)]),
    ("keySetIteration", 66, [(63, SuspectReason.UNORDERED_API_CALL)]),
    ("reassignedBeforeUse", 75, []),
])
def test_unordered_suspects(flow, method, sink, expected):
    got = find_unordered_suspects(flow, flow.method(method), sink)
    assert [(s.line, s.reason) for s in got] == expected


def test_hashmap_construction_is_suspect(json_map_model):
    (s,) = find_unordered_suspects(json_map_model, json_map_model.method("convertToDatabaseColumn_twoElement"), 32)
    assert s.line == 28 and s.reason is SuspectReason.UNORDERED_COLLECTION_CTOR
    assert s.text == "Map<String, String> map = new HashMap<>(8);"


def test_suspects_empty_outside_statements(flow):
    assert find_unordered_suspects(flow, flow.method("integersOnly"), 22) == []


def test_custom_api_list(flow):
    apis = UnorderedApis.parse("# only sets\njava.util.HashSet\n")
    assert apis.types == frozenset({"HashSet"})
    assert find_unordered_suspects(flow, flow.method("reflectiveFields"), 46, apis) == []
    assert find_unordered_suspects(flow, flow.method("stringifiedSet"), 55, apis)


def test_default_api_list_has_the_usual_suspects():
    apis = UnorderedApis.load()
    assert {"HashMap", "HashSet"} <= apis.types
    assert "getDeclaredFields" in apis.apis
    assert "keySet" in apis.iteration_sinks


def test_statements_split_headers_and_blocks(flow):
    stmts = split_statements(flow, flow.method("keySetIteration"))
    assert [s.start_line for s in stmts] == [60, 61, 62, 63, 64, 66]
    header = stmts[3]
    assert header.is_header and header.text.startswith("for (String key")
    assert stmts[4].block_path and not stmts[3].block_path


def test_locate_statement_multiline(bootstrap_model):
    m = bootstrap_model.methods[-1]
    loc = locate_statement(bootstrap_model, bootstrap_model.fqn, m.end_line - 1)
    assert loc.method.name == m.name
    assert loc.statement is not None


def test_locate_statement_rejects_other_class(flow):
    with pytest.raises(NoEnclosingMethod):
        locate_statement(flow, "x.Other", 25)
    with pytest.raises(NoEnclosingMethod):
        locate_statement(flow, FQN, 2)


def test_def_use_distinguishes_kills(flow):
    stmts = split_statements(flow, flow.method("reassignedBeforeUse"))
    variables = method_variables(flow, flow.method("reassignedBeforeUse"), stmts)
    mutate, reassign = def_use(stmts[1], variables), def_use(stmts[2], variables)
    assert "m" in mutate.defs and "m" not in mutate.kills and "m" in mutate.uses
    assert "m" in reassign.kills


_vars = st.sampled_from(["a", "b", "c", "d"])


@given(st.lists(st.tuples(_vars, st.lists(_vars, max_size=2)), min_size=1, max_size=8))
def test_slice_is_sound_on_straight_line_code(assignments):
    """Every statement defining a variable transitively read by the sink is in the slice."""
    lines = [f"int {v} = 0;" for v in "abcd"]
    lines += [f"{lhs} = {' + '.join(rhs) or '1'};" for lhs, rhs in assignments]
    lines.append("sink(a);")
    text = "class T {\n void m() {\n" + "\n".join(lines) + "\n }\n}\n"
    javalang.parse.parse(text)
    model = parse_test_class(text)
    method = model.method("m")
    stmts = split_statements(model, method)
    got = set(backward_slice(stmts, len(stmts) - 1, method_variables(model, method, stmts)))
    # reference: classic reaching-definitions walk
    need, want = {"a"}, {len(stmts) - 1}
    for i in range(len(stmts) - 2, -1, -1):
        if i < 4:
            lhs, rhs = "abcd"[i], []
        else:
            lhs, rhs = assignments[i - 4][0], assignments[i - 4][1]
        if lhs in need:
            want.add(i)
            need.discard(lhs)
            need |= set(rhs)
    assert got == want


def test_related_code_for_id_is_flaky_only(json_map_model):
    case = FlakyTestCase(TestId(json_map_model.fqn, "convertToDatabaseColumn_twoElement"), FlakinessCategory.ID)
    related = extract_related_code(json_map_model, case)
    assert [u.role for u in related.units] == ["flaky"]
    assert related.units[0].source.startswith("@Test\npublic void convertToDatabaseColumn_twoElement()")


def test_related_code_for_victim():
    model = campaign_model("src/test/java/org/example/config/SettingsTest.java")
    case = FlakyTestCase(TestId(model.fqn, "testDefaultMode"), FlakinessCategory.OD_VICTIM,
                         (TestId(model.fqn, "testLoadFastProfile"),))
    related = extract_related_code(model, case)
    roles = [u.role for u in related.units]
    assert roles[:2] == ["flaky", "polluter"]
    assert related.by_role("polluter")[0].name == "testLoadFastProfile"


def test_related_code_missing_polluter_class(json_map_model):
    case = FlakyTestCase(TestId(json_map_model.fqn, "convertToDatabaseColumn_twoElement"), FlakinessCategory.OD_VICTIM,
                         (TestId("x.Elsewhere", "pollute"),))
    with pytest.raises(TargetNotFound):
        extract_related_code(json_map_model, case)


def test_helper_closure_depths():
    model = parse_test_class(
        "class T {\n @Test public void t() { a(); }\n void a() { this.b(); }\n void b() { }\n void c() { }\n}\n")
    assert helper_closure(model, [model.method("t")]) == {"a": 1, "b": 2}


def _method(src):
    return parse_member(src).methods[0]


def test_declaration_diff_facets():
    orig = _method("@Test\npublic void t(int a) { x(); }")
    patched = _method("@Test @Ignore\nstatic String t(long a) { y(); }")
    facets = {d.facet for d in declaration_diff(orig, patched)}
    assert facets == {Facet.MODIFIERS, Facet.RETURN_TYPE, Facet.ANNOTATIONS, Facet.PARAMETERS}
    assert declaration_diff(orig, _method("@Test\npublic void t(int b) { z(); }")) == []


def test_revert_declaration_keeps_body():
    orig = _method("@Test\npublic void t() { old(); }")
    patched = _method("@Test\nvoid t() { fresh(); }")
    (d,) = declaration_diff(orig, patched)
    assert str(d) == "MODIFIERS: {public} removed"
    reverted = revert_declaration(orig, patched)
    assert reverted == "@Test\npublic void t() { fresh(); }"
    assert declaration_diff(orig, _method(reverted)) == []
