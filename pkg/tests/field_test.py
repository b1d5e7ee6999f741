import json
from pathlib import Path
from random import Random

from smuc.capabilities import (
    CapabilityRef,
    EdgeContext,
    build_capability,
    register_capability,
)
from smuc.domains import (
    FiniteSetDomain,
    HoareDomain,
    LexProductDomain,
    PathDomain,
    TropicalDomain,
)
from smuc.errors import (
    DanglingEdgeError,
    DuplicateRegistrationError,
    FieldSchemaError,
    NonTotalLabelError,
    UndefinedLabelError,
    UnknownCapabilityError,
    UnknownLabelError,
)
from smuc.field import (
    Field,
    bottom_valuation,
    check_edge_monotonicity,
    dump_field,
    lift_order,
    load_field,
    load_field_file,
    to_dot,
    write_field_file,
)
from smuc.values import (
    FALSE,
    TRUE,
    AntichainValue,
    NodeValue,
    NumValue,
    PathValue,
    TupleValue,
)

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"


def test_load_reachability_field():
    field = load_field_file(FIXTURES / "cycle.json")
    assert field.nodes == ("0", "1", "2", "3")
    assert set(field.edges) == {
        ("0", "2"),
        ("2", "1"),
        ("2", "3"),
        ("3", "1"),
        ("1", "0"),
    }
    assert field.read("i", "0") == TRUE
    assert field.read("i", "3") == FALSE
    assert set(field.successors("2")) == {"1", "3"}
    assert set(field.predecessors("1")) == {"2", "3"}
    assert set(field.neighbors("2")) == {"0", "1", "3"}


def test_empty_field_is_valid():
    field = load_field({"nodes": [], "edges": [], "node_labels": {}, "edge_labels": {}})
    assert field.nodes == ()


def test_dangling_edge():
    with pytest.raises(DanglingEdgeError):
        load_field({"nodes": ["0"], "edges": [["0", "9"]]})


def test_partial_node_label():
    with pytest.raises(NonTotalLabelError):
        load_field(
            {
                "nodes": ["0", "1"],
                "node_labels": {"i": {"domain": "bool", "values": {"0": True}}},
            }
        )


def test_partial_edge_label():
    with pytest.raises(NonTotalLabelError):
        load_field(
            {
                "nodes": ["0", "1"],
                "edges": [["0", "1"], ["1", "0"]],
                "edge_labels": {"w": {"caps": {"0,1": "id"}}},
            }
        )


def test_unknown_capability():
    with pytest.raises(UnknownCapabilityError):
        load_field(
            {
                "nodes": ["0", "1"],
                "edges": [["0", "1"]],
                "edge_labels": {"w": {"caps": {"0,1": "teleport"}}},
            }
        )


def test_unknown_document_keys():
    with pytest.raises(FieldSchemaError):
        load_field({"nodes": [], "vertices": []})


def test_node_order_overrides_document_order():
    field = load_field({"nodes": ["a", "b", "c"], "node_order": ["c", "a", "b"]})
    assert field.nodes == ("c", "a", "b")


def test_default_capability_covers_every_edge():
    field = load_field(
        {
            "nodes": ["0", "1", "2"],
            "edges": [["0", "1"], ["1", "2"]],
            "edge_labels": {"w": {"default": {"cap": "add", "args": [2]}}},
        }
    )
    assert field.edge_labels["w"].refs[("1", "2")] == CapabilityRef("add", [2])


def test_dump_then_load(tmp_path):
    for name in ("cycle.json", "weighted.json", "spanning_tree.json"):
        field = load_field_file(FIXTURES / name)
        assert load_field(json.loads(json.dumps(dump_field(field)))) == field
        write_field_file(field, tmp_path / name)
        assert load_field_file(tmp_path / name) == field


def test_structured_values_are_decoded_by_domain():
    field = load_field_file(FIXTURES / "weighted.json")
    assert field.label_domain("routes") == HoareDomain(
        LexProductDomain(TropicalDomain(True), PathDomain(field.nodes))
    )
    assert field.read("routes", "0") == AntichainValue(
        [TupleValue((NumValue(0), PathValue(["0"])))]
    )
    assert field.read("i", "1") == NumValue.infinity()


def test_lift_order():
    domain = TropicalDomain(True)
    nodes = ("0", "1")
    assert lift_order(
        bottom_valuation(nodes, domain), {"0": NumValue(0), "1": NumValue(7)}, domain
    )
    first = {"0": NumValue(0), "1": NumValue(5)}
    second = {"0": NumValue(5), "1": NumValue(0)}
    assert not lift_order(first, second, domain)
    assert not lift_order(second, first, domain)
    # the iterates of a reversed-tropical minimum grow towards smaller numbers
    assert lift_order(
        {"0": NumValue(0), "1": NumValue(0), "2": NumValue(1), "3": NumValue(1)},
        {"0": NumValue(0), "1": NumValue(0), "2": NumValue(0), "3": NumValue(0)},
        domain,
    )
    with pytest.raises(FieldSchemaError):
        lift_order({"0": NumValue(0)}, {"1": NumValue(0)}, domain)


def test_label_updates_make_new_fields():
    field = load_field_file(FIXTURES / "cycle.json")
    updated = field.with_label(
        "i", field.label_domain("i"), {node: TRUE for node in field.nodes}
    )
    assert field.read("i", "1") == FALSE
    assert updated.read("i", "1") == TRUE
    freed = updated.without_labels(["i"])
    with pytest.raises(UndefinedLabelError):
        freed.read("i", "0")
    with pytest.raises(UnknownLabelError):
        field.read("nothing", "0")


def test_builtin_capabilities():
    context = EdgeContext("2", "3", domain=TropicalDomain(True))
    add_one = build_capability(CapabilityRef("add", [1]))
    assert add_one.apply(NumValue(0), context) == NumValue(1)
    identity = build_capability(CapabilityRef("id"))
    assert identity.apply(NumValue(4), context) == NumValue(4)
    prefixed = build_capability(CapabilityRef("prefix_src", [1])).apply(
        AntichainValue([TupleValue((NumValue(1), PathValue(["1", "0"])))]), context
    )
    assert prefixed == AntichainValue(
        [TupleValue((NumValue(2), PathValue(["2", "1", "0"])))]
    )
    shifted = build_capability(CapabilityRef("shift_pairs", [3])).apply(
        AntichainValue([TupleValue((NodeValue("0"), NumValue(1)))]), context
    )
    assert shifted == AntichainValue([TupleValue((NodeValue("0"), NumValue(4)))])


def test_gradient_capability_reads_labels():
    hops = {"a": TupleValue((NumValue(1), NodeValue("b")))}
    def reader(label, node):
        return hops[node]

    context = EdgeContext("a", "b", domain=FiniteSetDomain(), reader=reader)
    other = EdgeContext("a", "c", domain=FiniteSetDomain(), reader=reader)
    capability = build_capability(CapabilityRef("grd", ["D"]))
    assert capability.reads() == {"D"}
    paths = AntichainValue([PathValue(["x"])])
    assert capability.apply(paths, context) == AntichainValue([PathValue(["a", "x"])])
    assert not capability.apply(paths, other).elements


def test_duplicate_capability():
    with pytest.raises(DuplicateRegistrationError):
        register_capability("add", lambda args: build_capability(CapabilityRef("id")))


def test_capabilities_are_monotone():
    field = load_field(
        {
            "nodes": ["0", "1", "2"],
            "edges": [["0", "1"], ["1", "2"], ["2", "0"]],
            "edge_labels": {
                "w": {"domain": "tropical_rev", "default": {"cap": "add", "args": [2]}},
                "alpha": {
                    "domain": "lex(tropical_rev, nodes)",
                    "default": {"cap": "dst", "args": [1]},
                },
                "untyped": {"default": "id"},
            },
        }
    )
    assert check_edge_monotonicity(field, Random(0), samples=30) == []


def test_dot_export():
    field = load_field_file(FIXTURES / "cycle.json")
    dot = to_dot(
        field, labels=["i"], highlighted_nodes=["0"], highlighted_edges=[("0", "2")]
    )
    assert dot.startswith('digraph "field" {')
    assert '"0" -> "2"' in dot
    assert "i=true" in dot
    assert "style=bold" in dot


def test_fields_compare_structurally():
    first = Field(["0", "1"], [["0", "1"]])
    second = Field(("0", "1"), [("0", "1")])
    assert first == second
