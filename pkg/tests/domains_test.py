from fractions import Fraction
from itertools import product as cartesian_product
from random import Random

from smuc.domains import (
    BoolDomain,
    FiniteSetDomain,
    FlatDomain,
    HoareDomain,
    LexProductDomain,
    NodeOrderDomain,
    ProductDomain,
    TropicalDomain,
    all_values,
    check_laws,
    domain_from_json,
    down_closure,
    join,
    leq,
    make_hoare,
    make_lexproduct,
    parse_domain,
    measure_chain_height,
    reverse,
    semiring_plus,
    semiring_times,
)
from smuc.errors import DomainTypeError, NotASemiringError
from smuc.values import FALSE, TRUE, NodeValue, NumValue, SetValue, TupleValue

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest

NODES = ("0", "1", "2", "3")

LAW_ABIDING_DOMAINS = [
    "bool",
    "bool_rev",
    "tropical",
    "tropical_rev",
    "fuzzy",
    "probabilistic",
    "powerset",
    "set[0, 1, 2]",
    "set_rev[0, 1, 2]",
    "nodes[0, 1, 2, 3]",
    "flat[0, 1, 2]",
    "product(bool, tropical_rev)",
    "lex(tropical_rev, nodes[0, 1, 2, 3])",
    "hoare(product(flat[0, 1], tropical_rev))",
    "reverse(set[0, 1])",
]


@pytest.mark.parametrize("text", LAW_ABIDING_DOMAINS)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32))
def test_lattice_and_semiring_laws(text, seed):
    domain = parse_domain(text)
    violations = check_laws(domain, Random(seed), cases=20)
    assert not violations, "; ".join(str(violation) for violation in violations)


def test_reversed_tropical_prefers_smaller_costs():
    domain = TropicalDomain(True)
    assert leq(domain, NumValue(5), NumValue(3))
    assert not leq(domain, NumValue(3), NumValue(5))
    assert join(domain, NumValue(4), NumValue(3)) == NumValue(3)
    assert domain.bottom == NumValue.infinity()


def test_bottom_is_below_everything():
    rng = Random(0)
    for text in LAW_ABIDING_DOMAINS:
        domain = parse_domain(text)
        for _ in range(20):
            assert domain.leq(domain.bottom, domain.sample(rng))


def test_set_join_is_union():
    domain = parse_domain("set[0, 1, 2, 3]")
    first = SetValue([NodeValue("1"), NodeValue("3")])
    second = SetValue([NodeValue("0"), NodeValue("1"), NodeValue("3")])
    assert join(domain, first, second) == second


def test_bool_join():
    assert join(BoolDomain(), FALSE, TRUE) == TRUE


def test_semiring_operations():
    assert semiring_plus(BoolDomain(), [FALSE, FALSE, TRUE]) == TRUE
    tropical = TropicalDomain(True)
    costs = [NumValue(3), NumValue.infinity(), NumValue(5)]
    assert semiring_plus(tropical, costs) == NumValue(3)
    assert semiring_times(tropical, NumValue(3), NumValue(5)) == NumValue(8)
    assert semiring_plus(tropical, []) == tropical.bottom
    fuzzy = parse_domain("fuzzy")
    two_fifths = NumValue(Fraction(2, 5))
    assert semiring_times(fuzzy, NumValue(Fraction(7, 10)), two_fifths) == two_fifths


def test_plain_tropical_is_not_a_semiring():
    with pytest.raises(NotASemiringError):
        semiring_times(TropicalDomain(), NumValue(1), NumValue(2))


def test_values_outside_the_carrier_are_rejected():
    with pytest.raises(DomainTypeError):
        leq(BoolDomain(), NumValue(1), TRUE)


def test_reverse_swaps_extremes():
    reversed_bool = reverse(BoolDomain())
    assert reversed_bool.bottom == TRUE
    assert reversed_bool.top == FALSE


def test_hoare_bottom_is_empty():
    assert not make_hoare(TropicalDomain(True)).bottom.elements


def test_hoare_order_on_node_cost_pairs():
    domain = HoareDomain(ProductDomain([FlatDomain(NODES), TropicalDomain(True)]))
    worse = domain.make([TupleValue((NodeValue("0"), NumValue(4)))])
    better = domain.make([TupleValue((NodeValue("0"), NumValue(3)))])
    assert domain.leq(worse, better)
    assert not domain.leq(better, worse)
    assert domain.join(worse, better) == better


def test_hoare_antichains_agree_with_down_closures():
    element = ProductDomain([FlatDomain(("0", "1")), BoolDomain()])
    domain = HoareDomain(element)
    universe = all_values(element)
    rng = Random(7)
    for _ in range(200):
        a = domain.sample(rng)
        b = domain.sample(rng)
        closure_a = down_closure(domain, a, universe)
        closure_b = down_closure(domain, b, universe)
        assert domain.leq(a, b) == closure_a.issubset(closure_b)
        joined = down_closure(domain, domain.join(a, b), universe)
        assert joined == closure_a.union(closure_b)


def test_lexproduct_top_is_best_cost_at_first_node():
    domain = make_lexproduct(TropicalDomain(True), NodeOrderDomain(NODES))
    assert domain.top == TupleValue((NumValue(0), NodeValue("0")))
    costs = [NumValue(cost) for cost in range(4)] + [NumValue.infinity()]
    pairs = [
        TupleValue((cost, NodeValue(node)))
        for (cost, node) in cartesian_product(costs, NODES)
    ]
    for candidate in pairs:
        assert domain.leq(candidate, domain.top)
    # the cheapest pair wins, and the earlier node breaks ties
    def pair(cost, node):
        return TupleValue((NumValue(cost), NodeValue(node)))

    assert domain.join(pair(2, "3"), pair(2, "1")) == pair(2, "1")
    assert domain.join(pair(1, "3"), pair(2, "0")) == pair(1, "3")


def test_finite_chains():
    rng = Random(3)
    for text in ("bool", "set[0, 1, 2, 3]", "nodes[0, 1, 2]", "lex(bool, nodes[0, 1])"):
        domain = parse_domain(text)
        assert domain.finite_chains
        assert measure_chain_height(domain, rng) <= len(all_values(domain))
    assert not parse_domain("fuzzy").finite_chains


def test_domain_text_and_json_agree():
    for text in LAW_ABIDING_DOMAINS:
        domain = parse_domain(text)
        assert domain_from_json(domain.to_json()) == domain
        assert parse_domain(domain.to_text()) == domain


def test_node_lists_come_from_the_field():
    assert parse_domain("nodes", node_order=NODES) == NodeOrderDomain(NODES)
    with pytest.raises(DomainTypeError):
        parse_domain("nodes")


def test_bad_domain_text():
    with pytest.raises(DomainTypeError):
        parse_domain("lex(bool)")
    with pytest.raises(DomainTypeError):
        parse_domain("nonsense")


def test_set_domain_enumeration():
    assert len(all_values(FiniteSetDomain([NodeValue("a"), NodeValue("b")]))) == 4
    assert LexProductDomain(BoolDomain(), BoolDomain()).top == TupleValue((TRUE, TRUE))
