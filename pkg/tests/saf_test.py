from pathlib import Path

from smuc.domains import BoolDomain
from smuc.errors import AuxiliaryCollisionError, TranslationError
from smuc.field import is_auxiliary, load_field_file
from smuc.formula import parse_formula
from smuc.program import (
    assigned_labels,
    load_program_file,
    parse_program,
    program_to_text,
    run,
)
from smuc.rescue import gen_scenario, rescue_program, scenario_field
from smuc.saf import (
    DifferentialReport,
    differential_check,
    first_difference,
    is_elementary,
    is_saf,
    translate_formula,
    translate_program,
)
from smuc.values import TRUE

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"


def _program(name):
    return load_program_file(FIXTURES / "programs" / name)


def test_elementary_formulas():
    assert is_elementary(parse_formula("i"))
    assert is_elementary(parse_formula("min(ids, 3)"))
    assert is_elementary(parse_formula("<out w:min> ids"))
    assert not is_elementary(parse_formula("<out:min> min(ids, ids)"))
    assert not is_elementary(parse_formula("mu z. or(i, <out:or> z)"))


def test_simple_assignment_form_recognition():
    assert is_saf(parse_program("x <- i; y <- <out:or> x; if x then z <- not(y)"))
    assert not is_saf(parse_program("if not(i) then skip"))
    assert not is_saf(_program("reach.smuc"))


def test_translation_produces_simple_assignment_form():
    field = load_field_file(FIXTURES / "cycle.json")
    for name in ("reach.smuc", "loop.smuc", "nested.smuc"):
        (translated, allocated) = translate_program(_program(name), field=field)
        assert is_saf(translated)
        assert allocated > 0
        new_labels = assigned_labels(translated) - assigned_labels(_program(name))
        assert all(is_auxiliary(label) for label in new_labels)
        # auxiliary names survive printing and parsing
        assert is_saf(parse_program(program_to_text(translated)))


def test_auxiliaries_are_numbered_from_the_counter():
    field = load_field_file(FIXTURES / "cycle.json")
    (translated, allocated) = translate_program(_program("reach.smuc"), 10, field=field)
    assert allocated > 10
    assert "$aux:10" in assigned_labels(translated)
    assert "$aux:0" not in assigned_labels(translated)


def test_translated_formula_leaves_its_value_in_the_target():
    field = load_field_file(FIXTURES / "cycle.json")
    (translated, _) = translate_formula(
        parse_formula("mu z. cup(known, <out:cup> z)"), "everyone", field=field
    )
    result = run(translated, field).field
    assert all(len(result.read("everyone", node)) == 4 for node in field.nodes)


@pytest.mark.parametrize(
    "field_name,program_name",
    [
        ("cycle.json", "reach.smuc"),
        ("cycle.json", "loop.smuc"),
        ("cycle.json", "nested.smuc"),
        ("spanning_tree.json", "spanning_tree.smuc"),
    ],
)
def test_translation_preserves_results(field_name, program_name):
    field = load_field_file(FIXTURES / field_name)
    report = differential_check(_program(program_name), field)
    assert report.equal, report.describe()


def test_translation_preserves_weighted_results():
    field = load_field_file(FIXTURES / "weighted.json")
    program = parse_program(
        "d <- mu z. min(i, <out w:min> z); r <- mu z. join(routes, <out wpaths:join> z)"
    )
    report = differential_check(program, field)
    assert report.equal, report.describe()


@pytest.mark.parametrize(
    "field_name,program_text",
    [
        ("cycle.json", "reach <- mu z. or(i, <out:or> z)"),
        ("cycle.json", "smallest <- mu z. min(ids, <out:min> z)"),
        ("cycle.json", "everyone <- mu z. cup(known, <out:cup> z)"),
        ("weighted.json", "d <- mu z. min(i, <out w:min> z)"),
        ("weighted.json", "pairs <- mu z. join(goals, <out wpairs:join> z)"),
        ("weighted.json", "paths <- mu z. join(routes, <out wpaths:join> z)"),
        ("spanning_tree.json", "tree <- mu z. min1(i, <out alpha:min1> z)"),
    ],
)
def test_worked_examples_translate(field_name, program_text):
    field = load_field_file(FIXTURES / field_name)
    report = differential_check(parse_program(program_text), field)
    assert report.equal, report.describe()


def test_rescue_program_translates():
    line = scenario_field(
        ["v", "m", "r"], {("v", "m"): 1, ("m", "r"): 2}, {"v": 1}, ["r"]
    )
    for field in [line, *(gen_scenario(4, 1, 2, seed) for seed in range(3))]:
        report = differential_check(rescue_program(), field)
        assert report.equal, report.describe()


def test_greatest_fixpoints_translate():
    field = load_field_file(FIXTURES / "cycle.json")
    report = differential_check(parse_program("g <- nu z. and(i, <out:and> z)"), field)
    assert report.equal, report.describe()


def test_reserved_prefix():
    with pytest.raises(AuxiliaryCollisionError):
        translate_program(parse_program("$aux:0 <- i"))


def test_free_variables_cannot_be_translated():
    with pytest.raises(TranslationError):
        translate_formula(parse_formula("x", free_variables=["x"]), "target")


def test_differences_are_described():
    field = load_field_file(FIXTURES / "cycle.json")
    changed = field.with_label("i", BoolDomain(), {node: TRUE for node in field.nodes})
    assert first_difference(field, field) is None
    assert first_difference(field, changed) == ("i", "1")
    assert first_difference(field, field.without_labels(["known"])) == ("known", None)
    report = DifferentialReport(field, changed, ("i", "1"))
    assert not report.equal
    assert "differs at node 1" in report.describe()
