"""Tree grammars: parsing, printing, binarization, compilation."""

import re

import pytest

from treelogic import checker, formulas as fm, schema, solver, trees
from treelogic.errors import ParseError


def canon(formula) -> str:
    # fresh-name counters are process global; erase them before freezing
    return re.sub(r"%\d+", "%", fm.to_text(formula))


ROUND_TRIPS = [
    "()",
    "a{()}",
    "a{()}, b{()}",
    "a{()} | b{()}",
    "(a{()} | b{()}), c{()}",
    "a[href]{()}",
    "a[href, id?]{b{()}}",
    "a[~onclick]{()}",
    "a[href | ()]{()}",
    "let x = a{x | ()} in x",
    "let x = a{y} ; y = b{()}, y | () in x",
]


@pytest.mark.parametrize("text", ROUND_TRIPS)
def test_parse_print_round_trip(text):
    assert schema.type_to_text(schema.parse_internal(text)) == text


def test_attribute_only_element_form():
    t = schema.parse_internal("a[href]")
    assert schema.type_to_text(t) == "a[href]{()}"


@pytest.mark.parametrize("text,fragment", [
    ("let x = x, a{()} in x", "outside tail position"),
    ("let x = a{()} ; x = b{()} in x", "duplicate binding"),
    ("a{()} b{()}", "trailing input"),
    ("a[href", "expected"),
    ("a[href, href]{()}", "repeated"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as exc:
        schema.parse_internal(text)
    assert fragment in str(exc.value)


def test_unbound_variable_surfaces_at_binarize():
    t = schema.parse_internal("a{y}")
    with pytest.raises(ParseError, match="unbound type variable y"):
        schema.binarize(t)


def test_nullable():
    t = schema.parse_internal(
        "let x = a{x | ()} ; y = b{()}, y | () ; z = c{()}, z in x, y")
    assert not schema.nullable(t, "x")   # an a element is always present
    assert schema.nullable(t, "y")
    assert not schema.nullable(t, "z")


def test_binarize_invariants():
    t = schema.parse_internal("let x = a{y} ; y = b{()}, y | () in x")
    b = schema.binarize(t)
    assert isinstance(b, schema.BBind)
    names = {n for n, _ in b.bindings}

    def elements(e):
        if isinstance(e, schema.BOr):
            yield from elements(e.left)
            yield from elements(e.right)
        elif isinstance(e, schema.BElement):
            yield e

    for _, bound in b.bindings:
        for e in elements(bound):
            # successors of binarized elements are always variables
            assert e.child1 in names and e.child2 in names


def test_compile_type_frozen():
    b = schema.binarize(schema.parse_internal("a[href, id?]{()}"))
    f = schema.compile_type(b, fm.TRUE, fm.FALSE)
    assert canon(f) == ("let $eps% = F in a & (<href>T & (<id>T | ~<id>T)"
                        " & N[href,id] & (~<1>T & ~<2>T))")
    g = schema.compile_type(b, fm.TRUE, fm.FALSE, with_attributes=False)
    assert canon(g) == "let $eps% = F in a & (~<1>T & ~<2>T)"
    r = fm.resolve_placeholders(f, ("href", "id", "cls"))
    assert canon(r) == ("let $eps% = F in a & (<href>T & (<id>T | ~<id>T)"
                        " & ~<cls>T & (~<1>T & ~<2>T))")


def test_compiled_type_matches_membership():
    t = schema.parse_internal("let x = a{y} ; y = b{()}, y | () in x")
    f = fm.resolve_placeholders(
        schema.compile_type(schema.binarize(t), fm.TRUE, fm.FALSE), ())
    inside = ["<a/>", "<a><b/></a>", "<a><b/><b/><b/></a>"]
    outside = ["<b/>", "<a><c/></a>", "<a><b/><a/></a>", "<a><b><b/></b></a>"]
    for xml in inside:
        bt = trees.to_binary(trees.parse_documents(xml))
        assert checker.check_model(f, bt, bt.root), xml
    for xml in outside:
        bt = trees.to_binary(trees.parse_documents(xml))
        assert not checker.check_model(f, bt, bt.root), xml


def test_compiled_type_solver_witness_validates():
    t = schema.parse_internal("let x = a{y} ; y = b[k]{()}, y | () in x")
    f = fm.resolve_placeholders(
        schema.compile_type(schema.binarize(t), fm.TRUE, fm.FALSE),
        ("k",))
    r = solver.satisfiable(fm.conj(f, fm.modal(1, fm.TRUE)))
    assert r.status == "sat"
    from treelogic import validate
    doc = trees.binary_to_documents(r.witness)[0]
    assert validate.validate(doc, t) is None


def test_name_inventories():
    t = schema.parse_internal(
        "let x = a[href]{y} ; y = b[id?]{()}, y | c[~x]{()} in x")
    assert schema.element_names(t) == {"a", "b", "c"}
    assert schema.attribute_names(t) == {"href", "id", "x"}
    old = schema.parse_internal("a{b{()}}")
    assert schema.added_element(old, t) == {"c"}
    assert schema.added_attribute(old, t) == {"href", "id", "x"}
