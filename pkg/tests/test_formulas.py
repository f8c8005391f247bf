"""Formula syntax, printing, normal form, and binder hygiene."""

import pytest

from treelogic import formulas as fm
from treelogic.errors import CycleError, ParseError


def rt(text):
    return fm.to_text(fm.parse_formula(text))


class TestParsePrint:
    def test_simple_round_trips(self):
        for text in (
            "a & <1>b",
            "a | b & c",
            "~<1>a",
            "a => b",
            "a <=> b",
            "let $X = b | <2>$X in $X",
            "<att>T",
            "_p & #",
            "f & <-2>(g & ~<2>T)",
        ):
            assert rt(text) == text

    def test_redundant_parens_dropped(self):
        assert rt("let $X = (a & <2>$Y) | <1>$X | <2>$X, $Y = b | <2>$Y in $X") \
            == "let $X = a & <2>$Y | <1>$X | <2>$X, $Y = b | <2>$Y in $X"
        assert rt("(a & b) | c") == "a & b | c"
        assert rt("a & (b | c)") == "a & (b | c)"

    def test_precedence_structure(self):
        f = fm.parse_formula("a | b & c")
        assert f.kind == fm.OR
        assert f.subs[1].kind == fm.AND
        g = fm.parse_formula("~a & b")
        assert g.kind == fm.AND
        assert g.subs[0].kind == fm.NOT

    def test_atom_kinds(self):
        assert fm.parse_formula("a").kind == fm.NAME
        assert fm.parse_formula("_p").kind == fm.PROP
        assert fm.parse_formula("#").kind == fm.CTX
        att = fm.parse_formula("<att>T")
        assert att.kind == fm.ATTR and att.name == "att"
        mod = fm.parse_formula("<-2>T")
        assert mod.kind == fm.MOD and mod.prog == -2

    def test_interning_gives_identity(self):
        assert fm.parse_formula("a & <1>b") is fm.parse_formula("a & <1>b")
        assert fm.conj(fm.name("a"), fm.TRUE) is fm.name("a")

    def test_parse_errors(self):
        for bad in ("a &", "<3>a", "let $X = a", "(a", "a b"):
            with pytest.raises(ParseError):
                fm.parse_formula(bad)


class TestNormalize:
    def test_nnf_examples(self):
        cases = {
            "~(a & <1>b)": "~a | (~<1>T | <1>~b)",
            "a => b": "~a | b",
            "~ let $X = a | <1>$X in $X":
                "let $X~ = ~a & (~<1>T | <1>$X~) in $X~",
            "~~a": "a",
            "~T": "F",
            "a <=> b": "a & b | ~a & ~b",
        }
        for src, want in cases.items():
            assert fm.to_text(fm.normalize(fm.parse_formula(src))) == want

    def test_normalize_idempotent(self):
        for src in ("~(a & <1>b)", "a <=> (b => <2>c)",
                    "~ let $X = a | <1>$X in $X"):
            once = fm.normalize(fm.parse_formula(src))
            assert fm.normalize(once) is once

    def test_modal_negation_covers_missing_successor(self):
        n = fm.normalize(fm.parse_formula("~<1>a"))
        assert fm.to_text(n) == "~<1>T | <1>~a"


class TestCycleCheck:
    def test_guarded_recursion_passes(self):
        fm.check_cycle_free(fm.parse_formula("let $X = a | <1>$X in $X"))
        fm.check_cycle_free(fm.parse_formula(
            "let $X = (a & <2>$Y) | <1>$X | <2>$X, $Y = b | <2>$Y in $X"))

    def test_unguarded_recursion_rejected(self):
        with pytest.raises(CycleError):
            fm.check_cycle_free(fm.parse_formula("let $X = $X in $X"))

    def test_negative_recursion_rejected(self):
        with pytest.raises(CycleError):
            fm.check_cycle_free(fm.parse_formula("let $X = a | ~$X in $X"))


class TestHelpers:
    def test_resolve_placeholders(self):
        f = fm.conj(fm.attr("a"), fm.absent_outside(("a",)))
        r = fm.resolve_placeholders(f, ("a", "b", "c"))
        assert fm.to_text(r) == "<a>T & (~<b>T & ~<c>T)"

    def test_collectors(self):
        assert set(fm.collect_element_names(
            fm.parse_formula("e & <-1>(d & <2>g)"))) == {"d", "e", "g"}
        assert fm.collect_attribute_names(
            fm.parse_formula("<size>T & a")) == ["size"]

    def test_contains_kind(self):
        assert fm.contains_kind(fm.parse_formula("a & #"), fm.CTX)
        assert not fm.contains_kind(fm.parse_formula("a & b"), fm.CTX)

    def test_substitute_names(self):
        f = fm.parse_formula("a & <1>b")
        out = fm.substitute_names(f, {"a": fm.parse_formula("x | y")})
        assert fm.to_text(out) == "(x | y) & <1>b"

    def test_rename_binders_keeps_meaning(self):
        f = fm.parse_formula("let $X = a | <1>$X in $X")
        g = fm.rename_binders(f)
        assert g.kind == fm.LET
        (v, body), = g.bindings
        assert v != "X" and fm.to_text(g).count(v) >= 2

    def test_converse(self):
        assert [fm.converse(p) for p in fm.PROGRAMS] == [-1, -2, 1, 2]
