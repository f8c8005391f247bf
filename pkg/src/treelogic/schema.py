"""Tree grammars: parsing, binarization, and compilation into the logic.

A tree type describes a regular language of unranked attributed trees.
The textual form accepted by parse_internal:

    ()                        empty forest
    T , T                     forest concatenation
    T | T                     alternation (binds looser than ,)
    l{T}  l[a]{T}  l[a]       element with optional attribute expression
    x                         reference to a bound type variable
    let x = T ; y = T in T    mutually recursive bindings

Attribute expressions inside [...] are alternatives separated by `|`,
each alternative a comma list of items `n` (required), `n?` (optional),
`~n` (prohibited), or the literal `()` (no attributes at all).  A bare
element name with no brackets is a variable reference, so leaf elements
are written l{()}.

Unguarded recursive variable references must sit in tail position of
their binding (final item of a comma sequence); anything else is
rejected, which keeps the languages regular and binarization total.

Compilation to the logic goes through a binary (first-child /
next-sibling) grammar whose element successors are always variables;
compile_type then maps that grammar to a recursive formula, tagging
every element definition and closing each definition with a frontier
alternative.  Attribute expressions compile to per-element constraints
whose "nothing else" parts stay symbolic until the full attribute
universe of a problem is known (resolve_placeholders finishes the job).
"""

from __future__ import annotations

import itertools
import sys
import threading
from dataclasses import dataclass

from . import formulas as fm
from .errors import ParseError

__all__ = [
    "EmptySet", "EmptySeq", "Or", "Concat", "Element", "Var", "Bind",
    "EMPTY_SET", "EMPTY_SEQ",
    "AEmpty", "AChoice", "CommutativeConcat", "Optional", "Required",
    "Prohibited", "A_EMPTY",
    "EmptyTree", "BOr", "BElement", "BVar", "BBind", "EMPTY_TREE",
    "parse_internal", "type_to_text", "attr_to_text",
    "binarize", "nullable", "nullable_map",
    "compile_type", "compile_attr",
    "element_names", "attribute_names", "added_element", "added_attribute",
]


# ---------------------------------------------------------------------------
# Unranked tree types.

@dataclass(frozen=True)
class EmptySet:
    """The empty language: no tree at all."""


@dataclass(frozen=True)
class EmptySeq:
    """The empty forest ()."""


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Concat:
    left: object
    right: object


@dataclass(frozen=True)
class Element:
    name: str
    attrs: object
    content: object


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Bind:
    bindings: tuple      # of (name, type)
    body: object


EMPTY_SET = EmptySet()
EMPTY_SEQ = EmptySeq()


# ---------------------------------------------------------------------------
# Attribute expressions.

@dataclass(frozen=True)
class AEmpty:
    """The `()` alternative: the element carries no attributes at all."""


@dataclass(frozen=True)
class AChoice:
    """One alternative (an attribute list) with the remaining choices.

    rest is another attribute expression, or None when this is the last
    alternative.
    """
    head: object
    rest: object


@dataclass(frozen=True)
class CommutativeConcat:
    left: object
    right: object


@dataclass(frozen=True)
class Optional:
    name: str


@dataclass(frozen=True)
class Required:
    name: str


@dataclass(frozen=True)
class Prohibited:
    name: str


A_EMPTY = AEmpty()


def _list_names(a, out):
    if isinstance(a, CommutativeConcat):
        _list_names(a.left, out)
        _list_names(a.right, out)
    else:
        out.append(a.name)


def attr_list_names(a) -> list:
    """Names mentioned by one attribute list, in order."""
    out: list = []
    _list_names(a, out)
    return out


# ---------------------------------------------------------------------------
# Binary tree types (first-child / next-sibling form).

@dataclass(frozen=True)
class EmptyTree:
    """The empty binary tree."""


@dataclass(frozen=True)
class BOr:
    left: object
    right: object


@dataclass(frozen=True)
class BElement:
    name: str
    attrs: object
    child1: str          # successors are variables by construction
    child2: str


@dataclass(frozen=True)
class BVar:
    name: str


@dataclass(frozen=True)
class BBind:
    bindings: tuple      # of (name, binary type)
    body: object


EMPTY_TREE = EmptyTree()


# ---------------------------------------------------------------------------
# Parsing the internal syntax.

_PUNCT = "(){}[]|,;=?~"


def _tokenize(text: str):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in _PUNCT:
            tokens.append((c, c, line, col))
            i += 1
            col += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "._-:"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in ("let", "in") else "name"
            tokens.append((kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(("end", "", line, col))
    return tokens


class _TypeParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1]!r}", t[2], t[3])
        return t

    def at(self, kind, value=None):
        t = self.peek()
        return t[0] == kind and (value is None or t[1] == value)

    # -- type expressions ---------------------------------------------------

    def type_expr(self):
        left = self.seq()
        while self.at("|"):
            self.next()
            left = Or(left, self.seq())
        return left

    def seq(self):
        items = [self.item()]
        while self.at(","):
            self.next()
            items.append(self.item())
        out = items[-1]
        for it in reversed(items[:-1]):
            out = Concat(it, out)
        return out

    def item(self):
        t = self.peek()
        if t[0] == "(":
            self.next()
            if self.at(")"):
                self.next()
                return EMPTY_SEQ
            inner = self.type_expr()
            self.expect(")")
            return inner
        if t[0] == "kw" and t[1] == "let":
            return self.let_expr()
        if t[0] == "name":
            self.next()
            attrs = None
            if self.at("["):
                attrs = self.attr_expr()
            if self.at("{"):
                self.next()
                content = self.type_expr()
                self.expect("}")
                return Element(t[1], attrs if attrs is not None else A_EMPTY,
                               content)
            if attrs is not None:
                return Element(t[1], attrs, EMPTY_SEQ)
            return Var(t[1])
        raise ParseError(f"unexpected {t[1]!r}", t[2], t[3])

    def let_expr(self):
        self.next()                      # let
        bindings = []
        while True:
            name = self.expect("name")[1]
            self.expect("=")
            bindings.append((name, self.type_expr()))
            if self.at(";"):
                self.next()
                continue
            break
        t = self.next()
        if t[0] != "kw" or t[1] != "in":
            raise ParseError(f"expected 'in', found {t[1]!r}", t[2], t[3])
        body = self.type_expr()
        group = {n for n, _ in bindings}
        if len(group) != len(bindings):
            raise ParseError("duplicate binding in let")
        for name, bound in bindings:
            _check_tail(bound, group, tail=True, where=name)
        return Bind(tuple(bindings), body)

    # -- attribute expressions ----------------------------------------------

    def attr_expr(self):
        self.expect("[")
        alts = [self.attr_alt()]
        while self.at("|"):
            self.next()
            alts.append(self.attr_alt())
        self.expect("]")
        out = None
        for alt in reversed(alts):
            if alt is None:              # the () alternative
                out = A_EMPTY if out is None else _append_empty(out)
            else:
                out = AChoice(alt, out)
        return out if out is not None else A_EMPTY

    def attr_alt(self):
        if self.at("("):
            self.next()
            self.expect(")")
            return None
        items = [self.attr_item()]
        while self.at(","):
            self.next()
            items.append(self.attr_item())
        names = [i.name for i in items]
        if len(set(names)) != len(names):
            raise ParseError("attribute repeated within one list")
        out = items[0]
        for it in items[1:]:
            out = CommutativeConcat(out, it)
        return out

    def attr_item(self):
        if self.at("~"):
            self.next()
            return Prohibited(self.expect("name")[1])
        name = self.expect("name")[1]
        if self.at("?"):
            self.next()
            return Optional(name)
        return Required(name)


def _append_empty(expr):
    # splice the () alternative at the end of a choice chain
    if isinstance(expr, AChoice):
        return AChoice(expr.head,
                       A_EMPTY if expr.rest is None
                       else _append_empty(expr.rest))
    return expr


def _check_tail(expr, group, tail, where):
    """Reject unguarded non-tail references to variables of this group."""
    if isinstance(expr, Var):
        if expr.name in group and not tail:
            raise ParseError(
                f"variable {expr.name} occurs unguarded outside tail "
                f"position in the binding of {where}")
    elif isinstance(expr, Concat):
        _check_tail(expr.left, group, False, where)
        _check_tail(expr.right, group, tail, where)
    elif isinstance(expr, Or):
        _check_tail(expr.left, group, tail, where)
        _check_tail(expr.right, group, tail, where)
    elif isinstance(expr, Bind):
        for _, bound in expr.bindings:
            _check_tail(bound, group, False, where)
        _check_tail(expr.body, group, tail, where)
    # Element content is guarded; nothing to check below it.


def parse_internal(text: str):
    p = _TypeParser(text)
    out = p.type_expr()
    t = p.peek()
    if t[0] != "end":
        raise ParseError(f"trailing input {t[1]!r}", t[2], t[3])
    return out


# ---------------------------------------------------------------------------
# Printing (round-trips with parse_internal).

def attr_to_text(a) -> str:
    if a is None:
        return ""
    parts = []
    cur = a
    while cur is not None:
        if isinstance(cur, AEmpty):
            parts.append("()")
            cur = None
        else:
            parts.append(_attr_list_text(cur.head))
            cur = cur.rest
    return "[" + " | ".join(parts) + "]"


def _attr_list_text(a) -> str:
    if isinstance(a, CommutativeConcat):
        return f"{_attr_list_text(a.left)}, {_attr_list_text(a.right)}"
    if isinstance(a, Optional):
        return f"{a.name}?"
    if isinstance(a, Prohibited):
        return f"~{a.name}"
    return a.name


def type_to_text(t) -> str:
    if isinstance(t, EmptySeq):
        return "()"
    if isinstance(t, EmptySet):
        return "()"          # no concrete syntax; prints as the empty forest
    if isinstance(t, Or):
        return f"{type_to_text(t.left)} | {type_to_text(t.right)}"
    if isinstance(t, Concat):
        left = type_to_text(t.left)
        if isinstance(t.left, Or):
            left = f"({left})"
        right = type_to_text(t.right)
        if isinstance(t.right, Or):
            right = f"({right})"
        return f"{left}, {right}"
    if isinstance(t, Element):
        attrs = "" if isinstance(t.attrs, AEmpty) else attr_to_text(t.attrs)
        return f"{t.name}{attrs}{{{type_to_text(t.content)}}}"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Bind):
        bs = " ; ".join(f"{n} = {type_to_text(b)}" for n, b in t.bindings)
        return f"let {bs} in {type_to_text(t.body)}"
    raise TypeError(f"not a tree type: {t!r}")


# ---------------------------------------------------------------------------
# Nullability (works on both the unranked and the binary family).

def nullable_map(bindings: dict) -> dict:
    """Fixpoint: which bound variables' languages contain the empty tree."""
    state = {name: False for name in bindings}

    def null(e) -> bool:
        if isinstance(e, (EmptySeq, EmptyTree)):
            return True
        if isinstance(e, (EmptySet, Element, BElement)):
            return False
        if isinstance(e, (Or, BOr)):
            return null(e.left) or null(e.right)
        if isinstance(e, Concat):
            return null(e.left) and null(e.right)
        if isinstance(e, (Var, BVar)):
            return state.get(e.name, False)
        if isinstance(e, (Bind, BBind)):
            # nested groups resolved against the same state
            return null(e.body)
        raise TypeError(f"not a type expression: {e!r}")

    changed = True
    while changed:
        changed = False
        for name, bound in bindings.items():
            if not state[name] and null(bound):
                state[name] = True
                changed = True
    return state


def nullable(bind, x: str) -> bool:
    """Does the language of the variable x (bound in bind) contain ()?"""
    return nullable_map(dict(bind.bindings))[x]


# ---------------------------------------------------------------------------
# Binarization.

_EPS_STEM = "eps"


def binarize(t) -> BBind:
    """First-child / next-sibling form of an unranked type.

    The result is a single binder whose element successors are all
    variables; the language correspondence is d ∈ L(t) iff the binary
    encoding of d is in L(binarize(t)).
    """
    counter = itertools.count()
    out: list = []               # [name, binary expr] in creation order
    uvar_memo: dict = {}         # (unranked var, continuation) → name
    expr_memo: dict = {}         # (id(expr), continuation) → name
    env_stack: list = [{}]

    eps = f"{_EPS_STEM}%{next(counter)}"
    out.append([eps, EMPTY_TREE])

    def fresh(stem: str) -> str:
        return f"{stem}%{next(counter)}"

    def lookup(x: str):
        for env in reversed(env_stack):
            if x in env:
                return env[x]
        raise ParseError(f"unbound type variable {x}")

    def var_for_expr(expr, k: str) -> str:
        be = walk(expr, k)
        if isinstance(be, BVar):
            return be.name
        key = (id(expr), k)
        hit = expr_memo.get(key)
        if hit is not None:
            return hit
        name = fresh("x")
        expr_memo[key] = name
        out.append([name, be])
        return name

    def var_for_uvar(x: str, k: str) -> str:
        binding, env_id = lookup(x)
        key = (x, env_id, k)
        hit = uvar_memo.get(key)
        if hit is not None:
            return hit
        name = fresh(x)
        uvar_memo[key] = name
        slot = len(out)
        out.append([name, None])
        out[slot][1] = walk(binding, k)
        return name

    def walk(expr, k: str):
        if isinstance(expr, EmptySet):
            return EMPTY_SET
        if isinstance(expr, EmptySeq):
            return BVar(k)
        if isinstance(expr, Or):
            # flatten the spine first: grammars with hundreds of
            # alternatives would otherwise nest a frame per branch
            alts = []
            todo = [expr]
            while todo:
                e = todo.pop()
                if isinstance(e, Or):
                    todo.append(e.right)
                    todo.append(e.left)
                else:
                    alts.append(walk(e, k))
            parts = [b for b in alts if b is not EMPTY_SET]
            if not parts:
                return EMPTY_SET
            acc = parts[-1]
            for b in reversed(parts[:-1]):
                acc = BOr(b, acc)
            return acc
        if isinstance(expr, Concat):
            return walk(expr.left, var_for_expr(expr.right, k))
        if isinstance(expr, Element):
            first = var_for_expr(expr.content, eps)
            return BElement(expr.name, expr.attrs, first, k)
        if isinstance(expr, Var):
            return BVar(var_for_uvar(expr.name, k))
        if isinstance(expr, Bind):
            env = {name: (bound, id(expr)) for name, bound in expr.bindings}
            env_stack.append(env)
            try:
                return walk(expr.body, k)
            finally:
                env_stack.pop()
        raise TypeError(f"not a tree type: {expr!r}")

    body = _run_deep(walk, t, eps)
    return BBind(tuple((n, b) for n, b in out), body)


def _run_deep(fn, *args):
    """Call fn on a thread with a large stack and recursion limit.

    Binarizing a grammar with hundreds of element names nests the
    traversal once per element/continuation pair, which overflows the
    interpreter defaults long before it exhausts real memory.
    """
    box: list = [None, None]

    def go():
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 1_000_000))
        try:
            box[0] = fn(*args)
        except BaseException as exc:   # noqa: BLE001 - reraised below
            box[1] = exc
        finally:
            sys.setrecursionlimit(limit)

    old_size = threading.stack_size(512 * 1024 * 1024)
    try:
        worker = threading.Thread(target=go, name="binarize")
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_size)
    if box[1] is not None:
        raise box[1]
    return box[0]


# ---------------------------------------------------------------------------
# Compilation into the logic.

def compile_attr(a, with_attributes: bool = True):
    """Formula constraining one element's attributes.

    The "no other attribute" parts are emitted as placeholders naming the
    attributes they exempt; resolve_placeholders expands them once the
    problem's full attribute universe is known.
    """
    if not with_attributes:
        return fm.TRUE
    if a is None or isinstance(a, AEmpty):
        return fm.absent_outside(())
    if isinstance(a, AChoice):
        head = fm.conj(_attr_list_formula(a.head),
                       fm.absent_outside(attr_list_names(a.head)))
        if a.rest is None:
            return head
        return fm.disj(head, compile_attr(a.rest))
    # a bare list used directly as an expression
    return fm.conj(_attr_list_formula(a),
                   fm.absent_outside(attr_list_names(a)))


def _attr_list_formula(a):
    if isinstance(a, CommutativeConcat):
        return fm.conj(_attr_list_formula(a.left), _attr_list_formula(a.right))
    if isinstance(a, Optional):
        return fm.disj(fm.attr(a.name), fm.neg(fm.attr(a.name)))
    if isinstance(a, Prohibited):
        return fm.neg(fm.attr(a.name))
    return fm.attr(a.name)


def compile_type(b: BBind, tag, frontier, with_attributes: bool = True):
    """Recursive formula holding exactly at roots of trees in L(b).

    tag is conjoined into every element definition (commonly True or a
    marker proposition); frontier is the alternative offered at every
    definition (commonly False, or a marker for where obligations end).
    """
    if not isinstance(b, BBind):
        b = BBind((), b)
    env = dict(b.bindings)
    null = nullable_map(env)
    rename = {name: fm.fresh_name(name.split("%")[0]) for name in env}

    def tsucc(x: str, p: int):
        bound = env[x]
        if isinstance(bound, EmptyTree):
            return fm.neg(fm.modal(p, fm.TRUE))
        ref = fm.modal(p, fm.var(rename[x]))
        if null[x]:
            return fm.disj(fm.neg(fm.modal(p, fm.TRUE)), ref)
        return ref

    def walk(e):
        if isinstance(e, (EmptySet, EmptyTree)):
            return fm.FALSE
        if isinstance(e, BOr):
            return fm.disj(walk(e.left), walk(e.right))
        if isinstance(e, BElement):
            core = fm.conj_all([
                fm.name(e.name), tag,
                compile_attr(e.attrs, with_attributes),
                tsucc(e.child1, 1), tsucc(e.child2, 2),
            ])
            return fm.disj(core, frontier)
        if isinstance(e, BVar):
            return fm.var(rename[e.name])
        raise TypeError(f"not a binary type expression: {e!r}")

    bindings = [(rename[name], walk(bound)) for name, bound in b.bindings]
    return fm.let(bindings, walk(b.body))


# ---------------------------------------------------------------------------
# Name inventories.

def _walk_type(t):
    yield t
    if isinstance(t, (Or, Concat)):
        yield from _walk_type(t.left)
        yield from _walk_type(t.right)
    elif isinstance(t, Element):
        yield from _walk_type(t.content)
    elif isinstance(t, Bind):
        for _, bound in t.bindings:
            yield from _walk_type(bound)
        yield from _walk_type(t.body)


def element_names(t) -> set:
    return {e.name for e in _walk_type(t) if isinstance(e, Element)}


def _attr_expr_names(a, out: set):
    if a is None or isinstance(a, AEmpty):
        return
    if isinstance(a, AChoice):
        out.update(attr_list_names(a.head))
        _attr_expr_names(a.rest, out)
    else:
        out.update(attr_list_names(a))


def attribute_names(t) -> set:
    out: set = set()
    for e in _walk_type(t):
        if isinstance(e, Element):
            _attr_expr_names(e.attrs, out)
    return out


def added_element(old, new) -> set:
    return element_names(new) - element_names(old)


def added_attribute(old, new) -> set:
    return attribute_names(new) - attribute_names(old)
