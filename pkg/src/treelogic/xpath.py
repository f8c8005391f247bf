"""Navigation queries: parsing, sugar removal, and compilation.

The query language is a navigational fragment: eleven element axes plus
attribute access, name and wildcard node tests, boolean qualifiers, and
union/intersection of queries.  Position and counting predicates are
rewritten away into plain navigation where an equivalent rewriting
exists; anything else raises UnsupportedSugar.

Compilation turns a query into a formula satisfied exactly by the nodes
the query selects, starting from context nodes described by a given
formula.  Each axis becomes a recursive traversal over the first-child
and next-sibling links; selection walks the axes inverted (a node is
selected by child:: from some context iff its parent is a context),
while existence tests inside qualifiers walk them forward.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import formulas as fm
from .errors import ParseError, UnsupportedSugar

AXES = (
    "child", "descendant", "self", "parent", "ancestor",
    "descendant-or-self", "ancestor-or-self",
    "following-sibling", "preceding-sibling", "following", "preceding",
)

_INVERSE = {
    "child": "parent", "parent": "child",
    "descendant": "ancestor", "ancestor": "descendant",
    "descendant-or-self": "ancestor-or-self",
    "ancestor-or-self": "descendant-or-self",
    "following-sibling": "preceding-sibling",
    "preceding-sibling": "following-sibling",
    "following": "preceding", "preceding": "following",
    "self": "self",
}

LAST = "last()"


class Star:
    """Wildcard node test."""

    def __repr__(self):
        return "*"


STAR = Star()


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Step:
    axis: str
    test: object


@dataclass(frozen=True)
class Compose:
    left: object
    right: object


@dataclass(frozen=True)
class Qualified:
    path: object
    qual: object


@dataclass(frozen=True)
class Absolute:
    path: object


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Intersection:
    left: object
    right: object


@dataclass(frozen=True)
class AttrTail:
    """A query ending in attribute access, e.g. a/b/@n."""
    path: object        # may be None for a bare @n
    name: str


@dataclass(frozen=True)
class QAnd:
    left: object
    right: object


@dataclass(frozen=True)
class QOr:
    left: object
    right: object


@dataclass(frozen=True)
class QNot:
    qual: object


@dataclass(frozen=True)
class QPath:
    path: object


@dataclass(frozen=True)
class QAttrPath:
    path: object
    name: str


@dataclass(frozen=True)
class QAttr:
    name: str


@dataclass(frozen=True)
class QPos:
    """position() = value, where value is an int or LAST."""
    value: object


@dataclass(frozen=True)
class QCount:
    """count(path) op value, op in {"=", ">"}."""
    path: object
    op: str
    value: int


# ---------------------------------------------------------------------------
# Parsing.

_TOKEN_RE = re.compile(
    r"\s*(//|/|::|\.\.|\.|\[|\]|\(|\)|@|\||=|>|\*|"
    r"[0-9]+|[A-Za-z_][\w.\-]*)")


def _tokenize(text: str):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(
                    f"unexpected character {text[pos:].strip()[0]!r} "
                    "in query")
            break
        out.append(m.group(1))
        pos = m.end()
    return out


class _QueryParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of query")
        self.pos += 1
        return tok

    def take(self, tok) -> bool:
        if self.peek() == tok:
            self.pos += 1
            return True
        return False

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise ParseError(f"expected {tok!r}, found {got!r} in query")

    # query := branch (`|` branch)*
    # branch := pathq (`intersect` pathq)*
    def query(self):
        out = self.branch()
        while self.take("|"):
            out = Union(out, self.branch())
        return out

    def branch(self):
        out = self.path_query()
        while self.peek() == "intersect":
            self.next()
            out = Intersection(out, self.path_query())
        return out

    def path_query(self):
        path, attr = self.path(top=True)
        if attr is not None:
            return AttrTail(path, attr)
        return path

    def path(self, top=False, in_qual=False):
        """A slash-separated path; returns (path, trailing attribute)."""
        absolute = False
        parts = []
        if self.take("//"):
            absolute = True
            parts.append(Step("descendant-or-self", STAR))
        elif self.take("/"):
            absolute = True
        if absolute and in_qual:
            raise ParseError("absolute paths cannot appear in a qualifier")
        if absolute and not parts and \
                self.peek() in (None, "|", "]", ")", "intersect"):
            return Absolute(Step("self", STAR)), None
        attr = None
        while True:
            if attr is not None:
                raise ParseError(
                    "an attribute step must be the last step of a path")
            got = self.step_or_attr()
            if isinstance(got, tuple):
                attr = got[1]
            else:
                parts.append(got)
            if self.take("//"):
                parts.append(Step("descendant-or-self", STAR))
            elif not self.take("/"):
                break
        if attr is not None and not in_qual and not top:
            raise ParseError(
                "attribute steps are only allowed in qualifiers")
        out = None
        for part in parts:
            out = part if out is None else Compose(out, part)
        if absolute:
            if out is None:
                raise ParseError("empty absolute path")
            out = Absolute(out)
        elif out is None and attr is None:
            raise ParseError(f"expected a step, found {self.peek()!r}")
        return out, attr

    def step_or_attr(self):
        if self.take("@"):
            return ("attr", self._name("attribute name"))
        if self.peek() == "attribute" and self.peek(1) == "::":
            self.next()
            self.next()
            return ("attr", self._name("attribute name"))
        return self.step()

    def step(self):
        if self.take(".."):
            return self._qualify(Step("parent", STAR))
        if self.take("."):
            return self._qualify(Step("self", STAR))
        axis = "child"
        if self.peek() in AXES and self.peek(1) == "::":
            axis = self.next()
            self.next()
        elif self.peek(1) == "::":
            raise ParseError(f"unknown axis {self.peek()!r}")
        if self.take("*"):
            test = STAR
        else:
            name = self._name("node test")
            if name == "node" and self.peek() == "(":
                self.next()
                self.expect(")")
                test = STAR
            elif self.peek() == "(":
                raise ParseError(f"node test {name}() is not supported")
            else:
                test = Name(name)
        return self._qualify(Step(axis, test))

    def _qualify(self, path):
        while self.take("["):
            path = Qualified(path, self.qualifier())
            self.expect("]")
        return path

    def _name(self, what):
        tok = self.next()
        if not tok or not re.fullmatch(r"[A-Za-z_][\w.\-]*", tok):
            raise ParseError(f"expected {what}, found {tok!r}")
        return tok

    # qualifiers
    def qualifier(self):
        out = self.qual_and()
        while self.peek() == "or":
            self.next()
            out = QOr(out, self.qual_and())
        return out

    def qual_and(self):
        out = self.qual_atom()
        while self.peek() == "and":
            self.next()
            out = QAnd(out, self.qual_atom())
        return out

    def qual_atom(self):
        tok = self.peek()
        if tok == "not" and self.peek(1) == "(":
            self.next()
            self.next()
            inner = self.qualifier()
            self.expect(")")
            return QNot(inner)
        if tok == "position" and self.peek(1) == "(":
            self.next()
            self.next()
            self.expect(")")
            self.expect("=")
            return QPos(self._pos_value())
        if tok == "last" and self.peek(1) == "(":
            # bare [last()] is shorthand for [position()=last()]
            self.next()
            self.next()
            self.expect(")")
            return QPos(LAST)
        if tok == "count" and self.peek(1) == "(":
            self.next()
            self.next()
            path, attr = self.path(in_qual=True)
            if attr is not None:
                raise ParseError("count() of attributes is not supported")
            self.expect(")")
            op = self.next()
            if op not in ("=", ">"):
                raise ParseError(f"unsupported comparison {op!r} on count()")
            return QCount(path, op, self._int())
        if tok is not None and tok.isdigit():
            # a numeric qualifier [k] means [position()=k]
            return QPos(self._int())
        if tok == "(":
            self.next()
            inner = self.qualifier()
            self.expect(")")
            return inner
        path, attr = self.path(in_qual=True)
        if attr is not None:
            if path is None:
                return QAttr(attr)
            return QAttrPath(path, attr)
        return QPath(path)

    def _pos_value(self):
        if self.peek() == "last" and self.peek(1) == "(":
            self.next()
            self.next()
            self.expect(")")
            return LAST
        return self._int()

    def _int(self) -> int:
        tok = self.next()
        if not tok or not tok.isdigit():
            raise ParseError(f"expected a number, found {tok!r}")
        return int(tok)


def parse_query(text: str):
    p = _QueryParser(text)
    out = p.query()
    if p.peek() is not None:
        raise ParseError(f"trailing input in query: {p.peek()!r}")
    return out


# ---------------------------------------------------------------------------
# Sugar removal: position() and count() to plain navigation.

def _sib_chain(axis: str, test, n: int):
    """n chained sibling steps along axis, as a path."""
    out = Step(axis, test)
    for _ in range(n - 1):
        out = Compose(out, Step(axis, test))
    return out


def _rewrite_pos(axis, test, value):
    if axis == "child":
        if value == LAST:
            return QNot(QPath(Step("following-sibling", test)))
        if value == 1:
            return QNot(QPath(Step("preceding-sibling", test)))
        if value > 1:
            return QAnd(
                QPath(_sib_chain("preceding-sibling", test, value - 1)),
                QNot(QPath(_sib_chain("preceding-sibling", test, value))))
    if axis == "preceding-sibling" and value == LAST:
        # reverse axis: its last candidate is the first sibling

        return QNot(QPath(Step("preceding-sibling", test)))
    if axis == "following-sibling" and value == LAST:
        return QNot(QPath(Step("following-sibling", test)))
    pos = "last()" if value == LAST else value
    raise UnsupportedSugar(
        f"position()={pos} on axis {axis} has no navigational rewriting")


def _rewrite_count(qual: QCount):
    if qual.op == "=" and qual.value == 0:
        return QNot(QPath(_desugar_path(qual.path)))
    if qual.op == ">" and qual.value == 0:
        return QPath(_desugar_path(qual.path))
    if qual.op == ">" and isinstance(qual.path, Step) \
            and qual.path.axis == "child":
        chain = Compose(qual.path,
                        _sib_chain("following-sibling", qual.path.test,
                                   qual.value))
        return QPath(chain)
    raise UnsupportedSugar(
        f"count() {qual.op} {qual.value} has no navigational rewriting "
        "for this path")


def _desugar_qual(qual, axis, test):
    if isinstance(qual, QAnd):
        return QAnd(_desugar_qual(qual.left, axis, test),
                    _desugar_qual(qual.right, axis, test))
    if isinstance(qual, QOr):
        return QOr(_desugar_qual(qual.left, axis, test),
                   _desugar_qual(qual.right, axis, test))
    if isinstance(qual, QNot):
        return QNot(_desugar_qual(qual.qual, axis, test))
    if isinstance(qual, QPath):
        return QPath(_desugar_path(qual.path))
    if isinstance(qual, QAttrPath):
        return QAttrPath(_desugar_path(qual.path), qual.name)
    if isinstance(qual, QAttr):
        return qual
    if isinstance(qual, QPos):
        if axis is None:
            raise UnsupportedSugar(
                "position() is only supported directly on a step")
        return _rewrite_pos(axis, test, qual.value)
    if isinstance(qual, QCount):
        return _rewrite_count(qual)
    raise ParseError(f"bad qualifier {qual!r}")


def _desugar_path(path):
    if isinstance(path, Step):
        return path
    if isinstance(path, Compose):
        return Compose(_desugar_path(path.left), _desugar_path(path.right))
    if isinstance(path, Qualified):
        base = path.path
        while isinstance(base, Qualified):
            base = base.path
        axis = test = None
        if isinstance(base, Step):
            axis, test = base.axis, base.test
        return Qualified(_desugar_path(path.path),
                         _desugar_qual(path.qual, axis, test))
    if isinstance(path, Absolute):
        return Absolute(_desugar_path(path.path))
    raise ParseError(f"bad path {path!r}")


def desugar(query):
    """Rewrite position() and count() away; UnsupportedSugar if impossible."""
    if isinstance(query, Union):
        return Union(desugar(query.left), desugar(query.right))
    if isinstance(query, Intersection):
        return Intersection(desugar(query.left), desugar(query.right))
    if isinstance(query, AttrTail):
        path = None if query.path is None else _desugar_path(query.path)
        return AttrTail(path, query.name)
    return _desugar_path(query)


# ---------------------------------------------------------------------------
# Compilation to formulas.

_ROOTF = fm.conj(fm.neg(fm.modal(-1, fm.TRUE)),
                 fm.neg(fm.modal(-2, fm.TRUE)))


def _rec(prefix, build):
    """let $V = build($V) in $V with a fresh variable."""
    name = fm.fresh_name(prefix)
    return fm.let([(name, build(fm.var(name)))], fm.var(name))


def _axis_exists(axis: str, psi):
    """Some node reachable along axis satisfies psi."""
    if axis == "self":
        return psi
    if axis == "child":
        return fm.modal(1, _rec("C", lambda v: fm.disj(psi, fm.modal(2, v))))
    if axis == "descendant":
        return fm.modal(1, _rec("D", lambda v: fm.disj(
            psi, fm.disj(fm.modal(1, v), fm.modal(2, v)))))
    if axis == "parent":
        return _rec("P", lambda v: fm.disj(fm.modal(-1, psi),
                                           fm.modal(-2, v)))
    if axis == "ancestor":
        return _rec("A", lambda v: fm.disj(fm.modal(-1, fm.disj(psi, v)),
                                           fm.modal(-2, v)))
    if axis == "descendant-or-self":
        return fm.disj(psi, _axis_exists("descendant", psi))
    if axis == "ancestor-or-self":
        return fm.disj(psi, _axis_exists("ancestor", psi))
    if axis == "following-sibling":
        return _rec("F", lambda v: fm.modal(2, fm.disj(psi, v)))
    if axis == "preceding-sibling":
        return _rec("B", lambda v: fm.modal(-2, fm.disj(psi, v)))
    if axis == "following":
        inner = _axis_exists("following-sibling",
                             _axis_exists("descendant-or-self", psi))
        return _axis_exists("ancestor-or-self", inner)
    if axis == "preceding":
        inner = _axis_exists("preceding-sibling",
                             _axis_exists("descendant-or-self", psi))
        return _axis_exists("ancestor-or-self", inner)
    raise ParseError(f"unknown axis {axis}")


axis_exists = _axis_exists


def _test_formula(test):
    return fm.TRUE if test is STAR else fm.name(test.name)


def _selected(path, ctx):
    """Formula holding exactly at nodes the path selects from ctx nodes."""
    if isinstance(path, Compose):
        return _selected(path.right, _selected(path.left, ctx))
    if isinstance(path, Qualified):
        return fm.conj(_selected(path.path, ctx), _holds(path.qual))
    if isinstance(path, Step):
        return fm.conj(_test_formula(path.test),
                       _axis_exists(_INVERSE[path.axis], ctx))
    if isinstance(path, Absolute):
        anchor = _axis_exists(
            "ancestor-or-self",
            fm.conj(_ROOTF, _axis_exists("descendant-or-self", ctx)))
        return fm.conj(_selected(path.path, _ROOTF), anchor)
    if isinstance(path, Union):
        return fm.disj(_selected(path.left, ctx),
                       _selected(path.right, ctx))
    if isinstance(path, Intersection):
        return fm.conj(_selected(path.left, ctx),
                       _selected(path.right, ctx))
    if isinstance(path, AttrTail):
        raise UnsupportedSugar("cannot select attribute nodes; "
                               "attribute steps only qualify elements")
    raise ParseError(f"bad path {path!r}")


def _holds(qual):
    """Formula holding at nodes where the qualifier is true."""
    if isinstance(qual, QAnd):
        return fm.conj(_holds(qual.left), _holds(qual.right))
    if isinstance(qual, QOr):
        return fm.disj(_holds(qual.left), _holds(qual.right))
    if isinstance(qual, QNot):
        return fm.neg(_holds(qual.qual))
    if isinstance(qual, QPath):
        return _reaches(qual.path, fm.TRUE)
    if isinstance(qual, QAttrPath):
        return _reaches(qual.path, fm.attr(qual.name))
    if isinstance(qual, QAttr):
        return fm.attr(qual.name)
    if isinstance(qual, (QPos, QCount)):
        raise UnsupportedSugar("position() and count() must be rewritten "
                               "before compilation")
    raise ParseError(f"bad qualifier {qual!r}")


def _reaches(path, target):
    """Formula holding at nodes from which the path reaches a target."""
    if isinstance(path, Compose):
        return _reaches(path.left, _reaches(path.right, target))
    if isinstance(path, Qualified):
        return _reaches(path.path, fm.conj(_holds(path.qual), target))
    if isinstance(path, Step):
        return _axis_exists(path.axis,
                            fm.conj(_test_formula(path.test), target))
    if isinstance(path, Union):
        return fm.disj(_reaches(path.left, target),
                       _reaches(path.right, target))
    if isinstance(path, Intersection):
        raise UnsupportedSugar(
            "intersect cannot be tested for existence")
    if isinstance(path, Absolute):
        return _axis_exists("ancestor-or-self",
                            fm.conj(_ROOTF, _reaches(path.path, target)))
    if isinstance(path, AttrTail):
        inner = fm.conj(fm.attr(path.name), target)
        return inner if path.path is None else _reaches(path.path, inner)
    raise ParseError(f"bad path {path!r}")


def compile_select(query, ctx):
    """Nodes selected by the query from context nodes satisfying ctx."""
    return _selected(desugar(query), ctx)


def compile_exists(query, base):
    """Nodes satisfying base from which the query selects something."""
    return fm.conj(base, _reaches(desugar(query), fm.TRUE))
