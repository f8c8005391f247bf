"""Logic formulas over finite binary trees with attributes.

A tree node carries exactly one element name, a set of propositions (names
starting with ``_``, plus the reserved context mark ``#``), and a set of
attribute names.  Modalities range over four programs: 1 (first child),
2 (next sibling), and their converses -1 and -2.  Recursion is written
``let $X = ... in ...`` and must be cycle-free: no variable may reach
itself without crossing a modality, nor through both a program and its
converse.  For cycle-free formulas least and greatest fixpoints coincide,
which is what the solver and the model checker rely on.

Concrete syntax::

    T  F  name  _prop  #  $X  <1>f  <2>f  <-1>f  <-2>f  <attr>T
    ~f  f & g  f | g  f => g  f <=> g  let $X = f, $Y = g in h

Formulas are hash-consed: structurally equal formulas are the same object,
so sets of formulas behave like sets of small integers.
"""

from __future__ import annotations

import itertools
import threading

from .errors import CycleError, ParseError

PROGRAMS = (1, 2, -1, -2)


def converse(program: int) -> int:
    return -program


# Node kinds.
TRUE_K = "T"
FALSE_K = "F"
NAME = "name"
PROP = "prop"
CTX = "ctx"
ATTR = "attr"
NOT = "not"
AND = "and"
OR = "or"
IMPLIES = "implies"
EQUIV = "equiv"
MOD = "mod"
VAR = "var"
LET = "let"
CALL = "call"
ABSENT = "absent"   # placeholder: "every universe attribute outside this set is absent"


class Formula:
    """One hash-consed formula node.

    ``subs`` holds child formulas, ``bindings`` the (variable, body) pairs
    of a let, and ``extra`` either the excluded-name set of a placeholder
    or the argument tuple of a predicate call (strings and formulas).
    """

    __slots__ = ("kind", "name", "prog", "subs", "bindings", "extra", "uid")

    def __init__(self, kind, name, prog, subs, bindings, extra, uid):
        self.kind = kind
        self.name = name
        self.prog = prog
        self.subs = subs
        self.bindings = bindings
        self.extra = extra
        self.uid = uid

    def __repr__(self):
        return f"Formula({to_text(self)})"

    def __hash__(self):
        return self.uid

    # Identity equality is correct because of interning.


_lock = threading.Lock()
_interned: dict = {}
_uids = itertools.count(1)
_fresh = itertools.count(1)


def _mk(kind, name=None, prog=None, subs=(), bindings=(), extra=None) -> Formula:
    key = (kind, name, prog,
           tuple(s.uid for s in subs),
           tuple((v, b.uid) for v, b in bindings),
           extra)
    with _lock:
        f = _interned.get(key)
        if f is None:
            f = Formula(kind, name, prog, subs, bindings, extra, next(_uids))
            _interned[key] = f
        return f


def fresh_name(stem: str) -> str:
    """A variable name guaranteed not to collide with parsed ones."""
    with _lock:
        return f"{stem}%{next(_fresh)}"


TRUE = _mk(TRUE_K)
FALSE = _mk(FALSE_K)


def name(n: str) -> Formula:
    return _mk(NAME, name=n)


def prop(n: str) -> Formula:
    return _mk(PROP, name=n)


def ctx() -> Formula:
    return _mk(CTX)


def attr(n: str) -> Formula:
    return _mk(ATTR, name=n)


def neg(f: Formula) -> Formula:
    if f is TRUE:
        return FALSE
    if f is FALSE:
        return TRUE
    if f.kind == NOT:
        return f.subs[0]
    return _mk(NOT, subs=(f,))


def conj(a: Formula, b: Formula) -> Formula:
    if a is TRUE:
        return b
    if b is TRUE:
        return a
    if a is FALSE or b is FALSE:
        return FALSE
    return _mk(AND, subs=(a, b))


def disj(a: Formula, b: Formula) -> Formula:
    if a is FALSE:
        return b
    if b is FALSE:
        return a
    if a is TRUE or b is TRUE:
        return TRUE
    return _mk(OR, subs=(a, b))


def conj_all(items) -> Formula:
    out = TRUE
    for f in reversed(list(items)):
        out = conj(f, out)
    return out


def disj_all(items) -> Formula:
    out = FALSE
    for f in reversed(list(items)):
        out = disj(f, out)
    return out


def implies(a: Formula, b: Formula) -> Formula:
    return _mk(IMPLIES, subs=(a, b))


def equiv(a: Formula, b: Formula) -> Formula:
    return _mk(EQUIV, subs=(a, b))


def modal(program: int, f: Formula) -> Formula:
    if program not in PROGRAMS:
        raise ValueError(f"unknown program {program!r}")
    return _mk(MOD, prog=program, subs=(f,))


def var(v: str) -> Formula:
    return _mk(VAR, name=v)


def let(bindings, body: Formula) -> Formula:
    bindings = tuple(bindings)
    if not bindings:
        return body
    return _mk(LET, subs=(body,), bindings=bindings)


def call(pred: str, args) -> Formula:
    out = []
    for a in args:
        if isinstance(a, str):
            out.append(("s", a))
        else:
            out.append(("f", a.uid, a))
    return _mk(CALL, name=pred, extra=tuple(out))


def call_args(f: Formula):
    """Arguments of a call node as plain strings / formulas."""
    out = []
    for item in f.extra:
        if item[0] == "s":
            out.append(item[1])
        else:
            out.append(item[2])
    return out


def absent_outside(names) -> Formula:
    """Placeholder standing for the negation of every universe attribute not
    in ``names``.  resolve_placeholders replaces it once the universe is
    known."""
    return _mk(ABSENT, extra=frozenset(names))


# ---------------------------------------------------------------------------
# Concrete syntax.

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
_NAME_CONT = _NAME_START | set("0123456789.-_:")


def tokenize(text: str):
    """Token list for formulas and problem files.

    Tokens are (kind, value, line, col).  ``//`` starts a comment outside
    string literals.  ``<...>`` is read as one token and later interpreted
    as a modality or an attribute test; ``<=>`` wins over both.
    """
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg):
        raise ParseError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] == "\n":
                err("unterminated string literal")
            tokens.append(("str", text[i + 1:j], start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if text.startswith("<=>", i):
            tokens.append(("op", "<=>", start_line, start_col))
            i += 3
            col += 3
            continue
        if c == "<":
            j = i + 1
            while j < n and text[j] not in "> \t\n":
                j += 1
            if j >= n or text[j] != ">":
                err("unterminated <...>")
            inner = text[i + 1:j]
            if not inner:
                err("empty <...>")
            tokens.append(("angle", inner, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if text.startswith("=>", i):
            tokens.append(("op", "=>", start_line, start_col))
            i += 2
            col += 2
            continue
        if c in "|&~()=,;":
            tokens.append(("op", c, start_line, start_col))
            i += 1
            col += 1
            continue
        if c == "#":
            tokens.append(("ctx", "#", start_line, start_col))
            i += 1
            col += 1
            continue
        if c == "$":
            j = i + 1
            while j < n and text[j] in _NAME_CONT:
                j += 1
            if j == i + 1:
                err("bad variable name")
            tokens.append(("var", text[i + 1:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c == "_" or c in _NAME_START:
            j = i + 1
            while j < n and text[j] in _NAME_CONT:
                j += 1
            word = text[i:j]
            if word == "T":
                tokens.append(("true", word, start_line, start_col))
            elif word == "F":
                tokens.append(("false", word, start_line, start_col))
            elif word in ("let", "in"):
                tokens.append((word, word, start_line, start_col))
            elif word.startswith("_"):
                tokens.append(("prop", word, start_line, start_col))
            else:
                tokens.append(("name", word, start_line, start_col))
            col += j - i
            i = j
            continue
        err(f"unexpected character {c!r}")
    tokens.append(("eof", "", line, col))
    return tokens


class FormulaParser:
    """Recursive descent over the token list.

    Precedence, loosest first: ``<=>``, ``=>``, ``|``, ``&``, then the
    prefix operators ``~`` and ``<p>``; ``let`` extends as far right as
    possible.  Binder names are made globally unique during parsing, so a
    parsed formula never binds the same internal name twice.
    """

    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0
        # user variable name -> stack of internal names (shadowing)
        self.scopes: dict[str, list[str]] = {}
        self.taken: set[str] = set()

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        if t[0] != "eof":
            self.pos += 1
        return t

    def expect(self, kind, value=None):
        t = self.next()
        if t[0] != kind or (value is not None and t[1] != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {(t[1] or t[0])!r}",
                             t[2], t[3])
        return t

    def at_op(self, value, ahead=0):
        t = self.peek(ahead)
        return t[0] == "op" and t[1] == value

    def formula(self):
        left = self.impl()
        while self.at_op("<=>"):
            self.next()
            left = equiv(left, self.impl())
        return left

    def impl(self):
        left = self.disj()
        if self.at_op("=>"):
            self.next()
            return implies(left, self.impl())
        return left

    def disj(self):
        left = self.conj()
        while self.at_op("|"):
            self.next()
            left = disj(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.at_op("&"):
            self.next()
            left = conj(left, self.unary())
        return left

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] == "~":
            self.next()
            return neg(self.unary())
        if t[0] == "angle":
            self.next()
            inner = t[1]
            if inner in ("1", "2", "-1", "-2"):
                return modal(int(inner), self.unary())
            if inner[0] not in _NAME_START and inner[0] != "_":
                raise ParseError(f"bad modality or attribute {inner!r}",
                                 t[2], t[3])
            sub = self.unary()
            if sub is not TRUE:
                raise ParseError(f"attribute test must be <{inner}>T",
                                 t[2], t[3])
            return attr(inner)
        if t[0] == "let":
            return self.let_formula()
        return self.atom()

    def let_formula(self):
        # All names of the group are in scope in every binding body and in
        # the main body, so locate the body extents before parsing them.
        # An `in` always closes the innermost open `let`, parens or not,
        # which makes the scan a simple counter.
        self.expect("let")
        heads = []
        while True:
            v = self.expect("var")
            self.expect("op", "=")
            start = self.pos
            depth = 0       # parens
            pending = 0     # nested lets not yet closed by their `in`
            while True:
                t = self.toks[self.pos]
                if t[0] == "eof":
                    break
                if t[0] == "op" and t[1] == "(":
                    depth += 1
                elif t[0] == "op" and t[1] == ")":
                    if depth == 0:
                        break
                    depth -= 1
                elif t[0] == "let":
                    pending += 1
                elif t[0] == "in":
                    if pending == 0:
                        break
                    pending -= 1
                elif depth == 0 and pending == 0 and t[0] == "op" \
                        and t[1] in (",", ";"):
                    break
                self.pos += 1
            heads.append((v, start, self.pos))
            if self.at_op(",") and self.peek(1)[0] == "var" \
                    and self.at_op("=", 2):
                self.next()
                continue
            break
        after_last = heads[-1][2]
        internals = [self.bind(v[1]) for v, _, _ in heads]
        bindings = []
        for (v, start, end), internal in zip(heads, internals):
            self.pos = start
            body = self.formula()
            if self.pos != end:
                raise ParseError(f"malformed binding for ${v[1]}", v[2], v[3])
            bindings.append((internal, body))
        self.pos = after_last
        self.expect("in")
        body = self.formula()
        for v, _, _ in heads:
            self.scopes[v[1]].pop()
        return let(bindings, body)

    def bind(self, user: str) -> str:
        stack = self.scopes.setdefault(user, [])
        internal = user if user not in self.taken else fresh_name(user)
        self.taken.add(internal)
        stack.append(internal)
        return internal

    def atom(self):
        t = self.next()
        kind = t[0]
        if kind == "true":
            return TRUE
        if kind == "false":
            return FALSE
        if kind == "ctx":
            return ctx()
        if kind == "prop":
            return prop(t[1])
        if kind == "var":
            stack = self.scopes.get(t[1])
            if not stack:
                raise ParseError(f"unbound variable ${t[1]}", t[2], t[3])
            return var(stack[-1])
        if kind == "name":
            if self.at_op("("):
                return self.call_tail(t[1])
            return name(t[1])
        if kind == "op" and t[1] == "(":
            f = self.formula()
            self.expect("op", ")")
            return f
        raise ParseError(f"unexpected {(t[1] or kind)!r}", t[2], t[3])

    def call_tail(self, pred: str):
        self.expect("op", "(")
        args = []
        if not self.at_op(")"):
            while True:
                if self.peek()[0] == "str":
                    args.append(self.next()[1])
                else:
                    args.append(self.formula())
                if self.at_op(","):
                    self.next()
                    continue
                break
        self.expect("op", ")")
        return call(pred, args)


def parse_formula(text: str) -> Formula:
    p = FormulaParser(tokenize(text))
    f = p.formula()
    p.expect("eof")
    return f


_PREC = {LET: 0, EQUIV: 1, IMPLIES: 2, OR: 3, AND: 4, NOT: 5, MOD: 5}


def to_text(f: Formula) -> str:
    def go(f, parent_prec):
        k = f.kind
        if k == TRUE_K:
            return "T"
        if k == FALSE_K:
            return "F"
        if k in (NAME, PROP):
            return f.name
        if k == CTX:
            return "#"
        if k == VAR:
            return "$" + f.name
        if k == ATTR:
            return f"<{f.name}>T"
        if k == ABSENT:
            return "N[" + ",".join(sorted(f.extra)) + "]"
        if k == CALL:
            parts = []
            for a in call_args(f):
                parts.append(f'"{a}"' if isinstance(a, str) else go(a, 0))
            return f"{f.name}({', '.join(parts)})"
        if k == NOT:
            s = "~" + go(f.subs[0], 5)
        elif k == MOD:
            s = f"<{f.prog}>" + go(f.subs[0], 5)
        elif k == AND:
            s = go(f.subs[0], 4) + " & " + go(f.subs[1], 5)
        elif k == OR:
            s = go(f.subs[0], 3) + " | " + go(f.subs[1], 4)
        elif k == IMPLIES:
            s = go(f.subs[0], 3) + " => " + go(f.subs[1], 2)
        elif k == EQUIV:
            s = go(f.subs[0], 2) + " <=> " + go(f.subs[1], 1)
        elif k == LET:
            bs = ", ".join(f"${v} = " + go(b, 1) for v, b in f.bindings)
            s = f"let {bs} in " + go(f.subs[0], 0)
        else:
            raise AssertionError(k)
        prec = _PREC[k]
        return f"({s})" if prec < parent_prec else s

    return go(f, 0)


# ---------------------------------------------------------------------------
# Negation normal form.


def normalize(f: Formula) -> Formula:
    """Negation normal form with light constant folding.

    Implication and equivalence are eliminated, negation is pushed down to
    element names, propositions, attribute tests, ``#``, placeholders, and
    the structure probes ``~<p>T``.  ``~<p>f`` becomes ``~<p>T | <p>~f``.
    Negated recursion variables become variables of a dualized binding
    (suffix ``~``), so every surviving variable occurrence is positive.
    """
    memo: dict = {}

    def go(f: Formula, positive: bool) -> Formula:
        key = (f.uid, positive)
        out = memo.get(key)
        if out is not None:
            return out
        k = f.kind
        if k == TRUE_K:
            out = TRUE if positive else FALSE
        elif k == FALSE_K:
            out = FALSE if positive else TRUE
        elif k in (NAME, PROP, CTX, ATTR, ABSENT):
            out = f if positive else neg(f)
        elif k == NOT:
            out = go(f.subs[0], not positive)
        elif k == AND:
            a, b = f.subs
            if positive:
                out = conj(go(a, True), go(b, True))
            else:
                out = disj(go(a, False), go(b, False))
        elif k == OR:
            a, b = f.subs
            if positive:
                out = disj(go(a, True), go(b, True))
            else:
                out = conj(go(a, False), go(b, False))
        elif k == IMPLIES:
            a, b = f.subs
            if positive:
                out = disj(go(a, False), go(b, True))
            else:
                out = conj(go(a, True), go(b, False))
        elif k == EQUIV:
            a, b = f.subs
            if positive:
                out = disj(conj(go(a, True), go(b, True)),
                           conj(go(a, False), go(b, False)))
            else:
                out = disj(conj(go(a, True), go(b, False)),
                           conj(go(a, False), go(b, True)))
        elif k == MOD:
            sub = f.subs[0]
            if positive:
                body = go(sub, True)
                out = FALSE if body is FALSE else modal(f.prog, body)
            else:
                body = go(sub, False)
                no_succ = neg(modal(f.prog, TRUE))
                out = no_succ if body is FALSE else disj(no_succ,
                                                         modal(f.prog, body))
        elif k == VAR:
            out = var(f.name) if positive else var(f.name + "~")
        elif k == LET:
            bs = []
            for v, b in f.bindings:
                bs.append((v, go(b, True)))
                bs.append((v + "~", go(b, False)))
            out = _prune_let(tuple(bs), go(f.subs[0], positive))
        else:
            raise ValueError(f"cannot normalize a {k} node; expand predicates first")
        memo[key] = out
        return out

    return go(f, True)


def _prune_let(bindings, body):
    """Drop bindings not reachable from the body."""
    by_name = dict(bindings)
    used: set = set()
    stack = [body]
    seen = set()
    while stack:
        g = stack.pop()
        if g.uid in seen:
            continue
        seen.add(g.uid)
        if g.kind == VAR and g.name in by_name and g.name not in used:
            used.add(g.name)
            stack.append(by_name[g.name])
        stack.extend(g.subs)
        for _, b in g.bindings:
            stack.append(b)
    kept = tuple((v, b) for v, b in bindings if v in used)
    return let(kept, body)


# ---------------------------------------------------------------------------
# Bindings and cycle-freeness.


def collect_bindings(f: Formula) -> dict:
    """All let bindings of the formula, keyed by variable name.

    Binder names must be unique across the formula; the parser and the
    compilers guarantee this.
    """
    out: dict = {}
    stack = [f]
    seen = set()
    while stack:
        g = stack.pop()
        if g.uid in seen:
            continue
        seen.add(g.uid)
        for v, b in g.bindings:
            old = out.get(v)
            if old is not None and old is not b:
                raise ValueError(f"variable ${v} bound twice with different bodies")
            out[v] = b
            stack.append(b)
        stack.extend(g.subs)
        if g.kind == CALL:
            for a in call_args(g):
                if not isinstance(a, str):
                    stack.append(a)
    return out


def check_cycle_free(f: Formula) -> None:
    """Conservative cycle-freeness check; raises CycleError on failure.

    Rejects variables that are reachable from their own binding with no
    modality in between (unguarded recursion), variables under an odd
    number of negations or under an equivalence, and recursion that
    crosses both a program and its converse.  Stricter than the semantic
    property, which is acceptable; everything the compilers emit passes.
    """
    bindings = collect_bindings(f)
    # (source var, target var, programs crossed, guarded)
    edges = []

    def scan(owner, body):
        stack = [(body, frozenset(), False, True)]
        seen = set()
        while stack:
            g, progs, guarded, even = stack.pop()
            key = (g.uid, progs, guarded, even)
            if key in seen:
                continue
            seen.add(key)
            k = g.kind
            if k == VAR:
                if g.name in bindings:
                    if not even:
                        raise CycleError(g.name, reason="occurs under negation")
                    if owner is not None:
                        edges.append((owner, g.name, progs, guarded))
            elif k == NOT:
                stack.append((g.subs[0], progs, guarded, not even))
            elif k == IMPLIES:
                stack.append((g.subs[0], progs, guarded, not even))
                stack.append((g.subs[1], progs, guarded, even))
            elif k == EQUIV:
                for s in g.subs:
                    stack.append((s, progs, guarded, True))
                    stack.append((s, progs, guarded, False))
            elif k == MOD:
                stack.append((g.subs[0], progs | {g.prog}, True, even))
            else:
                # binding bodies are scanned separately; everything else,
                # including let main bodies, continues in the current state
                for s in g.subs:
                    stack.append((s, progs, guarded, even))

    for v, b in bindings.items():
        scan(v, b)
    scan(None, f)

    # Unguarded cycles: depth-first search over unguarded edges only.
    unguarded: dict = {}
    for src, dst, _, guarded in edges:
        if not guarded:
            unguarded.setdefault(src, set()).add(dst)
    color: dict = {}
    for root in bindings:
        if color.get(root, 0) != 0:
            continue
        color[root] = 1
        work = [(root, iter(unguarded.get(root, ())))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                c = color.get(w, 0)
                if c == 1:
                    raise CycleError(w)
                if c == 0:
                    color[w] = 1
                    work.append((w, iter(unguarded.get(w, ()))))
                    advanced = True
                    break
            if not advanced:
                color[v] = 2
                work.pop()

    # Program/converse conflicts: strongly connected components over all
    # edges; a component whose internal edges cross both p and -p recurses
    # through a program and its converse.
    graph: dict = {}
    for src, dst, progs, _ in edges:
        graph.setdefault(src, []).append(dst)
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    comp_of: dict = {}
    tarjan_stack: list = []
    counter = itertools.count()
    comp_counter = itertools.count()
    for root in bindings:
        if root in index:
            continue
        index[root] = low[root] = next(counter)
        tarjan_stack.append(root)
        on_stack.add(root)
        work = [(root, iter(graph.get(root, ())))]
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    tarjan_stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(graph.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                cid = next(comp_counter)
                while True:
                    w = tarjan_stack.pop()
                    on_stack.discard(w)
                    comp_of[w] = cid
                    if w == v:
                        break
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    comp_progs: dict = {}
    comp_member: dict = {}
    for src, dst, progs, _ in edges:
        if src in comp_of and comp_of[src] == comp_of.get(dst):
            cid = comp_of[src]
            comp_progs[cid] = comp_progs.get(cid, frozenset()) | progs
            comp_member.setdefault(cid, src)
    for cid, progs in comp_progs.items():
        for p in (1, 2):
            if p in progs and -p in progs:
                raise CycleError(comp_member[cid], (p, -p))


# ---------------------------------------------------------------------------
# Closure walks and the lean.


def walk_closure(f: Formula, bindings=None):
    """Yield every formula reachable from f, entering each binding body once."""
    if bindings is None:
        bindings = collect_bindings(f)
    seen = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g.uid in seen:
            continue
        seen.add(g.uid)
        yield g
        if g.kind == VAR:
            body = bindings.get(g.name)
            if body is not None:
                stack.append(body)
        stack.extend(g.subs)
        for _, b in g.bindings:
            stack.append(b)
        if g.kind == CALL:
            for a in call_args(g):
                if not isinstance(a, str):
                    stack.append(a)


def collect_element_names(f: Formula) -> list:
    out = {}
    for g in walk_closure(f):
        if g.kind == NAME:
            out[g.name] = True
    return list(out)


def collect_attribute_names(f: Formula) -> list:
    out = {}
    for g in walk_closure(f):
        if g.kind == ATTR:
            out[g.name] = True
        elif g.kind == ABSENT:
            for n in sorted(g.extra):
                out[n] = True
    return list(out)


class Lean:
    """The atoms a node valuation ranges over: element names, propositions,
    the context mark, attribute names, and every modal subformula of the
    formula's closure, including the structure probes ``<p>T``."""

    def __init__(self, f: Formula):
        bindings = collect_bindings(f)
        names: dict = {}
        props: dict = {}
        attrs: dict = {}
        modals: dict = {}
        programs: dict = {}
        has_ctx = False
        for g in walk_closure(f, bindings):
            if g.kind == NAME:
                names[g.name] = True
            elif g.kind == PROP:
                props[g.name] = True
            elif g.kind == CTX:
                has_ctx = True
            elif g.kind == ATTR:
                attrs[g.name] = True
            elif g.kind == ABSENT:
                for n in sorted(g.extra):
                    attrs[n] = True
            elif g.kind == MOD:
                modals[g] = True
                programs[g.prog] = True
        for p in programs:
            modals[modal(p, TRUE)] = True
        self.names = tuple(names)
        self.props = tuple(props)
        self.has_ctx = has_ctx
        self.attrs = tuple(attrs)
        self.modals = tuple(modals)
        self.programs = tuple(programs)
        atoms = [name(n) for n in self.names]
        atoms += [prop(n) for n in self.props]
        if has_ctx:
            atoms.append(ctx())
        atoms += [attr(n) for n in self.attrs]
        atoms += list(self.modals)
        self.atoms = tuple(atoms)

    def __len__(self):
        return len(self.atoms)


# ---------------------------------------------------------------------------
# Rewrites used by the compilers.


def resolve_placeholders(f: Formula, universe) -> Formula:
    """Replace every placeholder by the conjunction of the negated universe
    attributes it excludes."""
    universe = list(dict.fromkeys(universe))
    memo: dict = {}

    def go(g: Formula) -> Formula:
        out = memo.get(g.uid)
        if out is not None:
            return out
        if g.kind == ABSENT:
            keep = [n for n in universe if n not in g.extra]
            out = conj_all(neg(attr(n)) for n in keep)
        elif g.kind == CALL:
            out = call(g.name, [a if isinstance(a, str) else go(a)
                                for a in call_args(g)])
        else:
            subs = tuple(go(s) for s in g.subs)
            bs = tuple((v, go(b)) for v, b in g.bindings)
            out = g if (subs == g.subs and bs == g.bindings) \
                else _mk(g.kind, g.name, g.prog, subs, bs, g.extra)
        memo[g.uid] = out
        return out

    return go(f)


def rename_binders(f: Formula) -> Formula:
    """Copy f with fresh binder names, for capture-free substitution."""
    memo: dict = {}
    renames: dict = {}

    def go(g: Formula) -> Formula:
        out = memo.get(g.uid)
        if out is not None:
            return out
        if g.kind == LET:
            for v, _ in g.bindings:
                renames[v] = fresh_name(v.split("%")[0])
            bs = tuple((renames[v], go(b)) for v, b in g.bindings)
            out = let(bs, go(g.subs[0]))
        elif g.kind == VAR:
            out = var(renames.get(g.name, g.name))
        elif g.kind == CALL:
            out = call(g.name, [a if isinstance(a, str) else go(a)
                                for a in call_args(g)])
        else:
            subs = tuple(go(s) for s in g.subs)
            out = g if subs == g.subs \
                else _mk(g.kind, g.name, g.prog, subs, g.bindings, g.extra)
        memo[g.uid] = out
        return out

    return go(f)


def substitute_names(f: Formula, mapping: dict) -> Formula:
    """Replace element-name atoms by formulas (custom predicate parameters)."""
    memo: dict = {}

    def go(g: Formula) -> Formula:
        out = memo.get(g.uid)
        if out is not None:
            return out
        if g.kind == NAME and g.name in mapping:
            out = mapping[g.name]
        elif g.kind == CALL:
            out = call(g.name, [a if isinstance(a, str) else go(a)
                                for a in call_args(g)])
        else:
            subs = tuple(go(s) for s in g.subs)
            bs = tuple((v, go(b)) for v, b in g.bindings)
            out = g if (subs == g.subs and bs == g.bindings) \
                else _mk(g.kind, g.name, g.prog, subs, bs, g.extra)
        memo[g.uid] = out
        return out

    return go(f)


def contains_kind(f: Formula, kind: str) -> bool:
    return any(g.kind == kind for g in walk_closure(f))
