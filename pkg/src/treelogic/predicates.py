"""Problem files: predicate definitions, built-ins, and macro expansion.

A problem file is a sequence of predicate definitions separated by
semicolons, followed by one goal formula.  Definitions are non-recursive
macros; built-in predicates connect formulas to schemas (membership,
compatibility, name sets) and to queries (selection, existence, axis
tests).  Expansion rewrites every call away, leaving a plain formula for
the solver; schemas referenced by file name are parsed once and cached.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import dtd
from . import formulas as fm
from . import schema as sc
from . import xpath as xp
from .errors import (ArityError, ParseError, PredicateError, RootNotFound,
                     UnknownPredicate, UnknownRoot, UnknownSchemaFile)

RESERVED_PROPS = ("_all", "_old_complement")

_AXES = ("ancestor", "descendant", "following", "preceding",
         "ancestor-or-self", "descendant-or-self")

_ARITIES = {
    "select": (1, 2), "exists": (1, 2), "type": (2, 4),
    "forward_incompatible": (2, 3), "backward_incompatible": (2, 3),
    "element": (1,), "attribute": (1,),
    "added_element": (2,), "added_attribute": (2,),
    "exclude": (1,), "non_empty": (2,),
    "new_element_names": (3, 4),
    "new_regions": (3, 4), "new_region": (3, 4),
    "new_contents": (3, 4), "new_content": (3, 4),
}
for _a in _AXES:
    _ARITIES[_a] = (1,)


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple
    body: fm.Formula


@dataclass(frozen=True)
class ProblemSpec:
    defs: tuple
    goal: fm.Formula


# ---------------------------------------------------------------------------
# Parsing.

def _split_defs(tokens):
    """Split the token list into ';'-separated segments (eof dropped)."""
    segments, current = [], []
    for tok in tokens:
        if tok[0] == "eof":
            break
        if tok[0] == "op" and tok[1] == ";":
            segments.append((current, tok))
            current = []
        else:
            current.append(tok)
    segments.append((current, None))
    return segments


def _parse_segment(toks):
    eof = ("eof", "", 0, 0)
    parser = fm.FormulaParser(list(toks) + [eof])
    out = parser.formula()
    parser.expect("eof")
    return out


def _parse_definition(toks, sep):
    line, col = (sep[2], sep[3]) if sep else (0, 0)
    if len(toks) < 4 or toks[0][0] != "name" \
            or toks[1][:2] != ("op", "("):
        raise ParseError("expected a predicate definition before ';'",
                         line, col)
    name = toks[0][1]
    pos = 2
    params = []
    while toks[pos][:2] != ("op", ")"):
        t = toks[pos]
        if t[0] != "name":
            raise ParseError(f"bad parameter {t[1]!r} in definition of "
                             f"{name}", t[2], t[3])
        if t[1] in params:
            raise ParseError(f"duplicate parameter {t[1]} in definition "
                             f"of {name}", t[2], t[3])
        params.append(t[1])
        pos += 1
        if toks[pos][:2] == ("op", ","):
            pos += 1
        elif toks[pos][:2] != ("op", ")"):
            raise ParseError(f"malformed parameter list of {name}",
                             toks[pos][2], toks[pos][3])
    pos += 1
    if pos >= len(toks) or toks[pos][:2] != ("op", "="):
        raise ParseError(f"expected '=' in definition of {name}",
                         toks[0][2], toks[0][3])
    body = _parse_segment(toks[pos + 1:])
    return Definition(name, tuple(params), body)


def _walk(f):
    yield f
    for sub in f.subs:
        yield from _walk(sub)
    if f.bindings:
        for _, bound in f.bindings:
            yield from _walk(bound)
    if f.kind == fm.CALL:
        for arg in fm.call_args(f):
            if not isinstance(arg, str):
                yield from _walk(arg)


def _check_calls(formula, customs):
    for g in _walk(formula):
        if g.kind == fm.PROP and g.name in RESERVED_PROPS:
            raise PredicateError(
                f"proposition {g.name} is reserved for schema tagging")
        if g.kind != fm.CALL:
            continue
        n_args = len(fm.call_args(g))
        if g.name in customs:
            expected = customs[g.name]
            if n_args != expected:
                raise ArityError(g.name, n_args, expected)
        elif g.name in _ARITIES:
            allowed = _ARITIES[g.name]
            if n_args not in allowed:
                raise ArityError(g.name, n_args,
                                 " or ".join(str(a) for a in allowed))
        else:
            raise UnknownPredicate(g.name)


def _check_acyclic(defs):
    graph = {d.name: set() for d in defs}
    by_name = {d.name: d for d in defs}
    for d in defs:
        for g in _walk(d.body):
            if g.kind == fm.CALL and g.name in graph:
                graph[d.name].add(g.name)
    state = {}          # 1 = visiting, 2 = done

    def visit(name):
        if state.get(name) == 1:
            raise ParseError(
                f"predicate {name} is recursive; recursive definitions "
                "must use the let binder instead")
        if state.get(name):
            return
        state[name] = 1
        for nxt in graph[name]:
            visit(nxt)
        state[name] = 2

    for name in by_name:
        visit(name)


def parse_spec(text: str) -> ProblemSpec:
    """Parse a problem file: definitions separated by ';', then a goal."""
    segments = _split_defs(fm.tokenize(text))
    defs = []
    for toks, sep in segments[:-1]:
        d = _parse_definition(toks, sep)
        if d.name in _ARITIES:
            raise ParseError(f"cannot redefine built-in predicate {d.name}")
        if any(d.name == e.name for e in defs):
            raise ParseError(f"predicate {d.name} is defined twice")
        defs.append(d)
    goal_toks = segments[-1][0]
    if not goal_toks:
        raise ParseError("missing goal formula after the last ';'")
    goal = _parse_segment(goal_toks)
    customs = {d.name: len(d.params) for d in defs}
    for d in defs:
        _check_calls(d.body, customs)
    _check_calls(goal, customs)
    _check_acyclic(defs)
    return ProblemSpec(tuple(defs), goal)


# ---------------------------------------------------------------------------
# Environment: schema loading and caching.

class Environment:
    """Shared state of one expansion run."""

    def __init__(self, schema_dir=".", with_attributes=True):
        self.schema_dir = schema_dir
        self.with_attributes = with_attributes
        self.schemas: dict = {}         # (path, root) -> (ttype, binary)
        self.attr_universe: set = set()
        self.new_predicates_used = 0

    def schema(self, fname: str, root: str):
        path = fname if os.path.isabs(fname) \
            else os.path.join(self.schema_dir, fname)
        key = (os.path.abspath(path), root)
        if key in self.schemas:
            return self.schemas[key]
        if not os.path.isfile(path):
            raise UnknownSchemaFile(path)
        if not fname.endswith(".dtd"):
            raise PredicateError(
                f"unsupported schema format: {fname} (only .dtd)")
        try:
            ttype = dtd.parse_dtd(path, root)
        except UnknownRoot:
            raise RootNotFound(root, fname)
        entry = (ttype, sc.binarize(ttype))
        self.schemas[key] = entry
        self.attr_universe |= set(sc.attribute_names(ttype))
        return entry

    def membership(self, fname, root, tag=fm.TRUE, frontier=fm.FALSE):
        _, binary = self.schema(fname, root)
        return sc.compile_type(binary, tag, frontier,
                               with_attributes=self.with_attributes)


# ---------------------------------------------------------------------------
# Expansion.

def axis_formula(axis: str, phi: fm.Formula) -> fm.Formula:
    """Some node in the named axis region satisfies phi."""
    if axis not in _AXES:
        raise PredicateError(f"unknown axis predicate {axis}")
    return xp.axis_exists(axis, phi)


def _type_call(arg):
    """(file, root) when the argument is a 2-string type(...) call."""
    if isinstance(arg, fm.Formula) and arg.kind == fm.CALL \
            and arg.name == "type":
        args = fm.call_args(arg)
        if len(args) == 2 and all(isinstance(a, str) for a in args):
            return args[0], args[1]
    return None


class _Expander:
    def __init__(self, spec: ProblemSpec, env: Environment):
        self.env = env
        self.defs = {d.name: d for d in spec.defs}

    # --- argument helpers

    def _query(self, pred, arg):
        if not isinstance(arg, str):
            raise PredicateError(
                f"{pred} expects a query string as first argument")
        return xp.parse_query(arg)

    def _formula(self, pred, arg, stack):
        if isinstance(arg, str):
            raise PredicateError(
                f"string argument of {pred} used where a formula is needed")
        return self.expand(arg, stack)

    def _element_names(self, pred, arg, stack) -> set:
        tc = _type_call(arg)
        if tc is not None:
            ttype, _ = self.env.schema(*tc)
            return set(sc.element_names(ttype))
        return set(fm.collect_element_names(
            self._formula(pred, arg, stack)))

    def _attribute_names(self, pred, arg, stack) -> set:
        tc = _type_call(arg)
        if tc is not None:
            ttype, _ = self.env.schema(*tc)
            return set(sc.attribute_names(ttype))
        return set(fm.collect_attribute_names(
            self._formula(pred, arg, stack)))

    def _schema_pair(self, pred, args):
        """For the file forms (q, f, f', root): two (file, root) pairs."""
        q, f_old, f_new, root = args
        for a in (f_old, f_new, root):
            if not isinstance(a, str):
                raise PredicateError(
                    f"{pred} file form expects string arguments")
        return q, (f_old, root), (f_new, root)

    def _schema_args(self, pred, args):
        """Normalize (q,T,T') / (q,f,f',root) to two (file, root) pairs."""
        if len(args) == 4:
            return self._schema_pair(pred, args)
        q, t_old, t_new = args
        pair_old, pair_new = _type_call(t_old), _type_call(t_new)
        if pair_old is None or pair_new is None:
            raise PredicateError(
                f"{pred} needs schema references: pass type(file, root) "
                "arguments or use the (query, file, file, root) form")
        return q, pair_old, pair_new

    # --- main walk

    def expand(self, f: fm.Formula, stack=()) -> fm.Formula:
        k = f.kind
        if k == fm.CALL:
            return self._call(f, stack)
        if k == fm.NOT:
            return fm.neg(self.expand(f.subs[0], stack))
        if k == fm.AND:
            return fm.conj(self.expand(f.subs[0], stack),
                           self.expand(f.subs[1], stack))
        if k == fm.OR:
            return fm.disj(self.expand(f.subs[0], stack),
                           self.expand(f.subs[1], stack))
        if k == fm.IMPLIES:
            return fm.implies(self.expand(f.subs[0], stack),
                              self.expand(f.subs[1], stack))
        if k == fm.EQUIV:
            return fm.equiv(self.expand(f.subs[0], stack),
                            self.expand(f.subs[1], stack))
        if k == fm.MOD:
            return fm.modal(f.prog, self.expand(f.subs[0], stack))
        if k == fm.LET:
            bindings = [(n, self.expand(b, stack)) for n, b in f.bindings]
            return fm.let(bindings, self.expand(f.subs[0], stack))
        return f

    def _call(self, f: fm.Formula, stack):
        name = f.name
        args = fm.call_args(f)
        if name in self.defs:
            return self._custom(name, args, stack)
        handler = getattr(self, "_p_" + name.replace("-", "_"), None)
        if name in _AXES:
            if len(args) != 1:
                raise ArityError(name, len(args), 1)
            return axis_formula(name, self._formula(name, args[0], stack))
        if handler is None:
            raise UnknownPredicate(name)
        allowed = _ARITIES[name]
        if len(args) not in allowed:
            raise ArityError(name, len(args),
                             " or ".join(str(a) for a in allowed))
        return handler(args, stack)

    def _custom(self, name, args, stack):
        if name in stack:
            raise PredicateError(f"recursive predicate {name}")
        d = self.defs[name]
        if len(args) != len(d.params):
            raise ArityError(name, len(args), len(d.params))
        # keep raw type(...) references so schema-taking built-ins in
        # the body still see them
        actuals = [a if isinstance(a, str) or _type_call(a) is not None
                   else self.expand(a, stack) for a in args]
        body = fm.rename_binders(d.body)
        sub = dict(zip(d.params, actuals))
        return self.expand(_substitute(body, sub), stack + (name,))

    # --- built-ins

    def _p_select(self, args, stack):
        query = self._query("select", args[0])
        if len(args) == 1:
            context = fm.ctx()
        else:
            context = fm.conj(self._formula("select", args[1], stack),
                              fm.ctx())
        return xp.compile_select(query, context)

    def _p_exists(self, args, stack):
        query = self._query("exists", args[0])
        base = fm.TRUE if len(args) == 1 \
            else self._formula("exists", args[1], stack)
        return xp.compile_exists(query, base)

    def _p_type(self, args, stack):
        fname, root = args[0], args[1]
        if not isinstance(fname, str) or not isinstance(root, str):
            raise PredicateError(
                "type expects a schema file name and a root element name")
        if len(args) == 2:
            return self.env.membership(fname, root)
        tag = self._formula("type", args[2], stack)
        frontier = self._formula("type", args[3], stack)
        return self.env.membership(fname, root, tag, frontier)

    def _incompatible(self, pred, args, stack, backward):
        if len(args) == 3:
            fname_old, fname_new, root = args
            for a in args:
                if not isinstance(a, str):
                    raise PredicateError(
                        f"{pred} file form expects string arguments")
            old = self.env.membership(fname_old, root)
            new = self.env.membership(fname_new, root)
        else:
            old = self._formula(pred, args[0], stack)
            new = self._formula(pred, args[1], stack)
        if backward:
            return fm.conj(new, fm.neg(old))
        return fm.conj(old, fm.neg(new))

    def _p_backward_incompatible(self, args, stack):
        return self._incompatible("backward_incompatible", args, stack,
                                  backward=True)

    def _p_forward_incompatible(self, args, stack):
        return self._incompatible("forward_incompatible", args, stack,
                                  backward=False)

    def _p_element(self, args, stack):
        names = self._element_names("element", args[0], stack)
        return fm.disj_all([fm.name(n) for n in sorted(names)])

    def _p_attribute(self, args, stack):
        names = self._attribute_names("attribute", args[0], stack)
        return fm.disj_all([fm.attr(n) for n in sorted(names)])

    def _p_added_element(self, args, stack):
        old = self._element_names("added_element", args[0], stack)
        new = self._element_names("added_element", args[1], stack)
        return fm.disj_all([fm.name(n) for n in sorted(new - old)])

    def _p_added_attribute(self, args, stack):
        old = self._attribute_names("added_attribute", args[0], stack)
        new = self._attribute_names("added_attribute", args[1], stack)
        return fm.disj_all([fm.attr(n) for n in sorted(new - old)])

    def _p_exclude(self, args, stack):
        phi = self._formula("exclude", args[0], stack)
        return fm.neg(axis_formula(
            "ancestor-or-self", axis_formula("descendant-or-self", phi)))

    def _p_non_empty(self, args, stack):
        query = self._query("non_empty", args[0])
        membership = self._formula("non_empty", args[1], stack)
        return xp.compile_select(query, fm.conj(membership, fm.ctx()))

    def _p_new_element_names(self, args, stack):
        query, pair_old, pair_new = self._schema_args(
            "new_element_names", args)
        q = self._query("new_element_names", query)
        old_names = set(sc.element_names(self.env.schema(*pair_old)[0]))
        not_old = fm.neg(fm.disj_all(
            [fm.name(n) for n in sorted(old_names)]))
        selected = xp.compile_select(
            q, fm.conj(self.env.membership(*pair_new), fm.ctx()))
        return fm.conj(not_old, selected)

    def _new_kind(self, pred, args, contents):
        self.env.new_predicates_used += 1
        if self.env.new_predicates_used > 1:
            raise PredicateError(
                "only one new_regions/new_contents predicate may appear "
                "in a problem: both would share the _old_complement tag")
        query, pair_old, pair_new = self._schema_args(pred, args)
        q = self._query(pred, query)
        oc = fm.prop("_old_complement")
        tagged_new = self.env.membership(*pair_new, tag=fm.prop("_all"))
        escaped_old = self.env.membership(*pair_old, frontier=fm.neg(oc))
        context = fm.conj(tagged_new, fm.neg(escaped_old))
        selected = xp.compile_select(q, fm.conj(context, fm.ctx()))
        old_names = set(sc.element_names(self.env.schema(*pair_old)[0]))
        new_names = set(sc.element_names(self.env.schema(*pair_new)[0]))
        added = fm.disj_all(
            [fm.name(n) for n in sorted(new_names - old_names)])
        parts = [selected, fm.neg(added)]
        if contents:
            parts.append(fm.neg(axis_formula("ancestor", added)))
            parts.append(axis_formula("descendant", oc))
        else:
            parts.append(axis_formula("ancestor", oc))
            parts.append(fm.neg(axis_formula("descendant", oc)))
        parts.append(fm.neg(axis_formula("following", oc)))
        parts.append(fm.neg(axis_formula("preceding", oc)))
        return fm.conj_all(parts)

    def _p_new_regions(self, args, stack):
        del stack
        return self._new_kind("new_regions", args, contents=False)

    _p_new_region = _p_new_regions

    def _p_new_contents(self, args, stack):
        del stack
        return self._new_kind("new_contents", args, contents=True)

    _p_new_content = _p_new_contents


def _substitute(f: fm.Formula, sub: dict) -> fm.Formula:
    """Replace parameter name atoms by their actual arguments."""
    k = f.kind
    if k == fm.NAME:
        val = sub.get(f.name)
        if val is None:
            return f
        if isinstance(val, str):
            raise PredicateError(
                f"string argument for {f.name} used where a formula "
                "is needed")
        return val
    if k == fm.CALL:
        out = []
        for arg in fm.call_args(f):
            if isinstance(arg, str):
                out.append(arg)
            elif arg.kind == fm.NAME and arg.name in sub:
                out.append(sub[arg.name])
            else:
                out.append(_substitute(arg, sub))
        return fm.call(f.name, out)
    if k == fm.LET:
        bindings = [(n, _substitute(b, sub)) for n, b in f.bindings]
        return fm.let(bindings, _substitute(f.subs[0], sub))
    if f.subs:
        rebuilt = [_substitute(s, sub) for s in f.subs]
        if k == fm.NOT:
            return fm.neg(rebuilt[0])
        if k == fm.AND:
            return fm.conj(*rebuilt)
        if k == fm.OR:
            return fm.disj(*rebuilt)
        if k == fm.IMPLIES:
            return fm.implies(*rebuilt)
        if k == fm.EQUIV:
            return fm.equiv(*rebuilt)
        if k == fm.MOD:
            return fm.modal(f.prog, rebuilt[0])
    return f


def _strip_attributes(f: fm.Formula) -> fm.Formula:
    """Attribute tests become trivially true when attributes are ignored."""
    k = f.kind
    if k in (fm.ATTR, fm.ABSENT):
        return fm.TRUE
    if k == fm.LET:
        bindings = [(n, _strip_attributes(b)) for n, b in f.bindings]
        return fm.let(bindings, _strip_attributes(f.subs[0]))
    if k == fm.NOT:
        return fm.neg(_strip_attributes(f.subs[0]))
    if k == fm.AND:
        return fm.conj(_strip_attributes(f.subs[0]),
                       _strip_attributes(f.subs[1]))
    if k == fm.OR:
        return fm.disj(_strip_attributes(f.subs[0]),
                       _strip_attributes(f.subs[1]))
    if k == fm.IMPLIES:
        return fm.implies(_strip_attributes(f.subs[0]),
                          _strip_attributes(f.subs[1]))
    if k == fm.EQUIV:
        return fm.equiv(_strip_attributes(f.subs[0]),
                        _strip_attributes(f.subs[1]))
    if k == fm.MOD:
        return fm.modal(f.prog, _strip_attributes(f.subs[0]))
    return f


def expand(spec: ProblemSpec, env: Environment) -> fm.Formula:
    """Rewrite every predicate call away; result is a plain formula."""
    out = _Expander(spec, env).expand(spec.goal)
    if not env.with_attributes:
        out = _strip_attributes(out)
    return out
