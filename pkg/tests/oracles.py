"""Brute-force reference machinery for the differential suites.

Nothing here shares evaluation code with the package: satisfiability is
decided by enumerating entire labeled-tree universes with numpy, and the
recursion binder is handled by Kleene iteration over node sets.  These
are the slow-but-obvious second routes the fast implementations are
measured against.
"""

from __future__ import annotations

import functools
import itertools
import random

import numpy as np

from treelogic import formulas as fm
from treelogic.trees import DocNode, Document

# ---------------------------------------------------------------------------
# Binary tree shapes.
#
# A shape with n nodes is a pair of integer arrays (c1, c2) of length n
# indexing each node's successors (-1 when absent), with node 0 the root
# and indices assigned in preorder.


@functools.lru_cache(maxsize=None)
def shapes(n: int):
    """All binary tree shapes with exactly n nodes, as (c1, c2) tuples."""
    if n == 0:
        return (((), ()),)
    out = []
    for left in range(n):
        right = n - 1 - left
        for (lc1, lc2) in shapes(left):
            for (rc1, rc2) in shapes(right):
                # root is 0, left subtree occupies 1..left, right the rest
                c1 = [1 if left else -1]
                c2 = [1 + left if right else -1]
                for v in lc1:
                    c1.append(v + 1 if v >= 0 else -1)
                for v in rc1:
                    c1.append(v + 1 + left if v >= 0 else -1)
                for v in lc2:
                    c2.append(v + 1 if v >= 0 else -1)
                for v in rc2:
                    c2.append(v + 1 + left if v >= 0 else -1)
                # reorder so successors come grouped per node in preorder
                out.append((tuple(c1[:1] + c1[1:1 + left] + c1[1 + left:]),
                            tuple(c2[:1] + c2[1:1 + left] + c2[1 + left:])))
    return tuple(out)


def _parents(c1, c2):
    """Index arrays p1/p2: p1[i] = j when i is the 1-successor of j."""
    n = len(c1)
    p1 = [-1] * n
    p2 = [-1] * n
    for j in range(n):
        if c1[j] >= 0:
            p1[c1[j]] = j
        if c2[j] >= 0:
            p2[c2[j]] = j
    return p1, p2


class Universe:
    """Every labeled binary tree with at most max_nodes nodes.

    Labels: an element name drawn from `names` plus one name outside the
    alphabet (so formulas like ~a & ~b stay satisfiable), an optional
    atomic proposition, an optional attribute.  Evaluation is vectorized
    over all labelings of one shape at a time.
    """

    def __init__(self, max_nodes=4, names=("a", "b"),
                 prop="_p", attr="att"):
        self.names = tuple(names) + ("\x00other",)
        self.prop = prop
        self.attr = attr
        self.blocks = []
        radix = len(self.names) * 2 * 2
        for n in range(1, max_nodes + 1):
            for c1, c2 in shapes(n):
                p1, p2 = _parents(c1, c2)
                count = radix ** n
                codes = np.arange(count)
                name_id = np.empty((n, count), dtype=np.int8)
                has_prop = np.empty((n, count), dtype=bool)
                has_attr = np.empty((n, count), dtype=bool)
                for i in range(n):
                    digit = codes % radix
                    codes = codes // radix
                    name_id[i] = (digit % len(self.names)).astype(np.int8)
                    digit = digit // len(self.names)
                    has_prop[i] = (digit % 2).astype(bool)
                    has_attr[i] = (digit // 2 % 2).astype(bool)
                self.blocks.append({
                    "c1": np.array(c1), "c2": np.array(c2),
                    "p1": np.array(p1), "p2": np.array(p2),
                    "name_id": name_id, "prop": has_prop,
                    "attr": has_attr,
                })

    def _follow(self, idx, vals):
        out = np.zeros_like(vals)
        src = idx >= 0
        out[src] = vals[idx[src]]
        return out

    def _eval(self, f, block, env):
        k = f.kind
        n, count = block["name_id"].shape
        if k == fm.TRUE_K:
            return np.ones((n, count), dtype=bool)
        if k == fm.FALSE_K:
            return np.zeros((n, count), dtype=bool)
        if k == fm.NAME:
            try:
                i = self.names.index(f.name)
            except ValueError:
                return np.zeros((n, count), dtype=bool)
            return block["name_id"] == i
        if k == fm.PROP:
            if f.name != self.prop:
                return np.zeros((n, count), dtype=bool)
            return block["prop"]
        if k == fm.ATTR:
            if f.name != self.attr:
                return np.zeros((n, count), dtype=bool)
            return block["attr"]
        if k == fm.NOT:
            return ~self._eval(f.subs[0], block, env)
        if k == fm.AND:
            return (self._eval(f.subs[0], block, env)
                    & self._eval(f.subs[1], block, env))
        if k == fm.OR:
            return (self._eval(f.subs[0], block, env)
                    | self._eval(f.subs[1], block, env))
        if k == fm.IMPLIES:
            return (~self._eval(f.subs[0], block, env)
                    | self._eval(f.subs[1], block, env))
        if k == fm.EQUIV:
            return (self._eval(f.subs[0], block, env)
                    == self._eval(f.subs[1], block, env))
        if k == fm.MOD:
            vals = self._eval(f.subs[0], block, env)
            key = {1: "c1", 2: "c2", -1: "p1", -2: "p2"}[f.prog]
            return self._follow(block[key], vals)
        if k == fm.VAR:
            return env[f.name]
        if k == fm.LET:
            # least fixpoint by iteration; generated binders only use
            # their variables positively, so this is monotone
            inner = dict(env)
            for name, _ in f.bindings:
                inner[name] = np.zeros((n, count), dtype=bool)
            while True:
                changed = False
                for name, body in f.bindings:
                    new = self._eval(body, block, inner)
                    if not np.array_equal(new, inner[name]):
                        inner[name] = new
                        changed = True
                if not changed:
                    break
            return self._eval(f.subs[0], block, inner)
        raise ValueError(f"oracle cannot evaluate a {k} node")

    def satisfiable(self, f) -> bool:
        """Does f hold at some node of some tree of the universe?"""
        return any(self._eval(f, block, {}).any() for block in self.blocks)


# ---------------------------------------------------------------------------
# Random cycle-free formulas over the universe's alphabet.

_LEAVES = ("T", "F", "name", "name2", "prop", "attr")
_UNARY = ("not", "mod")
_BINARY = ("and", "or", "implies", "equiv")


def random_formula(rng: random.Random, depth: int,
                   names=("a", "b"), prop="_p", attr="att"):
    """One random formula of AST depth <= depth (leaves count as 1)."""
    if depth <= 1:
        pick = rng.choice(_LEAVES)
        if pick == "T":
            return fm.TRUE
        if pick == "F":
            return fm.FALSE
        if pick == "name":
            return fm.name(names[0])
        if pick == "name2":
            return fm.name(names[1])
        if pick == "prop":
            return fm.prop(prop)
        return fm.attr(attr)
    r = rng.random()
    if r < 0.25:
        return random_formula(rng, 1, names, prop, attr)
    if r < 0.40:
        return fm.neg(random_formula(rng, depth - 1, names, prop, attr))
    if r < 0.62:
        return fm.modal(rng.choice(fm.PROGRAMS),
                        random_formula(rng, depth - 1, names, prop, attr))
    if r < 0.92:
        op = {"and": fm.conj, "or": fm.disj,
              "implies": fm.implies, "equiv": fm.equiv}[rng.choice(_BINARY)]
        return op(random_formula(rng, depth - 1, names, prop, attr),
                  random_formula(rng, depth - 1, names, prop, attr))
    # guarded single-variable recursion: X occurs positively, under a
    # modality, so it is cycle-free and its fixpoint is monotone
    v = f"R{rng.randrange(10 ** 6)}"
    base = random_formula(rng, depth - 1, names, prop, attr)
    body = fm.disj(base, fm.modal(rng.choice(fm.PROGRAMS), fm.var(v)))
    return fm.let(((v, body),), fm.var(v))


# ---------------------------------------------------------------------------
# Random documents.


def random_document(rng: random.Random, max_nodes: int,
                    names=("a", "b", "c"), attrs=(), props=()) -> Document:
    budget = [rng.randint(1, max_nodes)]

    def node() -> DocNode:
        budget[0] -= 1
        d = DocNode(rng.choice(names))
        for a in attrs:
            if rng.random() < 0.3:
                d.attrs[a] = ""
        for p in props:
            if rng.random() < 0.2:
                d.props.add(p)
        while budget[0] > 0 and rng.random() < 0.55:
            d.children.append(node())
        return d

    return Document(node())


def enumerate_documents(max_nodes: int, names):
    """Every document with at most max_nodes nodes over the alphabet."""
    names = tuple(names)

    @functools.lru_cache(maxsize=None)
    def forests(budget: int):
        # all forests using at most budget nodes, smallest first
        out = [()]
        if budget == 0:
            return tuple(out)
        for first_size in range(1, budget + 1):
            for first in trees_exact(first_size):
                for rest in forests(budget - first_size):
                    out.append((first,) + rest)
        return tuple(out)

    @functools.lru_cache(maxsize=None)
    def trees_exact(size: int):
        out = []
        for label in names:
            for kids in forests(size - 1):
                if 1 + sum(t[1] for t in kids) == size:
                    out.append((label, size, kids))
        return tuple(out)

    def build(t) -> DocNode:
        label, _, kids = t
        return DocNode(label, children=[build(k) for k in kids])

    for size in range(1, max_nodes + 1):
        for t in trees_exact(size):
            yield Document(build(t))


# ---------------------------------------------------------------------------
# Random queries in the supported fragment.

_GEN_AXES = ("child", "descendant", "self", "parent", "ancestor",
             "following-sibling", "preceding-sibling", "following",
             "preceding", "descendant-or-self", "ancestor-or-self")


def random_query(rng: random.Random, names=("a", "b", "c"),
                 attr="x", depth=3) -> str:
    def test():
        r = rng.random()
        if r < 0.25:
            return "*"
        return rng.choice(names)

    def step(d):
        ax = rng.choice(_GEN_AXES)
        s = f"{ax}::{test()}"
        if d > 0 and rng.random() < 0.45:
            s += f"[{qualifier(d - 1)}]"
        return s

    def rel_path(d):
        parts = [step(d)]
        while rng.random() < 0.4 and len(parts) < 3:
            parts.append(step(d))
        return "/".join(parts)

    def qualifier(d):
        r = rng.random()
        if r < 0.18:
            return f"@{attr}"
        if r < 0.30 and d > 0:
            return f"not({qualifier(d - 1)})"
        if r < 0.42 and d > 0:
            return f"{qualifier(d - 1)} and {qualifier(d - 1)}"
        if r < 0.50 and d > 0:
            return f"{qualifier(d - 1)} or {qualifier(d - 1)}"
        if r < 0.58:
            return f"{rel_path(0)}/@{attr}"
        return rel_path(max(d - 1, 0))

    q = rel_path(depth)
    if rng.random() < 0.3:
        q = "//" + q
    elif rng.random() < 0.15:
        q = "/" + q
    if rng.random() < 0.15:
        q = f"{q} | {rel_path(1)}"
    return q


# ---------------------------------------------------------------------------
# Hand-written grammars for the type-compilation / validator comparison.
#
# Each entry is (grammar text, universe names, universe attributes).
# Universes stay within one or two element names so the full document
# space up to eight nodes stays enumerable; attribute grammars trade the
# second name for per-node attribute assignments instead.

HAND_GRAMMARS = [
    ("a{()}", ("a", "b"), ()),
    ("()", ("a", "b"), ()),
    ("a{()} | ()", ("a", "b"), ()),
    ("a{b{()}}", ("a", "b"), ()),
    ("a{b{()}, b{()}}", ("a", "b"), ()),
    ("a{b{()} | ()}", ("a", "b"), ()),
    ("let x = a{x | ()} in x", ("a", "b"), ()),
    ("let x = a{x} | b{()} in x", ("a", "b"), ()),
    ("let f = a{()}, f | () in f", ("a", "b"), ()),
    ("let x = a{y} ; y = b{()}, y | () in x", ("a", "b"), ()),
    ("let x = a{x, x | ()} in x", ("a", "b"), ()),
    ("let x = a{b{x} | ()} in x", ("a", "b"), ()),
    ("a{let y = b{()}, y | () in y}", ("a", "b"), ()),
    ("let x = a{()} | a{b{()}} in x, x", ("a", "b"), ()),
    ("b{a{()}, a{()} | b{()}}", ("a", "b"), ()),
    ("let x = a{()}, a{()}, x | () in x", ("a", "b"), ()),
    ("let x = (a{()} | b{x}), x | () in b{x}", ("a", "b"), ()),
    ("a[k]{()}", ("a",), ("k",)),
    ("a[k?]{a[~k]{()} | ()}", ("a",), ("k",)),
    ("a[k | ()]{()}", ("a",), ("k",)),
    ("let x = a[k?]{x | ()} in x", ("a",), ("k",)),
    ("let x = a[k]{y | ()} ; y = a[~k]{()}, y in x", ("a",), ("k",)),
]


def attribute_variants(doc: Document, attrs):
    """Every way of sprinkling the given attributes over the document."""
    if not attrs:
        yield doc
        return
    nodes = list(doc.root.walk())
    states = list(itertools.product([False, True], repeat=len(attrs)))
    for choice in itertools.product(states, repeat=len(nodes)):
        copy = _copy_doc(doc.root)
        for node, picked in zip(copy.root.walk(), choice):
            for on, name in zip(picked, attrs):
                if on:
                    node.attrs[name] = ""
        yield copy


def _copy_doc(n: DocNode) -> Document:
    def go(d):
        out = DocNode(d.name, attrs=dict(d.attrs), props=set(d.props))
        out.children = [go(c) for c in d.children]
        return out
    return Document(go(n))


def grammar_disagreements(text: str, names, attrs, max_nodes=8, limit=5):
    """Documents where the compiled formula and the validator disagree."""
    from treelogic import checker, schema, trees, validate

    t = schema.parse_internal(text)
    compiled = fm.resolve_placeholders(
        schema.compile_type(schema.binarize(t), fm.TRUE, fm.FALSE), attrs)
    bad = []
    checked = 0
    for base in enumerate_documents(max_nodes, names):
        for doc in attribute_variants(base, attrs):
            checked += 1
            bt = trees.to_binary(doc)
            by_formula = checker.check_model(compiled, bt, bt.root)
            by_validator = validate.validate(doc, t) is None
            if by_formula != by_validator:
                bad.append(trees.serialize(doc))
                if len(bad) >= limit:
                    return bad, checked
    return bad, checked


# ---------------------------------------------------------------------------
# Query compilation vs. direct evaluation on one document.

def select_disagreements(query_text: str, document: Document, limit=5):
    """(context, node, by_formula, by_eval) tuples where the compiled
    selection formula and the direct evaluator disagree, trying every
    context node; the existence compilation is cross-checked too."""
    from treelogic import checker, trees, xpath, xpeval

    query = xpath.parse_query(query_text)
    selectf = xpath.compile_select(query, fm.ctx())
    existsf = xpath.compile_exists(query, fm.TRUE)
    doc_nodes = list(document.root.walk())
    bad = []
    for ctx in doc_nodes:
        ctx.props.add(trees.CONTEXT_PROP)
        bt = trees.to_binary(document)
        bin_nodes = list(bt.walk())
        picked = {id(n) for n in
                  xpeval.eval_select(query, document, [ctx])}
        mc = checker.ModelChecker(selectf)
        for dn, bn in zip(doc_nodes, bin_nodes):
            by_formula = mc.holds(selectf, bn)
            by_eval = id(dn) in picked
            if by_formula != by_eval:
                bad.append((ctx, dn, by_formula, by_eval))
                if len(bad) >= limit:
                    ctx.props.discard(trees.CONTEXT_PROP)
                    return bad
        ctx_bin = bin_nodes[doc_nodes.index(ctx)]
        by_formula = checker.check_model(existsf, bt, ctx_bin)
        if by_formula != xpeval.eval_exists(query, document, ctx):
            bad.append((ctx, ctx, by_formula, not by_formula))
        ctx.props.discard(trees.CONTEXT_PROP)
    return bad
