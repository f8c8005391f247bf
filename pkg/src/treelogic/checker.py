"""Model checking: does a formula hold at a node of a concrete binary tree?

This is the referee for the satisfiability solver: every witness the
solver produces is re-checked here, and the two implementations share no
evaluation machinery.  The checker works on raw formulas, negation normal
form not required, with classical negation.
"""

from __future__ import annotations

import sys

from . import formulas as fm
from .errors import TreelogicError, UnexpandedPredicate, UnresolvedPlaceholder
from .trees import CONTEXT_PROP

_IN_PROGRESS = object()


class ModelChecker:
    """Memoized evaluator over one tree.  Reuse it across nodes of the same
    tree; the memo is keyed by (formula, node)."""

    def __init__(self, formula):
        self.bindings = fm.collect_bindings(formula)
        self.memo: dict = {}
        # evaluation recurses through the formula closure and the tree
        limit = 50000
        if sys.getrecursionlimit() < limit:
            sys.setrecursionlimit(limit)

    def holds(self, f, node) -> bool:
        k = f.kind
        if k == fm.TRUE_K:
            return True
        if k == fm.FALSE_K:
            return False
        if k == fm.NAME:
            return node.name == f.name
        if k == fm.PROP:
            return f.name in node.props
        if k == fm.CTX:
            return CONTEXT_PROP in node.props
        if k == fm.ATTR:
            return f.name in node.attrs
        if k == fm.ABSENT:
            raise UnresolvedPlaceholder(
                "placeholder not resolved against an attribute universe")
        if k == fm.CALL:
            raise UnexpandedPredicate(f"predicate {f.name} was not expanded")
        key = (f.uid, id(node))
        hit = self.memo.get(key)
        if hit is _IN_PROGRESS:
            raise TreelogicError("formula is not cycle-free")
        if hit is not None:
            return hit
        self.memo[key] = _IN_PROGRESS
        if k == fm.NOT:
            out = not self.holds(f.subs[0], node)
        elif k == fm.AND:
            out = self.holds(f.subs[0], node) and self.holds(f.subs[1], node)
        elif k == fm.OR:
            out = self.holds(f.subs[0], node) or self.holds(f.subs[1], node)
        elif k == fm.IMPLIES:
            out = (not self.holds(f.subs[0], node)) \
                or self.holds(f.subs[1], node)
        elif k == fm.EQUIV:
            out = self.holds(f.subs[0], node) == self.holds(f.subs[1], node)
        elif k == fm.MOD:
            succ = node.succ(f.prog)
            out = succ is not None and self.holds(f.subs[0], succ)
        elif k == fm.VAR:
            body = self.bindings.get(f.name)
            if body is None:
                raise TreelogicError(f"unbound variable ${f.name}")
            out = self.holds(body, node)
        elif k == fm.LET:
            out = self.holds(f.subs[0], node)
        else:
            raise TreelogicError(f"cannot evaluate a {k} node")
        self.memo[key] = out
        return out


def holds_at(formula, node) -> bool:
    return ModelChecker(formula).holds(formula, node)


def check_model(formula, tree, node) -> bool:
    """Does the formula hold at the given node of the tree?

    The tree argument fixes the evaluation structure; the node must belong
    to it.
    """
    del tree  # navigation runs over the node's own links
    return ModelChecker(formula).holds(formula, node)


def find_satisfying(formula, tree):
    """First node in document order where the formula holds, or None."""
    checker = ModelChecker(formula)
    for node in tree.walk():
        if checker.holds(formula, node):
            return node
    return None
