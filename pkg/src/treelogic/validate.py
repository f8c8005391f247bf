"""Direct document validation against tree types.

Deliberately independent of the logic pipeline: content models are run
as NFAs over child sequences and attribute lists are checked per node,
so this module can cross-check what the compiled formulas claim about
membership.  Reported is the first violation in document order, or None
when the document conforms.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import schema as sc
from .trees import DocNode, Document


@dataclass
class Violation:
    node: DocNode
    message: str

    def __str__(self):
        return self.message


class _Nfa:
    """Content models as shared NFA states.

    States are integers; ``eps[s]`` lists silent successors and
    ``sym[s]`` lists (element definition, successor) pairs.  One accept
    state is shared by all models.
    """

    def __init__(self):
        self.eps: list = []
        self.sym: list = []
        self.accept = self._fresh()
        self.content_start: dict = {}
        self._var_memo: dict = {}
        self._env_stack: list = []

    def _fresh(self) -> int:
        self.eps.append([])
        self.sym.append([])
        return len(self.eps) - 1

    def _lookup(self, name: str):
        for frame in reversed(self._env_stack):
            if name in frame:
                return frame[name]
        raise sc.ParseError(f"unbound type variable {name}")

    def build(self, expr, k: int) -> int:
        if expr is sc.EMPTY_SEQ or expr is sc.EMPTY_TREE:
            return k
        if expr is sc.EMPTY_SET:
            return self._fresh()               # no way out: empty language
        if isinstance(expr, sc.Or):
            s = self._fresh()
            self.eps[s].append(self.build(expr.left, k))
            self.eps[s].append(self.build(expr.right, k))
            return s
        if isinstance(expr, sc.Concat):
            return self.build(expr.left, self.build(expr.right, k))
        if isinstance(expr, sc.Element):
            # build the content model now, while its binders are in scope
            if id(expr) not in self.content_start:
                inner = self._fresh()
                self.content_start[id(expr)] = inner
                self.eps[inner].append(self.build(expr.content, self.accept))
            s = self._fresh()
            self.sym[s].append((expr, k))
            return s
        if isinstance(expr, sc.Var):
            bound, frame_id = self._lookup(expr.name)
            key = (expr.name, frame_id, k)
            state = self._var_memo.get(key)
            if state is None:
                state = self._fresh()
                self._var_memo[key] = state   # registered first: recursion
                self.eps[state].append(self.build(bound, k))
            return state
        if isinstance(expr, sc.Bind):
            frame = {name: (value, id(expr))
                     for name, value in expr.bindings}
            self._env_stack.append(frame)
            try:
                return self.build(expr.body, k)
            finally:
                self._env_stack.pop()
        raise sc.ParseError(f"cannot validate against {type(expr).__name__}")

    def closure(self, states) -> frozenset:
        seen = set(states)
        todo = list(states)
        while todo:
            for nxt in self.eps[todo.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return frozenset(seen)


def _attr_violation(node: DocNode, attrs) -> str | None:
    """None when the node's attribute set fits one allowed alternative."""
    present = set(node.attrs)
    best = None
    for alt in _alternatives(attrs):
        if alt is None:                        # the empty list ()
            if not present:
                return None
            problem = f'attribute "{sorted(present)[0]}" is not declared ' \
                      f'for element "{node.name}"'
        else:
            problem = _match_alt(node, present, alt)
            if problem is None:
                return None
        if best is None:
            best = problem
    if best is None:
        best = f'element "{node.name}" allows no attributes'
    return best


def _alternatives(attrs):
    while True:
        if attrs is None or isinstance(attrs, sc.AEmpty):
            yield None
            return
        if isinstance(attrs, sc.AChoice):
            yield attrs.head
            if attrs.rest is None:
                return
            attrs = attrs.rest
        else:
            yield attrs
            return


def _match_alt(node: DocNode, present: set, alt) -> str | None:
    required, optional, prohibited = set(), set(), set()
    stack = [alt]
    while stack:
        item = stack.pop()
        if isinstance(item, sc.CommutativeConcat):
            stack.append(item.left)
            stack.append(item.right)
        elif isinstance(item, sc.Required):
            required.add(item.name)
        elif isinstance(item, sc.Optional):
            optional.add(item.name)
        elif isinstance(item, sc.Prohibited):
            prohibited.add(item.name)
    for name in sorted(required - present):
        return f'required attribute "{name}" is missing ' \
               f'on element "{node.name}"'
    for name in sorted(present & prohibited):
        return f'attribute "{name}" is not allowed on element "{node.name}"'
    for name in sorted(present - required - optional):
        return f'attribute "{name}" is not declared for element ' \
               f'"{node.name}"'
    return None


class _Validator:
    def __init__(self, ttype, check_attributes=True):
        self.nfa = _Nfa()
        self.start = self.nfa.build(ttype, self.nfa.accept)
        self.memo: dict = {}
        self.check_attributes = check_attributes

    def check_root(self, root: DocNode) -> Violation | None:
        return self._run([root], self.start, None)

    def _run(self, children, start, parent) -> Violation | None:
        nfa = self.nfa
        frontier = nfa.closure([start])
        for child in children:
            named = [(edef, tgt)
                     for s in frontier for edef, tgt in nfa.sym[s]
                     if edef.name == child.name]
            if not named:
                where = f'"{parent.name}"' if parent else "the root"
                return Violation(
                    child,
                    f'element "{child.name}" is not declared in {where} '
                    f"list of possible children")
            targets = []
            first_deep = None
            for edef, tgt in named:
                deep = self._element(child, edef)
                if deep is None:
                    targets.append(tgt)
                elif first_deep is None:
                    first_deep = deep
            if not targets:
                return first_deep
            frontier = nfa.closure(targets)
        if nfa.accept not in frontier:
            label = parent.name if parent else children[0].name
            node = parent if parent else children[0]
            return Violation(
                node, f'element "{label}" is missing required children')
        return None

    def _element(self, node: DocNode, edef) -> Violation | None:
        key = (id(node), id(edef))
        if key in self.memo:
            return self.memo[key]
        problem = _attr_violation(node, edef.attrs) \
            if self.check_attributes else None
        result = Violation(node, problem) if problem else None
        if result is None:
            start = self.nfa.content_start[id(edef)]
            result = self._run(node.children, start, node)
        self.memo[key] = result
        return result


def validate(document: Document, ttype,
             check_attributes: bool = True) -> Violation | None:
    """First violation of the type in document order, or None if valid.

    With check_attributes False only the element structure is checked,
    matching a structure-only satisfiability run.
    """
    return _Validator(ttype, check_attributes).check_root(document.root)
