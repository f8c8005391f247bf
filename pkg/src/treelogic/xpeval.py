"""Reference query evaluation by direct navigation.

Runs queries over documents the obvious way: walk the axes, filter by
node test, apply qualifiers with real position()/last()/count()
semantics.  This is the independent oracle the compiled formulas are
measured against, so it shares no code with the compiler and evaluates
the raw query without any sugar rewriting.
"""

from __future__ import annotations

from . import xpath as xp
from .trees import Document


class _Nav:
    """Parent links and document-order ranks for one document."""

    def __init__(self, document: Document):
        self.root = document.root
        self.nodes: list = []
        self._rank: dict = {}
        self._parent: dict = {}
        self._walk(document.root, None)

    def _walk(self, node, parent):
        self._rank[id(node)] = len(self.nodes)
        self.nodes.append(node)
        self._parent[id(node)] = parent
        for child in node.children:
            self._walk(child, node)

    def rank(self, node) -> int:
        return self._rank[id(node)]

    def parent(self, node):
        return self._parent[id(node)]

    def in_order(self, nodes):
        seen = set()
        out = []
        for n in sorted(nodes, key=self.rank):
            if id(n) not in seen:
                seen.add(id(n))
                out.append(n)
        return out

    def _descendants(self, node, out):
        for child in node.children:
            out.append(child)
            self._descendants(child, out)

    def axis(self, node, axis: str) -> list:
        """Nodes along the axis, in axis order (reverse axes run nearest
        first)."""
        if axis == "self":
            return [node]
        if axis == "child":
            return list(node.children)
        if axis == "parent":
            p = self.parent(node)
            return [] if p is None else [p]
        if axis == "descendant":
            out = []
            self._descendants(node, out)
            return out
        if axis == "descendant-or-self":
            out = [node]
            self._descendants(node, out)
            return out
        if axis == "ancestor":
            out = []
            p = self.parent(node)
            while p is not None:
                out.append(p)
                p = self.parent(p)
            return out
        if axis == "ancestor-or-self":
            return [node] + self.axis(node, "ancestor")
        if axis == "following-sibling":
            p = self.parent(node)
            if p is None:
                return []
            i = next(i for i, c in enumerate(p.children) if c is node)
            return p.children[i + 1:]
        if axis == "preceding-sibling":
            p = self.parent(node)
            if p is None:
                return []
            i = next(i for i, c in enumerate(p.children) if c is node)
            return p.children[i - 1::-1] if i else []
        if axis == "following":
            mine = {id(n) for n in self.axis(node, "descendant-or-self")}
            here = self.rank(node)
            return [n for n in self.nodes
                    if self.rank(n) > here and id(n) not in mine]
        if axis == "preceding":
            skip = {id(n) for n in self.axis(node, "ancestor-or-self")}
            here = self.rank(node)
            if here == 0:
                return []
            return [n for n in self.nodes[here - 1::-1]
                    if id(n) not in skip]
        raise ValueError(f"unknown axis {axis}")


def _test_ok(test, node) -> bool:
    return test is xp.STAR or node.name == test.name


def _unwrap(path):
    quals = []
    while isinstance(path, xp.Qualified):
        quals.append(path.qual)
        path = path.path
    quals.reverse()
    return path, quals


def _eval_path(nav: _Nav, path, node) -> list:
    base, quals = _unwrap(path)
    if isinstance(base, xp.Step):
        out = [n for n in nav.axis(node, base.axis)
               if _test_ok(base.test, n)]
        for qual in quals:
            size = len(out)
            out = [n for i, n in enumerate(out)
                   if _holds(nav, qual, n, i + 1, size)]
        return nav.in_order(out)
    if isinstance(base, xp.Compose):
        found = []
        for mid in _eval_path(nav, base.left, node):
            found.extend(_eval_path(nav, base.right, mid))
        out = nav.in_order(found)
    elif isinstance(base, xp.Absolute):
        out = nav.in_order(_eval_path(nav, base.path, nav.root))
    else:
        raise ValueError(f"bad path {base!r}")
    for qual in quals:
        size = len(out)
        out = [n for i, n in enumerate(out)
               if _holds(nav, qual, n, i + 1, size)]
    return out


def _holds(nav: _Nav, qual, node, pos: int, size: int) -> bool:
    if isinstance(qual, xp.QAnd):
        return _holds(nav, qual.left, node, pos, size) and \
            _holds(nav, qual.right, node, pos, size)
    if isinstance(qual, xp.QOr):
        return _holds(nav, qual.left, node, pos, size) or \
            _holds(nav, qual.right, node, pos, size)
    if isinstance(qual, xp.QNot):
        return not _holds(nav, qual.qual, node, pos, size)
    if isinstance(qual, xp.QPath):
        return bool(_eval_path(nav, qual.path, node))
    if isinstance(qual, xp.QAttrPath):
        return any(qual.name in n.attrs
                   for n in _eval_path(nav, qual.path, node))
    if isinstance(qual, xp.QAttr):
        return qual.name in node.attrs
    if isinstance(qual, xp.QPos):
        return pos == size if qual.value is xp.LAST else pos == qual.value
    if isinstance(qual, xp.QCount):
        count = len(_eval_path(nav, qual.path, node))
        return count == qual.value if qual.op == "=" else count > qual.value
    raise ValueError(f"bad qualifier {qual!r}")


def _eval_query(nav: _Nav, query, node) -> list:
    if isinstance(query, xp.Union):
        return nav.in_order(_eval_query(nav, query.left, node) +
                            _eval_query(nav, query.right, node))
    if isinstance(query, xp.Intersection):
        left = {id(n) for n in _eval_query(nav, query.left, node)}
        return [n for n in _eval_query(nav, query.right, node)
                if id(n) in left]
    if isinstance(query, xp.AttrTail):
        # owners of the attribute; existence coincides with the attribute
        if query.path is None:
            return [node] if query.name in node.attrs else []
        return [n for n in _eval_path(nav, query.path, node)
                if query.name in n.attrs]
    return _eval_path(nav, query, node)


def eval_select(query, document: Document, context_nodes) -> list:
    """Nodes selected from any of the given context nodes, in document
    order."""
    nav = _Nav(document)
    found = []
    for node in context_nodes:
        found.extend(_eval_query(nav, query, node))
    return nav.in_order(found)


def eval_exists(query, document: Document, node) -> bool:
    """Does the query select anything from this context node?"""
    return bool(_eval_query(_Nav(document), query, node))
