"""Documents, binary trees, and the encoding between them.

Unranked document trees are encoded as binary trees the usual way: the
first successor of a node is its first child, the second successor its
next sibling.  A single document becomes a binary tree whose root has no
second successor; a forest of documents becomes one whose root chains its
siblings through second successors.

XML is the concrete syntax for documents.  Text content and processing
instructions are ignored: the logic only sees element names, attribute
names, and propositions.  Propositions are carried as attributes whose
name starts with ``_``; the context mark ``#`` and the target mark are
carried as ``solver:context`` and ``solver:target`` in a dedicated
namespace.
"""

from __future__ import annotations

import re
from xml.etree import ElementTree

from .errors import ForestError, ParseError

SOLVER_NS = "http://wam.inrialpes.fr/xml"
_CONTEXT_KEY = "{%s}context" % SOLVER_NS
_TARGET_KEY = "{%s}target" % SOLVER_NS
CONTEXT_PROP = "#"


class DocNode:
    """One element of a document tree."""

    __slots__ = ("name", "attrs", "props", "children", "marked")

    def __init__(self, name, attrs=None, props=None, children=None,
                 marked=False):
        self.name = name
        self.attrs = dict(attrs) if attrs else {}
        self.props = set(props) if props else set()
        self.children = list(children) if children else []
        self.marked = marked

    def __eq__(self, other):
        return (isinstance(other, DocNode)
                and self.name == other.name
                and self.attrs == other.attrs
                and self.props == other.props
                and self.marked == other.marked
                and self.children == other.children)

    def __hash__(self):
        return hash((self.name, frozenset(self.attrs), frozenset(self.props)))

    def __repr__(self):
        return f"DocNode({self.name!r}, children={len(self.children)})"

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


class Document:
    """A document: a single root element."""

    def __init__(self, root: DocNode):
        self.root = root

    def __eq__(self, other):
        return isinstance(other, Document) and self.root == other.root

    def __repr__(self):
        return f"Document({self.root.name!r})"

    def walk(self):
        return self.root.walk()

    def node_count(self):
        return sum(1 for _ in self.walk())

    def to_xml(self):
        return serialize_documents([self])


class BinNode:
    """One node of a binary tree.  ``pdir`` records which successor of the
    parent this node is, so converse programs are direct lookups."""

    __slots__ = ("name", "attrs", "props", "marked",
                 "c1", "c2", "parent", "pdir")

    def __init__(self, name, attrs=None, props=None, marked=False):
        self.name = name
        self.attrs = dict(attrs) if attrs else {}
        self.props = set(props) if props else set()
        self.marked = marked
        self.c1 = None
        self.c2 = None
        self.parent = None
        self.pdir = 0

    def succ(self, program: int):
        if program == 1:
            return self.c1
        if program == 2:
            return self.c2
        if program == -1:
            return self.parent if self.pdir == 1 else None
        if program == -2:
            return self.parent if self.pdir == 2 else None
        raise ValueError(f"unknown program {program!r}")

    def attach(self, program: int, child: "BinNode"):
        if program == 1:
            self.c1 = child
        elif program == 2:
            self.c2 = child
        else:
            raise ValueError(f"cannot attach along {program!r}")
        if child is not None:
            child.parent = self
            child.pdir = program

    def __repr__(self):
        return f"BinNode({self.name!r})"


class BinaryTree:
    def __init__(self, root: BinNode):
        self.root = root

    def walk(self):
        """Pre-order: node, first successor, second successor.  This is
        document order for the encoded forest."""
        stack = [self.root]
        while stack:
            n = stack.pop()
            if n is None:
                continue
            yield n
            stack.append(n.c2)
            stack.append(n.c1)

    def node_count(self):
        return sum(1 for _ in self.walk())


def to_binary(documents) -> BinaryTree:
    """Encode a document or a list of documents as one binary tree."""
    if isinstance(documents, Document):
        documents = [documents]
    roots = [d.root for d in documents]
    if not roots:
        raise ForestError("cannot encode an empty forest")

    def encode(node: DocNode) -> BinNode:
        b = BinNode(node.name, node.attrs, node.props, node.marked)
        if node.children:
            head = encode_chain(node.children)
            b.attach(1, head)
        return b

    def encode_chain(nodes) -> BinNode:
        head = encode(nodes[0])
        prev = head
        for n in nodes[1:]:
            b = encode(n)
            prev.attach(2, b)
            prev = b
        return head

    return BinaryTree(encode_chain(roots))


def binary_to_documents(tree: BinaryTree) -> list:
    """Decode a binary tree back into the list of documents it encodes.

    A root with a next-sibling link encodes a forest, one document per
    root-level sibling.
    """

    def decode(b: BinNode) -> DocNode:
        children = decode_chain(b.c1) if b.c1 is not None else []
        return DocNode(b.name, b.attrs, b.props, children, b.marked)

    def decode_chain(b: BinNode) -> list:
        out = []
        while b is not None:
            out.append(decode(b))
            b = b.c2
        return out

    if tree.root is None:
        raise ForestError("cannot decode an empty tree")
    return [Document(r) for r in decode_chain(tree.root)]


def from_binary(tree: BinaryTree) -> Document:
    """Decode a binary tree encoding a single document."""
    if tree.root is not None and tree.root.c2 is not None:
        raise ForestError("root has a next-sibling link; this tree encodes "
                          "a forest, not a single document")
    return single_document(binary_to_documents(tree))


def single_document(documents) -> Document:
    if len(documents) != 1:
        raise ForestError(
            f"expected a single document, found a forest of {len(documents)}")
    return documents[0]


# ---------------------------------------------------------------------------
# XML.

_FOREST_WRAPPER = "__forest__"


def _from_element(elem) -> DocNode:
    tag = elem.tag
    if not isinstance(tag, str):
        raise ParseError(f"unsupported node {tag!r}")
    if tag.startswith("{"):
        raise ParseError(f"unsupported namespaced element {tag!r}")
    attrs = {}
    props = set()
    marked = False
    for key, value in elem.attrib.items():
        if key == _CONTEXT_KEY:
            props.add(CONTEXT_PROP)
        elif key == _TARGET_KEY:
            marked = True
        elif key.startswith("{"):
            continue       # foreign namespaces carry no logical content
        elif key.startswith("_"):
            props.add(key)
        else:
            attrs[key] = value
    children = [_from_element(c) for c in elem]
    return DocNode(tag, attrs, props, children, marked)


def parse_documents(text: str) -> list:
    """Parse XML into documents.  Multiple top-level elements are allowed
    and yield a forest."""
    wrapped = f"<{_FOREST_WRAPPER}>{_strip_prolog(text)}</{_FOREST_WRAPPER}>"
    try:
        root = ElementTree.fromstring(wrapped)
    except ElementTree.ParseError as exc:
        raise ParseError(f"bad XML: {exc}") from exc
    docs = [Document(_from_element(c)) for c in root]
    if not docs:
        raise ParseError("no elements found")
    return docs


def parse_document(text: str) -> Document:
    return single_document(parse_documents(text))


_PROLOG_RE = re.compile(r"<\?xml[^?]*\?>|<!DOCTYPE[^>\[]*(\[[^\]]*\])?[^>]*>")


def _strip_prolog(text: str) -> str:
    return _PROLOG_RE.sub("", text)


def _escape(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


class Annotation:
    """Context and target marks to render as solver:* attributes."""

    __slots__ = ("context", "target")

    def __init__(self, context: DocNode | None = None,
                 target: DocNode | None = None):
        self.context = context
        self.target = target


def _collect_marks(documents, ann):
    # identity sets: nodes compare structurally, marks are per occurrence
    ctx, tgt = set(), set()
    for doc in documents:
        for n in doc.root.walk():
            if (n is ann.context) if ann else (CONTEXT_PROP in n.props):
                ctx.add(id(n))
            if (n is ann.target) if ann else n.marked:
                tgt.add(id(n))
    return ctx, tgt


def serialize_documents(documents, ann: Annotation | None = None) -> str:
    """Deterministic XML text: two-space indent, sorted attributes, the
    solver namespace declared on a root only when a mark below needs it."""
    if isinstance(documents, Document):
        documents = [documents]
    ctx, tgt = _collect_marks(documents, ann)
    lines = []
    for doc in documents:
        marked_here = any(id(n) in ctx or id(n) in tgt
                          for n in doc.root.walk())
        _write(doc.root, 0, lines, ctx, tgt, declare_ns=marked_here)
    return "\n".join(lines) + "\n"


def serialize(document, ann: Annotation | None = None) -> str:
    """Serialize one document (or a forest) with optional annotation."""
    return serialize_documents(document, ann)


def _write(node: DocNode, indent: int, lines, ctx, tgt, declare_ns=False):
    parts = [node.name]
    if declare_ns:
        parts.append(f'xmlns:solver="{SOLVER_NS}"')
    if id(node) in ctx:
        parts.append('solver:context="true"')
    if id(node) in tgt:
        parts.append('solver:target="true"')
    for p in sorted(node.props):
        if p != CONTEXT_PROP:
            parts.append(f'{p}=""')
    for a in sorted(node.attrs):
        parts.append(f'{a}="{_escape(node.attrs[a])}"')
    head = "  " * indent + "<" + " ".join(parts)
    if not node.children:
        lines.append(head + "/>")
        return
    lines.append(head + ">")
    for c in node.children:
        _write(c, indent + 1, lines, ctx, tgt)
    lines.append("  " * indent + f"</{node.name}>")
