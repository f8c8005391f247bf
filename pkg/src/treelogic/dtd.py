"""DTD reader: element and attribute declarations to a tree type.

Supports ELEMENT declarations (sequences, choices, `?`, `*`, `+`, EMPTY,
ANY, mixed content), ATTLIST declarations (collapsed to attribute
presence: #REQUIRED and #FIXED are required, everything else optional),
and parameter entities with textual expansion, including same-directory
external entities.  Mixed content drops the text part, since data values
are outside the tree model.  NOTATION declarations, conditional
sections, and entity files outside the DTD's own directory are rejected.

The result is one recursive binder: every declared element becomes a
variable bound to its element definition, repetition operators become
fresh tail-recursive variables, and the requested root element's
variable is the body.
"""

from __future__ import annotations

import itertools
import os
import re

from . import schema as sc
from .errors import ParseError, UnknownRoot

_COMMENT_RE = re.compile(r"<!--.*?-->", re.S)
_PI_RE = re.compile(r"<\?.*?\?>", re.S)
_NAME_RE = re.compile(r"[A-Za-z_:][\w.\-:]*")
_PEREF_RE = re.compile(r"%([A-Za-z_:][\w.\-:]*);")


class _Entities:
    """Parameter entity table with recursive textual expansion."""

    def __init__(self, directory: str):
        self.directory = directory
        self.values: dict = {}

    def define(self, name: str, value: str):
        # first declaration wins, per XML entity rules
        self.values.setdefault(name, value)

    def define_external(self, name: str, sysid: str):
        if os.path.basename(sysid) != sysid:
            raise ParseError(
                f"external entity {name} points outside the DTD directory: "
                f"{sysid}")
        path = os.path.join(self.directory, sysid)
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read entity file {sysid}: {exc}")
        self.define(name, _strip_ignorable(text))

    def expand(self, text: str, stack=()) -> str:
        def repl(m):
            name = m.group(1)
            if name in stack:
                raise ParseError(f"recursive parameter entity %{name};")
            value = self.values.get(name)
            if value is None:
                raise ParseError(f"undefined parameter entity %{name};")
            return self.expand(value, stack + (name,))
        return _PEREF_RE.sub(repl, text)


def _strip_ignorable(text: str) -> str:
    text = _COMMENT_RE.sub(" ", text)
    return _PI_RE.sub(" ", text)


def _split_top(text: str):
    """Yield declarations and bare entity references, in order."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "%":
            m = _PEREF_RE.match(text, i)
            if not m:
                raise ParseError(f"stray % at offset {i}")
            yield ("ref", m.group(1))
            i = m.end()
            continue
        if c != "<":
            raise ParseError(f"unexpected {text[i:i + 20]!r} in DTD")
        # find the closing > outside quoted literals
        j = i + 1
        quote = None
        while j < n:
            cj = text[j]
            if quote:
                if cj == quote:
                    quote = None
            elif cj in "\"'":
                quote = cj
            elif cj == ">":
                break
            j += 1
        if j >= n:
            raise ParseError("unterminated declaration")
        yield ("decl", text[i:j + 1])
        i = j + 1


class _DeclParser:
    """Cursor over one expanded declaration body."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def done(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def name(self) -> str:
        self.skip_ws()
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            raise ParseError(
                f"expected a name at {self.text[self.pos:self.pos + 20]!r}")
        self.pos = m.end()
        return m.group(0)

    def literal(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] not in "\"'":
            raise ParseError("expected a quoted literal")
        quote = self.text[self.pos]
        end = self.text.index(quote, self.pos + 1)
        out = self.text[self.pos + 1:end]
        self.pos = end + 1
        return out

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False


# ---------------------------------------------------------------------------
# Content models.

_ANY = object()


def _parse_content(p: _DeclParser):
    """Content model as a small AST: ("seq"|"or", parts), ("ref", name),
    ("rep", inner, op), ("empty",), or _ANY."""
    if p.take("EMPTY"):
        return ("empty",)
    if p.take("ANY"):
        return _ANY
    return _parse_cp(p)


def _parse_cp(p: _DeclParser):
    p.skip_ws()
    if p.take("("):
        if p.take("#PCDATA"):
            names = []
            while p.take("|"):
                names.append(p.name())
            if not p.take(")"):
                raise ParseError("malformed mixed content")
            star = p.take("*")
            if not names:
                return ("empty",)
            if not star:
                raise ParseError("mixed content with elements requires )*")
            choice = ("or", [("ref", n) for n in names])
            return ("rep", choice, "*")
        parts = [_parse_cp(p)]
        sep = None
        while True:
            if p.take(")"):
                break
            if p.take(","):
                this = ","
            elif p.take("|"):
                this = "|"
            else:
                raise ParseError(
                    f"malformed content model near "
                    f"{p.text[p.pos:p.pos + 20]!r}")
            if sep is None:
                sep = this
            elif sep != this:
                raise ParseError("cannot mix , and | at one level")
            parts.append(_parse_cp(p))
        node = parts[0] if len(parts) == 1 else \
            ("seq" if sep == "," else "or", parts)
        return _apply_rep(p, node)
    return _apply_rep(p, ("ref", p.name()))


def _apply_rep(p: _DeclParser, node):
    if p.take("?"):
        return ("rep", node, "?")
    if p.take("*"):
        return ("rep", node, "*")
    if p.take("+"):
        return ("rep", node, "+")
    return node


# ---------------------------------------------------------------------------
# Whole-DTD parsing.

class _Dtd:
    def __init__(self):
        self.order: list = []          # element names in declaration order
        self.content: dict = {}        # name -> content AST
        self.attlists: dict = {}       # name -> list of (attr, required)


def _scan(path: str) -> _Dtd:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read DTD {path}: {exc}")
    entities = _Entities(os.path.dirname(os.path.abspath(path)))
    out = _Dtd()
    queue = [_strip_ignorable(raw)]
    while queue:
        text = queue.pop()
        pending = list(_split_top(text))
        for idx, (kind, payload) in enumerate(pending):
            if kind == "ref":
                # a whole-declaration entity: splice and rescan the rest
                rest = pending[idx + 1:]
                spliced = entities.expand(f"%{payload};")
                queue.append("".join(_unsplit(rest)))
                queue.append(spliced)
                break
            _handle_decl(payload, entities, out)
    return out


def _unsplit(items):
    for kind, payload in items:
        yield f"%{payload};" if kind == "ref" else payload
        yield "\n"


def _handle_decl(decl: str, entities: _Entities, out: _Dtd):
    if decl.startswith("<!["):
        raise ParseError("conditional sections are not supported")
    if decl.startswith("<!NOTATION"):
        raise ParseError("NOTATION declarations are not supported")
    if decl.startswith("<!DOCTYPE"):
        raise ParseError("expected an external subset, found DOCTYPE")
    if decl.startswith("<!ENTITY"):
        p = _DeclParser(decl[len("<!ENTITY"):-1])
        if not p.take("%"):
            return          # general entities carry no structure we model
        name = p.name()
        p.skip_ws()
        if p.take("SYSTEM"):
            entities.define_external(name, p.literal())
        elif p.take("PUBLIC"):
            p.literal()
            entities.define_external(name, p.literal())
        else:
            entities.define(name, p.literal())
        return
    body = entities.expand(decl)
    if body.startswith("<!ELEMENT"):
        p = _DeclParser(body[len("<!ELEMENT"):-1])
        name = p.name()
        model = _parse_content(p)
        if not p.done():
            raise ParseError(
                f"trailing content in ELEMENT {name}: "
                f"{p.text[p.pos:p.pos + 20]!r}")
        if name not in out.content:
            out.order.append(name)
            out.content[name] = model
        return
    if body.startswith("<!ATTLIST"):
        p = _DeclParser(body[len("<!ATTLIST"):-1])
        name = p.name()
        defs = out.attlists.setdefault(name, [])
        while not p.done():
            attr = p.name()
            p.skip_ws()
            if p.take("NOTATION"):
                raise ParseError("NOTATION attribute types are not supported")
            if p.take("("):
                depth = 1
                while depth:
                    c = p.text[p.pos]
                    depth += c == "("
                    depth -= c == ")"
                    p.pos += 1
            else:
                p.name()                      # CDATA, ID, NMTOKEN, ...
            p.skip_ws()
            if p.take("#REQUIRED"):
                required = True
            elif p.take("#IMPLIED"):
                required = False
            elif p.take("#FIXED"):
                p.literal()
                required = True
            else:
                p.literal()
                required = False
            if attr not in (a for a, _ in defs):
                defs.append((attr, required))
        return
    raise ParseError(f"unsupported declaration {decl[:30]!r}")


# ---------------------------------------------------------------------------
# Conversion to tree types.

def _to_type(dtd: _Dtd, root: str, source: str) -> sc.Bind:
    if root not in dtd.content:
        raise UnknownRoot(root, source)
    counter = itertools.count()
    star_bindings: list = []
    memo: dict = {}

    def star(inner):
        name = f"rep%{next(counter)}"
        star_bindings.append(
            (name, sc.Or(sc.Concat(inner, sc.Var(name)), sc.EMPTY_SEQ)))
        return sc.Var(name)

    def convert(node):
        # intern by node value: repeated content models (entity
        # expansion produces many identical ones) share one expression,
        # which keeps the binarized type small
        key = repr(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        out = _convert(node)
        memo[key] = out
        return out

    def _convert(node):
        if node is _ANY:
            alts = None
            for n in dtd.order:
                alts = sc.Var(n) if alts is None else sc.Or(alts, sc.Var(n))
            return star(alts) if alts is not None else sc.EMPTY_SEQ
        kind = node[0]
        if kind == "empty":
            return sc.EMPTY_SEQ
        if kind == "ref":
            name = node[1]
            if name not in dtd.content:
                raise ParseError(
                    f'element "{name}" is referenced but never declared')
            return sc.Var(name)
        if kind == "seq":
            parts = [convert(x) for x in node[1]]
            out = parts[-1]
            for part in reversed(parts[:-1]):
                out = sc.Concat(part, out)
            return out
        if kind == "or":
            parts = [convert(x) for x in node[1]]
            out = parts[0]
            for part in parts[1:]:
                out = sc.Or(out, part)
            return out
        if kind == "rep":
            inner = convert(node[1])
            if node[2] == "?":
                return sc.Or(inner, sc.EMPTY_SEQ)
            if node[2] == "*":
                return star(inner)
            return sc.Concat(inner, star(inner))
        raise ParseError(f"bad content node {node!r}")

    def attrs_of(name: str):
        defs = dtd.attlists.get(name, ())
        if not defs:
            return sc.A_EMPTY
        items = [sc.Required(a) if req else sc.Optional(a)
                 for a, req in defs]
        out = items[0]
        for item in items[1:]:
            out = sc.CommutativeConcat(out, item)
        return sc.AChoice(out, None)

    bindings = [(name, sc.Element(name, attrs_of(name),
                                  convert(dtd.content[name])))
                for name in dtd.order]
    return sc.Bind(tuple(bindings + star_bindings), sc.Var(root))


def parse_dtd(path: str, root: str) -> sc.Bind:
    """Read a DTD file and return its tree type with the given root."""
    return _to_type(_scan(path), root, os.path.basename(path))
