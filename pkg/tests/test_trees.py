"""Document model, binary encoding, and XML text round trips."""

import pytest

from treelogic import trees
from treelogic.errors import ForestError
from treelogic.trees import DocNode, Document

import oracles


def test_parse_then_serialize():
    doc = trees.parse_document("<a x='1'><b/><c/></a>")
    assert doc.to_xml() == '<a x="1">\n  <b/>\n  <c/>\n</a>\n'
    assert doc.node_count() == 3


def test_binary_encoding_links():
    doc = trees.parse_document("<a><b/><c/></a>")
    b = trees.to_binary([doc])
    r = b.root
    assert (r.name, r.c1.name, r.c1.c2.name) == ("a", "b", "c")
    assert r.c2 is None                      # single document, no sibling
    assert r.c1.c2.succ(-2) is r.c1          # previous sibling
    assert r.c1.c2.succ(-1) is None          # not a first successor
    assert r.c1.succ(-1) is r
    assert [n.name for n in b.walk()] == ["a", "b", "c"]


def test_forest_round_trip():
    docs = trees.parse_documents("<d><e/></d><g/>")
    assert len(docs) == 2
    b = trees.to_binary(docs)
    assert [n.name for n in b.walk()] == ["d", "e", "g"]
    assert b.root.c2.name == "g"             # documents chained by successor 2
    assert trees.binary_to_documents(b) == docs
    with pytest.raises(ForestError):
        trees.from_binary(b)                 # a forest is not one document
    assert trees.serialize_documents(docs) == "<d>\n  <e/>\n</d>\n<g/>\n"


def test_single_document_round_trip():
    doc = trees.parse_document("<a><b><d/></b><c/></a>")
    assert trees.from_binary(trees.to_binary([doc])) == doc


def test_annotation_marks():
    doc = trees.parse_document("<a x='1'><b/><c/></a>")
    ann = trees.Annotation(context=doc.root, target=doc.root.children[1])
    assert trees.serialize(doc, ann) == (
        '<a xmlns:solver="http://wam.inrialpes.fr/xml"'
        ' solver:context="true" x="1">\n'
        "  <b/>\n"
        '  <c solver:target="true"/>\n'
        "</a>\n")


def test_context_prop_survives_round_trip():
    root = DocNode("a", props={trees.CONTEXT_PROP})
    doc = Document(root)
    b = trees.to_binary([doc])
    assert trees.CONTEXT_PROP in b.root.props
    back = trees.from_binary(b)
    assert trees.CONTEXT_PROP in back.root.props


def test_round_trip_randomized():
    import random
    rng = random.Random(11)
    for _ in range(300):
        doc = oracles.random_document(rng, 10, attrs=("x", "y"))
        assert trees.from_binary(trees.to_binary([doc])) == doc


def test_multi_document_round_trip_randomized():
    import random
    rng = random.Random(12)
    for _ in range(100):
        docs = [oracles.random_document(rng, 5)
                for _ in range(rng.randint(1, 3))]
        assert trees.binary_to_documents(trees.to_binary(docs)) == docs
