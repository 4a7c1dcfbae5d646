import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusforge import bioc
from corpusforge.errors import ParseError, ValidationError
from corpusforge.model import Annotation, Document, Passage, Relation, RelationNode, Span, derive_figures

GOLDEN = sorted((Path(__file__).parent / "data" / "golden").glob("g*.xml"))

TEXT_ALPHABET = "abcdefghij KLMNO0123.,;:-()µαβγ中文字\n"


def random_collection(rng: random.Random, max_docs: int = 3) -> bioc.BioCCollection:
    """Small random but valid collection for round-trip testing."""
    coll = bioc.BioCCollection(source="prop", date="20240101", key="prop.key")
    if rng.random() < 0.3:
        coll.infons[f"extra{rng.randint(0, 9)}"] = "v"
    for d in range(rng.randint(1, max_docs)):
        passages = []
        offset = 0
        for p in range(rng.randint(1, 3)):
            text = "".join(rng.choice(TEXT_ALPHABET) for _ in range(rng.randint(5, 40)))
            infons = {"section": rng.choice(["title", "paragraph", "fig_caption"])}
            if rng.random() < 0.2:
                infons["file"] = "fig.jpg"
            passages.append(Passage(offset, text, infons))
            offset += len(text)
        doc = Document(doc_id=f"doc{d}", passages=passages,
                       metadata={"title": "t"} if rng.random() < 0.5 else {})
        doc.figures = derive_figures(passages)
        anns = []
        for a in range(rng.randint(0, 5)):
            p = rng.choice(passages)
            if len(p.text) < 2:
                continue
            start_local = rng.randrange(0, len(p.text) - 1)
            length = rng.randint(1, min(4, len(p.text) - start_local))
            span = Span(p.offset + start_local, length)
            key = (span.start, span.length)
            if any((x.span.start, x.span.length) == key and x.entity_type == "GENE"
                   and x.concept_id == "C:1" for x in anns):
                continue
            anns.append(
                Annotation(f"A{a + 1}", span, doc.text[span.start:span.end], "GENE", "C:1",
                           annotator=rng.choice(["", "alice"]),
                           infons={"note": "n"} if rng.random() < 0.3 else {})
            )
        rels = []
        if len(anns) >= 2 and rng.random() < 0.6:
            k = rng.randint(2, min(8, len(anns)))
            nodes = [RelationNode(x.ann_id, rng.choice(["a", "b"]))
                     for x in rng.sample(anns, k)]
            rels.append(Relation("R1", "association", nodes, annotator="alice"))
        # Parse output is canonically ordered; build in the same order so
        # deep equality is meaningful.
        anns.sort(key=lambda a: (a.span.start, a.span.length, a.entity_type,
                                 a.concept_id or "", a.ann_id))
        coll.documents.append(bioc.BioCDocument(doc, anns, rels))
    return coll


class TestGoldenFiles:
    @pytest.mark.parametrize("path", GOLDEN, ids=[p.name for p in GOLDEN])
    def test_parse_serialize_parse_fixed_point(self, path):
        first = bioc.parse_bioc(path.read_bytes())
        data = bioc.serialize_bioc(first)
        second = bioc.parse_bioc(data)
        assert first == second

    @pytest.mark.parametrize("path", GOLDEN, ids=[p.name for p in GOLDEN])
    def test_canonicalize_idempotent(self, path):
        once = bioc.canonicalize(path.read_bytes())
        assert bioc.canonicalize(once) == once

    def test_minimal_annotation_parsed(self):
        coll = bioc.parse_bioc((GOLDEN[0]).read_bytes())
        ann = coll.documents[0].annotations[0]
        assert ann.surface_text == "p53"
        assert ann.entity_type == "GENE"
        assert ann.concept_id == "GENE:7157"

    def test_zero_annotation_collection(self):
        coll = bioc.parse_bioc((Path(__file__).parent / "data/golden/g02_no_annotations.xml").read_bytes())
        assert len(coll.documents) == 2
        assert all(not d.annotations for d in coll.documents)

    def test_corrupted_surface_rejected_with_offset(self):
        data = GOLDEN[0].read_bytes()
        corrupt = data.replace(b"<text>p53</text>", b"<text>p5X</text>")
        assert corrupt != data
        with pytest.raises(ParseError) as err:
            bioc.parse_bioc(corrupt)
        assert "10001" in str(err.value) and "offset 0" in str(err.value)

    def test_annotations_sorted_by_start_length_type(self):
        path = Path(__file__).parent / "data/golden/g10_unsorted.xml"
        out = bioc.canonicalize(path.read_bytes()).decode()
        first = out.index('id="A1"')
        mid = out.index('id="A5"')
        last = out.index('id="A9"')
        assert first < mid < last

    def test_reordered_infons_sorted(self):
        path = Path(__file__).parent / "data/golden/g10_unsorted.xml"
        out = bioc.canonicalize(path.read_bytes()).decode()
        assert out.index('key="alpha"') < out.index('key="zeta"')

    def test_relation_with_three_nodes(self):
        path = Path(__file__).parent / "data/golden/g05_relation_3node.xml"
        coll = bioc.parse_bioc(path.read_bytes())
        rel = coll.documents[0].relations[0]
        assert len(rel.nodes) == 3
        out = bioc.serialize_bioc(coll).decode()
        assert out.count("<node ") == 3
        assert 'role="member"' in out

    def test_unknown_infons_survive_roundtrip(self):
        path = Path(__file__).parent / "data/golden/g08_unknown_infons.xml"
        out = bioc.canonicalize(path.read_bytes()).decode()
        for needle in ("custom-collection-key", "weird_key", "manual check", "certainty"):
            assert needle in out


class TestParseErrors:
    def test_malformed_xml(self):
        with pytest.raises(ParseError, match="malformed"):
            bioc.parse_bioc(b"<collection><document>")

    def test_missing_document_id(self):
        data = b"""<collection><source>s</source><date>20240101</date><key>k</key>
        <document><passage><offset>0</offset><text>x</text></passage></document></collection>"""
        with pytest.raises(ParseError, match="without <id>"):
            bioc.parse_bioc(data)

    def test_missing_passage_offset(self):
        data = b"""<collection><source>s</source><date>20240101</date><key>k</key>
        <document><id>d</id><passage><text>x</text></passage></document></collection>"""
        with pytest.raises(ParseError, match="offset"):
            bioc.parse_bioc(data)

    def test_dangling_relation_refid(self):
        data = b"""<collection><source>s</source><date>20240101</date><key>k</key>
        <document><id>d</id><passage><offset>0</offset><text>xy</text></passage>
        <relation id="R1"><infon key="type">t</infon>
        <node refid="A1" role="a"/><node refid="A2" role="b"/></relation>
        </document></collection>"""
        with pytest.raises(ParseError, match="unknown annotation"):
            bioc.parse_bioc(data)

    def test_gapped_offsets_rebased_to_contiguous(self):
        # Files with separator gaps between passages normalize to the
        # contiguous model, annotations shifted along.
        data = b"""<collection><source>s</source><date>20240101</date><key>k</key>
        <document><id>d</id>
        <passage><offset>0</offset><text>abcde</text></passage>
        <passage><offset>7</offset><text>fghij</text>
          <annotation id="A1"><infon key="type">T</infon>
          <location offset="9" length="2"/><text>hi</text></annotation>
        </passage>
        </document></collection>"""
        coll = bioc.parse_bioc(data)
        doc = coll.documents[0].document
        assert [p.offset for p in doc.passages] == [0, 5]
        ann = coll.documents[0].annotations[0]
        assert ann.span == Span(7, 2)
        assert doc.text[7:9] == "hi"


class TestSerializeValidation:
    def test_refuses_empty_collection(self):
        with pytest.raises(ValidationError, match="empty"):
            bioc.serialize_bioc(bioc.BioCCollection())

    def test_refuses_bad_date(self):
        doc = Document("d", passages=[Passage(0, "x", {})])
        coll = bioc.BioCCollection(date="not-a-date",
                                   documents=[bioc.BioCDocument(doc)])
        with pytest.raises(ValidationError, match="date"):
            bioc.serialize_bioc(coll)

    def test_refuses_stale_surface_cache(self):
        doc = Document("d", passages=[Passage(0, "abcdef", {})])
        ann = Annotation("A1", Span(0, 3), "zzz", "GENE")
        coll = bioc.BioCCollection(documents=[bioc.BioCDocument(doc, [ann])])
        with pytest.raises(ValidationError, match="does not match"):
            bioc.serialize_bioc(coll)

    def test_every_location_reresolves_to_text(self):
        for path in GOLDEN:
            coll = bioc.parse_bioc(bioc.canonicalize(path.read_bytes()))
            for bdoc in coll.documents:
                for ann in bdoc.annotations:
                    assert bdoc.document.text_at(ann.span) == ann.surface_text


class TestPlainText:
    def test_two_paragraphs_offsets(self):
        doc = bioc.import_plain_text("Title\n\nBody text.", "d1")
        assert [p.offset for p in doc.passages] == [0, 5]
        assert doc.passages[0].infons["section"] == "title"
        assert doc.passages[1].infons["section"] == "paragraph"

    def test_single_paragraph(self):
        doc = bioc.import_plain_text("Just one paragraph.", "d1")
        assert len(doc.passages) == 1
        assert doc.passages[0].offset == 0
        assert doc.passages[0].infons["section"] == "paragraph"

    def test_codepoint_offsets_not_bytes(self):
        text = "µµµ µµ\n\nsecond µ paragraph"
        assert len(text.encode("utf-8")) != len(text)
        doc = bioc.import_plain_text(text, "d1")
        assert doc.passages[1].offset == len("µµµ µµ")

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            bioc.import_plain_text("   \n\n  ", "d1")
        with pytest.raises(ValidationError):
            bioc.import_plain_text("x", "")


class TestRoundTripProperty:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_random_collections_roundtrip(self, seed):
        coll = random_collection(random.Random(seed))
        data = bioc.serialize_bioc(coll)
        back = bioc.parse_bioc(data)
        assert back == coll
        assert bioc.canonicalize(data) == data
