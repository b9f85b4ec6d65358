from __future__ import annotations

import hashlib
import io

import pytest

import corpus
from ragnodes.backends import FixtureStore, MockBackend, sha256_hex
from ragnodes.errors import BackendUnavailable, CorruptFile, UndecodableImage, UnsupportedFormat
from ragnodes.parsing import (ParseConfig, PageSnapshot, describe_image, load_source, parse_document,
                              parse_fast, parse_llm, parse_ocr, rasterize_pages)


@pytest.fixture(scope="module")
def pdf(tmp_path_factory):
    return corpus.make_pdf(tmp_path_factory.mktemp("pdf") / "three.pdf", corpus.sample_pages(3))


def _scanned_pdf(path):
    import pymupdf

    doc = pymupdf.open()
    page = doc.new_page(width=595, height=842)
    page.insert_image(pymupdf.Rect(50, 50, 545, 400), stream=corpus.png(400, 300, (0, 0, 0)))
    doc.save(str(path))
    return path


def _white_png(w=60, h=40):
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (w, h), "white").save(buf, format="PNG")
    return buf.getvalue()


class DownBackend:
    def transcribe(self, image, strategy):
        raise BackendUnavailable("timeout")


def test_rasterize_three_pages_deterministic(pdf):
    src = load_source(pdf)
    snaps = rasterize_pages(src, 150)
    assert [s.page_index for s in snaps] == [0, 1, 2]
    assert all(s.width > 0 and s.height > 0 and s.dpi == 150 for s in snaps)
    again = rasterize_pages(load_source(pdf), 150)
    assert [hashlib.sha256(s.image_bytes).digest() for s in snaps] == \
           [hashlib.sha256(s.image_bytes).digest() for s in again]


def test_rasterize_dpi_bounds(pdf):
    with pytest.raises(ValueError):
        rasterize_pages(load_source(pdf), 71)
    with pytest.raises(ValueError):
        rasterize_pages(load_source(pdf), 601)


def test_corrupt_and_unsupported(tmp_path):
    (tmp_path / "empty.pdf").write_bytes(b"")
    (tmp_path / "junk.pdf").write_bytes(b"this is not a pdf at all")
    (tmp_path / "junk.docx").write_bytes(b"not a zip")
    (tmp_path / "notes.txt").write_text("plain")
    for name in ("empty.pdf", "junk.pdf", "junk.docx"):
        with pytest.raises(CorruptFile):
            load_source(tmp_path / name)
    with pytest.raises(UnsupportedFormat):
        load_source(tmp_path / "notes.txt")


def test_doc_id_stable_and_content_scoped(tmp_path, pdf):
    assert load_source(pdf).doc_id == load_source(pdf).doc_id
    other = corpus.make_pdf(tmp_path / "three.pdf", corpus.sample_pages(4))
    assert load_source(other).doc_id != load_source(pdf).doc_id


def test_fast_born_digital_pdf(pdf):
    src = load_source(pdf)
    res = parse_fast(src, 0)
    assert res.strategy == "FAST"
    paras = [b for b in res.text_blocks if b.role == "paragraph"]
    heads = [b for b in res.text_blocks if b.role == "heading"]
    assert len(paras) >= 2
    assert [h.level for h in heads] == [1, 2]
    assert res.table_fragments and "Adult occupant" in res.table_fragments[0]
    assert res.table_fragments[0].startswith("| Category | Score |")
    # table cell text is not duplicated as paragraphs
    assert not any("Adult occupant" in b.text for b in res.text_blocks)
    assert parse_fast(src, 1).extracted_images


def test_fast_scanned_page_has_no_text(tmp_path):
    src = load_source(_scanned_pdf(tmp_path / "scan.pdf"))
    res = parse_fast(src, 0)
    assert res.text_blocks == ()
    assert len(res.extracted_images) == 1
    assert res.extracted_images[0][0].startswith(src.doc_id + "/img_0.")


def test_fast_pptx_picture_asset(tmp_path):
    path = corpus.make_pptx(tmp_path / "deck.pptx", corpus.sample_pages(5))
    src = load_source(path)
    res = parse_fast(src, 1)
    assert len(res.extracted_images) == 1
    asset, data = res.extracted_images[0]
    assert asset == f"{src.doc_id}/img_0.png"
    assert data.startswith(b"\x89PNG")
    assert res.text_blocks[0].role == "heading"


def test_fast_docx_pages_and_styles(tmp_path):
    path = corpus.make_docx(tmp_path / "doc.docx", corpus.sample_pages(6))
    src = load_source(path)
    assert src.native_metadata["title"] == "doc"
    assert len(rasterize_pages(src, 72)) == 3
    res = parse_fast(src, 0)
    assert [b.level for b in res.text_blocks if b.role == "heading"] == [1, 2]
    assert len(res.table_fragments) == 1


def _snapshot(data=b"snapshot-bytes"):
    return PageSnapshot(0, data, 10, 10, 150)


def test_llm_mock_fixture_passthrough(tmp_path):
    snap = _snapshot()
    FixtureStore(tmp_path).put("transcribe-llm", sha256_hex(snap.image_bytes),
                               {"text": "Transcript of the page."})
    res = parse_llm(snap, MockBackend(tmp_path))
    assert res.strategy == "LLM"
    assert [b.text for b in res.text_blocks] == ["Transcript of the page."]


def test_llm_two_column_order_is_backend_order(tmp_path):
    snap = _snapshot(b"two-columns")
    left = ["Left column line one.", "Left column line two."]
    right = ["Right column line one.", "Right column line two."]
    FixtureStore(tmp_path).put("transcribe-llm", sha256_hex(snap.image_bytes),
                               {"blocks": [{"text": " ".join(left)}, {"text": " ".join(right)}]})
    res = parse_llm(snap, MockBackend(tmp_path))
    assert [b.text for b in res.text_blocks] == [" ".join(left), " ".join(right)]


def test_ocr_blocks_with_geometry_and_confidence(tmp_path):
    snap = _snapshot(b"ocr-page")
    lines = [{"text": f"line {i}", "bbox": [0, i * 10, 100, i * 10 + 9], "confidence": 0.9}
             for i in range(5)]
    FixtureStore(tmp_path).put("transcribe-ocr", sha256_hex(snap.image_bytes), {"blocks": lines})
    res = parse_ocr(snap, MockBackend(tmp_path))
    assert res.strategy == "OCR" and len(res.text_blocks) == 5
    assert all(b.bbox is not None for b in res.text_blocks)
    assert res.confidence == [0.9] * 5


def test_ocr_blank_snapshot():
    assert parse_ocr(_snapshot(_white_png()), MockBackend()).text_blocks == ()


def test_llm_backend_down_raises():
    with pytest.raises(BackendUnavailable):
        parse_llm(_snapshot(), DownBackend())


def test_describe_plot_flowchart_text_image(tmp_path):
    store = FixtureStore(tmp_path)
    plot, flow, scan = corpus.png(color=(1, 2, 3)), corpus.png(color=(4, 5, 6)), corpus.png(color=(7, 8, 9))
    store.put("describe", sha256_hex(plot), {
        "content_type": "plot", "axes": {"x": "Year", "y": "Score"}, "legend": ["adult", "child"],
        "labels": ["2021", "2022"], "description": "Bar chart of yearly scores."})
    store.put("describe", sha256_hex(flow), {
        "content_type": "flowchart", "description": "Ingestion flow.",
        "steps": [{"from": "Parse", "to": "Assemble"}, {"from": "Assemble", "to": "Index"}]})
    store.put("describe", sha256_hex(scan), {
        "content_type": "text_image", "description": "Scanned paragraph.",
        "transcription": "The quick brown fox."})
    backend = MockBackend(tmp_path)

    d = describe_image(plot, backend, "d/img_0.png")
    assert d.content_type == "plot"
    assert "Axes: x: Year; y: Score." in d.description and "Legend: adult, child." in d.description

    d = describe_image(flow, backend)
    assert d.content_type == "flowchart"
    assert d.description.index("Parse → Assemble") < d.description.index("Assemble → Index")

    d = describe_image(scan, backend)
    assert d.content_type == "text_image" and d.transcription == "The quick brown fox."


def test_describe_without_fixture_and_undecodable():
    d = describe_image(corpus.png(50, 30), MockBackend())
    assert d.content_type == "other" and d.description == "Image of 50x30 pixels."
    with pytest.raises(UndecodableImage):
        describe_image(b"not an image", MockBackend())


def test_parse_document_bundles(pdf):
    bundles = parse_document(load_source(pdf), ParseConfig(dpi=72))
    assert len(bundles) == 3
    for b in bundles:
        assert sorted(r.strategy for r in b.results) == ["FAST", "LLM", "OCR"]
    assert len(bundles[1].described_images) == 1


def test_parse_document_scanned_page_uses_llm_and_ocr(tmp_path):
    src = load_source(_scanned_pdf(tmp_path / "scan.pdf"))
    snap = rasterize_pages(src, 72)[0]
    store = FixtureStore(tmp_path / "fx")
    store.put("transcribe-llm", sha256_hex(snap.image_bytes), {"text": "Scanned text."})
    store.put("transcribe-ocr", sha256_hex(snap.image_bytes), {"text": "Scanned text."})
    mock = MockBackend(tmp_path / "fx")
    [bundle] = parse_document(src, ParseConfig(dpi=72, llm=mock, ocr=mock, vision=mock))
    assert bundle.result("FAST").text_blocks == ()
    assert bundle.result("LLM").text_blocks and bundle.result("OCR").text_blocks


def test_parse_document_llm_fault_injection(tmp_path):
    path = corpus.make_pdf(tmp_path / "two.pdf", corpus.sample_pages(7, pages=2))
    src = load_source(path)
    snaps = rasterize_pages(src, 72)

    class DownOnPage1(MockBackend):
        def transcribe(self, image, strategy):
            if image == snaps[1].image_bytes:
                raise BackendUnavailable("timeout")
            return super().transcribe(image, strategy)

    bundles = parse_document(src, ParseConfig(dpi=72, llm=DownOnPage1()))
    assert len(bundles) == 2
    assert bundles[0].errors == ()
    assert bundles[1].result("LLM").error.startswith("BackendUnavailable")
    assert bundles[1].errors and bundles[1].errors[0].startswith("LLM:")
    assert bundles[1].result("FAST").text_blocks


def test_parse_document_parallel_matches_serial(pdf):
    serial = parse_document(load_source(pdf), ParseConfig(dpi=72))
    parallel = parse_document(load_source(pdf), ParseConfig(dpi=72, jobs=3))
    assert [b.snapshot.image_bytes for b in serial] == [b.snapshot.image_bytes for b in parallel]
    assert [b.results for b in serial] == [b.results for b in parallel]
