"""Per-page parsing: snapshots, the FAST/LLM/OCR strategies and image description.

FAST reads the file itself (PyMuPDF for PDF, python-docx, python-pptx). LLM
and OCR transcribe the page snapshot through a :class:`TranscriptionBackend`.
PDF snapshots are true renders; DOCX and PPTX have no layout engine available,
so their snapshots are deterministic text-and-image sketches of the page.
"""

from __future__ import annotations

import io
import logging
import re
import statistics
import textwrap
import threading
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

from .backends import MockBackend, TranscriptionBackend, VisionBackend, image_size, sha256_hex
from .errors import BackendError, CorruptFile, UndecodableImage, UnsupportedFormat
from .model import SUPPORTED_FORMATS, DocumentSource

log = logging.getLogger(__name__)

STRATEGIES = ("FAST", "LLM", "OCR")
CONTENT_TYPES = ("plot", "flowchart", "photo", "text_image", "other")
DEFAULT_DPI = 150

_PDF_LOCK = threading.RLock()


@dataclass(frozen=True)
class TextBlock:
    text: str
    bbox: tuple[float, float, float, float] | None = None
    confidence: float | None = None
    role: str | None = None
    level: int | None = None

    @classmethod
    def from_wire(cls, d: dict) -> TextBlock:
        bbox = d.get("bbox")
        conf = d.get("confidence")
        return cls(text=str(d["text"]),
                   bbox=tuple(float(x) for x in bbox) if bbox else None,
                   confidence=float(conf) if conf is not None else None,
                   role=d.get("role"), level=d.get("level"))

    def to_wire(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class PageSnapshot:
    page_index: int
    image_bytes: bytes
    width: int
    height: int
    dpi: int


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    text_blocks: tuple[TextBlock, ...] = ()
    extracted_images: tuple[tuple[str, bytes], ...] = ()
    table_fragments: tuple[str, ...] = ()
    error: str | None = None

    @property
    def confidence(self) -> list[float | None]:
        return [b.confidence for b in self.text_blocks]

    @property
    def empty(self) -> bool:
        return not self.text_blocks and not self.extracted_images and not self.table_fragments

    def to_wire(self) -> dict:
        return {"blocks": [b.to_wire() for b in self.text_blocks],
                "tables": list(self.table_fragments),
                "images": [asset for asset, _ in self.extracted_images],
                "error": self.error}


@dataclass(frozen=True)
class ImageDescription:
    asset_id: str
    description: str
    content_type: str = "other"
    transcription: str | None = None


@dataclass(frozen=True)
class PageParseBundle:
    page_index: int
    snapshot: PageSnapshot
    results: tuple[StrategyResult, StrategyResult, StrategyResult]
    described_images: tuple[ImageDescription, ...] = ()
    errors: tuple[str, ...] = ()

    def result(self, strategy: str) -> StrategyResult:
        return next(r for r in self.results if r.strategy == strategy)

    def image_bytes(self) -> dict[str, bytes]:
        return dict(self.result("FAST").extracted_images)


@dataclass
class ParseConfig:
    dpi: int = DEFAULT_DPI
    jobs: int = 1
    llm: TranscriptionBackend = field(default_factory=MockBackend)
    ocr: TranscriptionBackend = field(default_factory=MockBackend)
    vision: VisionBackend = field(default_factory=MockBackend)


# -- sources ---------------------------------------------------------------

def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "-", text).strip("-").lower() or "doc"


def load_source(path: Path | str, doc_id: str | None = None) -> DocumentSource:
    """Build a :class:`DocumentSource` with its native metadata.

    The default ``doc_id`` is the file stem plus a content-hash prefix, so it is
    stable across runs and distinct for different files sharing a name.
    """
    path = Path(path)
    fmt = path.suffix.lower().lstrip(".")
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"{path.name}: expected one of {', '.join(SUPPORTED_FORMATS)}")
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if not data:
        raise CorruptFile(f"{path}: empty file")
    if doc_id is None:
        doc_id = f"{_slug(path.stem)}-{sha256_hex(data)[:8]}"
    src = DocumentSource(doc_id=doc_id, origin_path=path, format=fmt)
    native = _extractor(src).native_metadata()
    return DocumentSource(doc_id=doc_id, origin_path=path, format=fmt, native_metadata=native)


def _iso(value: Any) -> str:
    return value.isoformat() if hasattr(value, "isoformat") else str(value)


def _markdown_table(rows: list[list[str]]) -> str:
    rows = [[" ".join((c or "").replace("|", "\\|").split()) for c in r] for r in rows if r]
    if not rows:
        return ""
    width = max(len(r) for r in rows)
    rows = [r + [""] * (width - len(r)) for r in rows]
    lines = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * width]
    lines += ["| " + " | ".join(r) + " |" for r in rows[1:]]
    return "\n".join(lines)


_BULLET = re.compile(r"^\s*([•●▪–*-]|\d+[.)])\s+")


def _list_text(lines: list[str]) -> str | None:
    if lines and all(_BULLET.match(line) for line in lines):
        out = []
        for line in lines:
            m = _BULLET.match(line)
            marker = m.group(1)
            marker = marker if re.match(r"\d", marker) else "-"
            out.append(f"{marker} {line[m.end():].strip()}")
        return "\n".join(out)
    return None


# -- extractors ------------------------------------------------------------

class _Extractor:
    format = ""

    def __init__(self, source: DocumentSource):
        self.source = source

    def page_count(self) -> int:
        raise NotImplementedError

    def native_metadata(self) -> dict[str, str]:
        raise NotImplementedError

    def fast(self, page_index: int) -> StrategyResult:
        raise NotImplementedError

    def snapshot(self, page_index: int, dpi: int) -> PageSnapshot:
        raise NotImplementedError

    def check_page(self, page_index: int) -> None:
        n = self.page_count()
        if not 0 <= page_index < n:
            raise IndexError(f"page {page_index} out of range for {n}-page document")

    def asset_id(self, ordinal: int, ext: str) -> str:
        return f"{self.source.doc_id}/img_{ordinal}.{ext.lower().lstrip('.') or 'bin'}"


class _PdfExtractor(_Extractor):
    format = "pdf"

    def __init__(self, source: DocumentSource):
        super().__init__(source)
        import pymupdf

        pymupdf.no_recommend_layout()
        try:
            with _PDF_LOCK:
                self.doc = pymupdf.open(str(source.origin_path), filetype="pdf")
                count = self.doc.page_count
        except Exception as exc:  # pymupdf raises several unrelated types for bad files
            raise CorruptFile(f"{source.origin_path}: {exc}") from exc
        if count == 0:
            raise CorruptFile(f"{source.origin_path}: document has no pages")
        self._profile: tuple[float, list[float]] | None = None

    def page_count(self) -> int:
        return self.doc.page_count

    def native_metadata(self) -> dict[str, str]:
        meta = self.doc.metadata or {}
        keys = {"title": "title", "author": "author", "subject": "subject",
                "keywords": "keywords", "creator": "creator", "producer": "producer",
                "creationDate": "creation_date", "modDate": "last_modified_date"}
        return {ours: str(meta[theirs]) for theirs, ours in keys.items() if meta.get(theirs)}

    @staticmethod
    def _text_blocks(page) -> list[dict]:
        out = []
        for block in page.get_text("dict", sort=True)["blocks"]:
            if block.get("type") != 0:
                continue
            lines, sizes, chars = [], [], 0
            for line in block["lines"]:
                text = "".join(span["text"] for span in line["spans"])
                for span in line["spans"]:
                    if span["text"].strip():
                        sizes.append((span["size"], len(span["text"])))
                if text.strip():
                    lines.append(text.rstrip())
                    chars += len(text)
            if lines:
                size = max(s for s, _ in sizes) if sizes else 0.0
                out.append({"lines": lines, "bbox": tuple(block["bbox"]), "size": size,
                            "sizes": sizes})
        return out

    def _font_profile(self) -> tuple[float, list[float]]:
        """Body font size (character-weighted mode) and heading sizes, largest first."""
        if self._profile is None:
            with _PDF_LOCK:
                weights: dict[float, int] = {}
                block_sizes = []
                for page in self.doc:
                    for b in self._text_blocks(page):
                        for s, n in b["sizes"]:
                            weights[round(s, 1)] = weights.get(round(s, 1), 0) + n
                        block_sizes.append((round(b["size"], 1), len(b["lines"])))
            body = max(weights.items(), key=lambda kv: (kv[1], -kv[0]))[0] if weights else 0.0
            heads = sorted({s for s, nlines in block_sizes if body and s >= body * 1.15 and nlines <= 3},
                           reverse=True)
            self._profile = (body, heads)
        return self._profile

    def _images_before(self, page_index: int) -> int:
        return sum(len(self.doc[i].get_images(full=True)) for i in range(page_index))

    def fast(self, page_index: int) -> StrategyResult:
        self.check_page(page_index)
        body, heads = self._font_profile()
        with _PDF_LOCK:
            page = self.doc[page_index]
            tables, table_boxes = [], []
            try:
                for table in page.find_tables().tables:
                    md = _markdown_table(table.extract())
                    if md:
                        tables.append(md)
                        table_boxes.append(tuple(table.bbox))
            except Exception as exc:  # table detection is best effort
                log.debug("table detection failed on page %d: %s", page_index, exc)
            blocks = []
            for b in self._text_blocks(page):
                x0, y0, x1, y1 = b["bbox"]
                cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
                if any(t[0] <= cx <= t[2] and t[1] <= cy <= t[3] for t in table_boxes):
                    continue
                size = round(b["size"], 1)
                if size in heads:
                    blocks.append(TextBlock(" ".join(b["lines"]).strip(), bbox=b["bbox"],
                                            role="heading", level=heads.index(size) + 1))
                elif (listed := _list_text(b["lines"])) is not None:
                    blocks.append(TextBlock(listed, bbox=b["bbox"], role="list"))
                else:
                    blocks.append(TextBlock("\n".join(b["lines"]), bbox=b["bbox"], role="paragraph"))
            images = []
            ordinal = self._images_before(page_index)
            for info in page.get_images(full=True):
                xref = info[0]
                try:
                    extracted = self.doc.extract_image(xref)
                except Exception as exc:
                    log.warning("could not extract image xref %d: %s", xref, exc)
                    ordinal += 1
                    continue
                images.append((self.asset_id(ordinal, extracted["ext"]), extracted["image"]))
                ordinal += 1
        return StrategyResult("FAST", tuple(blocks), tuple(images), tuple(tables))

    def snapshot(self, page_index: int, dpi: int) -> PageSnapshot:
        self.check_page(page_index)
        with _PDF_LOCK:
            pix = self.doc[page_index].get_pixmap(dpi=dpi)
            data = pix.tobytes("png")
            return PageSnapshot(page_index, data, pix.width, pix.height, dpi)


def _sketch(size_in: tuple[float, float], dpi: int, result: StrategyResult) -> tuple[bytes, int, int]:
    """Deterministic raster of a page's extracted text and images."""
    from PIL import Image, ImageDraw, ImageFont

    width, height = max(int(size_in[0] * dpi), 1), max(int(size_in[1] * dpi), 1)
    canvas = Image.new("RGB", (width, height), "white")
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    margin = int(0.5 * dpi)
    y = margin
    chars = max((width - 2 * margin) // 7, 10)
    for block in result.text_blocks:
        for para in block.text.splitlines() or [""]:
            for line in textwrap.wrap(para, chars) or [""]:
                if y > height - margin:
                    break
                draw.text((margin, y), line, fill="black", font=font)
                y += 14
        y += 10
    for table in result.table_fragments:
        for line in table.splitlines():
            if y > height - margin:
                break
            draw.text((margin, y), line[:chars], fill="black", font=font)
            y += 14
    for _, data in result.extracted_images:
        try:
            with Image.open(io.BytesIO(data)) as im:
                thumb = im.convert("RGB")
                thumb.thumbnail((width - 2 * margin, max(height // 4, 1)))
                if y + thumb.height <= height:
                    canvas.paste(thumb, (margin, y))
                    y += thumb.height + 10
        except Exception as exc:
            log.debug("skipping undecodable image in sketch: %s", exc)
    buf = io.BytesIO()
    canvas.save(buf, format="PNG")
    return buf.getvalue(), width, height


class _DocxExtractor(_Extractor):
    format = "docx"
    _PAGE_SIZE = (8.27, 11.69)

    def __init__(self, source: DocumentSource):
        super().__init__(source)
        import docx
        from docx.opc.exceptions import PackageNotFoundError

        try:
            self.doc = docx.Document(str(source.origin_path))
        except (PackageNotFoundError, zipfile.BadZipFile, KeyError, ValueError) as exc:
            raise CorruptFile(f"{source.origin_path}: {exc}") from exc
        self.pages = self._paginate()

    def _paginate(self) -> list[list[tuple[str, Any]]]:
        from docx.table import Table
        from docx.text.paragraph import Paragraph

        ns = "{http://schemas.openxmlformats.org/wordprocessingml/2006/main}"
        pages: list[list[tuple[str, Any]]] = [[]]
        for child in self.doc.element.body.iterchildren():
            if child.tag == ns + "p":
                para = Paragraph(child, self.doc)
                breaks = [br for br in child.iter(ns + "br") if br.get(ns + "type") == "page"]
                before = child.find(f"{ns}pPr/{ns}pageBreakBefore") is not None
                if before and pages[-1]:
                    pages.append([])
                pages[-1].append(("p", para))
                for _ in breaks:
                    pages.append([])
            elif child.tag == ns + "tbl":
                pages[-1].append(("tbl", Table(child, self.doc)))
        if len(pages) > 1 and not pages[-1]:
            pages.pop()
        return pages

    def page_count(self) -> int:
        return len(self.pages)

    def native_metadata(self) -> dict[str, str]:
        cp = self.doc.core_properties
        fields = {"title": cp.title, "author": cp.author, "subject": cp.subject,
                  "keywords": cp.keywords, "creation_date": cp.created,
                  "last_modified_date": cp.modified}
        return {k: _iso(v) for k, v in fields.items() if v}

    def _blips(self, para) -> list[str]:
        ns_a = "{http://schemas.openxmlformats.org/drawingml/2006/main}blip"
        ns_r = "{http://schemas.openxmlformats.org/officeDocument/2006/relationships}embed"
        return [b.get(ns_r) for b in para._p.iter(ns_a) if b.get(ns_r)]

    def _images_before(self, page_index: int) -> int:
        return sum(len(self._blips(item)) for page in self.pages[:page_index]
                   for kind, item in page if kind == "p")

    def fast(self, page_index: int) -> StrategyResult:
        self.check_page(page_index)
        blocks: list[TextBlock] = []
        tables: list[str] = []
        images: list[tuple[str, bytes]] = []
        ordinal = self._images_before(page_index)
        pending_list: list[str] = []

        def flush():
            if pending_list:
                blocks.append(TextBlock("\n".join(pending_list), role="list"))
                pending_list.clear()

        for kind, item in self.pages[page_index]:
            if kind == "tbl":
                flush()
                md = _markdown_table([[cell.text for cell in row.cells] for row in item.rows])
                if md:
                    tables.append(md)
                continue
            for rid in self._blips(item):
                part = self.doc.part.related_parts.get(rid)
                if part is None:
                    continue
                ext = Path(str(part.partname)).suffix or ".bin"
                images.append((self.asset_id(ordinal, ext), part.blob))
                ordinal += 1
            text = item.text.strip()
            if not text:
                continue
            style = (item.style.name if item.style is not None else "") or ""
            heading = re.match(r"Heading (\d)", style)
            if heading or style == "Title":
                flush()
                level = int(heading.group(1)) if heading else 1
                blocks.append(TextBlock(text, role="heading", level=level))
            elif style.startswith("List"):
                marker = "1." if "Number" in style else "-"
                pending_list.append(f"{marker} {text}")
            else:
                flush()
                blocks.append(TextBlock(text, role="paragraph"))
        flush()
        return StrategyResult("FAST", tuple(blocks), tuple(images), tuple(tables))

    def snapshot(self, page_index: int, dpi: int) -> PageSnapshot:
        data, w, h = _sketch(self._PAGE_SIZE, dpi, self.fast(page_index))
        return PageSnapshot(page_index, data, w, h, dpi)


class _PptxExtractor(_Extractor):
    format = "pptx"

    def __init__(self, source: DocumentSource):
        super().__init__(source)
        import pptx
        from pptx.exc import PackageNotFoundError

        try:
            self.prs = pptx.Presentation(str(source.origin_path))
        except (PackageNotFoundError, zipfile.BadZipFile, KeyError, ValueError) as exc:
            raise CorruptFile(f"{source.origin_path}: {exc}") from exc
        self.slides = list(self.prs.slides)
        if not self.slides:
            raise CorruptFile(f"{source.origin_path}: presentation has no slides")

    def page_count(self) -> int:
        return len(self.slides)

    def native_metadata(self) -> dict[str, str]:
        cp = self.prs.core_properties
        fields = {"title": cp.title, "author": cp.author, "subject": cp.subject,
                  "keywords": cp.keywords, "creation_date": cp.created,
                  "last_modified_date": cp.modified}
        return {k: _iso(v) for k, v in fields.items() if v}

    @staticmethod
    def _shapes(shapes):
        from pptx.enum.shapes import MSO_SHAPE_TYPE

        ordered = sorted(shapes, key=lambda s: ((s.top or 0), (s.left or 0), s.shape_id))
        for shape in ordered:
            if shape.shape_type == MSO_SHAPE_TYPE.GROUP:
                yield from _PptxExtractor._shapes(shape.shapes)
            else:
                yield shape

    def _pictures(self, slide) -> list:
        from pptx.enum.shapes import MSO_SHAPE_TYPE

        return [s for s in self._shapes(slide.shapes) if s.shape_type == MSO_SHAPE_TYPE.PICTURE]

    def fast(self, page_index: int) -> StrategyResult:
        from pptx.enum.shapes import MSO_SHAPE_TYPE, PP_PLACEHOLDER

        self.check_page(page_index)
        slide = self.slides[page_index]
        ordinal = sum(len(self._pictures(s)) for s in self.slides[:page_index])
        emu = 914400 / 72.0
        blocks, tables, images = [], [], []
        for shape in self._shapes(slide.shapes):
            bbox = None
            if shape.left is not None and shape.top is not None:
                bbox = (shape.left / emu, shape.top / emu,
                        (shape.left + shape.width) / emu, (shape.top + shape.height) / emu)
            if getattr(shape, "has_table", False) and shape.has_table:
                md = _markdown_table([[c.text for c in row.cells] for row in shape.table.rows])
                if md:
                    tables.append(md)
                continue
            if shape.shape_type == MSO_SHAPE_TYPE.PICTURE:
                images.append((self.asset_id(ordinal, shape.image.ext), shape.image.blob))
                ordinal += 1
                continue
            if not shape.has_text_frame or not shape.text_frame.text.strip():
                continue
            ph = shape.placeholder_format.type if shape.is_placeholder else None
            if ph in (PP_PLACEHOLDER.TITLE, PP_PLACEHOLDER.CENTER_TITLE):
                blocks.append(TextBlock(" ".join(shape.text_frame.text.split()), bbox=bbox,
                                        role="heading", level=1))
            elif ph in (PP_PLACEHOLDER.SUBTITLE,):
                blocks.append(TextBlock(shape.text_frame.text.strip(), bbox=bbox, role="paragraph"))
            elif ph is not None:
                items = ["  " * p.level + "- " + "".join(r.text for r in p.runs).strip()
                         for p in shape.text_frame.paragraphs if "".join(r.text for r in p.runs).strip()]
                blocks.append(TextBlock("\n".join(items), bbox=bbox, role="list"))
            else:
                paras = [p for p in (x.strip() for x in shape.text_frame.text.splitlines()) if p]
                listed = _list_text(paras)
                if listed is not None:
                    blocks.append(TextBlock(listed, bbox=bbox, role="list"))
                else:
                    blocks.append(TextBlock("\n".join(paras), bbox=bbox, role="paragraph"))
        return StrategyResult("FAST", tuple(blocks), tuple(images), tuple(tables))

    def snapshot(self, page_index: int, dpi: int) -> PageSnapshot:
        size = (self.prs.slide_width / 914400, self.prs.slide_height / 914400)
        data, w, h = _sketch(size, dpi, self.fast(page_index))
        return PageSnapshot(page_index, data, w, h, dpi)


_EXTRACTORS = {"pdf": _PdfExtractor, "docx": _DocxExtractor, "pptx": _PptxExtractor}


@lru_cache(maxsize=16)
def _cached_extractor(path: str, mtime_ns: int, size: int, doc_id: str, fmt: str) -> _Extractor:
    return _EXTRACTORS[fmt](DocumentSource(doc_id, Path(path), fmt))


def _extractor(source: DocumentSource) -> _Extractor:
    if source.format not in _EXTRACTORS:
        raise UnsupportedFormat(source.format)
    try:
        st = source.origin_path.stat()
    except OSError as exc:
        raise CorruptFile(f"{source.origin_path}: {exc}") from exc
    if st.st_size == 0:
        raise CorruptFile(f"{source.origin_path}: empty file")
    return _cached_extractor(str(source.origin_path), st.st_mtime_ns, st.st_size,
                             source.doc_id, source.format)


# -- operations ------------------------------------------------------------

def rasterize_pages(source: DocumentSource, dpi: int = DEFAULT_DPI) -> list[PageSnapshot]:
    if not 72 <= dpi <= 600:
        raise ValueError(f"dpi must be within [72, 600], got {dpi}")
    ext = _extractor(source)
    return [ext.snapshot(i, dpi) for i in range(ext.page_count())]


def parse_fast(source: DocumentSource, page_index: int) -> StrategyResult:
    return _extractor(source).fast(page_index)


def _transcribe(strategy: str, snapshot: PageSnapshot, backend: TranscriptionBackend) -> StrategyResult:
    data = backend.transcribe(snapshot.image_bytes, strategy)
    blocks = tuple(TextBlock.from_wire(b) for b in data.get("blocks", []) if str(b.get("text", "")).strip())
    tables = tuple(t for t in data.get("tables", []) if t.strip())
    return StrategyResult(strategy, blocks, (), tables)


def parse_llm(snapshot: PageSnapshot, backend: TranscriptionBackend) -> StrategyResult:
    return _transcribe("LLM", snapshot, backend)


def parse_ocr(snapshot: PageSnapshot, backend: TranscriptionBackend) -> StrategyResult:
    return _transcribe("OCR", snapshot, backend)


def _join(value: Any) -> str:
    if isinstance(value, dict):
        return "; ".join(f"{k}: {_join(v)}" for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return ", ".join(_join(v) for v in value)
    return str(value).strip()


def _flow_steps(steps: Any) -> list[str]:
    out = []
    for step in steps or []:
        if isinstance(step, dict):
            out.append(f"{step.get('from', '').strip()} → {step.get('to', '').strip()}")
        elif isinstance(step, (list, tuple)) and len(step) == 2:
            out.append(f"{str(step[0]).strip()} → {str(step[1]).strip()}")
        else:
            out.append(str(step).strip())
    return out


def describe_image(image: bytes, backend: VisionBackend, asset_id: str = "") -> ImageDescription:
    """Classify an image and compose a description suited to its content type.

    Plots list axes, axis values, legend and labels; flowcharts list their step
    relations as ``A → B``; text images carry the transcription.
    """
    image_size(image)  # raises UndecodableImage before any backend call
    data = backend.describe(image)
    ctype = data.get("content_type", "other")
    ctype = ctype if ctype in CONTENT_TYPES else "other"
    desc = " ".join(str(data.get("description", "")).split())
    transcription = data.get("transcription")
    parts: list[str] = []
    if ctype == "plot":
        parts.append("Plot.")
        for key, label in (("axes", "Axes"), ("axis_values", "Axis values"),
                           ("legend", "Legend"), ("labels", "Labels")):
            if data.get(key):
                parts.append(f"{label}: {_join(data[key])}.")
        if desc:
            parts.append(desc)
    elif ctype == "flowchart":
        parts.append("Flowchart.")
        if desc:
            parts.append(desc)
        steps = _flow_steps(data.get("steps"))
        if steps:
            parts.append("Steps: " + "; ".join(steps) + ".")
    elif ctype == "text_image":
        if not transcription:
            ctype = "other"
            parts.append(desc)
        else:
            transcription = str(transcription).strip()
            parts.append(desc or "Image containing text.")
            parts.append(f"Transcription: {' '.join(transcription.split())}")
    else:
        parts.append(desc)
    description = " ".join(p for p in parts if p).strip() or "Image without description."
    return ImageDescription(asset_id, description, ctype, transcription if ctype == "text_image" else None)


def _parse_page(source: DocumentSource, snapshot: PageSnapshot, config: ParseConfig) -> PageParseBundle:
    i = snapshot.page_index
    errors: list[str] = []
    try:
        fast = parse_fast(source, i)
    except CorruptFile as exc:
        fast = StrategyResult("FAST", error=str(exc))
    results = [fast]
    for strategy, fn, backend in (("LLM", parse_llm, config.llm), ("OCR", parse_ocr, config.ocr)):
        try:
            results.append(fn(snapshot, backend))
        except BackendError as exc:
            log.warning("%s page %d: %s strategy failed: %s", source.doc_id, i, strategy, exc)
            results.append(StrategyResult(strategy, error=f"{type(exc).__name__}: {exc}"))
    for r in results:
        if r.error:
            errors.append(f"{r.strategy}: {r.error}")
    described = []
    for asset_id, data in fast.extracted_images:
        try:
            described.append(describe_image(data, config.vision, asset_id))
        except BackendError as exc:
            errors.append(f"describe {asset_id}: {type(exc).__name__}: {exc}")
            described.append(ImageDescription(asset_id, f"Image {asset_id.rsplit('/', 1)[-1]}."))
    return PageParseBundle(i, snapshot, tuple(results), tuple(described), tuple(errors))


def parse_document(source: DocumentSource, config: ParseConfig | None = None) -> list[PageParseBundle]:
    """Run all three strategies on every page; failed strategies degrade to annotated empties."""
    config = config or ParseConfig()
    snapshots = rasterize_pages(source, config.dpi)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(lambda s: _parse_page(source, s, config), snapshots))
    return [_parse_page(source, s, config) for s in snapshots]


__all__ = [
    "ImageDescription", "PageParseBundle", "PageSnapshot", "ParseConfig", "StrategyResult",
    "TextBlock", "describe_image", "load_source", "parse_document", "parse_fast", "parse_llm",
    "parse_ocr", "rasterize_pages", "UndecodableImage",
]
