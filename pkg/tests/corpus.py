"""Synthetic test documents built with the real format libraries."""

from __future__ import annotations

import io
import random
from pathlib import Path

WORDS = ("retrieval ingestion vector graph header table image page document summary "
         "question answer chunk latency token embedding context metric judge score "
         "parser layout scan figure caption engine model index query ranking").split()


def png(width: int = 120, height: int = 80, color=(200, 30, 30)) -> bytes:
    from PIL import Image, ImageDraw

    img = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    draw.rectangle([10, 10, width - 10, height - 10], outline=color, width=3)
    draw.line([10, height - 10, width - 10, 10], fill=color, width=2)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def sentence(rng: random.Random, n: int | None = None) -> str:
    words = [rng.choice(WORDS) for _ in range(n or rng.randint(6, 14))]
    return " ".join(words).capitalize() + "."


def paragraph(rng: random.Random, sentences: int | None = None) -> str:
    return " ".join(sentence(rng) for _ in range(sentences or rng.randint(2, 4)))


# Page layout: list of blocks ("h1"|"h2"|"p"|"table"|"image", payload)

def sample_pages(seed: int = 0, pages: int = 3) -> list[list[tuple]]:
    rng = random.Random(seed)
    out = []
    for i in range(pages):
        blocks = [("h1", f"Section {i + 1} {rng.choice(WORDS).title()}"), ("p", paragraph(rng))]
        if i % 2 == 0:
            blocks += [("h2", f"Scores {rng.choice(WORDS)}"),
                       ("table", [["Category", "Score"], ["Adult occupant", "91"], ["Child occupant", "87"]])]
        if i == 1:
            blocks += [("image", png())]
        blocks += [("p", paragraph(rng))]
        out.append(blocks)
    return out


def make_pdf(path: Path, pages: list[list[tuple]]) -> Path:
    import pymupdf

    doc = pymupdf.open()
    for blocks in pages:
        page = doc.new_page(width=595, height=842)
        y = 72.0
        for kind, payload in blocks:
            if kind in ("h1", "h2"):
                size = 20 if kind == "h1" else 15
                page.insert_text((72, y + size), payload, fontsize=size, fontname="hebo")
                y += size + 16
            elif kind == "p":
                rect = pymupdf.Rect(72, y, 523, y + 120)
                rest = page.insert_textbox(rect, payload, fontsize=10, fontname="helv")
                used = 120 - rest if rest >= 0 else 120
                y += used + 14
            elif kind == "table":
                col_w, row_h = 150.0, 20.0
                for r, row in enumerate(payload):
                    for c, cell in enumerate(row):
                        cell_rect = pymupdf.Rect(72 + c * col_w, y + r * row_h,
                                                 72 + (c + 1) * col_w, y + (r + 1) * row_h)
                        page.draw_rect(cell_rect, color=(0, 0, 0), width=0.8)
                        page.insert_text((cell_rect.x0 + 4, cell_rect.y1 - 6), cell, fontsize=10,
                                         fontname="helv")
                y += row_h * len(payload) + 16
            elif kind == "image":
                page.insert_image(pymupdf.Rect(72, y, 232, y + 107), stream=payload)
                y += 120
    doc.save(str(path), deflate=True, no_new_id=True)
    doc.close()
    return path


def make_docx(path: Path, pages: list[list[tuple]]) -> Path:
    import docx
    from docx.enum.text import WD_BREAK
    from docx.shared import Inches

    d = docx.Document()
    for i, blocks in enumerate(pages):
        if i:
            d.add_paragraph().add_run().add_break(WD_BREAK.PAGE)
        for kind, payload in blocks:
            if kind in ("h1", "h2"):
                d.add_heading(payload, level=1 if kind == "h1" else 2)
            elif kind == "p":
                d.add_paragraph(payload)
            elif kind == "table":
                t = d.add_table(rows=len(payload), cols=len(payload[0]))
                for r, row in enumerate(payload):
                    for c, cell in enumerate(row):
                        t.cell(r, c).text = cell
            elif kind == "image":
                d.add_picture(io.BytesIO(payload), width=Inches(1.5))
    d.core_properties.title = path.stem
    d.save(str(path))
    return path


def make_pptx(path: Path, pages: list[list[tuple]]) -> Path:
    import pptx
    from pptx.util import Inches, Pt

    prs = pptx.Presentation()
    for blocks in pages:
        slide = prs.slides.add_slide(prs.slide_layouts[5])  # title only
        top = 1.5
        for kind, payload in blocks:
            if kind == "h1":
                slide.shapes.title.text = payload
            elif kind in ("h2", "p"):
                box = slide.shapes.add_textbox(Inches(0.5), Inches(top), Inches(9), Inches(0.8))
                box.text_frame.text = payload
                box.text_frame.paragraphs[0].runs[0].font.size = Pt(20 if kind == "h2" else 12)
                top += 0.9
            elif kind == "table":
                shape = slide.shapes.add_table(len(payload), len(payload[0]), Inches(0.5), Inches(top),
                                               Inches(6), Inches(0.3 * len(payload)))
                for r, row in enumerate(payload):
                    for c, cell in enumerate(row):
                        shape.table.cell(r, c).text = cell
                top += 0.3 * len(payload) + 0.3
            elif kind == "image":
                slide.shapes.add_picture(io.BytesIO(payload), Inches(6.5), Inches(1.5), Inches(1.5))
    prs.save(str(path))
    return path


def make_corpus(root: Path, seed: int = 0) -> list[Path]:
    """A PDF, a DOCX and a PPTX with 3 pages each."""
    root.mkdir(parents=True, exist_ok=True)
    return [make_pdf(root / "report.pdf", sample_pages(seed)),
            make_docx(root / "notes.docx", sample_pages(seed + 1)),
            make_pptx(root / "slides.pptx", sample_pages(seed + 2))]


def random_markdown_page(rng: random.Random) -> str:
    """A page of mixed CommonMark: headings of varied depth, paragraphs, lists, tables, images."""
    parts = []
    for _ in range(rng.randint(0, 9)):
        kind = rng.choice(["atx", "atx", "para", "para", "para", "ul", "ol", "table", "image",
                           "quote", "code", "setext", "rule", "mixed"])
        if kind == "atx":
            parts.append("#" * rng.randint(1, 6) + " " + sentence(rng, rng.randint(1, 5)).rstrip("."))
        elif kind == "setext":
            parts.append(sentence(rng, 3).rstrip(".") + "\n" + rng.choice(["===", "---"]))
        elif kind == "para":
            text = paragraph(rng)
            if rng.random() < 0.3:
                words = text.split()
                cut = rng.randint(1, len(words))
                text = " ".join(words[:cut]) + "\n" + " ".join(words[cut:])
            parts.append(text)
        elif kind == "ul":
            parts.append("\n".join(f"- {sentence(rng, 4)}" for _ in range(rng.randint(1, 4))))
        elif kind == "ol":
            parts.append("\n".join(f"{i + 1}. {sentence(rng, 4)}" for i in range(rng.randint(1, 4))))
        elif kind == "table":
            cols = rng.randint(1, 4)
            rows = [" | ".join(rng.choice(WORDS) for _ in range(cols)) for _ in range(rng.randint(1, 4))]
            parts.append("| " + " | ".join(f"c{i}" for i in range(cols)) + " |\n|"
                         + "---|" * cols + "\n" + "\n".join(f"| {r} |" for r in rows))
        elif kind == "image":
            alt = sentence(rng, 4).rstrip(".") if rng.random() < 0.9 else ""
            parts.append(f"![{alt}](img_{rng.randint(0, 99)}.png)")
        elif kind == "quote":
            parts.append("> " + sentence(rng))
        elif kind == "code":
            parts.append("```\n" + sentence(rng) + "\n```")
        elif kind == "rule":
            parts.append("---")
        elif kind == "mixed":
            parts.append(sentence(rng) + f" ![inline](img_{rng.randint(0, 9)}.png) " + sentence(rng))
    return "\n\n".join(parts)


def long_text(rng: random.Random, chars: int) -> str:
    paras = []
    total = 0
    while total < chars:
        p = paragraph(rng, rng.randint(2, 8))
        if rng.random() < 0.2:
            p = p.replace(". ", ".\n", 1)
        paras.append(p)
        total += len(p) + 2
    return "\n\n".join(paras)
