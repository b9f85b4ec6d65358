"""Page assembly, document concatenation and metadata extraction."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from markdown_it import MarkdownIt

from .backends import Agent, AgentRequest
from .errors import AgentMalformedOutput, NonContiguousPages
from .model import DocumentMetadata
from .parsing import PageParseBundle
from .textutil import alt_text

log = logging.getLogger(__name__)

PAGE_SEPARATOR = "\n\n---\n\n"

_md = MarkdownIt("commonmark").enable("table")


def markdown_parser() -> MarkdownIt:
    return _md


@dataclass(frozen=True)
class PageMarkdown:
    page_index: int
    markdown: str
    image_manifest: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class DocumentMarkdown:
    markdown: str
    page_offsets: tuple[int, ...] = ()

    def page(self, i: int) -> str:
        start = self.page_offsets[i]
        if i + 1 < len(self.page_offsets):
            return self.markdown[start:self.page_offsets[i + 1] - len(PAGE_SEPARATOR)]
        return self.markdown[start:]


def image_refs(markdown: str) -> list[tuple[str, str]]:
    """(alt, src) of every image element, in document order."""
    refs = []

    def visit(tokens):
        for tok in tokens:
            if tok.type == "image":
                refs.append((tok.content, tok.attrs.get("src", "")))
            if tok.children:
                visit(tok.children)

    visit(_md.parse(markdown))
    return refs


_FENCE = re.compile(r"^```(?:markdown|md)?\s*\n(.*)\n```\s*$", re.DOTALL)


def normalize_markdown(markdown: str) -> str:
    """Canonical page markdown: LF endings, ATX headings, no trailing blanks or wrapping fence."""
    text = markdown.replace("\r\n", "\n").replace("\r", "\n").strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    lines = [line.rstrip() for line in text.split("\n")]
    tokens = _md.parse("\n".join(lines))
    setext = [(tokens[i].map, int(tokens[i].tag[1]), tokens[i + 1].content)
              for i, tok in enumerate(tokens)
              if tok.type == "heading_open" and tok.markup in ("=", "-") and tok.map and tok.level == 0]
    for (start, end), level, content in reversed(setext):
        lines[start:end] = ["#" * level + " " + " ".join(content.split())]
    return "\n".join(lines).strip("\n")


def _assembler_request(bundle: PageParseBundle) -> AgentRequest:
    variables = {
        "page_index": bundle.page_index,
        "strategies": {r.strategy: r.to_wire() for r in bundle.results},
        "images": [{"asset_id": d.asset_id, "description": d.description,
                    "content_type": d.content_type} for d in bundle.described_images],
    }
    return AgentRequest("assembler", "assembler", variables, image=bundle.snapshot.image_bytes)


def _check_page(reply: str, known: dict[str, str], has_content: bool) -> str:
    markdown = normalize_markdown(reply)
    if not markdown and has_content:
        raise ValueError("empty reply for a page with extracted content")
    unknown = sorted({src for _, src in image_refs(markdown) if src not in known})
    if unknown:
        raise ValueError(f"reply references unknown images: {', '.join(unknown)}")
    return markdown


def complete_with_repair(agent: Agent, request: AgentRequest, check, what: str):
    """Call the agent and validate the reply with ``check``; one repair retry, then AgentMalformedOutput."""
    reply = agent.complete(request).text
    try:
        return check(reply)
    except (ValueError, TypeError, KeyError) as exc:
        log.info("%s reply rejected (%s); retrying once", what, exc)
        reply = agent.complete(request.with_repair(reply, str(exc))).text
        try:
            return check(reply)
        except (ValueError, TypeError, KeyError) as exc2:
            raise AgentMalformedOutput(f"{what}: {exc2}") from exc2


def assemble_page(bundle: PageParseBundle, agent: Agent) -> PageMarkdown:
    known = {d.asset_id: d.description for d in bundle.described_images}
    has_content = bool(known) or any(r.text_blocks or r.table_fragments for r in bundle.results)
    markdown = complete_with_repair(agent, _assembler_request(bundle),
                            lambda r: _check_page(r, known, has_content),
                            f"assembler page {bundle.page_index}")
    present = {src for _, src in image_refs(markdown)}
    missing = [a for a in known if a not in present]
    if missing:
        extra = "\n\n".join(f"![{alt_text(known[a])}]({a})" for a in missing)
        markdown = f"{markdown}\n\n{extra}" if markdown else extra
    manifest, seen = [], set()
    for _, src in image_refs(markdown):
        if src not in seen:
            seen.add(src)
            manifest.append((src, known[src]))
    return PageMarkdown(bundle.page_index, markdown, tuple(manifest))


def concatenate_document(pages: Iterable[PageMarkdown]) -> DocumentMarkdown:
    pages = sorted(pages, key=lambda p: p.page_index)
    for a, b in zip(pages, pages[1:]):
        if b.page_index != a.page_index + 1:
            raise NonContiguousPages(f"page {a.page_index} is followed by page {b.page_index}")
    offsets, pos = [], 0
    for i, page in enumerate(pages):
        if i:
            pos += len(PAGE_SEPARATOR)
        offsets.append(pos)
        pos += len(page.markdown)
    return DocumentMarkdown(PAGE_SEPARATOR.join(p.markdown for p in pages), tuple(offsets))


_JSON_FENCE = re.compile(r"^```(?:json)?\s*\n(.*)\n```\s*$", re.DOTALL)


def parse_metadata_reply(reply: str) -> tuple[str, list[str], str]:
    text = reply.strip()
    m = _JSON_FENCE.match(text)
    if m:
        text = m.group(1)
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("metadata reply is not a JSON object")
    topic, keywords, summary = data["topic"], data.get("keywords", []), data["summary"]
    if not isinstance(topic, str) or not isinstance(summary, str):
        raise TypeError("topic and summary must be strings")
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise TypeError("keywords must be a list of strings")
    return topic.strip(), [k.strip() for k in keywords if k.strip()], summary.strip()


def extract_metadata(doc_md: DocumentMarkdown, native: dict[str, str], agent: Agent,
                     max_chars: int = 200_000) -> DocumentMetadata:
    if not doc_md.markdown.strip():
        raise ValueError("document markdown is empty")
    request = AgentRequest("metadata", "metadata", {"markdown": doc_md.markdown[:max_chars]})
    topic, keywords, summary = complete_with_repair(agent, request, parse_metadata_reply, "metadata")
    return DocumentMetadata(topic=topic, keywords=keywords, summary=summary, native=dict(native))


def write_artifacts(out_dir: Path | str, doc_id: str, bundles: list[PageParseBundle],
                    pages: list[PageMarkdown], doc_md: DocumentMarkdown,
                    metadata: DocumentMetadata) -> Path:
    """Write ``<doc_id>/page_<n>.md``, ``document.md``, ``metadata.json``, assets and snapshots."""
    root = Path(out_dir) / doc_id
    (root / "assets").mkdir(parents=True, exist_ok=True)
    (root / "snapshots").mkdir(exist_ok=True)
    for page in pages:
        (root / f"page_{page.page_index}.md").write_text(page.markdown + "\n", encoding="utf-8")
    (root / "document.md").write_text(doc_md.markdown + "\n", encoding="utf-8")
    (root / "metadata.json").write_text(metadata.to_json() + "\n", encoding="utf-8")
    for bundle in bundles:
        (root / "snapshots" / f"page_{bundle.page_index}.png").write_bytes(bundle.snapshot.image_bytes)
        for asset_id, data in bundle.result("FAST").extracted_images:
            (root / "assets" / asset_id.rsplit("/", 1)[-1]).write_bytes(data)
    return root
