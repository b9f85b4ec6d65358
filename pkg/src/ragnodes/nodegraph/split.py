"""Split one page of markdown into typed nodes with parent/child and sibling links."""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass

from ..assembler import PageMarkdown, markdown_parser
from ..errors import MalformedMarkdown
from ..model import Node, NodeGraph, NodeKind, RelKind, link, new_node_id

# Characters that may remain outside every content span: heading markers,
# setext underlines, thematic breaks and whitespace.
STRUCTURAL_CHARS = frozenset(" \t\n#=-*_")

_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f]")
_ATX_OPEN = re.compile(r"^ {0,3}#{1,6}(?:[ \t]+|$)")

_TEXT_BLOCKS = {
    "paragraph_open", "bullet_list_open", "ordered_list_open", "blockquote_open",
    "fence", "code_block", "html_block", "table_open",
}


@dataclass(frozen=True)
class _Item:
    start: int
    end: int
    kind: NodeKind
    content: str
    level: int | None = None
    image_ref: str | None = None


class _Lines:
    def __init__(self, text: str):
        self.text = text
        self.starts = [0]
        for m in re.finditer("\n", text):
            self.starts.append(m.end())

    def start(self, line: int) -> int:
        return self.starts[line] if line < len(self.starts) else len(self.text)

    def end(self, line: int) -> int:
        """Offset of the end of ``line`` (before its newline)."""
        if line + 1 < len(self.starts):
            return self.starts[line + 1] - 1
        return len(self.text)

    def region(self, first: int, last: int, keep_indent: bool = False) -> tuple[int, int]:
        a, b = self.start(first), self.end(last)
        chunk = self.text[a:b]
        if not keep_indent:
            a += len(chunk) - len(chunk.lstrip())
        return a, a + len(self.text[a:b].rstrip())

    def line_of(self, offset: int) -> int:
        return bisect.bisect_right(self.starts, offset) - 1


def _heading_item(lines: _Lines, tok, inline) -> _Item | None:
    title = inline.content.strip()
    if not title:
        return None
    level = int(tok.tag[1])
    first, last = tok.map[0], tok.map[1] - 1
    if tok.markup in ("=", "-"):
        a, b = lines.region(first, last - 1)
        return _Item(a, b, NodeKind.HEADER, " ".join(title.split()), level=level)
    line_start = lines.start(first)
    line = lines.text[line_start:lines.end(first)]
    m = _ATX_OPEN.match(line)
    pos = line.find(title, m.end() if m else 0)
    if pos < 0:
        pos = m.end() if m else 0
    a = line_start + pos
    return _Item(a, a + len(title), NodeKind.HEADER, title, level=level)


def _image_only(inline) -> list:
    """Image tokens of a paragraph that holds nothing but images, else []."""
    images = []
    for child in inline.children or []:
        if child.type == "image":
            images.append(child)
        elif child.type in ("softbreak", "hardbreak") or (child.type == "text" and not child.content.strip()):
            continue
        else:
            return []
    return images


def _image_items(text: str, a: int, b: int, images) -> list[_Item]:
    starts = []
    pos = a
    for _ in images:
        found = text.find("![", pos, b)
        if found < 0:
            return []
        starts.append(found)
        pos = found + 2
    items = []
    for i, img in enumerate(images):
        s = starts[i]
        e = starts[i + 1] if i + 1 < len(starts) else b
        e = s + len(text[s:e].rstrip())
        src = img.attrs.get("src", "")
        alt = " ".join(img.content.split()) or f"Image {src}"
        items.append(_Item(s, e, NodeKind.IMAGE, alt, image_ref=src))
    return items


def _block_items(text: str) -> list[_Item]:
    lines = _Lines(text)
    tokens = markdown_parser().parse(text)
    items: list[_Item] = []
    for i, tok in enumerate(tokens):
        if tok.level != 0 or tok.map is None or tok.nesting == -1:
            continue
        first, last = tok.map[0], tok.map[1] - 1
        if tok.type == "heading_open":
            item = _heading_item(lines, tok, tokens[i + 1])
            if item:
                items.append(item)
        elif tok.type in _TEXT_BLOCKS:
            a, b = lines.region(first, last, keep_indent=tok.type == "code_block")
            if a >= b:
                continue
            if tok.type == "paragraph_open":
                images = _image_only(tokens[i + 1])
                image_items = _image_items(text, a, b, images) if images else []
                if image_items:
                    items.extend(image_items)
                    continue
            kind = NodeKind.TABLE if tok.type == "table_open" else NodeKind.TEXT
            items.append(_Item(a, b, kind, text[a:b]))
    return items


def _gap_items(text: str, items: list[_Item]) -> list[_Item]:
    """Text items for any non-structural source the block parser produced no token for
    (link reference definitions, for instance)."""
    covered = sorted((it.start, it.end) for it in items)
    gaps, pos = [], 0
    for a, b in covered:
        if a > pos:
            gaps.append((pos, a))
        pos = max(pos, b)
    if pos < len(text):
        gaps.append((pos, len(text)))
    extra = []
    for a, b in gaps:
        run_start = None
        offset = a
        for line in text[a:b].split("\n") + [None]:
            if line is not None and set(line) - STRUCTURAL_CHARS:
                if run_start is None:
                    run_start = offset
                run_end = offset + len(line)
            elif run_start is not None:
                s = run_start + (len(text[run_start:run_end]) - len(text[run_start:run_end].lstrip()))
                e = s + len(text[s:run_end].rstrip())
                extra.append(_Item(s, e, NodeKind.TEXT, text[s:e]))
                run_start = None
            if line is not None:
                offset += len(line) + 1
    return extra


def split_markdown(page_md: PageMarkdown | str, doc_id: str, page_index: int | None = None) -> NodeGraph:
    """Parse page markdown into a fragment graph (no Page/Document nodes yet).

    Every content node becomes a child of the nearest preceding header of lower
    level; nodes without such a header are left top-level for the Page node to
    adopt. Siblings are chained next/previous in document order.
    """
    if isinstance(page_md, PageMarkdown):
        text, page_index = page_md.markdown, page_md.page_index
    else:
        text = page_md
    if not isinstance(text, str):
        raise MalformedMarkdown(f"expected str, got {type(text).__name__}")
    bad = _CONTROL.search(text)
    if bad:
        raise MalformedMarkdown(f"control character {bad.group()!r} at offset {bad.start()}")
    page_index = page_index or 0

    items = _block_items(text)
    items = sorted(items + _gap_items(text, items), key=lambda it: it.start)

    scope = f"{doc_id}/p{page_index}"
    graph = NodeGraph(root=None)
    ordinals: dict[NodeKind, int] = {}
    stack: list[tuple[int, str]] = []
    last_child: dict[str | None, str] = {}
    for it in items:
        ordinal = ordinals.get(it.kind, 0)
        ordinals[it.kind] = ordinal + 1
        node = Node(new_node_id(scope, it.kind, ordinal), it.kind, it.content, level=it.level,
                    image_ref=it.image_ref, page_index=page_index, char_span=(it.start, it.end))
        if it.kind == NodeKind.HEADER:
            while stack and stack[-1][0] >= it.level:
                stack.pop()
        parent = stack[-1][1] if stack else None
        graph.add_node(node)
        if parent is not None:
            link(graph, parent, node.node_id, RelKind.CHILD)
        prev = last_child.get(parent)
        if prev is not None:
            link(graph, prev, node.node_id, RelKind.NEXT)
        last_child[parent] = node.node_id
        if it.kind == NodeKind.HEADER:
            stack.append((it.level, node.node_id))
    return graph


def top_level(fragment: NodeGraph) -> list[str]:
    """Fragment nodes without a parent, in document order."""
    return [nid for nid in fragment.nodes if fragment.parent(nid) is None]


def uncovered(text: str, fragment: NodeGraph) -> list[tuple[int, int]]:
    """Character ranges of ``text`` not covered by any content node's char_span."""
    spans = sorted(n.char_span for n in fragment.nodes.values() if n.char_span)
    out, pos = [], 0
    for a, b in spans:
        if a > pos:
            out.append((pos, a))
        pos = max(pos, b)
    if pos < len(text):
        out.append((pos, len(text)))
    return out
