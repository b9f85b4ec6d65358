"""Small text helpers shared by the mock agents, splitters and judges."""

from __future__ import annotations

import re

_WORD = re.compile(r"\w+", re.UNICODE)
# Sentence end: terminal punctuation, optional closing quote/bracket, then whitespace.
_SENTENCE_END = re.compile(r"(?<=[.!?])[\"')\]]*\s+")

STOPWORDS = frozenset("""
a an and are as at be been being but by can could did do does for from had has have
how i if in into is it its itself me more most my no not of on or our out over own
same she should so some such than that the their them then there these they this those
through to too under until up very was we were what when where which while who whom why
will with would you your about above after again against all am any because before
below between both down during each few further he her here hers him his just nor off
once only other ours ourselves s t don now
""".split())


def tokens(text: str) -> list[str]:
    return [t.lower() for t in _WORD.findall(text)]


def content_tokens(text: str) -> list[str]:
    toks = tokens(text)
    kept = [t for t in toks if t not in STOPWORDS]
    return kept or toks


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Spans of sentences; each span includes its trailing whitespace so spans tile ``text``."""
    spans = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        spans.append((start, m.end()))
        start = m.end()
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def sentences(text: str) -> list[str]:
    flat = " ".join(text.split())
    out = [flat[a:b].strip() for a, b in sentence_spans(flat)]
    return [s for s in out if s]


_MD_IMAGE = re.compile(r"!\[([^\]]*)\]\([^)]*\)")
_MD_LINK = re.compile(r"\[([^\]]*)\]\([^)]*\)")


def plain_text(markdown: str) -> str:
    """Rough markdown-to-text used by mock agents: drop markers, keep words."""
    lines = []
    for line in markdown.splitlines():
        s = line.strip()
        if not s or set(s) <= set("-=*_|: "):
            lines.append("")
            continue
        s = _MD_IMAGE.sub(r"\1", s)
        s = _MD_LINK.sub(r"\1", s)
        s = re.sub(r"^#{1,6}\s*", "", s)
        s = re.sub(r"^([-*+]|\d+[.)])\s+", "", s)
        s = s.replace("|", " ").replace("**", "").replace("`", "")
        lines.append(" ".join(s.split()))
    text = "\n".join(lines)
    return re.sub(r"\n{3,}", "\n\n", text).strip()


def coverage(claim: str, evidence: str) -> float:
    """Fraction of the claim's content tokens that occur in the evidence."""
    claim_toks = set(content_tokens(claim))
    if not claim_toks:
        return 0.0
    ev = set(tokens(evidence))
    return len(claim_toks & ev) / len(claim_toks)


def jaccard(a: str, b: str) -> float:
    sa, sb = set(tokens(a)), set(tokens(b))
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def alt_text(description: str) -> str:
    """Description flattened to one line and escaped for use as markdown image alt text."""
    text = " ".join(description.split())
    return text.replace("\\", "\\\\").replace("[", "\\[").replace("]", "\\]")
