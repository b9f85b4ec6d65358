"""Rule-based replies for :class:`~ragnodes.backends.MockBackend` agents.

Each responder is a pure function of the request variables, so every mocked
pipeline run is reproducible byte for byte.
"""

from __future__ import annotations

import json
import re
from collections import Counter

from .backends import AgentRequest
from .textutil import STOPWORDS, alt_text, content_tokens, coverage, jaccard, plain_text, sentences, tokens


def respond(request: AgentRequest) -> str:
    v = request.variables
    name = request.template
    if name == "assembler":
        return assemble(v)
    if name == "metadata":
        return _metadata(v)
    if name == "questions":
        return "\n".join(_questions(v))
    if name == "summary":
        return _summary(v)
    if name == "decompose":
        return "\n".join(sentences(v["text"])) or v["text"].strip()
    if name.startswith("judge_"):
        score = coverage(v["claim"], v["evidence"])
        return json.dumps({"score": round(score, 4),
                           "rationale": f"{score:.0%} of the claim's terms appear in the evidence."})
    if name == "answer":
        return _answer(v)
    if name == "dataset":
        return _dataset(v)
    raise ValueError(f"mock agent has no behaviour for template {name!r}")


# -- assembler -------------------------------------------------------------

def _clean_blocks(result: dict | None) -> list[dict]:
    if not result:
        return []
    return [dict(b) for b in result.get("blocks", []) if b.get("text", "").strip()]


def _heading_from_markdown(block: dict) -> dict:
    m = re.match(r"^(#{1,6})\s+(.*)$", block["text"].strip())
    if m and "\n" not in block["text"].strip():
        return dict(block, text=m.group(2), role="heading", level=len(m.group(1)))
    return block


def _best_match(text: str, candidates: list[dict]) -> int | None:
    best, best_score = None, 0.0
    for i, cand in enumerate(candidates):
        score = coverage(text, cand["text"])
        if score > best_score:
            best, best_score = i, score
    return best


def _inherit_role(block: dict, references: list[dict]) -> dict:
    if block.get("role"):
        return block
    for ref in references:
        if ref.get("role") == "heading" and jaccard(block["text"], ref["text"]) >= 0.8:
            return dict(block, role="heading", level=ref.get("level") or 1)
    return block


def merge_blocks(fast: list[dict], llm: list[dict], ocr: list[dict]) -> list[dict]:
    """OCR supplies the exact text, LLM supplies block grouping and order, FAST is the fallback."""
    llm = [_heading_from_markdown(b) for b in llm]
    if ocr and llm:
        groups: dict[int, list[dict]] = {}
        last = 0
        for block in ocr:
            idx = _best_match(block["text"], llm)
            idx = last if idx is None else idx
            last = idx
            groups.setdefault(idx, []).append(block)
        merged = []
        for idx in sorted(groups):
            ref = llm[idx]
            role = ref.get("role")
            sep = "\n" if role == "list" else " "
            text = sep.join(b["text"].strip() for b in groups[idx])
            merged.append(_inherit_role({"text": text, "role": role, "level": ref.get("level")}, fast))
        return merged
    if ocr:
        return [_inherit_role(b, fast) for b in ocr]
    if llm:
        return [_inherit_role(b, fast) for b in llm]
    return fast


def render_block(block: dict) -> str:
    text = block["text"].strip()
    role = block.get("role")
    if role == "heading":
        level = min(max(int(block.get("level") or 1), 1), 6)
        return "#" * level + " " + " ".join(text.split())
    if role == "paragraph":
        return " ".join(text.split())
    # lists and unlabelled blocks are passed through as markdown
    return "\n".join(line.rstrip() for line in text.splitlines())


def assemble(v: dict) -> str:
    strategies = v.get("strategies", {})
    fast = _clean_blocks(strategies.get("FAST"))
    llm = _clean_blocks(strategies.get("LLM"))
    ocr = _clean_blocks(strategies.get("OCR"))
    parts = [render_block(b) for b in merge_blocks(fast, llm, ocr)]
    for key in ("FAST", "LLM", "OCR"):
        tables = [t.strip() for t in (strategies.get(key) or {}).get("tables", []) if t.strip()]
        if tables:
            parts.extend(tables)
            break
    for image in v.get("images", []):
        parts.append(f"![{alt_text(image['description'])}]({image['asset_id']})")
    return "\n\n".join(p for p in parts if p)


# -- metadata / contextualization -------------------------------------------

def _keywords(text: str, count: int = 3) -> list[str]:
    freq = Counter(t for t in tokens(text)
                   if len(t) >= 4 and t not in STOPWORDS and not t.isdigit())
    return [w for w, _ in sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:count]]


def _lead(text: str, n: int, limit: int = 400) -> str:
    lead = " ".join(sentences(text)[:n])
    if len(lead) > limit:
        lead = lead[:limit].rsplit(" ", 1)[0] + " ..."
    return lead


def _metadata(v: dict) -> str:
    md = v["markdown"]
    m = re.search(r"^#{1,6}\s+(.+)$", md, flags=re.MULTILINE)
    text = plain_text(md)
    topic = m.group(1).strip().lower() if m else " ".join(content_tokens(text)[:5])
    summary = _lead(text, 2) or topic
    return json.dumps({"topic": topic, "keywords": _keywords(text), "summary": summary})


def _table_columns(table_md: str) -> tuple[list[str], int]:
    rows = [r.strip() for r in table_md.strip().splitlines() if r.strip().startswith("|") or "|" in r]
    if not rows:
        return [], 0
    header = [c.strip() for c in rows[0].strip().strip("|").split("|")]
    body = [r for r in rows[1:] if not set(r.replace("|", "").strip()) <= set("-: ")]
    cols = [" ".join(c.replace("|", " ").split()) for c in header if c.strip()]
    return cols, len(body)


def _questions(v: dict) -> list[str]:
    count = max(int(v.get("count", 3)), 1)
    title = " ".join(str(v.get("title", "")).split())
    if v.get("kind") == "Table":
        cols, _ = _table_columns(v.get("content", ""))
        qs = [f"What is the {c} value in the table?" for c in cols[:count]]
        subject = f" about {title}" if title else ""
        qs = qs or [f"What information does the table{subject} show?"]
        return qs[:count]
    subject = title or "this section"
    qs = [f"What does the section '{subject}' cover?",
          f"What are the key points about {subject}?",
          f"How is {subject} described in the document?"]
    body_words = _keywords(plain_text(v.get("content", "")), 2)
    qs.extend(f"What is said about {w} in {subject}?" for w in body_words)
    return qs[:count]


def _summary(v: dict) -> str:
    kind = v.get("kind", "")
    title = " ".join(str(v.get("title", "")).split())
    content = v.get("content", "")
    if kind == "Table":
        cols, rows = _table_columns(content)
        where = f" in section '{title}'" if title else ""
        return (f"Table{where} with {rows} rows and columns: "
                f"{', '.join(cols) if cols else 'unlabelled'}.")
    text = plain_text(content)
    if kind == "Header":
        body = _lead(text, 2)
        return f"Section '{title}': {body}" if body else f"Section '{title}'."
    if kind == "Page":
        body = _lead(text, 2)
        return f"Page {title}: {body}" if body else f"Page {title} has no text content."
    body = _lead(text, 3)
    return body or "Document without text content."


# -- evaluation ------------------------------------------------------------

def _answer(v: dict) -> str:
    query = v["query"]
    contexts = v.get("contexts", [])
    if isinstance(contexts, str):
        contexts = json.loads(contexts)
    q = set(content_tokens(query))
    scored = []
    order = 0
    for ctx in contexts:
        for sent in sentences(plain_text(ctx)):
            overlap = len(q & set(tokens(sent)))
            if overlap:
                scored.append((-overlap, order, sent))
            order += 1
    if not scored:
        return "The provided context does not contain the answer."
    best = sorted(scored)[:2]
    return " ".join(s for _, _, s in sorted(best, key=lambda t: t[1]))


def _dataset(v: dict) -> str:
    md = v.get("markdown", "")
    page = v.get("page_index", 0)
    m = re.search(r"^#{1,6}\s+(.+)$", md, flags=re.MULTILINE)
    paragraphs = [p for p in plain_text(md).split("\n\n") if p.strip()]
    candidates = [s for p in paragraphs for s in sentences(p) if len(tokens(s)) >= 4]
    if not candidates:
        return json.dumps({"query": f"What is on page {page + 1}?",
                           "expected_answer": f"Page {page + 1} has no text content.",
                           "ground_truth": plain_text(md) or f"Page {page + 1} is empty."})
    sent = candidates[0]
    subject = m.group(1).strip() if m else " ".join(sent.split()[:6])
    truth = next((p for p in paragraphs if sent in " ".join(p.split())), sent)
    return json.dumps({"query": f"What does the document say about {subject}?",
                       "expected_answer": sent,
                       "ground_truth": " ".join(truth.split())})
