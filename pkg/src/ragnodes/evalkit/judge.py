"""LLM-as-judge calls on the six-value score scale, and statement decomposition."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from ..backends import Agent, AgentRequest
from ..errors import BackendUnavailable, JudgeUnavailable, UnparseableVerdict

ALLOWED_SCORES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

_NUMBER = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*$")
_FENCE = re.compile(r"^```(?:json)?\s*\n(.*)\n```\s*$", re.DOTALL)
_BULLET = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+")


def snap(raw: float | int | str | Decimal) -> float:
    """Nearest member of the score scale; a value halfway between two members goes down.

    The value is read in decimal (0.45 means 0.45, not the binary double just
    below it) so halfway cases are decided on the number the judge wrote.
    """
    try:
        d = raw if isinstance(raw, Decimal) else Decimal(repr(raw) if isinstance(raw, float) else str(raw))
    except InvalidOperation:
        raise ValueError(f"score {raw!r} is not a number") from None
    if not d.is_finite() or d < 0 or d > 1:
        raise ValueError(f"score {raw!r} outside [0, 1]")
    steps = d * 5
    lower = math.floor(steps)
    idx = lower if steps - lower <= Decimal("0.5") else lower + 1
    return ALLOWED_SCORES[min(int(idx), 5)]


@dataclass(frozen=True)
class JudgeScore:
    value: float
    rationale: str = ""
    raw: float | None = None

    def __post_init__(self):
        if self.value not in ALLOWED_SCORES:
            raise ValueError(f"judge score {self.value!r} not in {ALLOWED_SCORES}")


def parse_verdict(reply: str) -> tuple[str, str]:
    """(raw score text, rationale) from a judge reply: JSON object or a bare number."""
    text = reply.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    bare = _NUMBER.match(text)
    if bare:
        return bare.group(1), ""
    data = json.loads(text, parse_float=str, parse_int=str)
    if not isinstance(data, dict) or "score" not in data:
        raise ValueError("verdict needs a 'score' field")
    score = data["score"]
    if isinstance(score, bool) or not isinstance(score, str):
        raise TypeError("score must be a number")
    rationale = data.get("rationale", "")
    return score, rationale if isinstance(rationale, str) else str(rationale)


def _verdict(reply: str) -> JudgeScore:
    raw, rationale = parse_verdict(reply)
    return JudgeScore(snap(Decimal(raw)), rationale, float(raw))


def _call(judge: Agent, request: AgentRequest) -> str:
    try:
        return judge.complete(request).text
    except JudgeUnavailable:
        raise
    except BackendUnavailable as exc:
        raise JudgeUnavailable(str(exc)) from exc


def judge_request(template: str, claim: str, evidence: str) -> AgentRequest:
    return AgentRequest("judge", template, {"claim": claim, "evidence": evidence})


def judge_score(request: AgentRequest, judge: Agent) -> JudgeScore:
    """Ask the judge; an unreadable verdict gets one repair retry before UnparseableVerdict."""
    reply = _call(judge, request)
    try:
        return _verdict(reply)
    except (ValueError, TypeError, InvalidOperation) as exc:
        reply = _call(judge, request.with_repair(reply, str(exc)))
        try:
            return _verdict(reply)
        except (ValueError, TypeError, InvalidOperation) as exc2:
            raise UnparseableVerdict(f"{request.template}: {exc2}") from exc2


def score_pair(template: str, claim: str, evidence: str, judge: Agent) -> float:
    return judge_score(judge_request(template, claim, evidence), judge).value


def decompose_statements(text: str, judge: Agent) -> list[str]:
    """Split text into standalone statements via the judge; falls back to the whole text."""
    if not text or not text.strip():
        raise ValueError("cannot decompose an empty text")
    reply = _call(judge, AgentRequest("judge", "decompose", {"text": text}))
    statements = [_BULLET.sub("", line).strip() for line in reply.splitlines()]
    statements = [s for s in statements if s]
    return statements or [" ".join(text.split())]


__all__ = ["ALLOWED_SCORES", "JudgeScore", "decompose_statements",
           "judge_request", "judge_score", "parse_verdict", "score_pair", "snap"]
