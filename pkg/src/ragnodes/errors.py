"""Exception hierarchy shared by every stage of the ingestion and evaluation pipeline."""

from __future__ import annotations


class RagNodesError(Exception):
    """Base class for all errors raised by ragnodes."""


# graph
class GraphError(RagNodesError):
    pass


class UnknownNode(GraphError, KeyError):
    pass


class IllegalChildOrigin(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class GraphInvariantViolation(GraphError):
    def __init__(self, violations):
        self.violations = list(violations)
        preview = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} graph violation(s): {preview}")


# document parsing
class ParseError(RagNodesError):
    pass


class UnsupportedFormat(ParseError):
    pass


class CorruptFile(ParseError):
    pass


class NonContiguousPages(ParseError):
    pass


class MalformedMarkdown(ParseError):
    pass


# backends
class BackendError(RagNodesError):
    pass


class BackendUnavailable(BackendError):
    pass


class BackendRejectedInput(BackendError):
    pass


class UndecodableImage(BackendError):
    pass


class InputTooLong(BackendError):
    pass


class AgentUnavailable(BackendUnavailable):
    pass


class JudgeUnavailable(AgentUnavailable):
    pass


class AgentMalformedOutput(BackendError):
    pass


class UnparseableVerdict(AgentMalformedOutput):
    pass


# node contextualization / embedding sources
class WrongNodeKind(RagNodesError, TypeError):
    pass


class MissingContextualization(RagNodesError):
    pass


class MissingDescription(RagNodesError):
    pass


# vector index
class VectorIndexError(RagNodesError):
    pass


class EmptyIndex(VectorIndexError):
    pass


class DimensionMismatch(VectorIndexError):
    pass


class MetadataTooLarge(VectorIndexError):
    pass


class UnknownDocument(VectorIndexError):
    pass


# evaluation
class EvalError(RagNodesError):
    pass


class EmptyContexts(EvalError):
    pass


class MissingExpectedAnswer(EvalError):
    pass
