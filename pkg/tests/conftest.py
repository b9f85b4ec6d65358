from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ragnodes import kernels  # noqa: E402
from ragnodes.backends import AgentResponse, MockBackend, MockEmbedding  # noqa: E402


@pytest.fixture
def mock():
    return MockBackend()


@pytest.fixture
def embedder():
    return MockEmbedding()


@pytest.fixture(params=kernels.available_backends())
def kernel_impl(request, monkeypatch):
    """Runs a test once per kernel implementation, patched into the package namespace."""
    impl = kernels.implementation(request.param)
    for name in ("scores", "topk", "mean_of_means", "contextual_precision"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


class ScriptedAgent:
    """Replies from a list in order, then defers to the mock; records every request."""

    def __init__(self, replies=(), fallback=None):
        self.replies = list(replies)
        self.requests = []
        self.fallback = fallback or MockBackend()

    def complete(self, request):
        self.requests.append(request)
        if self.replies:
            reply = self.replies.pop(0)
            if isinstance(reply, Exception):
                raise reply
            return AgentResponse(reply)
        return self.fallback.complete(request)


@pytest.fixture
def scripted():
    return ScriptedAgent


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    import corpus

    root = tmp_path_factory.mktemp("corpus")
    corpus.make_corpus(root)
    return root


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
