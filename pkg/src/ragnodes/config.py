"""Pipeline configuration: TOML file, environment overrides for credentials, backend wiring."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends import HttpBackend, MockBackend, MockEmbedding
from .index import METADATA_LIMIT_BYTES
from .nodegraph import SplitConfig
from .parsing import ParseConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SLOTS = ("llm", "ocr", "embedding", "judge", "answer")
MOCK = "mock"


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = MOCK
    api_key: str | None = None
    model: str | None = None
    timeout: float = 60.0
    max_in_flight: int = 4

    @property
    def is_mock(self) -> bool:
        return self.endpoint == MOCK


@dataclass(frozen=True)
class PipelineConfig:
    backends: dict[str, BackendConfig] = field(default_factory=lambda: {s: BackendConfig() for s in SLOTS})
    split: SplitConfig = field(default_factory=SplitConfig)
    dpi: int = 150
    k: int = 5
    namespace: str = "default"
    metadata_limit_bytes: int = METADATA_LIMIT_BYTES
    out_dir: Path = Path("out")
    fixtures: Path | None = None
    jobs: int = 1
    embedding_dim: int = 256
    questions_per_node: int = 3
    prefilter_m: int = 3
    relevance_threshold: float = 0.6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        missing = [s for s in SLOTS if s not in self.backends or not self.backends[s].endpoint]
        if missing:
            raise ValueError(f"backend slots without an endpoint: {', '.join(missing)}")

    def with_overrides(self, **changes) -> PipelineConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def mock_all(self) -> PipelineConfig:
        return replace(self, backends={s: BackendConfig() for s in SLOTS})


def _env_backend(slot: str, base: BackendConfig, env: dict[str, str]) -> BackendConfig:
    prefix = f"RAGNODES_{slot.upper()}_"
    changes = {}
    for name in ("endpoint", "api_key", "model"):
        value = env.get(prefix + name.upper())
        if value:
            changes[name] = value
    return replace(base, **changes) if changes else base


def load_config(path: Path | str | None = None, env: dict[str, str] | None = None) -> PipelineConfig:
    """Read a TOML config (all keys optional); ``RAGNODES_<SLOT>_{ENDPOINT,API_KEY,MODEL}`` override it."""
    env = dict(os.environ) if env is None else env
    data: dict = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        with path.open("rb") as fh:
            data = tomllib.load(fh)
        base = path.parent
    raw_backends = data.pop("backends", {})
    unknown = sorted(set(raw_backends) - set(SLOTS))
    if unknown:
        raise ValueError(f"unknown backend slots: {', '.join(unknown)}")
    backends = {s: _env_backend(s, BackendConfig(**raw_backends.get(s, {})), env) for s in SLOTS}
    split = SplitConfig(**data.pop("split", {}))
    kwargs = dict(data)
    for key in ("out_dir", "fixtures"):
        if kwargs.get(key) is not None:
            p = Path(kwargs[key])
            kwargs[key] = p if p.is_absolute() else base / p
    return PipelineConfig(backends=backends, split=split, **kwargs)


@dataclass
class Backends:
    """Live backend objects for every slot."""
    llm: object
    ocr: object
    vision: object
    agent: object
    embedding: object
    judge: object
    answer: object

    def parse_config(self, cfg: PipelineConfig) -> ParseConfig:
        return ParseConfig(dpi=cfg.dpi, jobs=cfg.jobs, llm=self.llm, ocr=self.ocr, vision=self.vision)


def _http(bc: BackendConfig, **extra) -> HttpBackend:
    return HttpBackend(bc.endpoint, api_key=bc.api_key, model=bc.model, timeout=bc.timeout,
                       max_in_flight=bc.max_in_flight, **extra)


def build_backends(cfg: PipelineConfig) -> Backends:
    mock = MockBackend(cfg.fixtures)

    def slot(name: str):
        bc = cfg.backends[name]
        return mock if bc.is_mock else _http(bc)

    emb = cfg.backends["embedding"]
    embedding = MockEmbedding(cfg.embedding_dim) if emb.is_mock else _http(emb, dim=cfg.embedding_dim)
    llm = slot("llm")
    return Backends(llm=llm, ocr=slot("ocr"), vision=llm, agent=llm, embedding=embedding,
                    judge=slot("judge"), answer=slot("answer"))
