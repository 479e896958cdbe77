"""Extractor configuration."""
from __future__ import annotations

from dataclasses import dataclass

POOLING_MODES = ("mean", "last_token")


class ExtractorError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractorConfig:
    """How embeddings are produced.

    ``model`` is either the built-in deterministic test double
    ("test-double") or a transformer checkpoint identifier loadable by the
    transformers library.  ``expected_dim``, when given, is checked against
    the loaded encoder's hidden size at startup.  Truncation is applied in
    tokens (``max_tokens``), never characters.
    """

    model: str = "test-double"
    pooling: str = "mean"
    max_tokens: int = 512
    device: str = "cpu"
    batch_size: int = 16
    expected_dim: int | None = None

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling {self.pooling!r}; use one of {POOLING_MODES}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
