"""Encoder backends: a deterministic fixed-weight test double, and real
transformer checkpoints loaded lazily through the transformers library.

A backend turns a list of texts into per-token hidden states plus a
non-padding mask; pooling happens one level up.  The test double exists so
the service and its contract tests run anywhere, with no checkpoint
downloads, and produce bit-identical vectors across runs.
"""
from __future__ import annotations

import hashlib
import re

import numpy as np

from .config import ExtractorConfig, ExtractorError

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|\[[a-z ]+\]|[^\sA-Za-z0-9]")

DOUBLE_DIM = 16
DOUBLE_VOCAB = 4096


class TestDoubleEncoder:
    """Tiny fixed-weight encoder: hash tokenizer, frozen embedding table,
    sinusoidal positions, one tanh mixing layer.  Fully deterministic."""

    name = "test-double"

    def __init__(self, config: ExtractorConfig):
        self.config = config
        self.dim = DOUBLE_DIM
        rng = np.random.default_rng(0xED)
        self._table = rng.standard_normal((DOUBLE_VOCAB, DOUBLE_DIM))
        self._mix = rng.standard_normal((DOUBLE_DIM, DOUBLE_DIM)) / np.sqrt(DOUBLE_DIM)

    def tokenize(self, text: str) -> list:
        tokens = _TOKEN_RE.findall(text.lower())
        return tokens[: self.config.max_tokens]

    def _token_id(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % DOUBLE_VOCAB

    def hidden_states(self, texts) -> list:
        """Per text: (n_tokens x dim hidden states, all-ones mask)."""
        out = []
        for text in texts:
            tokens = self.tokenize(text)
            if not tokens:
                tokens = ["[empty]"]
            ids = np.array([self._token_id(t) for t in tokens])
            emb = self._table[ids]
            pos = np.arange(len(tokens))[:, None] / max(len(tokens), 1)
            angles = pos * np.pi * (1 + np.arange(DOUBLE_DIM)[None, :] / DOUBLE_DIM)
            states = np.tanh((emb + np.sin(angles)) @ self._mix)
            out.append((states, np.ones(len(tokens), dtype=int)))
        return out


class TransformersEncoder:
    """Checkpoint-backed encoder via transformers; imported only when used."""

    def __init__(self, config: ExtractorConfig):
        self.config = config
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExtractorError(
                f"the transformers/torch stack is required for model "
                f"{config.model!r}: {exc}"
            ) from exc
        self._torch = torch
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(config.model)
            self._model = AutoModel.from_pretrained(config.model)
        except Exception as exc:
            raise ExtractorError(
                f"failed to load checkpoint {config.model!r}: {exc}"
            ) from exc
        self._model.eval()
        self._model.to(config.device)
        self.dim = int(self._model.config.hidden_size)
        self.name = config.model

    def hidden_states(self, texts) -> list:
        torch = self._torch
        out = []
        try:
            with torch.no_grad():
                for start in range(0, len(texts), self.config.batch_size):
                    batch = list(texts[start : start + self.config.batch_size])
                    enc = self._tokenizer(
                        batch,
                        return_tensors="pt",
                        padding=True,
                        truncation=True,
                        max_length=self.config.max_tokens,
                    ).to(self.config.device)
                    hidden = self._model(**enc).last_hidden_state.cpu().numpy()
                    mask = enc["attention_mask"].cpu().numpy()
                    for i in range(len(batch)):
                        out.append((hidden[i].astype(float), mask[i]))
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                raise ExtractorError(
                    f"out of memory at batch_size={self.config.batch_size}; "
                    f"retry with a smaller --batch-size"
                ) from exc
            raise
        return out


def load_encoder(config: ExtractorConfig):
    if config.model == TestDoubleEncoder.name:
        encoder = TestDoubleEncoder(config)
    else:
        encoder = TransformersEncoder(config)
    if config.expected_dim is not None and encoder.dim != config.expected_dim:
        raise ExtractorError(
            f"model {config.model!r} has hidden size {encoder.dim}, "
            f"expected {config.expected_dim}"
        )
    return encoder
