"""Sentence-vector extraction: encode, then pool per the configured mode."""
from __future__ import annotations

import numpy as np

from .backends import load_encoder
from .config import ExtractorConfig
from .pooling import pool


def extract(texts, config: ExtractorConfig, encoder=None, pooling: str | None = None):
    """One vector per text, length = the encoder's hidden size.

    ``pooling`` overrides the config's mode (the service lets each request
    choose).  Inputs are truncated at config.max_tokens, in tokens.
    """
    texts = list(texts)
    if not texts:
        raise ValueError("no texts to extract")
    if encoder is None:
        encoder = load_encoder(config)
    mode = pooling or config.pooling
    vectors = []
    for states, mask in encoder.hidden_states(texts):
        vectors.append(pool(states, mask, mode))
    return [np.asarray(v, dtype=float) for v in vectors]
