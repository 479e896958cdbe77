"""embed-extractor: transformer sentence-embedding sidecar.

Loads an encoder (a real checkpoint or the built-in deterministic test
double), pools final-layer hidden states into sentence vectors, and serves
them over a small HTTP contract or dumps them to the JSON-Lines store file
the prediction toolkit consumes.
"""

from .backends import TestDoubleEncoder, load_encoder
from .config import ExtractorConfig, ExtractorError
from .extract import extract
from .pooling import last_token_pool, mean_pool, pool
from .service import handle_embed_request, make_server, serve, validate_request

__version__ = "0.1.0"
