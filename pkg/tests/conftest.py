import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from itemdiff.bank import load_item_bank
from itemdiff.embeddings import validate_embed_request
from itemdiff.synthetic import write_synthetic_dataset

FIXTURES = Path(__file__).parent / "fixtures"


class StubEmbedHandler(BaseHTTPRequestHandler):
    """Minimal conforming embedding service with controllable failures."""

    fail_remaining = 0
    force_dim = None
    calls = []

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        if self.path != "/embed":
            self.send_error(404)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        cls.calls.append(body)
        if cls.fail_remaining > 0:
            cls.fail_remaining -= 1
            self.send_error(503, "temporarily down")
            return
        try:
            validate_embed_request(body)
        except ValueError as exc:
            self.send_error(400, str(exc))
            return
        dim = cls.force_dim or 5
        vectors = []
        for entry in body["inputs"]:
            seed = abs(hash(entry["text"])) % (2**32)
            vec = np.random.default_rng(seed).normal(size=dim)
            vectors.append({"key": entry["key"], "vector": vec.tolist()})
        payload = json.dumps(
            {"model": body["model"], "dim": dim, "vectors": vectors}
        ).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


@pytest.fixture
def stub_server():
    StubEmbedHandler.fail_remaining = 0
    StubEmbedHandler.force_dim = None
    StubEmbedHandler.calls = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubEmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", StubEmbedHandler
    server.shutdown()


@pytest.fixture
def minibank_path():
    return FIXTURES / "minibank.json"


@pytest.fixture
def minibank(minibank_path):
    return load_item_bank(minibank_path)


@pytest.fixture
def minibank_doc(minibank_path):
    return json.loads(minibank_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """The 1000-item synthetic bank used by the end-to-end checks."""
    out = tmp_path_factory.mktemp("synthetic")
    return write_synthetic_dataset(out, n_items=1000, seed=20240811)


@pytest.fixture(scope="session")
def small_synthetic(tmp_path_factory):
    """A faster 240-item bank for pipeline plumbing tests."""
    out = tmp_path_factory.mktemp("synthetic_small")
    return write_synthetic_dataset(out, n_items=240, seed=7)
