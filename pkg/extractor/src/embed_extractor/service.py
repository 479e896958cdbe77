"""HTTP embedding service.

POST /embed implements the client wire contract bit for bit:

    request  {"model": str, "pooling": "mean"|"last_token",
              "max_tokens": int, "inputs": [{"key": str, "text": str}]}
    response {"model": str, "dim": int,
              "vectors": [{"key": str, "vector": [float, ...]}]}

GET /health reports {"model", "dim", "pooling"}.  Malformed requests get a
4xx with a JSON error body.  Responses are independent of request batching
because padding is masked out of pooling.
"""
from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import load_encoder
from .config import POOLING_MODES, ExtractorConfig
from .extract import extract


def validate_request(doc) -> None:
    if not isinstance(doc, dict):
        raise ValueError("request body must be a JSON object")
    for key in ("model", "pooling", "max_tokens", "inputs"):
        if key not in doc:
            raise ValueError(f"request missing field {key!r}")
    if doc["pooling"] not in POOLING_MODES:
        raise ValueError(f"unknown pooling {doc['pooling']!r}")
    if not isinstance(doc["max_tokens"], int) or doc["max_tokens"] < 1:
        raise ValueError("max_tokens must be a positive integer")
    if not isinstance(doc["inputs"], list) or not doc["inputs"]:
        raise ValueError("inputs must be a non-empty list")
    for i, entry in enumerate(doc["inputs"]):
        if not isinstance(entry, dict) or "key" not in entry or "text" not in entry:
            raise ValueError(f"inputs[{i}] must have 'key' and 'text'")


def handle_embed_request(doc: dict, encoder, served_model: str) -> dict:
    """Pure request -> response mapping; raises ValueError on bad input."""
    validate_request(doc)
    if doc["model"] != served_model:
        raise ValueError(
            f"this service hosts model {served_model!r}, not {doc['model']!r}"
        )
    config = ExtractorConfig(
        model=served_model,
        pooling=doc["pooling"],
        max_tokens=doc["max_tokens"],
    )
    texts = [entry["text"] for entry in doc["inputs"]]
    vectors = extract(texts, config, encoder=encoder, pooling=doc["pooling"])
    return {
        "model": served_model,
        "dim": encoder.dim,
        "vectors": [
            {"key": entry["key"], "vector": vec.tolist()}
            for entry, vec in zip(doc["inputs"], vectors)
        ],
    }


class _Handler(BaseHTTPRequestHandler):
    encoder = None
    config: ExtractorConfig = None
    quiet = True

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/health":
            self._send_json(404, {"error": f"no route {self.path}"})
            return
        self._send_json(
            200,
            {
                "model": type(self).encoder.name,
                "dim": type(self).encoder.dim,
                "pooling": type(self).config.pooling,
            },
        )

    def do_POST(self):
        if self.path != "/embed":
            self._send_json(404, {"error": f"no route {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": f"invalid JSON body: {exc}"})
            return
        try:
            response = handle_embed_request(doc, type(self).encoder, type(self).encoder.name)
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(200, response)


def make_server(config: ExtractorConfig, host: str = "127.0.0.1", port: int = 8321):
    """Build (but do not start) the HTTP server; encoder loads eagerly so a
    bad checkpoint fails at startup, not on the first request."""
    encoder = load_encoder(config)
    handler = type("BoundHandler", (_Handler,), {"encoder": encoder, "config": config})
    return ThreadingHTTPServer((host, port), handler)


def serve(config: ExtractorConfig, host: str = "127.0.0.1", port: int = 8321) -> None:
    server = make_server(config, host, port)
    print(f"embed-extractor serving {config.model!r} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
