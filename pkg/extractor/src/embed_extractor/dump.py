"""Store-file dump mode: embed inputs offline into the JSON-Lines store
format the prediction toolkit reads (one manifest line per model, then one
record per line, floats serialized via repr for bit-exact round-trips)."""
from __future__ import annotations

import json
from pathlib import Path

from .backends import load_encoder
from .config import ExtractorConfig
from .extract import extract


def read_inputs(path) -> list:
    """Input lines: {"item_id": str, "variant": str, "text": str}."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            for key in ("item_id", "variant", "text"):
                if key not in doc:
                    raise ValueError(f"line {lineno}: missing field {key!r}")
            entries.append(doc)
    return entries


def dump_store(inputs_path, out_path, config: ExtractorConfig) -> int:
    """Embed every input line and write the store file; returns record count."""
    entries = read_inputs(inputs_path)
    if not entries:
        raise ValueError(f"no inputs in {inputs_path}")
    encoder = load_encoder(config)
    vectors = extract([e["text"] for e in entries], config, encoder=encoder)
    records = sorted(
        (
            {
                "item_id": e["item_id"],
                "variant": e["variant"],
                "model": encoder.name,
                "dim": encoder.dim,
                "vector": vec.tolist(),
            }
            for e, vec in zip(entries, vectors)
        ),
        key=lambda r: (r["item_id"], r["variant"], r["model"]),
    )
    manifest = {
        "manifest": {
            encoder.name: {
                "dim": encoder.dim,
                "pooling": config.pooling,
                "max_tokens": config.max_tokens,
            }
        }
    }
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest) + "\n")
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return len(records)
