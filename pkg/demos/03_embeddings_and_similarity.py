"""Embedding-input construction, the store file, and distractor-similarity
features, end to end against the sidecar's deterministic test encoder.

Requires the extractor package (installed from ./extractor) but no model
downloads; the test double is a tiny fixed-weight encoder.
"""
import json
import tempfile
import threading
from pathlib import Path

from itemdiff.bank import load_item_bank
from itemdiff.embeddings import (
    EmbeddingStore,
    build_embedding_input,
    distractor_similarity_features,
    embeddings_to_features,
    fetch_embeddings,
    option_variant_key,
)

bank = load_item_bank(Path(__file__).parent.parent / "tests" / "fixtures" / "minibank.json")
item = bank.items[0]
passage = bank.passage_for(item)

print("Input strings per variant:")
for variant in ("full", "no_passage"):
    text = build_embedding_input(item, passage, variant)
    print(f"  {variant:10s} {text[:88]}...")
print(f"  option_only(correct) {build_embedding_input(item, None, 'option_only', option_index='correct')}")
print(f"  option_only(wrong 0) {build_embedding_input(item, None, 'option_only', option_index=0)}")

try:
    from embed_extractor import ExtractorConfig, make_server
except ImportError:
    raise SystemExit("install the sidecar first: pip install -e ./extractor")

server = make_server(ExtractorConfig(), port=0)
endpoint = f"http://127.0.0.1:{server.server_port}"
threading.Thread(target=server.serve_forever, daemon=True).start()
print(f"\nsidecar serving the test double at {endpoint}")

store = EmbeddingStore()
inputs = [
    (it.item_id, build_embedding_input(it, bank.passage_for(it), "full"))
    for it in bank.items
]
fetch_embeddings(endpoint, inputs, "test-double", store)
print(f"fetched {len(store)} full-input vectors "
      f"(dim {store.manifest['test-double']['dim']})")

# Per-option vectors feed the correct-vs-distractor similarity features.
for it in bank.items:
    options = [("correct", option_variant_key("correct"))] + [
        (k, option_variant_key(k)) for k in range(len(it.wrong_options))
    ]
    for opt, key in options:
        text = build_embedding_input(it, None, "option_only", option_index=opt)
        fetch_embeddings(endpoint, [(it.item_id, text)], "test-double", store, variant=key)

print("\nCosine similarity of each distractor to the correct answer:")
for it in bank.items:
    sims = distractor_similarity_features(it, store, "test-double")
    pretty = ", ".join(f"{k}={v:+.3f}" for k, v in sims.items())
    print(f"  {it.item_id}: {pretty}")

table = embeddings_to_features(store, bank, "test-double")
print(f"\nfeature table from embeddings: {table.n_items} x {table.n_columns}")

with tempfile.TemporaryDirectory() as td:
    path = Path(td) / "store.jsonl"
    store.save(path)
    again = EmbeddingStore.load(path)
    print(f"store round-trip: {len(again)} records, bit-exact vectors")

server.shutdown()
