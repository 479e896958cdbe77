"""Embedding inputs, the on-disk embedding store, the service client, and
cosine-similarity distractor features.

No model inference happens here.  Input strings are built deterministically
from an item's question, tagged options, and (optionally) passage; vectors
come either from the JSON-Lines store file or over the wire from an
embedding service implementing::

    POST /embed
    {"model": str, "pooling": "mean"|"last_token", "max_tokens": int,
     "inputs": [{"key": str, "text": str}]}
    -> {"model": str, "dim": int, "vectors": [{"key": str, "vector": [..]}]}

The literal option tags are "[correct answer]" and "[wrong answer]"; they
are part of the cache key, so they must not change between runs.
"""
from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .bank import Item, ItemBank, Passage
from .features import FeatureTable

__all__ = [
    "EmbeddingInputVariant",
    "EmbeddingRecord",
    "EmbeddingStore",
    "EmbeddingStoreError",
    "DimensionMismatchError",
    "TransportError",
    "CORRECT_TAG",
    "WRONG_TAG",
    "build_embedding_input",
    "option_variant_key",
    "fetch_embeddings",
    "cosine_similarity",
    "distractor_similarity_features",
    "embeddings_to_features",
    "validate_embed_request",
    "validate_embed_response",
]

CORRECT_TAG = "[correct answer]"
WRONG_TAG = "[wrong answer]"


class EmbeddingInputVariant(str, Enum):
    """How an item is flattened into one embedding-input string."""

    FULL = "full"                  # question + tagged options + passage
    NO_PASSAGE = "no_passage"      # question + tagged options
    OPTION_ONLY = "option_only"    # question + one tagged option


class EmbeddingStoreError(ValueError):
    pass


class DimensionMismatchError(EmbeddingStoreError):
    pass


class TransportError(RuntimeError):
    """Service unreachable after retries; ``attempts`` records how many."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


def build_embedding_input(
    item: Item,
    passage: Passage | None,
    variant: EmbeddingInputVariant | str,
    option_index=None,
) -> str:
    """Deterministic input string for one item under a given variant.

    Order: question text, "[correct answer]" + correct option, then each
    wrong option behind "[wrong answer]" in stored order, then the passage
    (full variant only).  Parts are joined by single spaces with no
    trailing whitespace.  For OPTION_ONLY, ``option_index`` selects the
    option: "correct" or the 0-based index of a wrong option.
    """
    variant = EmbeddingInputVariant(variant)
    parts = [item.question_text.strip()]
    if variant is EmbeddingInputVariant.OPTION_ONLY:
        if option_index is None:
            raise ValueError("option_only requires an option_index")
        if option_index == "correct":
            parts += [CORRECT_TAG, item.correct_option.strip()]
        else:
            idx = int(option_index)
            if not (0 <= idx < len(item.wrong_options)):
                raise ValueError(
                    f"wrong-option index {idx} out of range for item "
                    f"{item.item_id!r} with {len(item.wrong_options)} options"
                )
            parts += [WRONG_TAG, item.wrong_options[idx].strip()]
        return " ".join(parts)
    parts += [CORRECT_TAG, item.correct_option.strip()]
    for wrong in item.wrong_options:
        parts += [WRONG_TAG, wrong.strip()]
    if variant is EmbeddingInputVariant.FULL:
        if passage is None:
            raise ValueError("full variant requires the passage")
        parts.append(passage.text.strip())
    return " ".join(parts)


def option_variant_key(option_index) -> str:
    """Store variant key for a per-option embedding."""
    if option_index == "correct":
        return f"{EmbeddingInputVariant.OPTION_ONLY.value}:correct"
    return f"{EmbeddingInputVariant.OPTION_ONLY.value}:wrong_{int(option_index)}"


@dataclass(frozen=True)
class EmbeddingRecord:
    item_id: str
    variant: str
    model_name: str
    dim: int
    vector: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=float)
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise EmbeddingStoreError(
                f"record ({self.item_id!r}, {self.variant!r}, "
                f"{self.model_name!r}): vector length {vec.shape} != dim {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingStoreError(
                f"record ({self.item_id!r}, {self.variant!r}): non-finite entries"
            )
        object.__setattr__(self, "vector", vec)


class EmbeddingStore:
    """In-memory record map with a JSON-Lines file representation.

    Keys are (item_id, variant, model_name); the manifest pins each model's
    dimension (and optionally pooling / token budget), and every record is
    checked against it.  File layout: one manifest line per model first,
    then one record per line, both plain JSON objects.  Floats serialize
    via repr, which round-trips bit-exactly.
    """

    def __init__(self):
        self._records: dict = {}
        self.manifest: dict = {}

    def __len__(self) -> int:
        return len(self._records)

    def declare_model(self, model_name: str, dim: int, **meta) -> None:
        dim = int(dim)
        known = self.manifest.get(model_name)
        if known is not None and known["dim"] != dim:
            raise DimensionMismatchError(
                f"model {model_name!r} declared dim {dim}, manifest has {known['dim']}"
            )
        entry = {"dim": dim}
        entry.update(meta)
        if known:
            merged = dict(known)
            merged.update(entry)
            entry = merged
        self.manifest[model_name] = entry

    def add(self, record: EmbeddingRecord, replace: bool = False) -> None:
        known = self.manifest.get(record.model_name)
        if known is None:
            self.declare_model(record.model_name, record.dim)
        elif known["dim"] != record.dim:
            raise DimensionMismatchError(
                f"model {record.model_name!r}: record dim {record.dim} "
                f"!= manifest dim {known['dim']}"
            )
        key = (record.item_id, record.variant, record.model_name)
        if key in self._records and not replace:
            existing = self._records[key]
            if not np.array_equal(existing.vector, record.vector):
                raise EmbeddingStoreError(f"conflicting duplicate record for {key}")
            return
        self._records[key] = record

    def get(self, item_id: str, variant: str, model_name: str) -> EmbeddingRecord:
        try:
            return self._records[(item_id, variant, model_name)]
        except KeyError:
            raise KeyError(
                f"no embedding for ({item_id!r}, {variant!r}, {model_name!r})"
            ) from None

    def has(self, item_id: str, variant: str, model_name: str) -> bool:
        return (item_id, variant, model_name) in self._records

    def records(self) -> list:
        return [self._records[k] for k in sorted(self._records)]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for model in sorted(self.manifest):
                fh.write(json.dumps({"manifest": {model: self.manifest[model]}}) + "\n")
            for record in self.records():
                fh.write(
                    json.dumps(
                        {
                            "item_id": record.item_id,
                            "variant": record.variant,
                            "model": record.model_name,
                            "dim": record.dim,
                            "vector": record.vector.tolist(),
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise EmbeddingStoreError(f"line {lineno}: invalid JSON: {exc}") from exc
                if "manifest" in doc:
                    for model, entry in doc["manifest"].items():
                        if isinstance(entry, dict):
                            store.declare_model(model, **entry)
                        else:
                            store.declare_model(model, int(entry))
                    continue
                try:
                    record = EmbeddingRecord(
                        item_id=doc["item_id"],
                        variant=doc["variant"],
                        model_name=doc["model"],
                        dim=int(doc["dim"]),
                        vector=np.asarray(doc["vector"], dtype=float),
                    )
                except KeyError as exc:
                    raise EmbeddingStoreError(f"line {lineno}: missing field {exc}") from exc
                store.add(record)
        return store


def validate_embed_request(doc: dict) -> None:
    """Raise ValueError unless ``doc`` is a well-formed /embed request body."""
    if not isinstance(doc, dict):
        raise ValueError("request body must be a JSON object")
    for key in ("model", "pooling", "max_tokens", "inputs"):
        if key not in doc:
            raise ValueError(f"request missing field {key!r}")
    if doc["pooling"] not in ("mean", "last_token"):
        raise ValueError(f"unknown pooling {doc['pooling']!r}")
    if not isinstance(doc["max_tokens"], int) or doc["max_tokens"] < 1:
        raise ValueError("max_tokens must be a positive integer")
    if not isinstance(doc["inputs"], list) or not doc["inputs"]:
        raise ValueError("inputs must be a non-empty list")
    for i, entry in enumerate(doc["inputs"]):
        if not isinstance(entry, dict) or "key" not in entry or "text" not in entry:
            raise ValueError(f"inputs[{i}] must have 'key' and 'text'")


def validate_embed_response(doc: dict, expected_keys=None) -> None:
    """Raise ValueError unless ``doc`` is a well-formed /embed response body."""
    if not isinstance(doc, dict):
        raise ValueError("response body must be a JSON object")
    for key in ("model", "dim", "vectors"):
        if key not in doc:
            raise ValueError(f"response missing field {key!r}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("response dim must be a positive integer")
    if not isinstance(doc["vectors"], list):
        raise ValueError("response vectors must be a list")
    seen = []
    for i, entry in enumerate(doc["vectors"]):
        if not isinstance(entry, dict) or "key" not in entry or "vector" not in entry:
            raise ValueError(f"vectors[{i}] must have 'key' and 'vector'")
        if len(entry["vector"]) != dim:
            raise ValueError(
                f"vectors[{i}] has length {len(entry['vector'])}, expected {dim}"
            )
        seen.append(entry["key"])
    if expected_keys is not None and list(expected_keys) != seen:
        missing = set(expected_keys) - set(seen)
        raise ValueError(f"response keys do not match request keys; missing {sorted(missing)}")


def _post_json(url: str, body: dict, timeout: float) -> dict:
    data = json.dumps(body).encode("utf-8")
    req = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def fetch_embeddings(
    endpoint: str,
    inputs: Sequence[tuple],
    model_name: str,
    store: EmbeddingStore,
    variant: str = EmbeddingInputVariant.FULL.value,
    pooling: str = "mean",
    max_tokens: int = 512,
    batch_size: int = 64,
    max_attempts: int = 3,
    retry_wait: float = 0.2,
    timeout: float = 60.0,
) -> list:
    """Fetch vectors for (item_id, text) pairs, reusing the store as a cache.

    Only keys absent from the store are requested.  Transport failures are
    retried up to ``max_attempts`` per batch, then raised as TransportError;
    a response dimension that contradicts the store manifest is fatal.
    Returns the records for every requested input, cached or fresh.
    """
    if not inputs:
        raise ValueError("no inputs to embed")
    pending = [(iid, text) for iid, text in inputs if not store.has(iid, variant, model_name)]
    url = endpoint.rstrip("/") + "/embed"
    for start in range(0, len(pending), batch_size):
        batch = pending[start : start + batch_size]
        body = {
            "model": model_name,
            "pooling": pooling,
            "max_tokens": int(max_tokens),
            "inputs": [{"key": iid, "text": text} for iid, text in batch],
        }
        response = None
        failure: Exception | None = None
        for attempt in range(1, max_attempts + 1):
            try:
                response = _post_json(url, body, timeout=timeout)
                break
            except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as exc:
                failure = exc
                if attempt < max_attempts:
                    time.sleep(retry_wait * attempt)
        if response is None:
            raise TransportError(
                f"embedding service unreachable at {url}: {failure}", attempts=max_attempts
            )
        validate_embed_response(response, expected_keys=[iid for iid, _ in batch])
        dim = int(response["dim"])
        declared = store.manifest.get(model_name)
        if declared is not None and declared["dim"] != dim:
            raise DimensionMismatchError(
                f"model {model_name!r}: service returned dim {dim}, "
                f"manifest declares {declared['dim']}"
            )
        store.declare_model(model_name, dim, pooling=pooling, max_tokens=int(max_tokens))
        for entry in response["vectors"]:
            store.add(
                EmbeddingRecord(
                    item_id=entry["key"],
                    variant=variant,
                    model_name=model_name,
                    dim=dim,
                    vector=np.asarray(entry["vector"], dtype=float),
                )
            )
    return [store.get(iid, variant, model_name) for iid, _ in inputs]


def cosine_similarity(u, v) -> float:
    """dot(u, v) / (|u| |v|); raises on zero vectors or length mismatch."""
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(u @ v / (nu * nv))


def distractor_similarity_features(
    item: Item, store: EmbeddingStore, model_name: str
) -> dict:
    """Cosine similarity of the correct answer to each distractor.

    Requires per-option embeddings (option_only variant) for the correct
    option and every wrong option of the item.  Keys are cos_sim_wrong_1..K
    in stored distractor order.
    """
    try:
        correct = store.get(item.item_id, option_variant_key("correct"), model_name)
    except KeyError:
        raise KeyError(
            f"missing option embedding for item {item.item_id!r}, option 'correct', "
            f"model {model_name!r}"
        ) from None
    out = {}
    for k in range(len(item.wrong_options)):
        try:
            wrong = store.get(item.item_id, option_variant_key(k), model_name)
        except KeyError:
            raise KeyError(
                f"missing option embedding for item {item.item_id!r}, option "
                f"'wrong_{k}', model {model_name!r}"
            ) from None
        out[f"cos_sim_wrong_{k + 1}"] = cosine_similarity(correct.vector, wrong.vector)
    return out


def similarity_feature_table(bank: ItemBank, store: EmbeddingStore, model_name: str) -> FeatureTable:
    """Bank-wide distractor-similarity table, padded to the maximum option count.

    Items with fewer distractors than the bank maximum get column-mean
    imputed values in the padded positions plus a 0/1 missing-flag column
    per padded similarity column (emitted only when padding occurs).
    """
    max_k = max(len(item.wrong_options) for item in bank.items)
    sims = np.full((len(bank.items), max_k), np.nan)
    for i, item in enumerate(bank.items):
        feats = distractor_similarity_features(item, store, model_name)
        for k in range(len(item.wrong_options)):
            sims[i, k] = feats[f"cos_sim_wrong_{k + 1}"]
    columns = [f"cos_sim_wrong_{k + 1}" for k in range(max_k)]
    missing = ~np.isfinite(sims)
    blocks = [sims]
    if missing.any():
        for k in range(max_k):
            col = sims[:, k]
            bad = missing[:, k]
            if bad.any():
                col[bad] = col[~bad].mean()
        flag_cols = [k for k in range(max_k) if missing[:, k].any()]
        flags = missing[:, flag_cols].astype(float)
        columns += [f"cos_sim_wrong_{k + 1}_missing" for k in flag_cols]
        blocks.append(flags)
    values = np.hstack(blocks)
    return FeatureTable(item_ids=bank.item_ids, columns=tuple(columns), values=values)


def embeddings_to_features(
    store: EmbeddingStore,
    bank: ItemBank,
    model_name: str,
    variant: str = EmbeddingInputVariant.FULL.value,
) -> FeatureTable:
    """One column per embedding dimension, named <model>_e0..e{dim-1}."""
    if isinstance(variant, EmbeddingInputVariant):
        variant = variant.value
    missing = [
        item.item_id
        for item in bank.items
        if not store.has(item.item_id, variant, model_name)
    ]
    if missing:
        raise KeyError(
            f"store lacks ({variant!r}, {model_name!r}) embeddings for "
            f"{len(missing)} items: {missing[:10]}"
        )
    dim = store.manifest[model_name]["dim"]
    values = np.empty((len(bank.items), dim))
    for i, item in enumerate(bank.items):
        values[i] = store.get(item.item_id, variant, model_name).vector
    columns = tuple(f"{model_name}_e{j}" for j in range(dim))
    return FeatureTable(item_ids=bank.item_ids, columns=columns, values=values)
