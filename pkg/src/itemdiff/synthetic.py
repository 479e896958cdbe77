"""Synthetic item bank with a known linear ground truth.

The generator builds a bank whose rescaled easiness is an exact linear
function of twenty controlled predictors (grade, state and year indicators,
item order, the three test-design indicators, and the first ten dimensions
of one synthetic embedding model) plus Gaussian noise.  Each signal feature
is standardized against its theoretical moments and weighted so the total
signal variance is close to 1, which makes the achievable test RMSE close
to the noise standard deviation.  P-values are produced by inverting the
easiness through the chosen vertical scale, so deriving the outcome from
the generated bank reproduces the ground truth exactly.

The passages are template-generated English-like text (with connectives, so
the incidence features vary), and the embedding store carries full-input
vectors for three small synthetic "models" plus per-option vectors for the
distractor-similarity features.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bank import Context, Item, ItemBank, Passage, dump_item_bank
from .embeddings import EmbeddingInputVariant, EmbeddingRecord, EmbeddingStore, option_variant_key
from .scales import BUILTIN_SCALES, DEFAULT_SCALE_NAME, invert_easiness

__all__ = ["SyntheticTruth", "generate_synthetic_bank", "write_synthetic_dataset",
           "SYNTHETIC_MODELS", "SIGNAL_MODEL"]

# (model name, dimension) of the synthetic embedding "models".  The first
# one carries the signal dimensions; the other two are pure noise and exist
# so multi-model experiment grids can run end to end.
SYNTHETIC_MODELS = (("tiny-enc-a", 32), ("tiny-enc-b", 24), ("tiny-enc-c", 16))
SIGNAL_MODEL = "tiny-enc-a"
N_SIGNAL_DIMS = 10

_STATES = ("NY", "TX")
_YEARS = (2018, 2019, 2021, 2022)
_GRADES = (3, 4, 5, 6, 7, 8)

_TOPICS = (
    "the old lighthouse", "a curious fox", "the school garden", "a paper boat",
    "the night market", "an island storm", "the clockmaker", "a lost letter",
    "the glass river", "a mountain trail", "the quiet library", "a tin rocket",
)
_VERBS = ("watched", "followed", "described", "remembered", "discovered", "sketched")
_OBJECTS = (
    "the harbor at dawn", "a row of lanterns", "the distant hills",
    "an unfinished map", "the flooded meadow", "a basket of apples",
    "the broken bridge", "a flock of starlings",
)
_CONNECTIVE_SENTENCES = (
    "Because the wind rose, the children hurried home.",
    "The road was long, but the travelers kept walking.",
    "First the bell rang, and then the doors opened.",
    "Although the rain fell, the festival continued until dusk.",
    "Moreover, the villagers planted trees along the shore.",
    "The tide returned, so the boats drifted out again.",
)
_QUESTION_STEMS = (
    "What is the main idea of the passage about {topic}?",
    "Why did the narrator return to {topic}?",
    "Which detail best supports the description of {topic}?",
    "What does the passage suggest about {topic}?",
)
_OPTION_WORDS = (
    "a sudden journey", "an old promise", "the morning light", "a hidden door",
    "the long winter", "a borrowed book", "the empty square", "a distant song",
    "the first snowfall", "a careful plan", "the last ferry", "a small victory",
)


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground truth behind a generated bank."""

    weights: dict          # signal feature name -> weight on its z-scored value
    noise_sd: float
    scale_name: str
    easiness: np.ndarray   # signal + noise, the exact rescaled outcome
    signal: np.ndarray


def _passage_text(rng: np.random.Generator, topic: str) -> str:
    paragraphs = []
    for _ in range(int(rng.integers(2, 4))):
        sentences = []
        for _ in range(int(rng.integers(2, 5))):
            sentences.append(
                f"The story of {topic} {rng.choice(_VERBS)} {rng.choice(_OBJECTS)}."
            )
        sentences.append(str(rng.choice(_CONNECTIVE_SENTENCES)))
        paragraphs.append(" ".join(sentences))
    return "\n\n".join(paragraphs)


def _zscore(value: float, mean: float, sd: float) -> float:
    return (value - mean) / sd


def generate_synthetic_bank(
    n_items: int = 1000,
    seed: int = 0,
    noise_sd: float = 0.3,
    scale_name: str = DEFAULT_SCALE_NAME,
    items_per_passage: int = 6,
):
    """Build (bank, store, truth) with easiness = linear(20 features) + noise."""
    rng = np.random.default_rng(seed)
    scale = BUILTIN_SCALES[scale_name]

    n_passages = max(1, (n_items + items_per_passage - 1) // items_per_passage)
    passages = []
    for i in range(n_passages):
        topic = _TOPICS[i % len(_TOPICS)]
        passages.append(
            Passage(
                passage_id=f"P{i:04d}",
                text=_passage_text(rng, topic),
                has_highlight=bool(rng.random() < 0.3),
            )
        )

    # Twenty signal features, each weighted on its z-scored value so every
    # one contributes comparably and total signal variance is near 1.
    feature_names = (
        ["grade"]
        + [f"state_{s}" for s in _STATES]
        + [f"year_{y}" for y in (2018, 2019, 2021)]
        + ["item_order", "pass_highlight_yn", "ques_text_ref_yn", "ques_text_highlight_yn"]
        + [f"{SIGNAL_MODEL}_e{j}" for j in range(N_SIGNAL_DIMS)]
    )
    base = 1.0 / np.sqrt(len(feature_names))
    signs = rng.choice([-1.0, 1.0], size=len(feature_names))
    magnitudes = base * rng.uniform(0.6, 1.4, size=len(feature_names))
    weights = dict(zip(feature_names, (signs * magnitudes).tolist()))

    # Theoretical moments used to z-score each raw signal feature.
    grade_sd = float(np.std(_GRADES))
    order_values = np.arange(1, items_per_passage + 1)
    order_sd = float(np.std(order_values))
    order_mean = float(np.mean(order_values))

    store = EmbeddingStore()
    for model, dim in SYNTHETIC_MODELS:
        store.declare_model(model, dim, pooling="mean", max_tokens=512)

    items = []
    signal = np.zeros(n_items)
    emb_signal = rng.standard_normal((n_items, N_SIGNAL_DIMS))
    for i in range(n_items):
        passage = passages[i // items_per_passage]
        state = _STATES[int(rng.integers(len(_STATES)))]
        year = _YEARS[int(rng.integers(len(_YEARS)))]
        grade = _GRADES[i % len(_GRADES)]
        order = int(i % items_per_passage) + 1
        pass_hl = passage.has_highlight
        ques_ref = bool(rng.random() < 0.4)
        ques_hl = bool(rng.random() < 0.35)

        z = {
            "grade": _zscore(grade, float(np.mean(_GRADES)), grade_sd),
            "state_NY": _zscore(1.0 if state == "NY" else 0.0, 0.5, 0.5),
            "state_TX": _zscore(1.0 if state == "TX" else 0.0, 0.5, 0.5),
            "year_2018": _zscore(1.0 if year == 2018 else 0.0, 0.25, np.sqrt(0.1875)),
            "year_2019": _zscore(1.0 if year == 2019 else 0.0, 0.25, np.sqrt(0.1875)),
            "year_2021": _zscore(1.0 if year == 2021 else 0.0, 0.25, np.sqrt(0.1875)),
            "item_order": _zscore(order, order_mean, order_sd),
            "pass_highlight_yn": _zscore(1.0 if pass_hl else 0.0, 0.3, np.sqrt(0.21)),
            "ques_text_ref_yn": _zscore(1.0 if ques_ref else 0.0, 0.4, np.sqrt(0.24)),
            "ques_text_highlight_yn": _zscore(1.0 if ques_hl else 0.0, 0.35, np.sqrt(0.2275)),
        }
        for j in range(N_SIGNAL_DIMS):
            z[f"{SIGNAL_MODEL}_e{j}"] = emb_signal[i, j]
        signal[i] = sum(weights[name] * z[name] for name in feature_names)

        topic = _TOPICS[(i // items_per_passage) % len(_TOPICS)]
        stem = _QUESTION_STEMS[i % len(_QUESTION_STEMS)].format(topic=topic)
        option_pool = rng.choice(len(_OPTION_WORDS), size=4, replace=False)
        correct = _OPTION_WORDS[option_pool[0]]
        wrong = tuple(_OPTION_WORDS[k] for k in option_pool[1:])
        items.append(
            Item(
                item_id=f"I{i:05d}",
                passage_id=passage.passage_id,
                question_text=stem,
                correct_option=correct,
                wrong_options=wrong,
                item_order=order,
                ques_text_ref=ques_ref,
                ques_text_highlight=ques_hl,
                context=Context(state=state, grade=grade, year=year),
                p_value=0.5,  # placeholder, replaced below
            )
        )

    noise = rng.normal(0.0, noise_sd, size=n_items)
    easiness = signal + noise
    final_items = []
    for i, item in enumerate(items):
        p = invert_easiness(float(easiness[i]), item.context.grade, scale)
        final_items.append(
            Item(
                item_id=item.item_id,
                passage_id=item.passage_id,
                question_text=item.question_text,
                correct_option=item.correct_option,
                wrong_options=item.wrong_options,
                item_order=item.item_order,
                ques_text_ref=item.ques_text_ref,
                ques_text_highlight=item.ques_text_highlight,
                context=item.context,
                p_value=p,
            )
        )
    bank = ItemBank(
        passages={p.passage_id: p for p in passages}, items=tuple(final_items)
    )

    # Store records: full-input vectors per model (signal dims first for the
    # signal model), plus per-option vectors for similarity features.
    full = EmbeddingInputVariant.FULL.value
    for model, dim in SYNTHETIC_MODELS:
        if model == SIGNAL_MODEL:
            extra = rng.standard_normal((n_items, dim - N_SIGNAL_DIMS))
            vectors = np.hstack([emb_signal, extra])
        else:
            vectors = rng.standard_normal((n_items, dim))
        for i, item in enumerate(bank.items):
            store.add(
                EmbeddingRecord(
                    item_id=item.item_id,
                    variant=full,
                    model_name=model,
                    dim=dim,
                    vector=vectors[i],
                )
            )
    model, dim = SYNTHETIC_MODELS[0]
    for item in bank.items:
        option_keys = [option_variant_key("correct")] + [
            option_variant_key(k) for k in range(len(item.wrong_options))
        ]
        for key in option_keys:
            store.add(
                EmbeddingRecord(
                    item_id=item.item_id,
                    variant=key,
                    model_name=model,
                    dim=dim,
                    vector=rng.standard_normal(dim),
                )
            )

    truth = SyntheticTruth(
        weights=weights,
        noise_sd=noise_sd,
        scale_name=scale_name,
        easiness=easiness,
        signal=signal,
    )
    return bank, store, truth


def write_synthetic_dataset(out_dir, n_items: int = 1000, seed: int = 0, **kwargs) -> dict:
    """Generate and write bank.json, embeddings.jsonl, and truth.json.

    Returns the paths plus the truth object, ready to be referenced from a
    run config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bank, store, truth = generate_synthetic_bank(n_items=n_items, seed=seed, **kwargs)
    bank_path = out / "bank.json"
    store_path = out / "embeddings.jsonl"
    truth_path = out / "truth.json"
    dump_item_bank(bank, bank_path)
    store.save(store_path)
    truth_path.write_text(
        json.dumps(
            {
                "weights": truth.weights,
                "noise_sd": truth.noise_sd,
                "scale_name": truth.scale_name,
                "easiness": truth.easiness.tolist(),
            },
            indent=1,
        ),
        encoding="utf-8",
    )
    return {
        "bank_path": bank_path,
        "store_path": store_path,
        "truth_path": truth_path,
        "bank": bank,
        "store": store,
        "truth": truth,
    }
