"""Native text analysis: segmentation, descriptive metrics, readability,
lexical diversity, and connective incidence.

These cover the feature families that can be computed from plain passage
text with deterministic rules.  Parser- and corpus-dependent indices
(semantic overlap, part-of-speech densities, word-frequency norms, ...)
are not computed here; they arrive through ``import_feature_table`` from
external exports and are merged by ``assemble_features``.

Segmentation rules: paragraphs split on blank lines; sentences end at
., !, or ? with a guard list of common abbreviations; words are runs of
alphanumerics with internal apostrophes/hyphens.  Syllables use a
vowel-group heuristic (consecutive vowels count once, trailing silent "e"
dropped unless the word ends in consonant + "le", minimum one per word).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bank import ItemBank
from .features import FeatureTable

__all__ = [
    "TextUnits",
    "ConnectiveLexicon",
    "segment",
    "count_syllables",
    "descriptive_metrics",
    "flesch_kincaid",
    "lexical_diversity",
    "connective_incidence",
    "default_lexicon",
    "default_stoplist",
    "text_feature_table",
    "TEXT_FEATURE_COLUMNS",
]

_DATA_DIR = Path(__file__).parent / "data"

_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:['’-][A-Za-z0-9]+)*")
_VOWELS = set("aeiouy")

# Lowercased, period-stripped tokens that do not terminate a sentence.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc",
    "e.g", "i.e", "inc", "ltd", "no", "fig", "al", "approx", "dept",
    "est", "vol", "ch", "sec", "mt", "ave",
}


def count_syllables(word: str) -> int:
    """Vowel-group syllable count with the silent-e rule; at least 1."""
    w = re.sub(r"[^a-z]", "", word.lower())
    if not w:
        return 1
    if w.endswith("e") and not (
        w.endswith("le") and len(w) > 2 and w[-3] not in _VOWELS
    ):
        w = w[:-1]
    groups = re.findall(r"[aeiouy]+", w)
    return max(1, len(groups))


def _letters(word: str) -> int:
    return sum(1 for ch in word if ch.isalnum())


@dataclass
class TextUnits:
    """Hierarchical decomposition of one text.

    sentences[i] holds the sentence strings of paragraph i; words[j],
    syllable_counts[j], and letter_counts[j] are parallel per-token lists
    for the j-th sentence in reading order across paragraphs.
    """

    paragraphs: list
    sentences: list
    words: list
    syllable_counts: list
    letter_counts: list

    @property
    def paragraph_count(self) -> int:
        return len(self.paragraphs)

    @property
    def sentence_count(self) -> int:
        return len(self.words)

    @property
    def word_count(self) -> int:
        return sum(len(ws) for ws in self.words)

    def flat_words(self) -> list:
        return [w for ws in self.words for w in ws]

    def flat_syllables(self) -> list:
        return [s for ss in self.syllable_counts for s in ss]

    def flat_letters(self) -> list:
        return [l for ls in self.letter_counts for l in ls]


def _ends_with_abbreviation(chunk: str) -> bool:
    chunk = chunk.rstrip().rstrip('"”’\')')
    if not chunk.endswith("."):
        return False
    m = re.search(r"([A-Za-z][A-Za-z.]*)\.$", chunk)
    if not m:
        return False
    token = m.group(1).rstrip(".").lower()
    return token in _ABBREVIATIONS


def _split_sentences(paragraph: str) -> list:
    parts = re.split(r"(?<=[.!?])[\"”’')]*\s+", paragraph.strip())
    merged: list = []
    for part in parts:
        part = part.strip()
        if not part:
            continue
        if merged and _ends_with_abbreviation(merged[-1]):
            merged[-1] = merged[-1] + " " + part
        else:
            merged.append(part)
    return [s for s in merged if _WORD_RE.search(s)]


def segment(text: str) -> TextUnits:
    """Decompose text into paragraphs, sentences, and counted word tokens."""
    if not text or not text.strip():
        raise ValueError("cannot segment empty text")
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]
    sentences: list = []
    words: list = []
    syllables: list = []
    letters: list = []
    kept_paragraphs: list = []
    for para in paragraphs:
        sents = _split_sentences(para)
        if not sents:
            continue
        kept_paragraphs.append(para)
        sentences.append(sents)
        for sent in sents:
            toks = _WORD_RE.findall(sent)
            words.append(toks)
            syllables.append([count_syllables(t) for t in toks])
            letters.append([_letters(t) for t in toks])
    if not words:
        raise ValueError("text contains no words")
    return TextUnits(
        paragraphs=kept_paragraphs,
        sentences=sentences,
        words=words,
        syllable_counts=syllables,
        letter_counts=letters,
    )


def _pop_sd(values) -> float:
    if len(values) <= 1:
        return 0.0
    return float(np.std(np.asarray(values, dtype=float)))


def descriptive_metrics(units: TextUnits) -> dict:
    """Counts and mean/sd length statistics of the decomposition.

    Standard deviations are population (ddof=0); a single element gives 0.
    """
    sentences_per_paragraph = [len(s) for s in units.sentences]
    words_per_sentence = [len(ws) for ws in units.words]
    syl = units.flat_syllables()
    lett = units.flat_letters()
    return {
        "DESPC": float(units.paragraph_count),
        "DESSC": float(units.sentence_count),
        "DESPL": float(np.mean(sentences_per_paragraph)),
        "DESPLd": _pop_sd(sentences_per_paragraph),
        "DESSL": float(np.mean(words_per_sentence)),
        "DESSLd": _pop_sd(words_per_sentence),
        "DESWLsy": float(np.mean(syl)),
        "DESWLsyd": _pop_sd(syl),
        "DESWLlt": float(np.mean(lett)),
        "DESWLltd": _pop_sd(lett),
        "PassageWordCount": float(units.word_count),
    }


def flesch_kincaid(units: TextUnits) -> dict:
    """Flesch reading ease and Flesch-Kincaid grade level.

    RDFKGL = 0.39 * words/sentence + 11.8 * syllables/word - 15.59
    RDFRE  = 206.835 - 1.015 * words/sentence - 84.6 * syllables/word
    FK is an alias of RDFKGL (grade level).
    """
    if units.sentence_count < 1:
        raise ValueError("readability requires at least one sentence")
    wps = units.word_count / units.sentence_count
    spw = sum(units.flat_syllables()) / units.word_count
    grade = 0.39 * wps + 11.8 * spw - 15.59
    ease = 206.835 - 1.015 * wps - 84.6 * spw
    return {"FK": grade, "RDFRE": ease, "RDFKGL": grade}


@lru_cache(maxsize=1)
def default_stoplist() -> frozenset:
    with open(_DATA_DIR / "function_words.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    return frozenset(doc["words"])


def lexical_diversity(units: TextUnits, stoplist=None) -> dict:
    """Type-token ratios over all words (LDTTRa) and content words (LDTTRc).

    Content words are tokens not in the function-word stoplist.  If every
    token is stoplisted, LDTTRc is undefined and returned as NaN so callers
    can flag and impute it.
    """
    if stoplist is None:
        stoplist = default_stoplist()
    tokens = [w.lower() for w in units.flat_words()]
    if not tokens:
        raise ValueError("lexical diversity requires at least one word")
    ttr_all = len(set(tokens)) / len(tokens)
    content = [t for t in tokens if t not in stoplist]
    ttr_content = len(set(content)) / len(content) if content else math.nan
    return {"LDTTRa": ttr_all, "LDTTRc": ttr_content}


_CATEGORY_COLUMNS = {
    "all": "CNCAll",
    "causal": "CNCCaus",
    "logical": "CNCLogic",
    "adversative": "CNCADC",
    "temporal": "CNCTemp",
    "additive": "CNCAdd",
    "positive": "CNCPos",
    "negative": "CNCNeg",
}

TEXT_FEATURE_COLUMNS = (
    "DESPC", "DESSC", "DESPL", "DESPLd", "DESSL", "DESSLd",
    "DESWLsy", "DESWLsyd", "DESWLlt", "DESWLltd", "PassageWordCount",
    "FK", "RDFRE", "RDFKGL",
    "LDTTRa", "LDTTRc",
    "CNCAll", "CNCCaus", "CNCLogic", "CNCADC", "CNCTemp", "CNCAdd",
    "CNCPos", "CNCNeg",
)


@dataclass(frozen=True)
class ConnectiveLexicon:
    """Connective word/phrase sets by category; entries are lowercase.

    A word may belong to several categories ("and" is both logical and
    additive).  The "all" category, if not supplied, is the union of the
    others.
    """

    categories: dict

    def __post_init__(self):
        cats = {}
        for name, phrases in self.categories.items():
            parsed = []
            for phrase in phrases:
                if isinstance(phrase, str):
                    toks = tuple(phrase.split())
                else:
                    toks = tuple(phrase)
                if not toks:
                    raise ValueError(f"lexicon category {name!r} has an empty entry")
                if any(t != t.lower() for t in toks):
                    raise ValueError(
                        f"lexicon entries must be lowercase: {' '.join(toks)!r}"
                    )
                parsed.append(toks)
            if not parsed:
                raise ValueError(f"lexicon category {name!r} is empty")
            cats[name] = tuple(parsed)
        if "all" not in cats:
            union = {p for ps in cats.values() for p in ps}
            cats["all"] = tuple(sorted(union))
        object.__setattr__(self, "categories", cats)

    @classmethod
    def from_json(cls, source) -> "ConnectiveLexicon":
        if isinstance(source, dict):
            doc = source
        elif hasattr(source, "read"):
            doc = json.load(source)
        else:
            with open(source, encoding="utf-8") as fh:
                doc = json.load(fh)
        cats = {k: v for k, v in doc.items() if k != "version"}
        return cls(categories=cats)


@lru_cache(maxsize=1)
def default_lexicon() -> ConnectiveLexicon:
    return ConnectiveLexicon.from_json(_DATA_DIR / "connectives.json")


def _count_matches(tokens, phrases) -> int:
    """Greedy left-to-right phrase matching without token reuse."""
    by_first: dict = {}
    for phrase in phrases:
        by_first.setdefault(phrase[0], []).append(phrase)
    for lst in by_first.values():
        lst.sort(key=len, reverse=True)
    count = 0
    i = 0
    n = len(tokens)
    while i < n:
        matched = 0
        for phrase in by_first.get(tokens[i], ()):
            k = len(phrase)
            if i + k <= n and tuple(tokens[i : i + k]) == phrase:
                matched = k
                break
        if matched:
            count += 1
            i += matched
        else:
            i += 1
    return count


def connective_incidence(units: TextUnits, lexicon: ConnectiveLexicon | None = None) -> dict:
    """Connective occurrences per 1000 words, per lexicon category.

    Phrases are matched within sentences only; a multiword connective never
    spans a sentence boundary.
    """
    if lexicon is None:
        lexicon = default_lexicon()
    total = units.word_count
    if total == 0:
        raise ValueError("connective incidence requires at least one word")
    sentence_tokens = [[w.lower() for w in ws] for ws in units.words]
    out = {}
    for category, column in _CATEGORY_COLUMNS.items():
        phrases = lexicon.categories.get(category)
        if phrases is None:
            out[column] = 0.0
            continue
        count = sum(_count_matches(toks, phrases) for toks in sentence_tokens)
        out[column] = 1000.0 * count / total
    return out


def passage_metrics(text: str, lexicon=None, stoplist=None) -> dict:
    """All native metrics for one text, keyed by feature column name."""
    units = segment(text)
    out: dict = {}
    out.update(descriptive_metrics(units))
    out.update(flesch_kincaid(units))
    out.update(lexical_diversity(units, stoplist=stoplist))
    out.update(connective_incidence(units, lexicon=lexicon))
    return out


def text_feature_table(
    bank: ItemBank,
    lexicon=None,
    stoplist=None,
    include_question_text: bool = False,
) -> FeatureTable:
    """Native text features per item, computed on the item's passage.

    Passage metrics are computed once per passage and broadcast to its
    items.  With ``include_question_text`` the same metrics are also
    computed on each item's question text under a ``ques_`` prefix.
    Undefined values (an all-function-word text has no content-word TTR)
    are mean-imputed within column and counted in notes["imputed"].
    """
    by_passage: dict = {}
    for pid, passage in bank.passages.items():
        by_passage[pid] = passage_metrics(passage.text, lexicon=lexicon, stoplist=stoplist)

    columns = list(TEXT_FEATURE_COLUMNS)
    rows = []
    for item in bank.items:
        rows.append([by_passage[item.passage_id][c] for c in TEXT_FEATURE_COLUMNS])
    if include_question_text:
        qcols = [f"ques_{c}" for c in TEXT_FEATURE_COLUMNS]
        columns.extend(qcols)
        for row, item in zip(rows, bank.items):
            qm = passage_metrics(item.question_text, lexicon=lexicon, stoplist=stoplist)
            row.extend(qm[c] for c in TEXT_FEATURE_COLUMNS)

    values = np.array(rows, dtype=float)
    imputed: dict = {}
    for j, name in enumerate(columns):
        col = values[:, j]
        bad = ~np.isfinite(col)
        if bad.any():
            good = col[~bad]
            fill = float(good.mean()) if good.size else 0.0
            values[bad, j] = fill
            imputed[name] = int(bad.sum())
    table = FeatureTable(
        item_ids=bank.item_ids, columns=tuple(columns), values=values
    )
    if imputed:
        table.notes["imputed"] = imputed
    return table
