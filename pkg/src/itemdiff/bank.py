"""Item bank data model, parsing, and context/test-design predictor columns.

An item bank couples reading passages with the multiple-choice items asked
about them.  Each item carries its respondent context (state, grade, year),
human annotations of test-design elements (highlighting, passage text quoted
in the question), and the observed p-value (proportion correct).  P-values
of exactly 0 or 1 are rejected at parse time: the logit rescaling is
undefined there, and observed state-level means never reach the endpoints.

Bank files come in two equivalent formats (see README): a single JSON
document, or a passages.csv / items.csv pair with the same field names.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureTable

__all__ = [
    "BankFormatError",
    "Context",
    "Passage",
    "Item",
    "ItemBank",
    "parse_item_bank",
    "load_item_bank",
    "serialize_item_bank",
    "dump_item_bank",
    "context_features",
    "test_features",
]

GRADE_RANGE = (3, 8)


class BankFormatError(ValueError):
    """Malformed bank data; the message names the offending record and field."""


@dataclass(frozen=True)
class Context:
    state: str
    grade: int
    year: int


@dataclass(frozen=True)
class Passage:
    passage_id: str
    text: str
    has_highlight: bool = False


@dataclass(frozen=True)
class Item:
    item_id: str
    passage_id: str
    question_text: str
    correct_option: str
    wrong_options: tuple
    item_order: int
    ques_text_ref: bool
    ques_text_highlight: bool
    context: Context
    p_value: float


@dataclass(frozen=True)
class ItemBank:
    """Validated, immutable collection of passages and items.

    Construction enforces referential integrity (every item's passage_id
    resolves), id uniqueness, and all per-record invariants.
    """

    passages: dict
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "passages", dict(self.passages))
        object.__setattr__(self, "items", tuple(self.items))
        seen = set()
        for idx, item in enumerate(self.items):
            if item.item_id in seen:
                raise BankFormatError(f"item {idx}: duplicate item_id {item.item_id!r}")
            seen.add(item.item_id)
            if item.passage_id not in self.passages:
                raise BankFormatError(
                    f"item {idx} ({item.item_id!r}): passage_id "
                    f"{item.passage_id!r} does not resolve to any passage"
                )

    @property
    def item_ids(self) -> tuple:
        return tuple(item.item_id for item in self.items)

    def passage_for(self, item: Item) -> Passage:
        return self.passages[item.passage_id]

    def states(self) -> list[str]:
        return sorted({it.context.state for it in self.items})

    def years(self) -> list[int]:
        return sorted({it.context.year for it in self.items})

    def grades(self) -> list[int]:
        return sorted({it.context.grade for it in self.items})


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise BankFormatError(f"{where}: missing field {key!r}")
    return record[key]


def _as_bool(value, where: str, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in ("0", "1", "true", "false"):
        return value.strip().lower() in ("1", "true")
    raise BankFormatError(f"{where}: field {key!r} must be boolean, got {value!r}")


def _build_passage(record: dict, idx: int) -> Passage:
    where = f"passage {idx}"
    pid = str(_require(record, "passage_id", where)).strip()
    if not pid:
        raise BankFormatError(f"{where}: field 'passage_id' must be non-empty")
    text = str(_require(record, "text", where))
    if not text.strip():
        raise BankFormatError(f"{where} ({pid!r}): field 'text' must be non-empty")
    return Passage(
        passage_id=pid,
        text=text,
        has_highlight=_as_bool(record.get("has_highlight", False), where, "has_highlight"),
    )


def _build_item(record: dict, idx: int) -> Item:
    where = f"item {idx}"
    item_id = str(_require(record, "item_id", where)).strip()
    if not item_id:
        raise BankFormatError(f"{where}: field 'item_id' must be non-empty")
    where = f"item {idx} ({item_id!r})"

    try:
        p_value = float(_require(record, "p_value", where))
    except (TypeError, ValueError):
        raise BankFormatError(f"{where}: field 'p_value' must be numeric") from None
    if not (0.0 < p_value < 1.0):
        raise BankFormatError(
            f"{where}: field 'p_value' must lie strictly inside (0, 1), "
            f"got {p_value}"
        )

    wrong = _require(record, "wrong_options", where)
    if isinstance(wrong, str):
        try:
            wrong = json.loads(wrong)
        except json.JSONDecodeError:
            raise BankFormatError(
                f"{where}: field 'wrong_options' must be a JSON array"
            ) from None
    if not isinstance(wrong, (list, tuple)) or len(wrong) < 1:
        raise BankFormatError(f"{where}: field 'wrong_options' must be a non-empty list")
    wrong = tuple(str(w) for w in wrong)
    correct = str(_require(record, "correct_option", where))
    for label, text in [("correct_option", correct), *[("wrong_options", w) for w in wrong]]:
        if not text.strip():
            raise BankFormatError(f"{where}: field {label!r} contains an empty option")

    try:
        item_order = int(_require(record, "item_order", where))
    except (TypeError, ValueError):
        raise BankFormatError(f"{where}: field 'item_order' must be an integer") from None
    if item_order < 1:
        raise BankFormatError(f"{where}: field 'item_order' must be >= 1")

    try:
        grade = int(_require(record, "grade", where))
        year = int(_require(record, "year", where))
    except (TypeError, ValueError):
        raise BankFormatError(f"{where}: fields 'grade'/'year' must be integers") from None
    if not (GRADE_RANGE[0] <= grade <= GRADE_RANGE[1]):
        raise BankFormatError(
            f"{where}: field 'grade' must lie in {list(GRADE_RANGE)}, got {grade}"
        )
    state = str(_require(record, "state", where)).strip()
    if not state:
        raise BankFormatError(f"{where}: field 'state' must be non-empty")

    question = str(_require(record, "question_text", where))
    if not question.strip():
        raise BankFormatError(f"{where}: field 'question_text' must be non-empty")

    return Item(
        item_id=item_id,
        passage_id=str(_require(record, "passage_id", where)).strip(),
        question_text=question,
        correct_option=correct,
        wrong_options=wrong,
        item_order=item_order,
        ques_text_ref=_as_bool(record.get("ques_text_ref", False), where, "ques_text_ref"),
        ques_text_highlight=_as_bool(
            record.get("ques_text_highlight", False), where, "ques_text_highlight"
        ),
        context=Context(state=state, grade=grade, year=year),
        p_value=p_value,
    )


def _decode(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BankFormatError(f"source is not valid UTF-8: {exc}") from exc
    if isinstance(source, str):
        return source
    data = source.read()
    return _decode(data)


def parse_item_bank(source, format: str = "json") -> ItemBank:
    """Parse a bank from bytes, text, or a file object.

    With format="json" the source is one JSON document
    {"passages": [...], "items": [...]}.  With format="csv-pair" the source
    must be a (passages, items) pair of byte/text streams.
    """
    if format == "json":
        text = _decode(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BankFormatError(f"invalid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "passages" not in doc or "items" not in doc:
            raise BankFormatError("bank JSON must contain 'passages' and 'items' lists")
        passages = [_build_passage(rec, i) for i, rec in enumerate(doc["passages"])]
        items = [_build_item(rec, i) for i, rec in enumerate(doc["items"])]
    elif format == "csv-pair":
        try:
            passage_src, item_src = source
        except (TypeError, ValueError):
            raise BankFormatError(
                "csv-pair parsing takes a (passages, items) pair of sources"
            ) from None
        passages = [
            _build_passage(rec, i)
            for i, rec in enumerate(csv.DictReader(io.StringIO(_decode(passage_src))))
        ]
        items = [
            _build_item(rec, i)
            for i, rec in enumerate(csv.DictReader(io.StringIO(_decode(item_src))))
        ]
    else:
        raise BankFormatError(f"unknown bank format {format!r}")

    by_id: dict = {}
    for i, passage in enumerate(passages):
        if passage.passage_id in by_id:
            raise BankFormatError(f"passage {i}: duplicate passage_id {passage.passage_id!r}")
        by_id[passage.passage_id] = passage
    return ItemBank(passages=by_id, items=tuple(items))


def load_item_bank(path) -> ItemBank:
    """Load a bank from a .json file or a directory holding the CSV pair."""
    path = Path(path)
    if path.is_dir():
        passages = (path / "passages.csv").read_bytes()
        items = (path / "items.csv").read_bytes()
        return parse_item_bank((passages, items), format="csv-pair")
    return parse_item_bank(path.read_bytes(), format="json")


def serialize_item_bank(bank: ItemBank) -> dict:
    """JSON-serializable form; parse_item_bank inverts it."""
    return {
        "passages": [
            {
                "passage_id": p.passage_id,
                "text": p.text,
                "has_highlight": p.has_highlight,
            }
            for p in bank.passages.values()
        ],
        "items": [
            {
                "item_id": it.item_id,
                "passage_id": it.passage_id,
                "question_text": it.question_text,
                "correct_option": it.correct_option,
                "wrong_options": list(it.wrong_options),
                "item_order": it.item_order,
                "ques_text_ref": it.ques_text_ref,
                "ques_text_highlight": it.ques_text_highlight,
                "state": it.context.state,
                "grade": it.context.grade,
                "year": it.context.year,
                "p_value": it.p_value,
            }
            for it in bank.items
        ],
    }


def dump_item_bank(bank: ItemBank, path) -> None:
    Path(path).write_text(
        json.dumps(serialize_item_bank(bank), indent=1), encoding="utf-8"
    )


def context_features(bank: ItemBank, grade_encoding: str = "both") -> FeatureTable:
    """Respondent-context predictors: state/year one-hots plus grade.

    Column naming is deterministic: state_<STATE> and year_<YEAR> over the
    sorted distinct values present in the bank, then grade (numeric) and/or
    grade_<G> one-hots depending on ``grade_encoding``
    ("numeric" | "onehot" | "both").
    """
    if grade_encoding not in ("numeric", "onehot", "both"):
        raise ValueError(f"unknown grade_encoding {grade_encoding!r}")
    states = bank.states()
    years = bank.years()
    grades = bank.grades()
    columns: list[str] = [f"state_{s}" for s in states] + [f"year_{y}" for y in years]
    if grade_encoding in ("numeric", "both"):
        columns.append("grade")
    if grade_encoding in ("onehot", "both"):
        columns.extend(f"grade_{g}" for g in grades)

    values = np.zeros((len(bank.items), len(columns)), dtype=float)
    for i, item in enumerate(bank.items):
        ctx = item.context
        values[i, states.index(ctx.state)] = 1.0
        values[i, len(states) + years.index(ctx.year)] = 1.0
        j = len(states) + len(years)
        if grade_encoding in ("numeric", "both"):
            values[i, j] = float(ctx.grade)
            j += 1
        if grade_encoding in ("onehot", "both"):
            values[i, j + grades.index(ctx.grade)] = 1.0
    return FeatureTable(item_ids=bank.item_ids, columns=tuple(columns), values=values)


def test_features(bank: ItemBank) -> FeatureTable:
    """Test-design predictors: item order plus the three 0/1 indicators."""
    columns = ("item_order", "pass_highlight_yn", "ques_text_ref_yn", "ques_text_highlight_yn")
    values = np.zeros((len(bank.items), 4), dtype=float)
    for i, item in enumerate(bank.items):
        values[i, 0] = float(item.item_order)
        values[i, 1] = 1.0 if bank.passage_for(item).has_highlight else 0.0
        values[i, 2] = 1.0 if item.ques_text_ref else 0.0
        values[i, 3] = 1.0 if item.ques_text_highlight else 0.0
    return FeatureTable(item_ids=bank.item_ids, columns=columns, values=values)
