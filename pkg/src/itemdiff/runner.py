"""Config-driven experiment grids, the vertical-scale robustness sweep, and
report emission.

A run is defined by a RunConfig (usually a JSON file): the bank, the
vertical scale deriving the outcome, a list of feature-set specs, and the
evaluation settings.  Every spec in a grid shares the same split seed and
outcome vector, and a mean-predictor baseline row is always included, so
rows are directly comparable.  Completed reports are persisted as they
finish; a failing spec aborts the run but keeps the finished rows on disk.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bank import ItemBank, context_features, load_item_bank, test_features
from .embeddings import (
    EmbeddingInputVariant,
    EmbeddingStore,
    build_embedding_input,
    embeddings_to_features,
    fetch_embeddings,
    similarity_feature_table,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    baseline_report,
    config_fingerprint,
    default_lambda_grid,
    evaluate,
)
from .features import FeatureTable, assemble_features, import_feature_table
from .scales import (
    CompositeScale,
    DEFAULT_SCALE_NAME,
    get_scale,
    load_scale,
    rescale_bank_pvalues,
)
from .text import text_feature_table

__all__ = [
    "FeatureSetSpec",
    "RunConfig",
    "SweepRow",
    "run_grid",
    "robustness_sweep",
    "emit_reports",
    "emit_sweep",
    "standard_grid_preset",
    "derive_outcome",
    "MIXED_SCALE_FLAG",
]

FEATURE_KINDS = ("context", "test", "text", "embeddings", "cosine_sim")
MIXED_SCALE_FLAG = "mixed-scale, not comparable"

BLOCK_TITLES = {
    "human_annotated": "Human annotated features",
    "embeddings_only": "LLM embeddings only",
    "annotated_and_embeddings": "Annotated features and embeddings",
    "all_features_and_embeddings": "All features and embeddings",
    "": "",
}


@dataclass(frozen=True)
class FeatureSetSpec:
    """One row of an experiment grid: which predictor families to use.

    ``include`` is a subset of FEATURE_KINDS; embeddings and cosine_sim
    require ``model``.  ``pca_target`` compresses the embedding block (or
    all included columns when the spec has no embeddings) to the smallest
    component count explaining that share of variance.
    """

    name: str
    include: tuple
    model: str | None = None
    pca_target: float | None = None
    block: str = ""

    def __post_init__(self):
        include = tuple(self.include)
        unknown = [k for k in include if k not in FEATURE_KINDS]
        if unknown:
            raise ValueError(f"spec {self.name!r}: unknown feature kinds {unknown}")
        if not include:
            raise ValueError(f"spec {self.name!r}: empty feature set")
        if ("embeddings" in include or "cosine_sim" in include) and not self.model:
            raise ValueError(f"spec {self.name!r}: embeddings require a model name")
        object.__setattr__(self, "include", include)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "include": list(self.include),
            "model": self.model,
            "pca_target": self.pca_target,
            "block": self.block,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSetSpec":
        return cls(
            name=doc["name"],
            include=tuple(doc["include"]),
            model=doc.get("model"),
            pca_target=doc.get("pca_target"),
            block=doc.get("block", ""),
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything a grid run needs; serializes to/from the config JSON."""

    bank_path: str
    specs: tuple
    scale: str = DEFAULT_SCALE_NAME
    outcome: str = "rescaled_easiness"  # or "raw_pvalue"
    store_path: str | None = None
    endpoint: str | None = None
    embedding_variant: str = EmbeddingInputVariant.FULL.value
    grade_encoding: str = "numeric"
    seed: int = 0
    train_fraction: float = 0.8
    lambda_grid: tuple | None = None
    cv_k: int = 5
    cv_repeats: int = 5
    output_dir: str | None = None
    sweep_spec: str | None = None
    imports: tuple = ()
    filter_state: str | None = None
    standardize_before_pca: bool = False

    def __post_init__(self):
        specs = tuple(self.specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate spec names in run config: {dupes}")
        if self.outcome not in ("rescaled_easiness", "raw_pvalue"):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "imports", tuple(self.imports))

    def grid(self) -> tuple:
        if self.lambda_grid is not None:
            return tuple(self.lambda_grid)
        return tuple(default_lambda_grid())

    def to_dict(self) -> dict:
        return {
            "bank_path": self.bank_path,
            "specs": [s.to_dict() for s in self.specs],
            "scale": self.scale,
            "outcome": self.outcome,
            "store_path": self.store_path,
            "endpoint": self.endpoint,
            "embedding_variant": self.embedding_variant,
            "grade_encoding": self.grade_encoding,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "lambda_grid": list(self.lambda_grid) if self.lambda_grid is not None else None,
            "cv_k": self.cv_k,
            "cv_repeats": self.cv_repeats,
            "output_dir": self.output_dir,
            "sweep_spec": self.sweep_spec,
            "imports": list(self.imports),
            "filter_state": self.filter_state,
            "standardize_before_pca": self.standardize_before_pca,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        doc["specs"] = tuple(FeatureSetSpec.from_dict(s) for s in doc.get("specs", ()))
        if doc.get("lambda_grid") is not None:
            doc["lambda_grid"] = tuple(doc["lambda_grid"])
        if doc.get("imports"):
            doc["imports"] = tuple(tuple(sorted(d.items())) if isinstance(d, dict) else d
                                   for d in doc["imports"])
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.to_dict())


def _resolve_scale(name_or_path: str, extra_scales: dict | None = None):
    if extra_scales and name_or_path in extra_scales:
        return extra_scales[name_or_path]
    try:
        return get_scale(name_or_path)
    except KeyError:
        if Path(name_or_path).exists():
            return load_scale(name_or_path)
        raise


def _apply_state_filter(bank: ItemBank, config: RunConfig) -> ItemBank:
    """Optional per-state modeling: restrict the bank to one state."""
    if config.filter_state is None:
        return bank
    items = tuple(it for it in bank.items if it.context.state == config.filter_state)
    if not items:
        raise ValueError(f"no items with state {config.filter_state!r} in the bank")
    return ItemBank(passages=bank.passages, items=items)


def derive_outcome(bank: ItemBank, scale, outcome: str = "rescaled_easiness") -> np.ndarray:
    """Outcome vector per bank item: rescaled easiness or the raw p-value."""
    if outcome == "raw_pvalue":
        return np.array([it.p_value for it in bank.items], dtype=float)
    return rescale_bank_pvalues(
        [it.p_value for it in bank.items],
        [it.context.grade for it in bank.items],
        [it.context.year for it in bank.items],
        scale,
    )


def _imports_as_dicts(imports) -> list:
    out = []
    for entry in imports:
        if isinstance(entry, dict):
            out.append(entry)
        else:
            out.append(dict(entry))
    return out


def _load_store(config: RunConfig) -> EmbeddingStore | None:
    if config.store_path and Path(config.store_path).exists():
        return EmbeddingStore.load(config.store_path)
    if config.store_path:
        return EmbeddingStore()
    return None


def _ensure_embeddings(bank: ItemBank, config: RunConfig, store: EmbeddingStore, model: str):
    variant = config.embedding_variant
    missing = [it for it in bank.items if not store.has(it.item_id, variant, model)]
    if not missing:
        return
    if not config.endpoint:
        raise KeyError(
            f"store lacks ({variant!r}, {model!r}) embeddings for "
            f"{len(missing)} items (fetch disabled; no endpoint configured): "
            f"{[it.item_id for it in missing[:10]]}"
        )
    inputs = [
        (it.item_id, build_embedding_input(it, bank.passage_for(it), variant))
        for it in missing
    ]
    fetch_embeddings(config.endpoint, inputs, model, store, variant=variant)
    if config.store_path:
        store.save(config.store_path)


class _BlockBuilder:
    """Lazily builds and caches the predictor blocks a grid needs."""

    def __init__(self, bank: ItemBank, config: RunConfig, store: EmbeddingStore | None):
        self.bank = bank
        self.config = config
        self.store = store
        self._cache: dict = {}

    def get(self, kind: str, model: str | None = None) -> FeatureTable:
        key = (kind, model)
        if key in self._cache:
            return self._cache[key]
        if kind == "context":
            table = context_features(self.bank, grade_encoding=self.config.grade_encoding)
        elif kind == "test":
            table = test_features(self.bank)
        elif kind == "text":
            parts = [text_feature_table(self.bank)]
            for entry in _imports_as_dicts(self.config.imports):
                result = import_feature_table(
                    entry["path"],
                    id_column=entry.get("id_column", "item_id"),
                    item_ids=self.bank.item_ids,
                )
                parts.append(result.table)
            table = assemble_features(self.bank.item_ids, parts) if len(parts) > 1 else parts[0]
        elif kind == "embeddings":
            if self.store is None:
                raise ValueError("spec needs embeddings but no store_path is configured")
            _ensure_embeddings(self.bank, self.config, self.store, model)
            table = embeddings_to_features(
                self.store, self.bank, model, variant=self.config.embedding_variant
            )
        elif kind == "cosine_sim":
            if self.store is None:
                raise ValueError("spec needs cosine_sim but no store_path is configured")
            table = similarity_feature_table(self.bank, self.store, model)
        else:
            raise ValueError(f"unknown feature kind {kind!r}")
        self._cache[key] = table
        return table

    def assemble(self, spec: FeatureSetSpec) -> FeatureTable:
        parts = []
        for kind in FEATURE_KINDS:
            if kind in spec.include:
                model = spec.model if kind in ("embeddings", "cosine_sim") else None
                parts.append(self.get(kind, model))
        return assemble_features(self.bank.item_ids, parts)


def _eval_config_for(spec: FeatureSetSpec, config: RunConfig, features: FeatureTable) -> EvalConfig:
    pca_columns = None
    if spec.pca_target is not None and "embeddings" in spec.include:
        prefix = f"{spec.model}_e"
        pca_columns = tuple(c for c in features.columns if c.startswith(prefix))
    return EvalConfig(
        name=spec.name,
        seed=config.seed,
        train_fraction=config.train_fraction,
        lambda_grid=config.grid(),
        cv_k=config.cv_k,
        cv_repeats=config.cv_repeats,
        pca_target=spec.pca_target,
        pca_columns=pca_columns,
        standardize_before_pca=config.standardize_before_pca,
    )


def _persist_report(report: EvalReport, config: RunConfig) -> None:
    if not config.output_dir:
        return
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in report.name)
    path = out / f"report_{safe}_{config.fingerprint}.json"
    path.write_text(json.dumps(report.to_dict(), indent=1), encoding="utf-8")


def run_grid(config: RunConfig, extra_scales: dict | None = None) -> list:
    """Evaluate every spec in the config against the shared outcome.

    Returns the baseline report followed by one report per spec, in config
    order.  With an output_dir, each report is written as it completes, so
    a failing spec leaves the finished ones on disk.
    """
    bank = _apply_state_filter(load_item_bank(config.bank_path), config)
    scale = _resolve_scale(config.scale, extra_scales)
    y = derive_outcome(bank, scale, config.outcome)
    store = _load_store(config)
    builder = _BlockBuilder(bank, config, store)

    base_cfg = EvalConfig(
        name="baseline_mean",
        seed=config.seed,
        train_fraction=config.train_fraction,
        lambda_grid=config.grid(),
        cv_k=config.cv_k,
        cv_repeats=config.cv_repeats,
    )
    reports = [baseline_report(y, base_cfg)]
    _persist_report(reports[0], config)
    for spec in config.specs:
        try:
            features = builder.assemble(spec)
            eval_cfg = _eval_config_for(spec, config, features)
            report = evaluate(features, y, eval_cfg)
        except Exception as exc:
            raise RuntimeError(
                f"spec {spec.name!r} failed after {len(reports) - 1} completed "
                f"specs (completed reports were persisted): {exc}"
            ) from exc
        report = replace(report, extra={**report.extra, "block": spec.block})
        reports.append(report)
        _persist_report(report, config)
    return reports


@dataclass(frozen=True)
class SweepRow:
    scale: str
    lambda_star: float
    train_rmse: float
    test_rmse: float
    train_corr: float
    test_corr: float
    flag: str = ""

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "lambda": self.lambda_star,
            "train_rmse": self.train_rmse,
            "test_rmse": self.test_rmse,
            "train_corr": self.train_corr,
            "test_corr": self.test_corr,
            "flag": self.flag,
        }


def robustness_sweep(
    config: RunConfig,
    scale_names,
    extra_scales: dict | None = None,
) -> list:
    """Re-derive the outcome under each scale and re-run the chosen spec.

    The chosen spec is config.sweep_spec (by name) or the first spec.
    Composite (year-keyed) scales are evaluated but flagged: their outcome
    metric shifts across years, so the row is not comparable with the rest.
    """
    if not config.specs:
        raise ValueError("sweep needs at least one spec in the config")
    if config.sweep_spec:
        matches = [s for s in config.specs if s.name == config.sweep_spec]
        if not matches:
            raise KeyError(f"sweep spec {config.sweep_spec!r} not in config")
        spec = matches[0]
    else:
        spec = config.specs[0]

    bank = _apply_state_filter(load_item_bank(config.bank_path), config)
    store = _load_store(config)
    builder = _BlockBuilder(bank, config, store)
    features = builder.assemble(spec)
    eval_cfg = _eval_config_for(spec, config, features)

    rows = []
    for name in scale_names:
        scale = _resolve_scale(name, extra_scales)
        y = derive_outcome(bank, scale, config.outcome)
        report = evaluate(features, y, eval_cfg)
        rows.append(
            SweepRow(
                scale=name,
                lambda_star=report.lambda_star,
                train_rmse=report.train_rmse,
                test_rmse=report.test_rmse,
                train_corr=report.train_corr,
                test_corr=report.test_corr,
                flag=MIXED_SCALE_FLAG if isinstance(scale, CompositeScale) else "",
            )
        )
    return rows


def _fmt(value, places: int = 6) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.{places}f}"


def emit_reports(reports, formats=("csv", "json", "markdown"), output_dir=".", stem="reports") -> dict:
    """Write the grid results in the requested formats.

    File contents are a pure function of the reports, and filenames embed a
    fingerprint derived from every report's config fingerprint, so runs
    with different configurations never share an output file.
    """
    if not reports:
        raise ValueError("no reports to emit")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_fp = config_fingerprint([r.fingerprint for r in reports])
    written: dict = {}
    for fmt in formats:
        if fmt == "json":
            path = out / f"{stem}_{run_fp}.json"
            payload = {"fingerprint": run_fp, "reports": [r.to_dict() for r in reports]}
            path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
        elif fmt == "csv":
            path = out / f"{stem}_{run_fp}.csv"
            lines = ["name,block,lambda,n_features,rmse_train,rmse_test,corr_train,corr_test,fingerprint"]
            for r in reports:
                lines.append(
                    ",".join(
                        [
                            r.name,
                            str(r.extra.get("block", "")),
                            _fmt(r.lambda_star),
                            str(r.extra.get("n_features_used", 0)),
                            _fmt(r.train_rmse),
                            _fmt(r.test_rmse),
                            _fmt(r.train_corr),
                            _fmt(r.test_corr),
                            r.fingerprint,
                        ]
                    )
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        elif fmt == "markdown":
            path = out / f"{stem}_{run_fp}.md"
            lines = [
                "| Feature set | RMSE (train) | RMSE (test) | Correlation (train) | Correlation (test) |",
                "| --- | --- | --- | --- | --- |",
            ]
            last_block = object()
            for r in reports:
                block = r.extra.get("block", "")
                if block != last_block and block:
                    title = BLOCK_TITLES.get(block, block)
                    lines.append(f"| **{title}** |  |  |  |  |")
                last_block = block
                name = r.name
                if r.extra.get("baseline"):
                    name = "baseline (mean predictor)"
                lines.append(
                    f"| {name} | {_fmt(r.train_rmse, 2)} | {_fmt(r.test_rmse, 2)} "
                    f"| {_fmt(r.train_corr, 2)} | {_fmt(r.test_corr, 2)} |"
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written[fmt] = path
    return written


def emit_sweep(rows, formats=("csv", "json"), output_dir=".", stem="sweep") -> dict:
    if not rows:
        raise ValueError("no sweep rows to emit")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_fp = config_fingerprint([r.to_dict() for r in rows])
    written: dict = {}
    for fmt in formats:
        if fmt == "json":
            path = out / f"{stem}_{run_fp}.json"
            path.write_text(
                json.dumps({"rows": [r.to_dict() for r in rows]}, indent=1),
                encoding="utf-8",
            )
        elif fmt == "csv":
            path = out / f"{stem}_{run_fp}.csv"
            lines = ["scale,lambda,rmse_train,rmse_test,corr_train,corr_test,flag"]
            for r in rows:
                lines.append(
                    ",".join(
                        [
                            r.scale,
                            _fmt(r.lambda_star),
                            _fmt(r.train_rmse),
                            _fmt(r.test_rmse),
                            _fmt(r.train_corr),
                            _fmt(r.test_corr),
                            f'"{r.flag}"' if r.flag else "",
                        ]
                    )
                )
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown sweep format {fmt!r}")
        written[fmt] = path
    return written


def standard_grid_preset(
    models=("bert-base", "llama-3.1-8b", "modernbert-base"),
    pca_target: float = 0.8,
    wide_models=("llama-3.1-8b",),
) -> tuple:
    """The standard 17-row feature-set grid (plus the implicit baseline).

    Four blocks: human-annotated feature sets, embeddings-only (one row per
    model), annotated + embeddings, and all features + embeddings.  In the
    combined blocks each model contributes its PCA-compressed variant; the
    uncompressed variant is included only for models not listed in
    ``wide_models`` (by default the 4096-dimensional model is carried as
    PCA-only, since its raw width dwarfs every other predictor block).
    """
    specs = [
        FeatureSetSpec(
            name="state_grade_year", include=("context",), block="human_annotated"
        ),
        FeatureSetSpec(name="test_features", include=("test",), block="human_annotated"),
        FeatureSetSpec(name="text_features", include=("text",), block="human_annotated"),
        FeatureSetSpec(
            name="all_annotated_and_context",
            include=("context", "test", "text"),
            block="human_annotated",
        ),
    ]
    for model in models:
        specs.append(
            FeatureSetSpec(
                name=f"emb_{model}",
                include=("embeddings",),
                model=model,
                block="embeddings_only",
            )
        )
    for block, base in (
        ("annotated_and_embeddings", ("test", "text", "embeddings")),
        ("all_features_and_embeddings", ("context", "test", "text", "embeddings")),
    ):
        prefix = "annotated" if block == "annotated_and_embeddings" else "all"
        for model in models:
            if model not in wide_models:
                specs.append(
                    FeatureSetSpec(
                        name=f"{prefix}_emb_{model}",
                        include=base,
                        model=model,
                        block=block,
                    )
                )
            specs.append(
                FeatureSetSpec(
                    name=f"{prefix}_pca_{model}",
                    include=base,
                    model=model,
                    pca_target=pca_target,
                    block=block,
                )
            )
    return tuple(specs)
