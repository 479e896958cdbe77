"""Command-line interface.

Subcommands: validate, rescale, features, embed, run, sweep.  The embedding
service endpoint can be supplied with --endpoint or the ITEMDIFF_EMBED_ENDPOINT
environment variable.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .bank import BankFormatError, load_item_bank
from .embeddings import (
    EmbeddingInputVariant,
    EmbeddingStore,
    build_embedding_input,
    fetch_embeddings,
    option_variant_key,
)
from .features import assemble_features, import_feature_table
from .runner import RunConfig, emit_reports, emit_sweep, robustness_sweep, run_grid
from .scales import (
    ANCHOR_P,
    fit_affine_from_anchors,
    get_scale,
    load_scale,
    rescale_bank_pvalues,
    AbilityScale,
)
from .bank import context_features, test_features
from .text import text_feature_table

ENDPOINT_ENV = "ITEMDIFF_EMBED_ENDPOINT"


def _resolve_scale_arg(name: str):
    try:
        return get_scale(name)
    except KeyError:
        if Path(name).exists():
            return load_scale(name)
        raise


def _cmd_validate(args) -> int:
    try:
        bank = load_item_bank(args.bank)
    except (BankFormatError, FileNotFoundError, OSError) as exc:
        print(f"invalid bank: {exc}", file=sys.stderr)
        return 1
    print(f"bank ok: {len(bank.items)} items, {len(bank.passages)} passages")
    print(f"states: {', '.join(bank.states())}")
    print(f"grades: {', '.join(str(g) for g in bank.grades())}")
    print(f"years:  {', '.join(str(y) for y in bank.years())}")
    return 0


def _cmd_rescale(args) -> int:
    bank = load_item_bank(args.bank)
    scale = _resolve_scale_arg(args.scale)
    if args.anchors:
        try:
            b_low, b_high = (float(x) for x in args.anchors.split(","))
        except ValueError:
            print("--anchors expects two comma-separated numbers", file=sys.stderr)
            return 2
        if not isinstance(scale, AbilityScale):
            print("--anchors requires a plain (non-composite) scale", file=sys.stderr)
            return 2
        grades = scale.grades
        affine = fit_affine_from_anchors(
            scale.grade_means[grades[0]], b_low,
            scale.grade_means[grades[-1]], b_high,
            args.anchor_p,
        )
        scale = AbilityScale(name=scale.name, grade_means=scale.grade_means, affine=affine)
    easiness = rescale_bank_pvalues(
        [it.p_value for it in bank.items],
        [it.context.grade for it in bank.items],
        [it.context.year for it in bank.items],
        scale,
    )
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["item_id", "state", "grade", "year", "p_value", "easiness"])
        for item, b in zip(bank.items, easiness):
            writer.writerow(
                [item.item_id, item.context.state, item.context.grade,
                 item.context.year, repr(item.p_value), repr(float(b))]
            )
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_features(args) -> int:
    bank = load_item_bank(args.bank)
    parts = [
        context_features(bank, grade_encoding=args.grade_encoding),
        test_features(bank),
        text_feature_table(bank),
    ]
    for path in args.imports or []:
        result = import_feature_table(path, id_column=args.id_column, item_ids=bank.item_ids)
        if result.unmatched_ids:
            print(
                f"{path}: {len(result.unmatched_ids)} rows with unknown item ids "
                f"skipped: {result.unmatched_ids[:5]}",
                file=sys.stderr,
            )
        parts.append(result.table)
    table = assemble_features(bank.item_ids, parts)
    if table.notes.get("zero_variance"):
        print(f"zero-variance columns: {table.notes['zero_variance']}", file=sys.stderr)
    if args.out:
        table.to_csv(args.out)
        print(f"wrote {table.n_items} x {table.n_columns} feature table to {args.out}")
    else:
        table.to_csv(sys.stdout)
    return 0


def _cmd_embed(args) -> int:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        print(
            f"no endpoint: pass --endpoint or set {ENDPOINT_ENV}", file=sys.stderr
        )
        return 2
    bank = load_item_bank(args.bank)
    store_path = Path(args.store)
    store = EmbeddingStore.load(store_path) if store_path.exists() else EmbeddingStore()
    variant = EmbeddingInputVariant(args.variant)
    if variant is EmbeddingInputVariant.OPTION_ONLY:
        # Batch by option slot: all items' correct options in one series of
        # requests, then all first distractors, and so on.
        fetched = 0
        max_wrong = max(len(it.wrong_options) for it in bank.items)
        slots = ["correct"] + list(range(max_wrong))
        for opt in slots:
            key = option_variant_key(opt)
            inputs = [
                (it.item_id, build_embedding_input(it, None, variant, option_index=opt))
                for it in bank.items
                if opt == "correct" or opt < len(it.wrong_options)
            ]
            if not inputs:
                continue
            records = fetch_embeddings(
                endpoint, inputs, args.model, store, variant=key,
                pooling=args.pooling, max_tokens=args.max_tokens,
                batch_size=args.batch_size,
            )
            fetched += len(records)
    else:
        inputs = [
            (it.item_id, build_embedding_input(it, bank.passage_for(it), variant))
            for it in bank.items
        ]
        records = fetch_embeddings(
            endpoint, inputs, args.model, store, variant=variant.value,
            pooling=args.pooling, max_tokens=args.max_tokens, batch_size=args.batch_size,
        )
        fetched = len(records)
    store.save(store_path)
    print(f"store {store_path}: {len(store)} records ({fetched} ensured this run)")
    return 0


def _cmd_run(args) -> int:
    config = RunConfig.from_json_file(args.config)
    if args.output_dir:
        config = RunConfig.from_dict({**config.to_dict(), "output_dir": args.output_dir})
    reports = run_grid(config)
    out_dir = config.output_dir or "."
    written = emit_reports(reports, output_dir=out_dir)
    for fmt, path in written.items():
        print(f"{fmt}: {path}")
    return 0


def _cmd_sweep(args) -> int:
    config = RunConfig.from_json_file(args.config)
    scales = [s.strip() for s in args.scales.split(",") if s.strip()]
    rows = robustness_sweep(config, scales)
    out_dir = args.output_dir or config.output_dir or "."
    written = emit_sweep(rows, output_dir=out_dir)
    for row in rows:
        flag = f"  [{row.flag}]" if row.flag else ""
        print(
            f"{row.scale}: test_rmse={row.test_rmse:.4f} "
            f"test_corr={row.test_corr:.4f}{flag}"
        )
    for fmt, path in written.items():
        print(f"{fmt}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itemdiff",
        description="Vertical scaling and difficulty prediction for reading items",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse a bank and report its shape")
    p.add_argument("bank", help="bank JSON file or directory with the CSV pair")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("rescale", help="rescale p-values to logit easiness")
    p.add_argument("bank")
    p.add_argument("--scale", default="nwea2020-spring")
    p.add_argument("--anchors", help="override anchors: b_low,b_high (e.g. 0.3,-1.69)")
    p.add_argument("--anchor-p", type=float, default=ANCHOR_P)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rescale)

    p = sub.add_parser("features", help="emit the assembled feature table as CSV")
    p.add_argument("bank")
    p.add_argument("--import", dest="imports", action="append", metavar="CSV",
                   help="externally computed feature table (repeatable)")
    p.add_argument("--id-column", default="item_id")
    p.add_argument("--grade-encoding", choices=("numeric", "onehot", "both"),
                   default="both")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("embed", help="fetch embeddings into the store file")
    p.add_argument("bank")
    p.add_argument("--model", required=True)
    p.add_argument("--endpoint", help=f"embedding service URL (or ${ENDPOINT_ENV})")
    p.add_argument("--variant", choices=[v.value for v in EmbeddingInputVariant],
                   default=EmbeddingInputVariant.FULL.value)
    p.add_argument("--store", default="embeddings.jsonl")
    p.add_argument("--pooling", choices=("mean", "last_token"), default="mean")
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("run", help="run the experiment grid from a config file")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="robustness sweep over vertical scales")
    p.add_argument("config")
    p.add_argument("--scales", required=True, help="comma-separated scale names")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BankFormatError, ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
