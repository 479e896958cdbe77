"""End-to-end checks of the itemdiff command-line interface."""
import csv
import io
import json

import pytest

from itemdiff.cli import main
from itemdiff.embeddings import EmbeddingStore
from itemdiff.runner import FeatureSetSpec, RunConfig
from itemdiff.scales import BUILTIN_SCALES, rescale_pvalue


class TestValidate:
    def test_valid_bank(self, minibank_path, capsys):
        assert main(["validate", str(minibank_path)]) == 0
        out = capsys.readouterr().out
        assert "2 items" in out and "1 passages" in out

    def test_invalid_bank(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"passages": [], "items": [{"item_id": "x"}]}')
        assert main(["validate", str(bad)]) == 1
        assert "invalid bank" in capsys.readouterr().err


class TestRescale:
    def test_matches_library(self, minibank_path, minibank, capsys):
        assert main(["rescale", str(minibank_path), "--scale", "nwea2020-spring"]) == 0
        out = capsys.readouterr().out
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 2
        scale = BUILTIN_SCALES["nwea2020-spring"]
        for row, item in zip(rows, minibank.items):
            expected = rescale_pvalue(item.p_value, item.context.grade, scale)
            assert float(row["easiness"]) == pytest.approx(expected, abs=1e-12)

    def test_anchor_override(self, minibank_path, capsys):
        assert (
            main(
                [
                    "rescale", str(minibank_path),
                    "--scale", "nwea2020-spring",
                    "--anchors", "0.5,-2.0",
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "easiness" in out

    def test_bad_anchors(self, minibank_path, capsys):
        assert main(["rescale", str(minibank_path), "--anchors", "oops"]) == 2

    def test_written_file(self, minibank_path, tmp_path):
        target = tmp_path / "easiness.csv"
        assert main(["rescale", str(minibank_path), "--out", str(target)]) == 0
        assert target.exists()


class TestFeatures:
    def test_feature_csv(self, minibank_path, tmp_path, capsys):
        target = tmp_path / "features.csv"
        assert main(["features", str(minibank_path), "--out", str(target)]) == 0
        rows = list(csv.DictReader(target.open()))
        assert len(rows) == 2
        assert "item_order" in rows[0]
        assert "FK" in rows[0]
        assert "state_NY" in rows[0]

    def test_import_merged(self, minibank_path, tmp_path):
        extra = tmp_path / "cohmetrix.csv"
        extra.write_text("item_id,PCNARz\nI001,0.5\nI002,-0.5\nI999,7\n")
        target = tmp_path / "features.csv"
        code = main(
            ["features", str(minibank_path), "--import", str(extra), "--out", str(target)]
        )
        assert code == 0
        rows = list(csv.DictReader(target.open()))
        assert "PCNARz" in rows[0]


class TestEmbed:
    def test_fetch_into_store(self, minibank_path, tmp_path, stub_server):
        endpoint, handler = stub_server
        store_path = tmp_path / "store.jsonl"
        code = main(
            [
                "embed", str(minibank_path),
                "--model", "stub-model",
                "--endpoint", endpoint,
                "--store", str(store_path),
            ]
        )
        assert code == 0
        store = EmbeddingStore.load(store_path)
        assert store.has("I001", "full", "stub-model")
        assert store.manifest["stub-model"]["dim"] == 5

    def test_env_var_endpoint(self, minibank_path, tmp_path, stub_server, monkeypatch):
        endpoint, _ = stub_server
        monkeypatch.setenv("ITEMDIFF_EMBED_ENDPOINT", endpoint)
        store_path = tmp_path / "store.jsonl"
        code = main(
            [
                "embed", str(minibank_path),
                "--model", "stub-model",
                "--variant", "no_passage",
                "--store", str(store_path),
            ]
        )
        assert code == 0
        store = EmbeddingStore.load(store_path)
        assert store.has("I002", "no_passage", "stub-model")

    def test_option_only_variant(self, minibank_path, tmp_path, stub_server):
        endpoint, _ = stub_server
        store_path = tmp_path / "store.jsonl"
        code = main(
            [
                "embed", str(minibank_path),
                "--model", "stub-model",
                "--endpoint", endpoint,
                "--variant", "option_only",
                "--store", str(store_path),
            ]
        )
        assert code == 0
        store = EmbeddingStore.load(store_path)
        assert store.has("I001", "option_only:correct", "stub-model")
        assert store.has("I001", "option_only:wrong_2", "stub-model")
        assert store.has("I002", "option_only:wrong_1", "stub-model")

    def test_missing_endpoint(self, minibank_path, monkeypatch, capsys):
        monkeypatch.delenv("ITEMDIFF_EMBED_ENDPOINT", raising=False)
        assert main(["embed", str(minibank_path), "--model", "m"]) == 2
        assert "endpoint" in capsys.readouterr().err


class TestRunAndSweep:
    def write_config(self, small_synthetic, tmp_path, **overrides):
        config = RunConfig(
            bank_path=str(small_synthetic["bank_path"]),
            specs=(
                FeatureSetSpec(name="ctx", include=("context",)),
                FeatureSetSpec(name="test", include=("test",)),
            ),
            store_path=str(small_synthetic["store_path"]),
            lambda_grid=(0.01, 1.0, 100.0),
            cv_k=3,
            cv_repeats=2,
            output_dir=str(tmp_path / "out"),
            **overrides,
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()), encoding="utf-8")
        return path

    def test_run_writes_reports(self, small_synthetic, tmp_path, capsys):
        config_path = self.write_config(small_synthetic, tmp_path)
        assert main(["run", str(config_path)]) == 0
        out_dir = tmp_path / "out"
        assert list(out_dir.glob("reports_*.csv"))
        assert list(out_dir.glob("reports_*.json"))
        assert list(out_dir.glob("reports_*.md"))

    def test_sweep_prints_rows(self, small_synthetic, tmp_path, capsys):
        config_path = self.write_config(small_synthetic, tmp_path)
        code = main(
            [
                "sweep", str(config_path),
                "--scales", "nwea2020-spring,nwea2020-fall",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "nwea2020-spring" in out and "nwea2020-fall" in out

    def test_run_error_reported(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(
                {
                    "bank_path": str(tmp_path / "missing.json"),
                    "specs": [{"name": "ctx", "include": ["context"]}],
                }
            )
        )
        assert main(["run", str(config_path)]) == 1
        assert "error:" in capsys.readouterr().err
