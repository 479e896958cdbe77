"""FeatureTable container, delimited imports, and assembly semantics."""
import numpy as np
import pytest

from itemdiff.features import (
    FeatureTable,
    FeatureTableError,
    assemble_features,
    import_feature_table,
)


def table(ids, cols, values, **kwargs):
    return FeatureTable(item_ids=ids, columns=cols, values=np.array(values, dtype=float), **kwargs)


class TestFeatureTable:
    def test_shape_validation(self):
        with pytest.raises(FeatureTableError):
            table(("a", "b"), ("x",), [[1.0], [2.0], [3.0]])

    def test_duplicate_columns_rejected(self):
        with pytest.raises(FeatureTableError, match="duplicate column"):
            table(("a",), ("x", "x"), [[1.0, 2.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(FeatureTableError, match="non-finite"):
            table(("a",), ("x",), [[np.nan]])

    def test_zero_variance_detection(self):
        t = table(("a", "b"), ("x", "y"), [[1.0, 5.0], [2.0, 5.0]])
        assert t.zero_variance_columns() == ["y"]

    def test_column_lookup(self):
        t = table(("a", "b"), ("x", "y"), [[1.0, 5.0], [2.0, 6.0]])
        np.testing.assert_array_equal(t.column("y"), [5.0, 6.0])
        with pytest.raises(KeyError):
            t.column("z")

    def test_select_subset(self):
        t = table(("a",), ("x", "y", "z"), [[1.0, 2.0, 3.0]])
        s = t.select(["z", "x"])
        assert s.columns == ("z", "x")
        np.testing.assert_array_equal(s.values, [[3.0, 1.0]])

    def test_csv_roundtrip(self, tmp_path):
        t = table(("a", "b"), ("x", "y"), [[1.25, -3.5], [0.1, 2.0]])
        path = tmp_path / "t.csv"
        t.to_csv(path)
        result = import_feature_table(path, id_column="item_id")
        assert result.table.columns == ("x", "y")
        np.testing.assert_array_equal(result.table.values, t.values)


class TestImport:
    def test_minimal_import(self):
        csv_text = "item_id,PCNARz,SYNLE\na,0.5,1.0\nb,-0.25,2.0\nc,0.0,3.0\n"
        result = import_feature_table(csv_text, id_column="item_id")
        assert result.table.values.shape == (3, 2)
        assert result.table.provenance == ("imported", "imported")
        assert result.unmatched_ids == []

    def test_tsv_detected(self):
        tsv = "item_id\tFK\na\t1.5\n"
        result = import_feature_table(tsv, id_column="item_id")
        assert result.table.columns == ("FK",)

    def test_unmatched_rows_reported(self):
        csv_text = "item_id,v\na,1\nghost,2\n"
        result = import_feature_table(csv_text, id_column="item_id", item_ids=["a", "b"])
        assert result.unmatched_ids == ["ghost"]
        assert result.table.item_ids == ("a",)

    def test_duplicate_id_error(self):
        csv_text = "item_id,v\na,1\na,2\n"
        with pytest.raises(FeatureTableError, match="duplicate item id 'a'"):
            import_feature_table(csv_text, id_column="item_id")

    def test_missing_id_column(self):
        with pytest.raises(FeatureTableError, match="id column"):
            import_feature_table("foo,v\na,1\n", id_column="item_id")

    def test_non_numeric_cell_names_row_and_column(self):
        csv_text = "item_id,v,w\na,1,2\nb,oops,3\n"
        with pytest.raises(FeatureTableError, match=r"row 3, column 'v'"):
            import_feature_table(csv_text, id_column="item_id")

    def test_bytes_source(self):
        result = import_feature_table(b"item_id,v\na,1\n", id_column="item_id")
        assert result.table.values[0, 0] == 1.0


class TestAssemble:
    def test_concatenation_in_bank_order(self):
        ctx = table(("a", "b"), tuple(f"c{i}" for i in range(5)), np.arange(10).reshape(2, 5))
        tst = table(("a", "b"), tuple(f"t{i}" for i in range(4)), np.arange(8).reshape(2, 4))
        out = assemble_features(("a", "b"), [ctx, tst])
        assert out.n_columns == 9
        assert out.item_ids == ("a", "b")
        np.testing.assert_array_equal(out.values[:, :5], ctx.values)

    def test_row_alignment_on_id(self):
        part = table(("b", "a"), ("x",), [[10.0], [20.0]])
        out = assemble_features(("a", "b"), [part])
        np.testing.assert_array_equal(out.column("x"), [20.0, 10.0])

    def test_collision_rejected(self):
        t1 = table(("a",), ("FK",), [[1.0]])
        t2 = table(("a",), ("FK",), [[2.0]])
        with pytest.raises(FeatureTableError, match="collision"):
            assemble_features(("a",), [t1, t2])

    def test_partial_coverage_imputed_and_flagged(self):
        part = table(("a", "b"), ("x",), [[1.0], [3.0]])
        out = assemble_features(("a", "b", "c", "d"), [part])
        np.testing.assert_array_equal(out.column("x"), [1.0, 3.0, 2.0, 2.0])
        assert out.notes["imputed"] == {"x": 2}

    def test_unknown_ids_rejected(self):
        part = table(("a", "zz"), ("x",), [[1.0], [2.0]])
        with pytest.raises(FeatureTableError, match="not in the target index"):
            assemble_features(("a", "b"), [part])

    def test_zero_variance_flagged(self):
        part = table(("a", "b"), ("x", "const"), [[1.0, 7.0], [2.0, 7.0]])
        out = assemble_features(("a", "b"), [part])
        assert out.notes["zero_variance"] == ["const"]

    def test_associativity_up_to_column_order(self):
        ids = ("a", "b", "c")
        rng = np.random.default_rng(0)
        t1 = table(ids, ("p", "q"), rng.normal(size=(3, 2)))
        t2 = table(ids, ("r",), rng.normal(size=(3, 1)))
        t3 = table(ids, ("s", "t"), rng.normal(size=(3, 2)))
        left = assemble_features(ids, [assemble_features(ids, [t1, t2]), t3])
        right = assemble_features(ids, [t1, assemble_features(ids, [t2, t3])])
        assert left.columns == right.columns
        np.testing.assert_array_equal(left.values, right.values)
