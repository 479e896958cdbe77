"""Feature tables: named real-valued predictor columns aligned to item ids.

A FeatureTable is the interchange unit between annotation modules (context,
test design, text analysis, embeddings) and the regression pipeline.  Tables
are assembled column-wise on item id; externally computed tables (e.g. a
corpus-analysis export) are imported from delimited text and carry
provenance "imported" so native and imported columns stay distinguishable.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "FeatureTable",
    "FeatureTableError",
    "ImportResult",
    "import_feature_table",
    "assemble_features",
]

NATIVE = "native"
IMPORTED = "imported"


class FeatureTableError(ValueError):
    pass


@dataclass(eq=False)
class FeatureTable:
    """n_items x n_columns matrix of predictors with per-column provenance.

    values must be finite; missing data is resolved (mean-imputed and noted)
    before a table is constructed.
    """

    item_ids: tuple
    columns: tuple
    values: np.ndarray
    provenance: tuple = ()
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.item_ids = tuple(self.item_ids)
        self.columns = tuple(str(c) for c in self.columns)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise FeatureTableError("values must be a 2-D matrix")
        n, p = self.values.shape
        if n != len(self.item_ids) or p != len(self.columns):
            raise FeatureTableError(
                f"shape mismatch: values {self.values.shape} vs "
                f"{len(self.item_ids)} ids x {len(self.columns)} columns"
            )
        if len(set(self.item_ids)) != n:
            raise FeatureTableError("duplicate item ids in feature table")
        if len(set(self.columns)) != p:
            dupes = sorted({c for c in self.columns if self.columns.count(c) > 1})
            raise FeatureTableError(f"duplicate column names: {dupes}")
        if not self.provenance:
            self.provenance = (NATIVE,) * p
        self.provenance = tuple(self.provenance)
        if len(self.provenance) != p:
            raise FeatureTableError("provenance length must match column count")
        if not np.all(np.isfinite(self.values)):
            bad = [self.columns[j] for j in np.where(~np.isfinite(self.values).all(axis=0))[0]]
            raise FeatureTableError(f"non-finite values in columns {bad}")

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}") from None
        return self.values[:, j]

    def zero_variance_columns(self) -> list[str]:
        """Names of columns whose values are identical across all rows."""
        if self.n_items == 0:
            return list(self.columns)
        same = np.all(self.values == self.values[0:1, :], axis=0)
        return [c for c, z in zip(self.columns, same) if z]

    def select(self, names: Sequence[str]) -> "FeatureTable":
        idx = []
        for name in names:
            try:
                idx.append(self.columns.index(name))
            except ValueError:
                raise KeyError(f"no column {name!r}") from None
        return FeatureTable(
            item_ids=self.item_ids,
            columns=tuple(names),
            values=self.values[:, idx],
            provenance=tuple(self.provenance[j] for j in idx),
        )

    def to_csv(self, path_or_buf, id_column: str = "item_id") -> None:
        """Write the table as UTF-8 CSV with an id column first."""
        own = False
        if hasattr(path_or_buf, "write"):
            fh = path_or_buf
        else:
            fh = open(path_or_buf, "w", encoding="utf-8", newline="")
            own = True
        try:
            writer = csv.writer(fh)
            writer.writerow([id_column, *self.columns])
            for i, item_id in enumerate(self.item_ids):
                writer.writerow([item_id, *[repr(float(v)) for v in self.values[i]]])
        finally:
            if own:
                fh.close()


@dataclass
class ImportResult:
    table: FeatureTable
    unmatched_ids: list


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str) and ("\n" in source or "," in source or "\t" in source):
        return io.StringIO(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    return open(source, "r", encoding="utf-8", newline="")


def import_feature_table(
    source,
    id_column: str = "item_id",
    item_ids: Sequence[str] | None = None,
) -> ImportResult:
    """Read a delimited feature export (CSV or TSV, header required).

    Columns other than ``id_column`` must be numeric.  When ``item_ids`` is
    given, rows whose id is not in it are dropped and reported in
    ``unmatched_ids``.  Duplicate ids and non-numeric cells are errors.
    """
    fh = _open_text(source)
    try:
        head = fh.readline()
        if not head:
            raise FeatureTableError("empty feature file")
        delimiter = "\t" if head.count("\t") >= head.count(",") and "\t" in head else ","
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader)
        header = [h.strip() for h in header]
        if id_column not in header:
            raise FeatureTableError(
                f"id column {id_column!r} not in header {header}"
            )
        id_pos = header.index(id_column)
        feat_names = [h for i, h in enumerate(header) if i != id_pos]
        if len(set(feat_names)) != len(feat_names):
            raise FeatureTableError("duplicate feature columns in import header")
        known = set(item_ids) if item_ids is not None else None

        ids: list[str] = []
        rows: list[list[float]] = []
        unmatched: list[str] = []
        seen: set[str] = set()
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FeatureTableError(
                    f"row {rownum}: expected {len(header)} cells, got {len(row)}"
                )
            rid = row[id_pos].strip()
            if rid in seen:
                raise FeatureTableError(f"duplicate item id {rid!r} in import")
            seen.add(rid)
            if known is not None and rid not in known:
                unmatched.append(rid)
                continue
            vals = []
            for i, cell in enumerate(row):
                if i == id_pos:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise FeatureTableError(
                        f"row {rownum}, column {header[i]!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise FeatureTableError(
                        f"row {rownum}, column {header[i]!r}: non-finite cell"
                    )
                vals.append(v)
            ids.append(rid)
            rows.append(vals)
        values = np.array(rows, dtype=float) if rows else np.zeros((0, len(feat_names)))
        table = FeatureTable(
            item_ids=tuple(ids),
            columns=tuple(feat_names),
            values=values,
            provenance=(IMPORTED,) * len(feat_names),
        )
        return ImportResult(table=table, unmatched_ids=unmatched)
    finally:
        fh.close()


def assemble_features(item_ids: Sequence[str], parts: Iterable[FeatureTable]) -> FeatureTable:
    """Column-wise concatenation of tables aligned on ``item_ids`` order.

    Items missing from a part are mean-imputed within column (mean over the
    rows the part does cover) and counted in notes["imputed"].  Column name
    collisions across parts are an error; zero-variance columns of the
    result are listed in notes["zero_variance"].
    """
    item_ids = tuple(item_ids)
    parts = list(parts)
    if not parts:
        raise FeatureTableError("no feature tables to assemble")
    all_names: list[str] = []
    all_prov: list[str] = []
    blocks: list[np.ndarray] = []
    imputed: dict[str, int] = {}
    for part in parts:
        overlap = set(all_names) & set(part.columns)
        if overlap:
            raise FeatureTableError(f"column name collision: {sorted(overlap)}")
        pos = {iid: i for i, iid in enumerate(part.item_ids)}
        extra = set(part.item_ids) - set(item_ids)
        if extra:
            raise FeatureTableError(
                f"part contains ids not in the target index: {sorted(extra)[:5]}"
            )
        block = np.empty((len(item_ids), part.n_columns), dtype=float)
        missing_rows = [i for i, iid in enumerate(item_ids) if iid not in pos]
        present_rows = [pos[iid] for iid in item_ids if iid in pos]
        if not present_rows:
            raise FeatureTableError("part covers none of the target items")
        source = part.values[present_rows, :]
        col_means = source.mean(axis=0)
        k = 0
        for i, iid in enumerate(item_ids):
            if iid in pos:
                block[i] = part.values[pos[iid]]
            else:
                block[i] = col_means
                k += 1
        if k:
            for name in part.columns:
                imputed[name] = k
        all_names.extend(part.columns)
        all_prov.extend(part.provenance)
        blocks.append(block)
    values = np.hstack(blocks) if blocks else np.zeros((len(item_ids), 0))
    table = FeatureTable(
        item_ids=item_ids,
        columns=tuple(all_names),
        values=values,
        provenance=tuple(all_prov),
    )
    notes: dict = {}
    if imputed:
        notes["imputed"] = imputed
    zv = table.zero_variance_columns()
    if zv:
        notes["zero_variance"] = zv
    table.notes = notes
    return table
