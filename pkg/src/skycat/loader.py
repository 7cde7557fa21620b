"""Bulk CSV loading with validation, a load-event ledger, and undo.

Every load step appends a LoadEvent.  A failed step inserts nothing and
records diagnostics, one per line, as `ROW <n> COL <name>: <message>`
(rows are 1-based data rows, the header excluded).  Undo deletes exactly
the rows stamped inside the event's time window, refusing when rows in
other tables still reference them.

CSV dialect: comma separator, double-quote quoting, first line header,
UTF-8.  Headers must match the table's loadable columns in order; for
PhotoObj the derived columns (cx, cy, cz, htmID) may be omitted and
htmID is recomputed either way.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field

import numpy as np

from . import htm
from .errors import (
    AlreadyUndoneError,
    ConcurrentLoadError,
    DependencyError,
    DomainError,
    IntegrityError,
    NotFoundError,
)
from .schema import HTM_DEPTH, LOADABLE_TABLES, PHOTO_FLAGS, TABLES
from .store import CatalogStore, format_time, parse_time

# Stop collecting diagnostics after this many; the batch is rejected anyway.
MAX_TRACE_LINES = 100

CSV_DIALECT = dict(delimiter=",", quotechar='"', lineterminator="\n")


@dataclass
class LoadEvent:
    event_id: int
    table_name: str
    file_name: str
    start_time: int
    end_time: int
    source_rows: int
    inserted_rows: int
    status: str  # success | failed | undone
    trace_text: str = ""

    def to_json(self) -> dict:
        return {
            "eventID": self.event_id,
            "tableName": self.table_name,
            "fileName": self.file_name,
            "startTime": format_time(self.start_time),
            "endTime": format_time(self.end_time),
            "sourceRows": self.source_rows,
            "insertedRows": self.inserted_rows,
            "status": self.status,
            "traceText": self.trace_text,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LoadEvent":
        return cls(
            event_id=doc["eventID"],
            table_name=doc["tableName"],
            file_name=doc["fileName"],
            start_time=parse_time(doc["startTime"]),
            end_time=parse_time(doc["endTime"]),
            source_rows=doc["sourceRows"],
            inserted_rows=doc["insertedRows"],
            status=doc["status"],
            trace_text=doc.get("traceText", ""),
        )


class Loader:
    """Serializes load steps per table and keeps the event ledger."""

    def __init__(self, store: CatalogStore):
        self.store = store
        self.events: list[LoadEvent] = []
        self._table_locks = {name: threading.Lock() for name in LOADABLE_TABLES}
        self._ledger_lock = threading.Lock()

    # -- loading ------------------------------------------------------------

    def load_csv(self, table: str, path: str) -> LoadEvent:
        """Parse, validate, and atomically insert one CSV file.

        Returns the ledger event; its status is "failed" (and nothing was
        inserted) if any row had a problem.
        """
        if table not in LOADABLE_TABLES:
            raise NotFoundError("unknown or unloadable table '%s'" % table)
        lock = self._table_locks[table]
        if not lock.acquire(blocking=False):
            raise ConcurrentLoadError("a load is already running for %s" % table)
        try:
            return self._load_csv_locked(table, path)
        finally:
            lock.release()

    def _load_csv_locked(self, table: str, path: str) -> LoadEvent:
        schema = TABLES[table]
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f, **CSV_DIALECT)
            try:
                header = next(reader)
            except StopIteration:
                header = None
            records = list(reader)

        diags = []
        cols = None
        if header is None:
            diags.append("ROW 0 COL -: file is empty (missing header)")
        else:
            expected = [c.name for c in schema.loadable_columns]
            allowed = _header_variants(schema, expected)
            if header not in allowed:
                diags.append(
                    "ROW 0 COL -: header %s does not match schema %s"
                    % (header, expected)
                )
            else:
                cols, diags = _parse_records(schema, header, records)
                if not diags:
                    _derive_photo_columns(schema, cols, header)
                    diags = _validate_rows(schema, cols, self.store)

        start = self.store.tick()
        if diags:
            end = self.store.tick()
            event = self._append_event(
                table, path, start, end, len(records), 0, "failed",
                "\n".join(diags[:MAX_TRACE_LINES]),
            )
            return event
        try:
            inserted = self.store.insert_batch(table, cols, event_window=(start, start))
        except IntegrityError as exc:
            end = self.store.tick()
            return self._append_event(
                table, path, start, end, len(records), 0, "failed",
                "ROW - COL -: %s" % exc,
            )
        end = self.store.tick()
        return self._append_event(
            table, path, start, end, len(records), inserted, "success",
            "loaded %d rows" % inserted,
        )

    def _append_event(self, table, path, start, end, src, ins, status, trace):
        with self._ledger_lock:
            event = LoadEvent(
                event_id=len(self.events) + 1,
                table_name=table,
                file_name=str(path),
                start_time=start,
                end_time=end,
                source_rows=src,
                inserted_rows=ins,
                status=status,
                trace_text=trace,
            )
            self.events.append(event)
        return event

    # -- undo ----------------------------------------------------------------

    def undo(self, event_id: int) -> int:
        """Delete the rows a successful load inserted; exact inverse.

        Refuses with DependencyError if rows elsewhere still reference the
        batch (the timestamp-window delete would orphan them).
        """
        event = self._find_event(event_id)
        if event.status == "undone":
            raise AlreadyUndoneError("event %d was already undone" % event_id)
        if event.status != "success":
            raise DomainError("event %d did not succeed; nothing to undo" % event_id)
        self._check_dependents(event)
        deleted = self.store.delete_by_loadtime(
            event.table_name, (event.start_time, event.end_time)
        )
        if deleted != event.inserted_rows:
            raise IntegrityError(
                "undo of event %d removed %d rows but the event inserted %d"
                % (event_id, deleted, event.inserted_rows)
            )
        event.status = "undone"
        return deleted

    def _find_event(self, event_id: int) -> LoadEvent:
        for e in self.events:
            if e.event_id == event_id:
                return e
        raise NotFoundError("unknown load event %d" % event_id)

    def _check_dependents(self, event: LoadEvent) -> None:
        snap = self.store.snapshot()
        table = event.table_name
        data = snap[table]
        lt = data["loadTime"]
        window = (lt >= event.start_time) & (lt <= event.end_time)
        if not window.any():
            return
        for other_name, other_schema in TABLES.items():
            for fk in other_schema.foreign_keys:
                if fk.ref_table != table:
                    continue
                doomed_keys = np.asarray(data[fk.ref_column])[window]
                refs = np.asarray(snap[other_name][fk.column])
                if other_name == table:
                    refs = refs[~window]  # rows being deleted don't count
                if fk.zero_means_none:
                    refs = refs[refs != 0]
                if len(refs) and np.isin(refs, doomed_keys).any():
                    raise DependencyError(
                        "%s.%s still references rows loaded by event %d; "
                        "undo those loads first"
                        % (other_name, fk.column, event.event_id)
                    )

    # -- ledger ----------------------------------------------------------------

    def list_events(self, table: str | None = None, status: str | None = None):
        """Ledger entries, newest first."""
        out = []
        for e in reversed(self.events):
            if table is not None and e.table_name != table:
                continue
            if status is not None and e.status != status:
                continue
            out.append(e)
        return out

    def save_ledger(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for e in self.events:
                f.write(json.dumps(e.to_json(), sort_keys=True) + "\n")

    def load_ledger(self, path: str) -> None:
        events = []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    events.append(LoadEvent.from_json(json.loads(line)))
        self.events = events


# ---------------------------------------------------------------------------
# CSV parsing and validation

def _header_variants(schema, expected):
    """Legal headers: the full loadable column list; PhotoObj may omit the
    derived unit-vector triple and/or htmID (recomputed anyway)."""
    if not schema.derived:
        return [expected]
    variants = [expected]
    for drop in ({"htmID"}, {"cx", "cy", "cz"}, {"cx", "cy", "cz", "htmID"}):
        variants.append([c for c in expected if c not in drop])
    return variants


def _parse_records(schema, header, records):
    """Convert text records into typed column arrays; collect diagnostics."""
    cols_by_name = {c.name: c for c in schema.columns}
    diags = []
    values = {name: [] for name in header}
    for rownum, rec in enumerate(records, start=1):
        if len(rec) != len(header):
            diags.append(
                "ROW %d COL -: expected %d fields, got %d"
                % (rownum, len(header), len(rec))
            )
            if len(diags) >= MAX_TRACE_LINES:
                return None, diags
            continue
        for name, text in zip(header, rec):
            col = cols_by_name[name]
            if text == "":
                diags.append("ROW %d COL %s: null value" % (rownum, name))
            else:
                try:
                    values[name].append(_parse_value(col, text))
                    continue
                except (ValueError, IntegrityError) as exc:
                    diags.append("ROW %d COL %s: %s" % (rownum, name, exc))
            values[name].append(None)
            if len(diags) >= MAX_TRACE_LINES:
                return None, diags
    if diags:
        return None, diags
    out = {}
    for name, vals in values.items():
        col = cols_by_name[name]
        if col.kind == "str":
            out[name] = vals
        elif col.kind == "enum":
            out[name] = np.array(vals, dtype=np.int8)
        elif col.kind == "bool":
            out[name] = np.array(vals, dtype=np.uint8)
        elif col.kind == "int":
            out[name] = np.array(vals, dtype=np.int64)
        else:
            out[name] = np.array(vals, dtype=np.float64)
    return out, diags


def _parse_value(col, text):
    if col.kind == "int":
        return int(text)
    if col.kind == "float":
        return float(text)
    if col.kind == "bool":
        lv = text.strip().lower()
        if lv in ("1", "true"):
            return 1
        if lv in ("0", "false"):
            return 0
        raise ValueError("bad boolean %r" % text)
    if col.kind == "enum":
        if text not in col.enum:
            raise ValueError(
                "'%s' is not one of %s" % (text, ", ".join(col.enum))
            )
        return col.enum.index(text)
    return text


def _derive_photo_columns(schema, cols, header):
    if schema.name != "PhotoObj":
        return
    v = htm.radec_to_unit_batch(cols["ra"], cols["dec"])
    if "cx" not in header:
        cols["cx"], cols["cy"], cols["cz"] = v[:, 0], v[:, 1], v[:, 2]
    cols["htmID"] = htm.htm_lookup_batch(
        np.stack([cols["cx"], cols["cy"], cols["cz"]], axis=1), HTM_DEPTH
    )


def _validate_rows(schema, cols, store):
    """Loader-side validation with per-row diagnostics.

    The store re-checks everything on insert; this pass exists to name
    rows and columns in the trace.
    """
    diags = []
    n = len(next(iter(cols.values()))) if cols else 0
    if n == 0:
        return diags
    snap = store.snapshot()

    def flag(mask, col, message):
        for i in np.flatnonzero(mask)[:10]:
            diags.append("ROW %d COL %s: %s" % (i + 1, col, message))

    # key uniqueness
    key = schema.key
    if len(key) == 1:
        keys = np.asarray(cols[key[0]])
        _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        flag(counts[inverse] > 1, key[0], "duplicate key in file")
        stored = np.asarray(snap[schema.name][key[0]])
        if len(stored):
            flag(np.isin(keys, stored), key[0], "key already loaded")
    # foreign keys
    for fk in schema.foreign_keys:
        refs = np.asarray(cols[fk.column])
        mask = np.ones(n, dtype=bool)
        if fk.zero_means_none:
            mask = refs != 0
        target = np.asarray(snap[fk.ref_table][fk.ref_column])
        if fk.ref_table == schema.name:
            target = np.concatenate([target, np.asarray(cols[fk.ref_column])])
        bad = mask & ~np.isin(refs, target)
        flag(
            bad,
            fk.column,
            "no matching %s.%s" % (fk.ref_table, fk.ref_column),
        )
    # table-specific shape checks mirrored from the store
    if schema.name == "PhotoObj":
        flag((cols["dec"] < -90) | (cols["dec"] > 90), "dec", "outside [-90, 90]")
        primary_bit = (cols["flags"] & PHOTO_FLAGS["PRIMARY"]) != 0
        flag(
            primary_bit != (cols["isPrimary"] != 0),
            "isPrimary",
            "disagrees with the PRIMARY flag bit",
        )
        for b in "ugriz":
            flag(cols["modelMagErr_%s" % b] < 0, "modelMagErr_%s" % b, "negative error")
        v = np.stack([cols["cx"], cols["cy"], cols["cz"]], axis=1)
        expected = htm.radec_to_unit_batch(cols["ra"], cols["dec"])
        flag(
            np.abs(v - expected).max(axis=1) > 1e-9,
            "cx",
            "(cx,cy,cz) disagrees with (ra,dec)",
        )
    elif schema.name == "SpecObj":
        flag(cols["zErr"] < 0, "zErr", "negative error")
        flag((cols["fiberID"] < 1) | (cols["fiberID"] > 640), "fiberID", "outside 1..640")
        flag((cols["dec"] < -90) | (cols["dec"] > 90), "dec", "outside [-90, 90]")
    elif schema.name == "SpecLine":
        flag(cols["wavelength"] <= 0, "wavelength", "must be positive")
    elif schema.name == "Field":
        flag(cols["raMin"] > cols["raMax"], "raMin", "exceeds raMax")
        flag(cols["decMin"] > cols["decMax"], "decMin", "exceeds decMax")
    elif schema.name == "Neighbors":
        flag(cols["objID"] == cols["neighborObjID"], "neighborObjID", "self pair")
        flag(cols["distance"] < 0, "distance", "negative")
    elif schema.name == "XCRedshift":
        flag(
            (cols["confidence"] < 0) | (cols["confidence"] > 1),
            "confidence",
            "outside [0, 1]",
        )
    elif schema.name == "ElRedshift":
        flag(cols["nLines"] < 0, "nLines", "negative")
    return diags[:MAX_TRACE_LINES]
