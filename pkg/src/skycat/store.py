"""Columnar in-memory catalog store with snapshot persistence.

Tables hold one numpy array (or list, for text) per column.  PhotoObj is
kept clustered by (htmID, objID) so spatial ID ranges map to contiguous
row slices, and PhotoTag is maintained as a column subset of PhotoObj.

Concurrency contract: one writer at a time (enforced with a lock); any
number of readers.  Every mutation builds fresh column arrays and swaps
the whole table map in one assignment, so a reader that grabbed the map
never observes a half-applied batch.
"""

from __future__ import annotations

import io
import struct
import threading
import time
import zlib
from datetime import datetime, timezone

import numpy as np

from . import filterql, htm
from .errors import (
    DomainError,
    IntegrityError,
    NotFoundError,
    SnapshotFormatError,
)
from .schema import (
    HTM_DEPTH,
    NEIGHBOR_RADIUS_ARCMIN,
    PHOTO_FLAGS,
    PHOTO_TAG_COLUMNS,
    TABLES,
    TableSchema,
    resolve_view,
)

_MAGIC = b"SKYCATDB"
_VERSION = 1
_KIND_CODES = {"int": 0, "float": 1, "bool": 2, "str": 3, "enum": 4, "time": 5}
_TABLE_ORDER = tuple(TABLES)

# Distance slack when validating materialized neighbor pairs.
_DIST_TOL = 1e-9


def _dtype_for(kind: str):
    return {
        "int": np.int64,
        "float": np.float64,
        "bool": np.uint8,
        "enum": np.int8,
        "time": np.int64,
    }[kind]


def format_time(us: int) -> str:
    """ISO-8601 UTC text for a microsecond timestamp."""
    dt = datetime.fromtimestamp(int(us) // 10**6, tz=timezone.utc)
    return dt.replace(microsecond=int(us) % 10**6).isoformat()


def parse_time(text: str) -> int:
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 10**6)


class _Clock:
    """Monotonic wall-clock microseconds; never returns the same value twice."""

    def __init__(self):
        self._last = 0
        self._lock = threading.Lock()

    def tick(self) -> int:
        with self._lock:
            now = time.time_ns() // 1000
            self._last = max(now, self._last + 1)
            return self._last


class CatalogStore:
    def __init__(self):
        self._data = {name: _empty_table(TABLES[name]) for name in _TABLE_ORDER}
        self._clock = _Clock()
        self._write_lock = threading.RLock()

    # -- basic access -----------------------------------------------------

    def snapshot(self) -> dict:
        """Consistent view of all tables; safe to read without locking."""
        return self._data

    def schema(self, table: str) -> TableSchema:
        try:
            return TABLES[table]
        except KeyError:
            raise NotFoundError("unknown table '%s'" % table) from None

    def count(self, table: str) -> int:
        return _nrows(self.schema(table), self.snapshot()[table])

    def column(self, table: str, name: str):
        """Raw column storage (array, or list for text columns)."""
        self.schema(table).column(name)
        return self.snapshot()[table][name]

    def tick(self) -> int:
        return self._clock.tick()

    # -- mutation ---------------------------------------------------------

    def insert_batch(self, table: str, rows, event_window=None) -> int:
        """Validate and append a batch; all-or-nothing.

        `rows` may be a list of dicts, a list of tuples in schema order
        (loadable columns), or a mapping of column name -> array.  Raises
        IntegrityError naming the first offending row on any violation.
        """
        schema = self.schema(table)
        if table == "PhotoTag":
            raise DomainError("PhotoTag is maintained automatically")
        cols = _coerce_batch(schema, rows)
        n = _nrows_cols(schema, cols)
        with self._write_lock:
            if event_window is None:
                ts = self._clock.tick()
            else:
                ts = int(event_window[0])
            cols["loadTime"] = np.full(n, ts, dtype=np.int64)
            snap = self.snapshot()
            _validate_batch(schema, cols, snap)
            merged = _append(schema, snap[table], cols)
            self._commit(table, merged)
        return n

    def delete_by_loadtime(self, table: str, window) -> int:
        """Remove rows whose loadTime falls inside [start, end]."""
        schema = self.schema(table)
        if table == "PhotoTag":
            raise DomainError("PhotoTag is maintained automatically")
        start, end = int(window[0]), int(window[1])
        with self._write_lock:
            data = self.snapshot()[table]
            lt = data["loadTime"]
            drop = (lt >= start) & (lt <= end)
            ndropped = int(drop.sum())
            if ndropped == 0:
                return 0
            keep = ~drop
            kept = {
                c.name: _take(data[c.name], keep, c.kind)
                for c in schema.columns
            }
            self._commit(table, kept)
        return ndropped

    def _commit(self, table: str, data: dict):
        schema = TABLES[table]
        if schema.cluster_by:
            data = _recluster(schema, data)
        new = dict(self._data)
        new[table] = data
        if table == "PhotoObj":
            new["PhotoTag"] = _project_tag(data)
        self._data = new

    # -- views and scans ----------------------------------------------------

    def view_filter(self, view_name: str):
        """(base schema, compiled predicate or None) for a view name."""
        try:
            schema, pred_text = resolve_view(view_name)
        except KeyError:
            raise NotFoundError("unknown view '%s'" % view_name) from None
        if not pred_text:
            return schema, None
        return schema, filterql.compile_predicate(pred_text, schema)

    def view_mask(self, view_name: str, snap=None):
        """(base schema, boolean mask or None) over the base table rows."""
        schema, pred = self.view_filter(view_name)
        if pred is None:
            return schema, None
        data = (snap or self.snapshot())[schema.name]
        n = _nrows(schema, data)
        return schema, np.asarray(
            filterql.evaluate_block(pred, data, n), dtype=bool
        )

    def htm_slices(self, ranges, snap=None) -> list[tuple[int, int]]:
        """Clustered PhotoObj row slices for sorted, disjoint ID ranges."""
        data = (snap or self.snapshot())["PhotoObj"]
        ids = data["htmID"]
        out = []
        for lo, hi in ranges:
            a = int(np.searchsorted(ids, lo, side="left"))
            b = int(np.searchsorted(ids, hi, side="left"))
            if b > a:
                out.append((a, b))
        return out

    def range_scan(self, ranges, projection=None, callback=None) -> int:
        """Visit PhotoObj rows with htmID inside the given ranges.

        Rows arrive at the callback as dicts in htmID order; returns the
        number of rows visited.
        """
        schema = TABLES["PhotoObj"]
        snap = self.snapshot()
        data = snap["PhotoObj"]
        names = _projection_names(schema, projection)
        visited = 0
        for a, b in self.htm_slices(ranges, snap):
            visited += b - a
            if callback is not None:
                for row in _iter_rows(schema, data, range(a, b), names):
                    callback(row)
        return visited

    def full_scan(self, view_name: str, projection=None, callback=None) -> int:
        """Scan a view's base table, applying its implicit filter.

        Returns the number of base rows visited (the full table).
        """
        snap = self.snapshot()
        schema, mask = self.view_mask(view_name, snap)
        data = snap[schema.name]
        n = _nrows(schema, data)
        names = _projection_names(schema, projection)
        if callback is not None:
            idx = range(n) if mask is None else np.flatnonzero(mask)
            for row in _iter_rows(schema, data, idx, names):
                callback(row)
        return n

    def rows(self, table: str, idx, projection=None):
        """Materialize rows (as dicts) by position index."""
        schema = self.schema(table)
        data = self.snapshot()[table]
        names = _projection_names(schema, projection)
        return list(_iter_rows(schema, data, idx, names))

    # -- persistence --------------------------------------------------------

    def persist(self, path: str) -> None:
        """Write a versioned snapshot; byte-deterministic for equal state."""
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<II", _VERSION, len(_TABLE_ORDER)))
        snap = self.snapshot()
        for name in _TABLE_ORDER:
            schema = TABLES[name]
            data = snap[name]
            n = _nrows(schema, data)
            _w_str(buf, name)
            buf.write(struct.pack("<QH", n, len(schema.columns)))
            for col in schema.columns:
                _w_str(buf, col.name)
                buf.write(struct.pack("<B", _KIND_CODES[col.kind]))
                if col.kind == "str":
                    for s in data[col.name]:
                        b = s.encode("utf-8")
                        buf.write(struct.pack("<I", len(b)))
                        buf.write(b)
                else:
                    arr = np.ascontiguousarray(
                        data[col.name], dtype=_dtype_for(col.kind)
                    )
                    buf.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
        payload = buf.getvalue()
        crc = zlib.crc32(payload) & 0xFFFFFFFF
        with open(path, "wb") as f:
            f.write(payload)
            f.write(struct.pack("<I", crc))

    @classmethod
    def restore(cls, path: str) -> "CatalogStore":
        with open(path, "rb") as f:
            blob = f.read()
        if len(blob) < len(_MAGIC) + 12 or blob[: len(_MAGIC)] != _MAGIC:
            raise SnapshotFormatError("not a catalog snapshot: bad magic")
        payload, crc_bytes = blob[:-4], blob[-4:]
        (crc,) = struct.unpack("<I", crc_bytes)
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise SnapshotFormatError("snapshot checksum mismatch (truncated?)")
        off = len(_MAGIC)
        version, ntables = struct.unpack_from("<II", payload, off)
        off += 8
        if version != _VERSION:
            raise SnapshotFormatError("unsupported snapshot version %d" % version)
        if ntables != len(_TABLE_ORDER):
            raise SnapshotFormatError("snapshot table catalog mismatch")
        store = cls()
        data = {}
        try:
            for _ in range(ntables):
                name, off = _r_str(payload, off)
                if name not in TABLES:
                    raise SnapshotFormatError("unknown table '%s'" % name)
                schema = TABLES[name]
                n, ncols = struct.unpack_from("<QH", payload, off)
                off += 10
                if ncols != len(schema.columns):
                    raise SnapshotFormatError(
                        "column count mismatch for %s" % name
                    )
                tdata = {}
                for col in schema.columns:
                    cname, off = _r_str(payload, off)
                    (kcode,) = struct.unpack_from("<B", payload, off)
                    off += 1
                    if cname != col.name or kcode != _KIND_CODES[col.kind]:
                        raise SnapshotFormatError(
                            "column mismatch %s.%s" % (name, cname)
                        )
                    if col.kind == "str":
                        vals = []
                        for _ in range(n):
                            (ln,) = struct.unpack_from("<I", payload, off)
                            off += 4
                            vals.append(payload[off : off + ln].decode("utf-8"))
                            off += ln
                        tdata[cname] = vals
                    else:
                        dt = np.dtype(_dtype_for(col.kind)).newbyteorder("<")
                        nbytes = dt.itemsize * n
                        arr = np.frombuffer(
                            payload, dtype=dt, count=n, offset=off
                        ).astype(_dtype_for(col.kind))
                        off += nbytes
                        tdata[cname] = arr
                data[name] = tdata
        except (struct.error, UnicodeDecodeError, ValueError) as exc:
            raise SnapshotFormatError("snapshot is corrupt: %s" % exc) from exc
        if off != len(payload):
            raise SnapshotFormatError("trailing bytes in snapshot")
        store._data = data
        # resume the clock past any stored timestamp so undo windows stay
        # unambiguous across restarts
        last = 0
        for name in _TABLE_ORDER:
            lt = data[name]["loadTime"]
            if len(lt):
                last = max(last, int(lt.max()))
        store._clock._last = last
        return store

    # -- integrity audit ------------------------------------------------------

    def audit(self) -> list[str]:
        """Full integrity check; returns one line per violation."""
        snap = self.snapshot()
        problems = []
        for name in _TABLE_ORDER:
            schema = TABLES[name]
            data = snap[name]
            problems += _audit_keys(schema, data)
            problems += _audit_nulls(schema, data)
            problems += _audit_fks(schema, data, snap)
        problems += _audit_photo(snap)
        problems += _audit_neighbors(snap)
        problems += _audit_tag(snap)
        return problems


# ---------------------------------------------------------------------------
# table helpers

def _empty_table(schema: TableSchema) -> dict:
    out = {}
    for c in schema.columns:
        if c.kind == "str":
            out[c.name] = []
        else:
            out[c.name] = np.empty(0, dtype=_dtype_for(c.kind))
    return out


def _nrows(schema: TableSchema, data: dict) -> int:
    first = schema.columns[0].name
    return len(data[first])


def _nrows_cols(schema: TableSchema, cols: dict) -> int:
    lengths = {len(v) for v in cols.values()}
    if len(lengths) > 1:
        raise IntegrityError("ragged batch: column lengths differ")
    return lengths.pop() if lengths else 0


def _take(col, keep, kind):
    if kind == "str":
        return [v for v, k in zip(col, keep) if k]
    return col[keep]


def _append(schema: TableSchema, old: dict, cols: dict) -> dict:
    out = {}
    for c in schema.columns:
        if c.kind == "str":
            out[c.name] = list(old[c.name]) + list(cols[c.name])
        else:
            out[c.name] = np.concatenate([old[c.name], cols[c.name]])
    return out


def _recluster(schema: TableSchema, data: dict) -> dict:
    keys = [data[k] for k in reversed(schema.cluster_by)]
    order = np.lexsort(keys)
    if np.array_equal(order, np.arange(len(order))):
        return data
    out = {}
    for c in schema.columns:
        if c.kind == "str":
            src = data[c.name]
            out[c.name] = [src[i] for i in order]
        else:
            out[c.name] = data[c.name][order]
    return out


def _project_tag(photo: dict) -> dict:
    tag = {name: photo[name] for name in PHOTO_TAG_COLUMNS}
    tag["loadTime"] = photo["loadTime"]
    return tag


def _projection_names(schema: TableSchema, projection):
    if projection is None:
        return schema.column_names
    names = []
    for p in projection:
        match = [c.name for c in schema.columns if c.name.lower() == str(p).lower()]
        if not match:
            raise NotFoundError("unknown column '%s' on %s" % (p, schema.name))
        names.append(match[0])
    return tuple(names)


def value_out(col, raw):
    """Convert one stored value to its natural Python form."""
    if col.kind == "int":
        return int(raw)
    if col.kind == "float":
        return float(raw)
    if col.kind == "bool":
        return bool(raw)
    if col.kind == "enum":
        return col.enum[int(raw)]
    if col.kind == "time":
        return format_time(int(raw))
    return raw


def _iter_rows(schema: TableSchema, data: dict, idx, names):
    cols = [(schema.column(n), data[n]) for n in names]
    for i in idx:
        yield {c.name: value_out(c, col[i]) for c, col in cols}


# ---------------------------------------------------------------------------
# batch coercion and validation

def _coerce_batch(schema: TableSchema, rows) -> dict:
    loadable = schema.loadable_columns
    if isinstance(rows, dict):
        missing = [c.name for c in loadable if c.name not in rows]
        if missing:
            raise IntegrityError("batch is missing columns: %s" % ", ".join(missing))
        pairs = [(c, rows[c.name]) for c in loadable]
    else:
        rows = list(rows)
        if rows and isinstance(rows[0], dict):
            missing = [c.name for c in loadable if c.name not in rows[0]]
            if missing:
                raise IntegrityError(
                    "batch is missing columns: %s" % ", ".join(missing)
                )
            pairs = [(c, [r[c.name] for r in rows]) for c in loadable]
        else:
            if rows and len(rows[0]) != len(loadable):
                raise IntegrityError(
                    "tuple rows must have %d values" % len(loadable)
                )
            pairs = [
                (c, [r[j] for r in rows]) for j, c in enumerate(loadable)
            ]
    out = {}
    for c, values in pairs:
        if c.kind == "str":
            out[c.name] = [_coerce_str(c, v) for v in values]
        elif c.kind == "enum":
            out[c.name] = np.array(
                [_coerce_enum(c, v) for v in values], dtype=np.int8
            )
        elif c.kind == "bool":
            out[c.name] = np.array(
                [1 if _coerce_bool(c, v) else 0 for v in values], dtype=np.uint8
            )
        else:
            arr = np.asarray(values, dtype=_dtype_for(c.kind))
            out[c.name] = arr
    return out


def _coerce_str(col, v):
    if v is None:
        raise IntegrityError("null value in column %s" % col.name)
    return str(v)


def _coerce_enum(col, v):
    if isinstance(v, str):
        try:
            return col.enum.index(v)
        except ValueError:
            raise IntegrityError(
                "'%s' is not a valid %s (valid: %s)"
                % (v, col.name, ", ".join(col.enum))
            ) from None
    code = int(v)
    if not 0 <= code < len(col.enum):
        raise IntegrityError("enum code %d out of range for %s" % (code, col.name))
    return code


def _coerce_bool(col, v):
    if isinstance(v, str):
        lv = v.strip().lower()
        if lv in ("1", "true"):
            return True
        if lv in ("0", "false"):
            return False
        raise IntegrityError("bad boolean %r in column %s" % (v, col.name))
    return bool(v)


def _first_bad(mask) -> int:
    return int(np.flatnonzero(mask)[0])


def _validate_batch(schema: TableSchema, cols: dict, snap: dict) -> None:
    n = _nrows_cols(schema, cols)
    if n == 0:
        return
    name = schema.name
    # nulls
    for c in schema.columns:
        v = cols[c.name]
        if c.kind == "float":
            bad = np.isnan(v)
            if bad.any():
                raise IntegrityError(
                    "%s row %d: column %s is null" % (name, _first_bad(bad), c.name)
                )
        elif c.kind == "str":
            for i, s in enumerate(v):
                if s == "":
                    raise IntegrityError(
                        "%s row %d: column %s is null" % (name, i, c.name)
                    )
    # key uniqueness (within the batch and against stored rows)
    key_cols = schema.key
    batch_keys = _key_array(cols, key_cols)
    uniq, counts = np.unique(batch_keys, return_counts=True, axis=0)
    if (counts > 1).any():
        raise IntegrityError(
            "%s: duplicate primary key %s in batch"
            % (name, uniq[counts > 1][0].tolist())
        )
    stored = snap[name]
    if _nrows(schema, stored):
        stored_keys = _key_array(stored, key_cols)
        clash = _rows_in(batch_keys, stored_keys)
        if clash.any():
            raise IntegrityError(
                "%s row %d: primary key already present"
                % (name, _first_bad(clash))
            )
    # foreign keys
    for fk in schema.foreign_keys:
        refs = cols[fk.column]
        check = np.ones(n, dtype=bool)
        if fk.zero_means_none:
            check = refs != 0
        if not check.any():
            continue
        target = snap[fk.ref_table][fk.ref_column]
        if fk.ref_table == name:
            target = np.concatenate([target, cols[fk.ref_column]])
        ok = np.isin(refs[check], target)
        if not ok.all():
            i = _first_bad(~ok)
            row = int(np.flatnonzero(check)[i])
            raise IntegrityError(
                "%s row %d: %s=%d does not resolve to %s.%s"
                % (name, row, fk.column, int(refs[check][i]), fk.ref_table,
                   fk.ref_column)
            )
    _validate_table_rules(schema, cols, snap, n)


def _key_array(data: dict, key_cols):
    if len(key_cols) == 1:
        return np.asarray(data[key_cols[0]])
    return np.stack([np.asarray(data[k]) for k in key_cols], axis=1)


def _rows_in(a, b):
    if a.ndim == 1:
        return np.isin(a, b)
    # composite keys: encode pairs as single integers (ids fit in 63 bits)
    am = a[:, 0] * np.int64(2**31) + a[:, 1]
    bm = b[:, 0] * np.int64(2**31) + b[:, 1]
    return np.isin(am, bm)


def _validate_table_rules(schema, cols, snap, n):
    name = schema.name
    if name == "PhotoObj":
        _validate_photo_rules(cols, snap, n)
    elif name == "Field":
        if (cols["raMin"] > cols["raMax"]).any():
            raise IntegrityError(
                "Field row %d: raMin > raMax"
                % _first_bad(cols["raMin"] > cols["raMax"])
            )
        if (cols["decMin"] > cols["decMax"]).any():
            raise IntegrityError(
                "Field row %d: decMin > decMax"
                % _first_bad(cols["decMin"] > cols["decMax"])
            )
    elif name == "SpecObj":
        if (cols["zErr"] < 0).any():
            raise IntegrityError(
                "SpecObj row %d: zErr < 0" % _first_bad(cols["zErr"] < 0)
            )
        bad = (cols["fiberID"] < 1) | (cols["fiberID"] > 640)
        if bad.any():
            raise IntegrityError(
                "SpecObj row %d: fiberID outside 1..640" % _first_bad(bad)
            )
        _check_dec(name, cols)
    elif name == "SpecLine":
        if (cols["wavelength"] <= 0).any():
            raise IntegrityError(
                "SpecLine row %d: wavelength must be positive"
                % _first_bad(cols["wavelength"] <= 0)
            )
    elif name == "XCRedshift":
        bad = (cols["confidence"] < 0) | (cols["confidence"] > 1)
        if bad.any():
            raise IntegrityError(
                "XCRedshift row %d: confidence outside [0, 1]" % _first_bad(bad)
            )
    elif name == "ElRedshift":
        if (cols["nLines"] < 0).any():
            raise IntegrityError(
                "ElRedshift row %d: nLines < 0" % _first_bad(cols["nLines"] < 0)
            )
    elif name == "Plate":
        _check_dec(name, cols)
    elif name == "Neighbors":
        _validate_neighbor_rules(cols, snap, n)


def _check_dec(name, cols):
    bad = (cols["dec"] < -90) | (cols["dec"] > 90)
    if bad.any():
        raise IntegrityError("%s row %d: dec outside [-90, 90]" % (name, _first_bad(bad)))


def _validate_photo_rules(cols, snap, n):
    _check_dec("PhotoObj", cols)
    v = np.stack([cols["cx"], cols["cy"], cols["cz"]], axis=1)
    norm = np.sqrt((v * v).sum(axis=1))
    bad = np.abs(norm - 1.0) > 1e-9
    if bad.any():
        raise IntegrityError(
            "PhotoObj row %d: (cx,cy,cz) is not a unit vector" % _first_bad(bad)
        )
    expected = htm.radec_to_unit_batch(cols["ra"], cols["dec"])
    bad = np.abs(v - expected).max(axis=1) > 1e-9
    if bad.any():
        raise IntegrityError(
            "PhotoObj row %d: (cx,cy,cz) disagrees with (ra,dec)"
            % _first_bad(bad)
        )
    ids = htm.htm_lookup_batch(v, HTM_DEPTH)
    bad = ids != cols["htmID"]
    if bad.any():
        raise IntegrityError(
            "PhotoObj row %d: htmID does not match position" % _first_bad(bad)
        )
    primary_bit = (cols["flags"] & PHOTO_FLAGS["PRIMARY"]) != 0
    bad = primary_bit != (cols["isPrimary"] != 0)
    if bad.any():
        raise IntegrityError(
            "PhotoObj row %d: isPrimary disagrees with the PRIMARY flag bit"
            % _first_bad(bad)
        )
    for b in "ugriz":
        col = cols["modelMagErr_%s" % b]
        if (col < 0).any():
            raise IntegrityError(
                "PhotoObj row %d: modelMagErr_%s < 0" % (_first_bad(col < 0), b)
            )
    # deblended parents are never primary (within batch + against store)
    all_ids = np.concatenate([snap["PhotoObj"]["objID"], cols["objID"]])
    all_primary = np.concatenate(
        [snap["PhotoObj"]["isPrimary"], cols["isPrimary"]]
    )
    all_parents = np.concatenate(
        [snap["PhotoObj"]["parentID"], cols["parentID"]]
    )
    referenced = np.unique(all_parents[all_parents != 0])
    if len(referenced):
        # parents are known to exist (FK check above); ids are unique
        order = np.argsort(all_ids)
        hit = order[np.searchsorted(all_ids, referenced, sorter=order)]
        if (all_primary[hit] != 0).any():
            bad_id = int(all_ids[hit][all_primary[hit] != 0][0])
            raise IntegrityError(
                "PhotoObj %d is a deblend parent and may not be primary" % bad_id
            )


def _validate_neighbor_rules(cols, snap, n):
    if (cols["objID"] == cols["neighborObjID"]).any():
        raise IntegrityError(
            "Neighbors row %d: object paired with itself"
            % _first_bad(cols["objID"] == cols["neighborObjID"])
        )
    bad = cols["distance"] > NEIGHBOR_RADIUS_ARCMIN + _DIST_TOL
    if bad.any():
        raise IntegrityError(
            "Neighbors row %d: distance exceeds %.2f arcmin"
            % (_first_bad(bad), NEIGHBOR_RADIUS_ARCMIN)
        )
    if (cols["distance"] < 0).any():
        raise IntegrityError("Neighbors: negative distance")
    # pair symmetry within batch + stored rows
    a = np.concatenate([snap["Neighbors"]["objID"], cols["objID"]])
    b = np.concatenate([snap["Neighbors"]["neighborObjID"], cols["neighborObjID"]])
    fwd = a * np.int64(2**31) + b
    rev = b * np.int64(2**31) + a
    missing = ~np.isin(fwd, rev)
    if missing.any():
        i = _first_bad(missing)
        raise IntegrityError(
            "Neighbors: pair (%d, %d) lacks its mirror row"
            % (int(a[i]), int(b[i]))
        )


# ---------------------------------------------------------------------------
# audit

def _audit_keys(schema, data):
    n = _nrows(schema, data)
    if n == 0:
        return []
    keys = _key_array(data, schema.key)
    uniq = np.unique(keys, axis=0) if keys.ndim > 1 else np.unique(keys)
    if len(uniq) != n:
        return ["%s: duplicate primary keys" % schema.name]
    return []


def _audit_nulls(schema, data):
    out = []
    for c in schema.columns:
        if c.kind == "float":
            if np.isnan(data[c.name]).any():
                out.append("%s.%s: null (NaN) values" % (schema.name, c.name))
        elif c.kind == "str":
            if any(s == "" for s in data[c.name]):
                out.append("%s.%s: empty text values" % (schema.name, c.name))
        elif c.kind == "enum":
            v = data[c.name]
            if len(v) and ((v < 0) | (v >= len(c.enum))).any():
                out.append("%s.%s: enum codes out of range" % (schema.name, c.name))
    return out


def _audit_fks(schema, data, snap):
    out = []
    n = _nrows(schema, data)
    if n == 0:
        return out
    for fk in schema.foreign_keys:
        refs = np.asarray(data[fk.column])
        if fk.zero_means_none:
            refs = refs[refs != 0]
        if len(refs) == 0:
            continue
        target = np.asarray(snap[fk.ref_table][fk.ref_column])
        if not np.isin(refs, target).all():
            out.append(
                "%s.%s: unresolved references into %s"
                % (schema.name, fk.column, fk.ref_table)
            )
    return out


def _audit_photo(snap):
    out = []
    schema = TABLES["PhotoObj"]
    data = snap["PhotoObj"]
    n = _nrows(schema, data)
    if n == 0:
        return out
    v = np.stack([data["cx"], data["cy"], data["cz"]], axis=1)
    if (np.abs(np.sqrt((v * v).sum(axis=1)) - 1) > 1e-9).any():
        out.append("PhotoObj: non-unit (cx,cy,cz)")
    expected = htm.radec_to_unit_batch(data["ra"], data["dec"])
    if (np.abs(v - expected).max(axis=1) > 1e-9).any():
        out.append("PhotoObj: (cx,cy,cz) disagrees with (ra,dec)")
    if (htm.htm_lookup_batch(v, HTM_DEPTH) != data["htmID"]).any():
        out.append("PhotoObj: stale htmID values")
    if not np.array_equal(
        (data["flags"] & PHOTO_FLAGS["PRIMARY"]) != 0, data["isPrimary"] != 0
    ):
        out.append("PhotoObj: isPrimary disagrees with the PRIMARY flag bit")
    parents = data["parentID"]
    referenced = np.unique(parents[parents != 0])
    if len(referenced):
        is_parent = np.isin(data["objID"], referenced)
        if (data["isPrimary"][is_parent] != 0).any():
            out.append("PhotoObj: deblend parent marked primary")
    if (np.diff(data["htmID"]) < 0).any():
        out.append("PhotoObj: storage not clustered by htmID")
    return out


def _audit_neighbors(snap):
    out = []
    data = snap["Neighbors"]
    a = data["objID"]
    b = data["neighborObjID"]
    if len(a) == 0:
        return out
    if (a == b).any():
        out.append("Neighbors: self pairs")
    if (data["distance"] > NEIGHBOR_RADIUS_ARCMIN + _DIST_TOL).any():
        out.append("Neighbors: distance beyond %.2f arcmin" % NEIGHBOR_RADIUS_ARCMIN)
    fwd = a * np.int64(2**31) + b
    rev = b * np.int64(2**31) + a
    if not np.isin(fwd, rev).all():
        out.append("Neighbors: asymmetric pairs")
    return out


def _audit_tag(snap):
    out = []
    photo = snap["PhotoObj"]
    tag = snap["PhotoTag"]
    if len(tag["objID"]) != len(photo["objID"]):
        out.append("PhotoTag: row count differs from PhotoObj")
        return out
    for name in PHOTO_TAG_COLUMNS:
        a = np.asarray(photo[name])
        b = np.asarray(tag[name])
        if a.dtype != b.dtype or not np.array_equal(
            a.view(np.uint8), b.view(np.uint8)
        ):
            out.append("PhotoTag.%s: differs from PhotoObj" % name)
    return out


def _w_str(buf, s: str):
    b = s.encode("utf-8")
    buf.write(struct.pack("<H", len(b)))
    buf.write(b)


def _r_str(payload, off):
    (ln,) = struct.unpack_from("<H", payload, off)
    off += 2
    s = payload[off : off + ln].decode("utf-8")
    return s, off + ln
