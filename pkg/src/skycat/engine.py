"""Query execution: cone searches, nearest-object probes, neighbor
materialization, and predicate scans with row/time limits.

Spatial queries narrow candidates with an adaptive HTM cover (ranges at
leaf depth, bounded count) and then apply the exact arc-angle test, so
results are identical to a full linear scan.  Timeouts are cooperative:
the scan checks the clock at least every TIMEOUT_CHECK_ROWS rows and
returns whatever matched so far with the timedOut flag set.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import filterql, htm
from .errors import DomainError, NotFoundError
from .schema import (
    HTM_DEPTH,
    NEIGHBOR_RADIUS_ARCMIN,
    PHOTO_TAG_COLUMNS,
    TABLES,
)
from .store import CatalogStore, value_out

DEFAULT_LIMIT = 1000
DEFAULT_TIMEOUT = 30.0
TIMEOUT_CHECK_ROWS = 4096
COVER_MAX_RANGES = 4096


@dataclass
class QueryRequest:
    view: str = "PhotoObj"
    predicate: str | None = None
    projection: list[str] | None = None
    limit: int = DEFAULT_LIMIT
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.limit < 1:
            raise DomainError("limit must be >= 1")
        if self.timeout <= 0:
            raise DomainError("timeout must be > 0")


@dataclass
class ResultSet:
    columns: list[tuple[str, str]]  # (name, kind)
    rows: list[tuple]
    truncated: bool = False
    timed_out: bool = False
    elapsed: float = 0.0
    rows_scanned: int = 0

    @property
    def column_names(self):
        return [c[0] for c in self.columns]


class QueryEngine:
    """Read-mostly query layer over a CatalogStore."""

    def __init__(self, store: CatalogStore):
        self.store = store

    # -- spatial ------------------------------------------------------------

    def htm_cover_table(self, region: htm.ConvexRegion, depth: int) -> ResultSet:
        """The region's cover as a (lo, hi) range table."""
        t0 = time.monotonic()
        ranges = htm.cover(region, depth)
        return ResultSet(
            columns=[("htmIDStart", "int"), ("htmIDEnd", "int")],
            rows=[(lo, hi) for lo, hi in ranges],
            elapsed=time.monotonic() - t0,
        )

    def cone_search(
        self,
        ra: float,
        dec: float,
        radius: float,
        view: str = "PrimaryObjects",
        predicate: str | None = None,
        projection: list[str] | None = None,
        limit: int = DEFAULT_LIMIT,
        timeout: float = DEFAULT_TIMEOUT,
    ) -> ResultSet:
        """All view rows within `radius` degrees of (ra, dec), nearest first.

        The result carries a trailing distance_arcmin column.  Ties in
        distance order break by objID, so results are fully deterministic
        and a smaller limit always yields a prefix of a larger one.
        """
        if radius < 0 or radius > 180:
            raise DomainError("cone radius must be in [0, 180] degrees")
        t0 = time.monotonic()
        schema, view_pred = self.store.view_filter(view)
        if schema.name not in ("PhotoObj", "PhotoTag"):
            raise DomainError("cone_search requires a sky-object view")
        user_pred = (
            filterql.compile_predicate(predicate, schema) if predicate else None
        )
        snap = self.store.snapshot()
        data = snap[schema.name]
        geom = snap["PhotoObj"]  # PhotoTag shares row order with PhotoObj

        center = np.asarray(htm.radec_to_unit(ra, dec))
        region = htm.circle_to_region(ra, dec, radius)
        ranges = htm.cover_adaptive(region, HTM_DEPTH, COVER_MAX_RANGES)
        slices = self.store.htm_slices(ranges, snap)

        # chord-squared threshold for the exact distance test
        rr = math.radians(radius)
        chord2_max = (2.0 * math.sin(rr / 2.0)) ** 2

        matched_idx = []
        matched_d2 = []
        scanned = 0
        timed_out = False
        deadline = t0 + timeout
        for a, b in slices:
            for c0 in range(a, b, TIMEOUT_CHECK_ROWS):
                c1 = min(c0 + TIMEOUT_CHECK_ROWS, b)
                scanned += c1 - c0
                dx = geom["cx"][c0:c1] - center[0]
                dy = geom["cy"][c0:c1] - center[1]
                dz = geom["cz"][c0:c1] - center[2]
                d2 = dx * dx + dy * dy + dz * dz
                mask = d2 <= chord2_max * (1.0 + 1e-12) + 1e-30
                if mask.any():
                    idx = np.flatnonzero(mask) + c0
                    keep = np.ones(len(idx), dtype=bool)
                    if view_pred is not None:
                        sub = {k: v[idx] for k, v in data.items()}
                        keep &= np.asarray(
                            filterql.evaluate_block(view_pred, sub, len(idx)),
                            dtype=bool,
                        )
                    if user_pred is not None and keep.any():
                        sub = {k: v[idx] for k, v in data.items()}
                        keep &= np.asarray(
                            filterql.evaluate_block(user_pred, sub, len(idx)),
                            dtype=bool,
                        )
                    if keep.any():
                        matched_idx.append(idx[keep])
                        matched_d2.append(d2[mask][keep])
                if time.monotonic() > deadline:
                    timed_out = True
                    break
            if timed_out:
                break

        if matched_idx:
            idx = np.concatenate(matched_idx)
            d2 = np.concatenate(matched_d2)
            dist = np.degrees(2.0 * np.arcsin(np.minimum(np.sqrt(d2) / 2.0, 1.0)))
            # exact boundary: closed ball in true arc distance
            inside = dist <= radius
            idx, dist = idx[inside], dist[inside]
            order = np.lexsort((data["objID"][idx], dist))
            idx, dist = idx[order], dist[order]
        else:
            idx = np.empty(0, dtype=np.int64)
            dist = np.empty(0)

        truncated = len(idx) > limit
        idx, dist = idx[:limit], dist[:limit]
        names = self._projection(schema, projection)
        rows = self._rows_with_distance(schema, data, idx, dist, names)
        return ResultSet(
            columns=[(n, schema.column(n).kind) for n in names]
            + [("distance_arcmin", "float")],
            rows=rows,
            truncated=truncated,
            timed_out=timed_out,
            elapsed=time.monotonic() - t0,
            rows_scanned=scanned,
        )

    def nearest_object(self, ra: float, dec: float, radius_arcmin: float = 1.0):
        """The closest primary object within radius_arcmin, or None.

        Ties break toward the lower objID.  Returns (row dict including
        distance_arcmin) for the winner.
        """
        if radius_arcmin < 0:
            raise DomainError("radius must be >= 0")
        rs = self.cone_search(
            ra, dec, radius_arcmin / 60.0, view="PrimaryObjects", limit=1
        )
        if not rs.rows:
            return None
        return dict(zip(rs.column_names, rs.rows[0]))

    def nearby_objects(
        self,
        ra: float,
        dec: float,
        radius_arcmin: float,
        limit: int = DEFAULT_LIMIT,
        timeout: float = DEFAULT_TIMEOUT,
    ) -> ResultSet:
        """(objID, distance_arcmin) for primaries within the radius, ascending."""
        if radius_arcmin < 0:
            raise DomainError("radius must be >= 0")
        return self.cone_search(
            ra,
            dec,
            radius_arcmin / 60.0,
            view="PrimaryObjects",
            projection=["objID"],
            limit=limit,
            timeout=timeout,
        )

    # -- neighbors ------------------------------------------------------------

    def build_neighbors(self, radius_arcmin: float = NEIGHBOR_RADIUS_ARCMIN) -> int:
        """Replace the Neighbors table with all ordered pairs within radius.

        Works cell by cell over the clustered layout: rows sharing a coarse
        HTM prefix are matched against the candidates from a padded cover
        of their cell, never all-pairs over the catalog.
        """
        if radius_arcmin <= 0 or radius_arcmin > NEIGHBOR_RADIUS_ARCMIN:
            raise DomainError(
                "radius must be in (0, %.2f] arcmin" % NEIGHBOR_RADIUS_ARCMIN
            )
        snap = self.store.snapshot()
        data = snap["PhotoObj"]
        n = len(data["objID"])
        window = (0, 2**62)
        if n == 0:
            self.store.delete_by_loadtime("Neighbors", window)
            return 0
        radius_deg = radius_arcmin / 60.0
        cos_r = math.cos(math.radians(radius_deg))

        # cell depth: trixel edge a few times the search radius, coarsened
        # until the cell count stays manageable for the per-cell cover loop
        cell_depth = int(
            min(14, max(0, math.floor(math.log2(90.0 / (4.0 * radius_deg)))))
        )
        while cell_depth > 0:
            cells = data["htmID"] >> (2 * (HTM_DEPTH - cell_depth))
            ncells = int((cells[1:] != cells[:-1]).sum()) + 1
            if ncells <= max(64, n // 32):
                break
            cell_depth -= 1
        cells = data["htmID"] >> (2 * (HTM_DEPTH - cell_depth))
        starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
        bounds = np.r_[starts, n]

        pts = np.stack([data["cx"], data["cy"], data["cz"]], axis=1)
        ids = data["objID"]
        out_a, out_b, out_d = [], [], []
        for gi in range(len(starts)):
            g0, g1 = int(bounds[gi]), int(bounds[gi + 1])
            cell_id = int(cells[g0])
            va, vb, vc = htm.trixel_vertices(cell_id)
            ctr = va + vb + vc
            ctr /= np.linalg.norm(ctr)
            brad = max(
                htm.arc_angle(ctr, va), htm.arc_angle(ctr, vb), htm.arc_angle(ctr, vc)
            )
            cra, cdec = htm.unit_to_radec(ctr)
            pad_radius = min(brad + radius_deg + 1e-9, 180.0)
            region = htm.circle_to_region(cra, cdec, pad_radius)
            ranges = htm.cover_adaptive(region, HTM_DEPTH, 512)
            slices = self.store.htm_slices(ranges, snap)
            if not slices:
                continue
            cand = np.concatenate([np.arange(a, b) for a, b in slices])
            dots = pts[g0:g1] @ pts[cand].T
            hits = dots >= cos_r - 1e-15
            gi_idx, ci_idx = np.nonzero(hits)
            src = gi_idx + g0
            dst = cand[ci_idx]
            keep = src != dst
            src, dst = src[keep], dst[keep]
            if len(src) == 0:
                continue
            chord = np.sqrt(np.maximum(2.0 - 2.0 * dots[gi_idx[keep], ci_idx[keep]], 0.0))
            dist = np.degrees(2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))) * 60.0
            exact = dist <= radius_arcmin + 1e-9
            out_a.append(ids[src[exact]])
            out_b.append(ids[dst[exact]])
            out_d.append(dist[exact])

        self.store.delete_by_loadtime("Neighbors", window)
        if not out_a:
            return 0
        batch = {
            "objID": np.concatenate(out_a),
            "neighborObjID": np.concatenate(out_b),
            "distance": np.concatenate(out_d),
        }
        return self.store.insert_batch("Neighbors", batch)

    # -- predicate scans ----------------------------------------------------

    def query(self, req: QueryRequest) -> ResultSet:
        """Scan a view with an optional predicate, projection, and limits.

        projection=["count"] returns a single count row.  Row results come
        back in storage order; scanning stops at limit+1 matches (the
        extra row only sets the truncated flag).
        """
        t0 = time.monotonic()
        schema, view_pred = self.store.view_filter(req.view)
        user_pred = (
            filterql.compile_predicate(req.predicate, schema)
            if req.predicate
            else None
        )
        snap = self.store.snapshot()
        data = snap[schema.name]
        n = len(data[schema.columns[0].name])

        count_mode = req.projection is not None and [
            p.lower() for p in req.projection
        ] == ["count"]
        names = None if count_mode else self._projection(schema, req.projection)

        deadline = t0 + req.timeout
        total = 0
        scanned = 0
        kept_idx = []
        timed_out = False
        truncated = False
        for c0 in range(0, n, TIMEOUT_CHECK_ROWS):
            c1 = min(c0 + TIMEOUT_CHECK_ROWS, n)
            scanned += c1 - c0
            mask = None
            for pred in (view_pred, user_pred):
                if pred is None:
                    continue
                sub = {k: v[c0:c1] for k, v in data.items()}
                m = np.asarray(
                    filterql.evaluate_block(pred, sub, c1 - c0), dtype=bool
                )
                mask = m if mask is None else (mask & m)
            if mask is None:
                hits = np.arange(c0, c1)
            else:
                hits = np.flatnonzero(mask) + c0
            if count_mode:
                total += len(hits)
            elif len(hits):
                kept_idx.append(hits)
                total += len(hits)
                if total > req.limit:
                    truncated = True
                    break
            if time.monotonic() > deadline:
                timed_out = True
                break
        elapsed = time.monotonic() - t0

        if count_mode:
            return ResultSet(
                columns=[("count", "int")],
                rows=[(total,)],
                truncated=False,
                timed_out=timed_out,
                elapsed=elapsed,
                rows_scanned=scanned,
            )
        idx = (
            np.concatenate(kept_idx)[: req.limit]
            if kept_idx
            else np.empty(0, dtype=np.int64)
        )
        rows = [
            tuple(row.values())
            for row in self.store.rows(schema.name, idx, names)
        ]
        return ResultSet(
            columns=[(nm, schema.column(nm).kind) for nm in names],
            rows=rows,
            truncated=truncated,
            timed_out=timed_out,
            elapsed=elapsed,
            rows_scanned=scanned,
        )

    # -- drill-down -----------------------------------------------------------

    def spec_lines_for(self, spec_obj_id: int) -> ResultSet:
        """All SpecLine rows for one spectrum, wavelength ascending."""
        t0 = time.monotonic()
        schema = TABLES["SpecLine"]
        data = self.store.snapshot()["SpecLine"]
        idx = np.flatnonzero(data["specObjID"] == int(spec_obj_id))
        idx = idx[np.argsort(data["wavelength"][idx], kind="stable")]
        rows = [
            tuple(r.values()) for r in self.store.rows("SpecLine", idx)
        ]
        return ResultSet(
            columns=[(c.name, c.kind) for c in schema.columns],
            rows=rows,
            elapsed=time.monotonic() - t0,
            rows_scanned=len(data["specObjID"]),
        )

    # -- helpers ---------------------------------------------------------------

    def _projection(self, schema, projection):
        if projection is None:
            if schema.name in ("PhotoObj", "PhotoTag"):
                return list(PHOTO_TAG_COLUMNS)
            return [c.name for c in schema.columns]
        out = []
        for p in projection:
            match = [c.name for c in schema.columns if c.name.lower() == p.lower()]
            if not match:
                raise NotFoundError("unknown column '%s' on %s" % (p, schema.name))
            out.append(match[0])
        return out

    def _rows_with_distance(self, schema, data, idx, dist, names):
        cols = [(schema.column(nm), data[nm]) for nm in names]
        rows = []
        for k, i in enumerate(idx):
            vals = tuple(value_out(c, col[i]) for c, col in cols)
            rows.append(vals + (float(dist[k] * 60.0),))
        return rows
