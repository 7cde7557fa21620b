"""HTTP API: queries, object drill-down, tiles, and load administration.

Responses are JSON with a fixed key order (or CSV/PNG where noted), so a
fixed store snapshot plus a fixed request always yields identical bytes.
Server-side caps only tighten client limits: rows to `row_cap`, timeout
to `timeout_cap`.

Error envelope: {"error": {"code": ..., "message": ..., ...}} with
HTTP 400 for malformed parameters, 422 for filter-expression problems
(carrying line/col for editors), 404 for unknown objects or tiles,
401 for missing admin credentials, and 409 for refused undos.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request, Response

from . import tiles
from .engine import DEFAULT_LIMIT, DEFAULT_TIMEOUT, QueryEngine, QueryRequest
from .errors import (
    AlreadyUndoneError,
    DependencyError,
    DomainError,
    FilterError,
    FilterSyntaxError,
    NotFoundError,
)
from .loader import Loader
from .store import CatalogStore, value_out

ADMIN_TOKEN_HEADER = "x-admin-token"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    snapshot: str | None = None
    ledger: str | None = None
    row_cap: int = 1000
    timeout_cap: float = 30.0
    admin_token: str = ""
    static_dir: str | None = None


_ENV_KEYS = {
    "SKYCAT_HOST": ("host", str),
    "SKYCAT_PORT": ("port", int),
    "SKYCAT_SNAPSHOT": ("snapshot", str),
    "SKYCAT_LEDGER": ("ledger", str),
    "SKYCAT_ROW_CAP": ("row_cap", int),
    "SKYCAT_TIMEOUT_CAP": ("timeout_cap", float),
    "SKYCAT_ADMIN_TOKEN": ("admin_token", str),
    "SKYCAT_STATIC_DIR": ("static_dir", str),
}


def load_config(path: str | None = None, env=None) -> ServiceConfig:
    """Defaults, overridden by a JSON config file, overridden by SKYCAT_*
    environment variables."""
    cfg = ServiceConfig()
    if path:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        for key, value in doc.items():
            if not hasattr(cfg, key):
                raise DomainError("unknown config key '%s'" % key)
            setattr(cfg, key, value)
    env = os.environ if env is None else env
    for name, (attr, conv) in _ENV_KEYS.items():
        if name in env:
            setattr(cfg, attr, conv(env[name]))
    return cfg


def _json_response(doc, status=200) -> Response:
    return Response(
        content=json.dumps(doc, separators=(", ", ": ")),
        status_code=status,
        media_type="application/json",
    )


def _error(status, code, message, **extra) -> Response:
    body = {"error": {"code": code, "message": message, **extra}}
    return _json_response(body, status)


class _BadParam(Exception):
    def __init__(self, message):
        self.message = message


def _need_float(params, name, default=None, lo=None, hi=None):
    raw = params.get(name)
    if raw is None:
        if default is None:
            raise _BadParam("missing parameter '%s'" % name)
        return default
    try:
        v = float(raw)
    except ValueError:
        raise _BadParam("parameter '%s' must be a number" % name) from None
    if not np.isfinite(v):
        raise _BadParam("parameter '%s' must be finite" % name)
    if lo is not None and v < lo:
        raise _BadParam("parameter '%s' must be >= %g" % (name, lo))
    if hi is not None and v > hi:
        raise _BadParam("parameter '%s' must be <= %g" % (name, hi))
    return v


def _need_int(params, name, default=None, lo=None):
    raw = params.get(name)
    if raw is None:
        if default is None:
            raise _BadParam("missing parameter '%s'" % name)
        return default
    try:
        v = int(raw)
    except ValueError:
        raise _BadParam("parameter '%s' must be an integer" % name) from None
    if lo is not None and v < lo:
        raise _BadParam("parameter '%s' must be >= %d" % (name, lo))
    return v


def result_document(rs) -> dict:
    # elapsed is reported to the nearest second, which also keeps payloads
    # byte-identical across repeats of any sub-second query
    return {
        "columns": rs.column_names,
        "types": [c[1] for c in rs.columns],
        "rows": [list(r) for r in rs.rows],
        "truncated": rs.truncated,
        "timedOut": rs.timed_out,
        "elapsed": int(round(rs.elapsed)),
        "rowsScanned": rs.rows_scanned,
    }


def result_csv(rs) -> str:
    import csv as _csv
    import io as _io

    from .loader import CSV_DIALECT

    buf = _io.StringIO()
    w = _csv.writer(buf, **CSV_DIALECT)
    w.writerow(rs.column_names)
    for row in rs.rows:
        w.writerow(row)
    return buf.getvalue()


def _filter_error_response(exc: FilterError) -> Response:
    code = (
        "filter_syntax" if isinstance(exc, FilterSyntaxError) else "filter_type"
    )
    return _error(422, code, exc.message, line=exc.line, col=exc.col)


def create_app(
    store: CatalogStore,
    loader: Loader,
    engine: QueryEngine,
    config: ServiceConfig | None = None,
) -> FastAPI:
    cfg = config or ServiceConfig()
    app = FastAPI(title="skycat", docs_url=None, redoc_url=None)

    def clamp_limits(params_limit, params_timeout):
        limit = min(params_limit, cfg.row_cap)
        timeout = min(params_timeout, cfg.timeout_cap)
        return max(limit, 1), timeout

    @app.get("/cone")
    def cone(request: Request):
        p = request.query_params
        try:
            ra = _need_float(p, "ra")
            dec = _need_float(p, "dec", lo=-90.0, hi=90.0)
            radius = _need_float(p, "radius", lo=0.0, hi=180.0)
            limit = _need_int(p, "limit", default=DEFAULT_LIMIT, lo=1)
            timeout = _need_float(p, "timeout", default=DEFAULT_TIMEOUT, lo=0.001)
        except _BadParam as exc:
            return _error(400, "bad_param", exc.message)
        view = p.get("view", "PrimaryObjects")
        where = p.get("where")
        limit, timeout = clamp_limits(limit, timeout)
        try:
            rs = engine.cone_search(
                ra, dec, radius, view=view, predicate=where,
                limit=limit, timeout=timeout,
            )
        except FilterError as exc:
            return _filter_error_response(exc)
        except NotFoundError as exc:
            return _error(400, "bad_param", str(exc))
        except DomainError as exc:
            return _error(400, "bad_param", str(exc))
        return _json_response(result_document(rs))

    @app.get("/nearest")
    def nearest(request: Request):
        p = request.query_params
        try:
            ra = _need_float(p, "ra")
            dec = _need_float(p, "dec", lo=-90.0, hi=90.0)
            radius = _need_float(p, "r", default=1.0, lo=0.0)
        except _BadParam as exc:
            return _error(400, "bad_param", exc.message)
        row = engine.nearest_object(ra, dec, radius_arcmin=radius)
        if row is None:
            return _json_response({"found": False})
        return _json_response({"found": True, "object": row})

    @app.get("/object/{obj_id}")
    def object_detail(obj_id: str):
        try:
            oid = int(obj_id)
        except ValueError:
            return _error(400, "bad_param", "objID must be an integer")
        doc = _object_document(store, engine, oid)
        if doc is None:
            return _error(404, "not_found", "no object with objID %d" % oid)
        return _json_response(doc)

    @app.post("/query")
    async def query(request: Request):
        try:
            body = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError as exc:
            return _error(400, "bad_param", "request body is not JSON: %s" % exc)
        if not isinstance(body, dict):
            return _error(400, "bad_param", "request body must be an object")
        try:
            limit = _need_int(body, "limit", default=DEFAULT_LIMIT, lo=1)
            timeout = _need_float(body, "timeout", default=DEFAULT_TIMEOUT, lo=0.001)
        except _BadParam as exc:
            return _error(400, "bad_param", exc.message)
        view = body.get("view", "PhotoObj")
        where = body.get("where") or None
        select = body.get("select")
        fmt = body.get("format", "json")
        if fmt not in ("json", "csv"):
            return _error(400, "bad_param", "format must be 'json' or 'csv'")
        if select is not None and (
            not isinstance(select, list)
            or not all(isinstance(s, str) for s in select)
        ):
            return _error(400, "bad_param", "select must be a list of column names")
        limit, timeout = clamp_limits(limit, timeout)
        try:
            rs = engine.query(
                QueryRequest(
                    view=view, predicate=where, projection=select,
                    limit=limit, timeout=timeout,
                )
            )
        except FilterError as exc:
            return _filter_error_response(exc)
        except NotFoundError as exc:
            return _error(400, "bad_param", str(exc))
        except DomainError as exc:
            return _error(400, "bad_param", str(exc))
        if fmt == "csv":
            return Response(content=result_csv(rs), media_type="text/csv")
        return _json_response(result_document(rs))

    @app.get("/tiles/{zoom}/{tx}/{ty}")
    def tile(zoom: str, tx: str, ty: str):
        try:
            z, x, y = int(zoom), int(tx), int(ty)
        except ValueError:
            return _error(400, "bad_param", "tile address must be integers")
        if not tiles.valid_address(z, x, y):
            return _error(404, "not_found", "no tile %s/%s/%s" % (zoom, tx, ty))
        png = tiles.tile_png(store, z, x, y)
        return Response(content=png, media_type="image/png")

    def _authorized(request: Request) -> bool:
        return bool(cfg.admin_token) and (
            request.headers.get(ADMIN_TOKEN_HEADER, "") == cfg.admin_token
        )

    @app.get("/admin/events")
    def admin_events(request: Request):
        if not _authorized(request):
            return _error(401, "unauthorized", "admin token required")
        p = request.query_params
        events = loader.list_events(
            table=p.get("table"), status=p.get("status")
        )
        return _json_response({"events": [e.to_json() for e in events]})

    @app.post("/admin/undo/{event_id}")
    def admin_undo(event_id: str, request: Request):
        if not _authorized(request):
            return _error(401, "unauthorized", "admin token required")
        try:
            eid = int(event_id)
        except ValueError:
            return _error(400, "bad_param", "event id must be an integer")
        try:
            deleted = loader.undo(eid)
        except NotFoundError as exc:
            return _error(404, "not_found", str(exc))
        except AlreadyUndoneError as exc:
            return _error(409, "already_undone", str(exc))
        except DependencyError as exc:
            return _error(409, "dependency", str(exc))
        except DomainError as exc:
            return _error(409, "not_undoable", str(exc))
        if cfg.snapshot:
            store.persist(cfg.snapshot)
        if cfg.ledger:
            loader.save_ledger(cfg.ledger)
        return _json_response({"undone": eid, "deletedRows": deleted})

    @app.get("/")
    def root():
        if cfg.static_dir:
            index = os.path.join(cfg.static_dir, "index.html")
            if os.path.exists(index):
                with open(index, "rb") as f:
                    return Response(content=f.read(), media_type="text/html")
        return _json_response(
            {
                "service": "skycat",
                "endpoints": [
                    "/cone", "/nearest", "/object/{objID}", "/query",
                    "/tiles/{zoom}/{tx}/{ty}", "/admin/events",
                    "/admin/undo/{eventID}",
                ],
            }
        )

    if cfg.static_dir and os.path.isdir(cfg.static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=cfg.static_dir, html=True), name="ui")

    return app


def _object_document(store: CatalogStore, engine: QueryEngine, obj_id: int):
    snap = store.snapshot()
    photo = snap["PhotoObj"]
    pos = np.flatnonzero(photo["objID"] == obj_id)
    if len(pos) == 0:
        return None
    i = int(pos[0])
    schema = store.schema("PhotoObj")
    obj = {c.name: value_out(c, photo[c.name][i]) for c in schema.columns}

    fschema = store.schema("Field")
    fdata = snap["Field"]
    fpos = np.flatnonzero(fdata["fieldID"] == obj["fieldID"])
    field_doc = (
        {c.name: value_out(c, fdata[c.name][int(fpos[0])]) for c in fschema.columns}
        if len(fpos)
        else None
    )

    spec_doc = None
    lines = []
    redshifts = {}
    if obj["specObjID"]:
        sid = obj["specObjID"]
        sschema = store.schema("SpecObj")
        sdata = snap["SpecObj"]
        spos = np.flatnonzero(sdata["specObjID"] == sid)
        if len(spos):
            spec_doc = {
                c.name: value_out(c, sdata[c.name][int(spos[0])])
                for c in sschema.columns
            }
            rs = engine.spec_lines_for(sid)
            lines = [dict(zip(rs.column_names, row)) for row in rs.rows]
            for tname, key in (("XCRedshift", "xc"), ("ElRedshift", "el")):
                tdata = snap[tname]
                tpos = np.flatnonzero(tdata["specObjID"] == sid)
                if len(tpos):
                    tschema = store.schema(tname)
                    redshifts[key] = {
                        c.name: value_out(c, tdata[c.name][int(tpos[0])])
                        for c in tschema.columns
                    }

    ndata = snap["Neighbors"]
    npos = np.flatnonzero(ndata["objID"] == obj_id)
    neighbors = [
        {
            "neighborObjID": int(ndata["neighborObjID"][j]),
            "distance": float(ndata["distance"][j]),
        }
        for j in npos
    ]
    neighbors.sort(key=lambda d: (d["distance"], d["neighborObjID"]))

    return {
        "object": obj,
        "field": field_doc,
        "specObj": spec_doc,
        "specLines": lines,
        "redshifts": redshifts,
        "neighbors": neighbors,
    }
