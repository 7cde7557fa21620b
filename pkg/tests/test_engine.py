import math
import time

import numpy as np
import pytest

import oracles
from conftest import photo_points
from skycat import htm
from skycat.bench import load_dataset_into_store, make_flat_catalog
from skycat.engine import QueryEngine, QueryRequest
from skycat.errors import DomainError, FilterSyntaxError, NotFoundError
from skycat.generator import GeneratorSpec, generate_dataset
from skycat.store import CatalogStore


def test_cover_table_shape(engine10k):
    region = htm.circle_to_region(10, 10, 180)
    rs = engine10k.htm_cover_table(region, 3)
    assert rs.column_names == ["htmIDStart", "htmIDEnd"]
    assert rs.rows == [(8 << 6, 16 << 6)]


def test_cone_search_empty_catalog():
    engine = QueryEngine(CatalogStore())
    rs = engine.cone_search(10, 10, 5, view="PhotoObj")
    assert rs.rows == [] and not rs.truncated and not rs.timed_out


def test_cone_search_whole_sky(catalog10k, engine10k):
    store, _ = catalog10k
    rs = engine10k.cone_search(0, 0, 180, view="PhotoObj", limit=10**9)
    assert len(rs.rows) == store.count("PhotoObj")


def test_cone_search_matches_linear_oracle(catalog10k, engine10k):
    store, _ = catalog10k
    pts, ids, _ = photo_points(store)
    rng = np.random.default_rng(55)
    for _ in range(60):
        ra = rng.uniform(0, 360)
        dec = math.degrees(math.asin(rng.uniform(-1, 1)))
        radius = 10 ** rng.uniform(-2, 1.3)
        rs = engine10k.cone_search(ra, dec, radius, view="PhotoObj", limit=10**9)
        got = set(r[0] for r in rs.rows)
        want = oracles.cone_ids(pts, ids, htm.radec_to_unit(ra, dec), radius)
        assert got == want


def test_cone_search_ordering_and_limit_prefix(catalog10k, engine10k):
    rs_all = engine10k.cone_search(45, 30, 60, view="PhotoObj", limit=10**9)
    dists = [r[-1] for r in rs_all.rows]
    assert dists == sorted(dists)
    rs10 = engine10k.cone_search(45, 30, 60, view="PhotoObj", limit=10)
    assert rs10.truncated
    assert rs10.rows == rs_all.rows[:10]


def test_cone_search_respects_view_and_predicate(catalog10k, engine10k):
    store, _ = catalog10k
    rs = engine10k.cone_search(
        120, -20, 40, view="Stars", predicate="r < 20", limit=10**9
    )
    data = store.snapshot()["PhotoObj"]
    for row in rs.rows:
        i = int(np.flatnonzero(data["objID"] == row[0])[0])
        assert data["objType"][i] == 0
        assert data["isPrimary"][i] == 1
        assert data["modelMag_r"][i] < 20


def test_cone_search_rejects_bad_input(engine10k):
    with pytest.raises(DomainError):
        engine10k.cone_search(0, 0, -1)
    with pytest.raises(FilterSyntaxError):
        engine10k.cone_search(0, 0, 1, predicate="((")
    with pytest.raises(NotFoundError):
        engine10k.cone_search(0, 0, 1, view="NoView")
    with pytest.raises(DomainError):
        engine10k.cone_search(0, 0, 1, view="SpecObj")


def test_nearest_object_empty_and_exact():
    store = make_flat_catalog(50, seed=9)
    engine = QueryEngine(store)
    data = store.snapshot()["PhotoObj"]
    ra, dec = float(data["ra"][7]), float(data["dec"][7])
    hit = engine.nearest_object(ra, dec, radius_arcmin=1.0)
    assert hit is not None
    assert hit["objID"] == int(data["objID"][7])
    assert hit["distance_arcmin"] == pytest.approx(0.0, abs=1e-9)
    assert QueryEngine(CatalogStore()).nearest_object(10, 10) is None


def test_nearest_matches_argmin_oracle(catalog10k, engine10k):
    store, _ = catalog10k
    pts, ids, primary = photo_points(store)
    rng = np.random.default_rng(56)
    for _ in range(60):
        ra = rng.uniform(0, 360)
        dec = math.degrees(math.asin(rng.uniform(-1, 1)))
        radius_arcmin = 10 ** rng.uniform(0, 2.2)
        got = engine10k.nearest_object(ra, dec, radius_arcmin)
        want = oracles.nearest_id(
            pts, ids, primary, htm.radec_to_unit(ra, dec), radius_arcmin
        )
        assert (got["objID"] if got else None) == want


def test_nearby_objects_shape(catalog10k, engine10k):
    store, _ = catalog10k
    data = store.snapshot()["PhotoObj"]
    prim = np.flatnonzero(data["isPrimary"] != 0)[0]
    ra, dec = float(data["ra"][prim]), float(data["dec"][prim])
    rs = engine10k.nearby_objects(ra, dec, 30.0)
    assert rs.column_names == ["objID", "distance_arcmin"]
    assert rs.rows[0][0] == int(data["objID"][prim])
    assert rs.rows[0][1] == pytest.approx(0.0, abs=1e-9)
    dists = [r[1] for r in rs.rows]
    assert dists == sorted(dists)


# ---------------------------------------------------------------------------
# neighbors

def two_object_store(sep_arcmin):
    store = CatalogStore()
    store.insert_batch(
        "Field",
        [
            dict(
                fieldID=1, run=94, camcol=1, fieldNum=1,
                raMin=0.0, raMax=360.0, decMin=-90.0, decMax=90.0,
            )
        ],
    )
    ra = np.array([180.0, 180.0])
    dec = np.array([0.0, sep_arcmin / 60.0])
    v = htm.radec_to_unit_batch(ra, dec)
    n = 2
    cols = {
        "objID": np.array([1, 2], dtype=np.int64),
        "fieldID": np.ones(n, dtype=np.int64),
        "ra": ra,
        "dec": dec,
        "cx": v[:, 0], "cy": v[:, 1], "cz": v[:, 2],
        "htmID": htm.htm_lookup_batch(v, 20),
        "objType": np.zeros(n, dtype=np.int8),
        "flags": np.ones(n, dtype=np.int64),
        "status": np.zeros(n, dtype=np.int64),
        "parentID": np.zeros(n, dtype=np.int64),
        "isPrimary": np.ones(n, dtype=np.uint8),
        "petroRad_r": np.ones(n),
        "specObjID": np.zeros(n, dtype=np.int64),
    }
    for b in "ugriz":
        cols["modelMag_%s" % b] = np.full(n, 18.0)
        cols["modelMagErr_%s" % b] = np.full(n, 0.05)
    for i in range(8):
        cols["profile_%d" % i] = np.ones(n)
    store.insert_batch("PhotoObj", cols)
    return store


def test_neighbors_two_objects_inside_and_outside():
    store = two_object_store(0.4)
    assert QueryEngine(store).build_neighbors() == 2
    pairs = set(
        zip(
            store.column("Neighbors", "objID").tolist(),
            store.column("Neighbors", "neighborObjID").tolist(),
        )
    )
    assert pairs == {(1, 2), (2, 1)}

    store = two_object_store(0.6)
    assert QueryEngine(store).build_neighbors() == 0
    assert store.count("Neighbors") == 0


def test_neighbors_inclusive_boundary():
    store = two_object_store(0.5)  # exactly at the radius
    assert QueryEngine(store).build_neighbors() == 2


def test_neighbors_match_all_pairs_oracle_clustered():
    region = htm.circle_to_region(200.0, 10.0, 1.5)
    ds = generate_dataset(GeneratorSpec(n_objects=5000, seed=77, sky_region=region))
    store = load_dataset_into_store(ds)
    engine = QueryEngine(store)
    count = engine.build_neighbors()
    pts, ids, _ = photo_points(store)
    want = oracles.all_pairs_neighbors(pts, ids, 0.5)
    got = set(
        zip(
            store.column("Neighbors", "objID").tolist(),
            store.column("Neighbors", "neighborObjID").tolist(),
        )
    )
    assert got == want
    assert count == len(want)
    assert store.audit() == []


def test_neighbors_replaces_prior_table():
    store = two_object_store(0.4)
    engine = QueryEngine(store)
    assert engine.build_neighbors() == 2
    assert engine.build_neighbors() == 2  # idempotent, not doubled
    assert store.count("Neighbors") == 2


# ---------------------------------------------------------------------------
# query()

def test_query_count_matches_loop_oracle(catalog10k, engine10k):
    store, _ = catalog10k
    rs = engine10k.query(
        QueryRequest(view="PhotoObj", predicate="(r-g)>1", projection=["count"])
    )
    data = store.snapshot()["PhotoObj"]
    want = sum(
        1
        for i in range(store.count("PhotoObj"))
        if data["modelMag_r"][i] - data["modelMag_g"][i] > 1
    )
    assert rs.rows == [(want,)]
    assert rs.rows_scanned == store.count("PhotoObj")


def test_query_limit_and_truncation(catalog10k, engine10k):
    rs = engine10k.query(QueryRequest(view="PhotoObj", limit=10))
    assert len(rs.rows) == 10 and rs.truncated
    rs_all = engine10k.query(QueryRequest(view="PhotoObj", limit=10**9))
    assert rs.rows == rs_all.rows[:10]
    assert not rs_all.truncated


def test_query_timeout_flag():
    store = make_flat_catalog(200000, seed=3)
    engine = QueryEngine(store)
    rs = engine.query(
        QueryRequest(view="PhotoObj", predicate="(r-g)>1", projection=["count"],
                     timeout=1e-9)
    )
    assert rs.timed_out
    assert rs.rows_scanned < store.count("PhotoObj")


def test_query_flag_predicate_selects_primaries(catalog10k, engine10k):
    store, _ = catalog10k
    rs = engine10k.query(
        QueryRequest(
            view="PhotoObj",
            predicate="flags & fPhotoFlags('primary')",
            projection=["count"],
        )
    )
    assert rs.rows[0][0] == int((store.column("PhotoObj", "isPrimary") != 0).sum())


def test_query_projection_and_default_columns(catalog10k, engine10k):
    rs = engine10k.query(QueryRequest(view="PhotoObj", limit=3))
    assert rs.column_names[:4] == ["objID", "htmID", "ra", "dec"]
    rs = engine10k.query(
        QueryRequest(view="SpecObj", projection=["specObjID", "z"], limit=3)
    )
    assert rs.column_names == ["specObjID", "z"]


def test_query_determinism(catalog10k, engine10k):
    req = QueryRequest(view="Galaxies", predicate="r < 21", limit=50)
    a = engine10k.query(req)
    b = engine10k.query(req)
    assert a.rows == b.rows and a.truncated == b.truncated


def test_view_errors(engine10k):
    with pytest.raises(NotFoundError):
        engine10k.query(QueryRequest(view="Nope"))
    with pytest.raises(NotFoundError):
        engine10k.query(QueryRequest(view="PhotoObj", projection=["nope"]))
    with pytest.raises(DomainError):
        QueryRequest(view="PhotoObj", limit=0)
    with pytest.raises(DomainError):
        QueryRequest(view="PhotoObj", timeout=0)


def test_spec_lines_for(catalog10k, engine10k):
    store, _ = catalog10k
    assert engine10k.spec_lines_for(10**9).rows == []
    sid = int(store.column("SpecObj", "specObjID")[0])
    rs = engine10k.spec_lines_for(sid)
    data = store.snapshot()["SpecLine"]
    want = int((data["specObjID"] == sid).sum())
    assert len(rs.rows) == want
    assert 1 <= want <= 60  # around 30 per spectrum
    wl = [r[rs.column_names.index("wavelength")] for r in rs.rows]
    assert wl == sorted(wl)


def test_index_effectiveness_bound():
    store = make_flat_catalog(100000, seed=12)
    engine = QueryEngine(store)
    total = store.count("PhotoObj")
    rng = np.random.default_rng(13)
    for radius in (0.5, 2.0, 10.0):
        ra = rng.uniform(0, 360)
        dec = math.degrees(math.asin(rng.uniform(-1, 1)))
        rs = engine.cone_search(ra, dec, radius, view="PhotoObj", limit=10**9)
        f = (1 - math.cos(math.radians(radius))) / 2
        assert rs.rows_scanned <= max(4 * f, 0.05) * total
