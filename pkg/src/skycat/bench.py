"""Benchmark harness: scan throughput, cone-search latency, neighbors.

Data is built in memory through the normal insert path (so it is fully
validated and clustered) but without the CSV round trip, which would
dominate the timings at millions of rows.
"""

from __future__ import annotations

import time

import numpy as np

from . import htm
from .engine import QueryEngine, QueryRequest
from .generator import GeneratorSpec, generate_dataset
from .schema import HTM_DEPTH, PHOTO_FLAGS, PROFILE_BINS
from .store import CatalogStore


def make_flat_catalog(n: int, seed: int = 0) -> CatalogStore:
    """A store with n uniform primary objects (plus one all-sky field).

    Minimal composition (no duplicates/blends/spectra): meant for scan and
    index benchmarks where only bulk and clustering matter.
    """
    rng = np.random.default_rng(seed)
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
    ra = rng.uniform(0.0, 360.0, n)
    dec = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))
    v = htm.radec_to_unit_batch(ra, dec)
    cols = {
        "objID": np.arange(1, n + 1, dtype=np.int64),
        "fieldID": np.ones(n, dtype=np.int64),
        "ra": ra,
        "dec": dec,
        "cx": v[:, 0],
        "cy": v[:, 1],
        "cz": v[:, 2],
        "htmID": htm.htm_lookup_batch(v, HTM_DEPTH),
        "objType": rng.integers(0, 2, n).astype(np.int8),
        "flags": np.full(n, PHOTO_FLAGS["PRIMARY"], dtype=np.int64),
        "status": np.zeros(n, dtype=np.int64),
        "parentID": np.zeros(n, dtype=np.int64),
        "isPrimary": np.ones(n, dtype=np.uint8),
        "petroRad_r": rng.uniform(0.5, 10.0, n),
        "specObjID": np.zeros(n, dtype=np.int64),
    }
    r = rng.uniform(14.0, 24.0, n)
    g = np.clip(r + rng.normal(0.6, 0.8, n), 14.0, 24.0)
    for band, vals in zip("ugriz", (g + 0.8, g, r, r - 0.3, r - 0.5)):
        cols["modelMag_%s" % band] = np.clip(vals, 14.0, 24.0)
        cols["modelMagErr_%s" % band] = rng.uniform(0.01, 0.2, n)
    for i in range(PROFILE_BINS):
        cols["profile_%d" % i] = rng.uniform(0.0, 100.0, n)
    store.insert_batch("PhotoObj", cols)
    return store


def load_dataset_into_store(dataset: dict) -> CatalogStore:
    """Insert a generated dataset's tables directly (no CSV round trip)."""
    store = CatalogStore()
    for name in dataset["manifest"]["loadOrder"]:
        cols = dataset["tables"][name]
        if name == "PhotoObj" and "cx" not in cols:
            cols = dict(cols)
            v = htm.radec_to_unit_batch(cols["ra"], cols["dec"])
            cols["cx"], cols["cy"], cols["cz"] = v[:, 0], v[:, 1], v[:, 2]
            cols["htmID"] = htm.htm_lookup_batch(v, HTM_DEPTH)
        if len(next(iter(cols.values()))):
            store.insert_batch(name, cols)
    return store


def bench_scan(rows: int = 1_000_000, seed: int = 0, repeats: int = 3) -> dict:
    """Warm count-with-predicate throughput over the flat catalog."""
    store = make_flat_catalog(rows, seed)
    engine = QueryEngine(store)
    req = QueryRequest(view="PhotoObj", predicate="(r-g)>1", projection=["count"])
    engine.query(req)  # warm
    best = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        rs = engine.query(req)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return {
        "rows": rows,
        "matched": rs.rows[0][0],
        "best_seconds": best,
        "rows_per_second": rows / best,
    }


def bench_cone(
    rows: int = 1_000_000, probes: int = 100, radius: float = 1.0, seed: int = 0
) -> dict:
    """Cone-search latency and scan selectivity on the flat catalog."""
    store = make_flat_catalog(rows, seed)
    engine = QueryEngine(store)
    rng = np.random.default_rng(seed + 1)
    t_total = 0.0
    scanned = []
    returned = 0
    for _ in range(probes):
        ra = rng.uniform(0, 360)
        dec = np.degrees(np.arcsin(rng.uniform(-1, 1)))
        t0 = time.perf_counter()
        rs = engine.cone_search(ra, dec, radius, view="PhotoObj", limit=10**9)
        t_total += time.perf_counter() - t0
        scanned.append(rs.rows_scanned)
        returned += len(rs.rows)
    return {
        "rows": rows,
        "probes": probes,
        "radius_deg": radius,
        "mean_latency_ms": 1000.0 * t_total / probes,
        "mean_rows_scanned": float(np.mean(scanned)),
        "max_scanned_fraction": max(scanned) / rows,
        "mean_returned": returned / probes,
    }


def bench_neighbors(rows: int = 5000, seed: int = 0, region_radius: float = 2.0) -> dict:
    """build_neighbors timing on a clustered synthetic catalog."""
    spec = GeneratorSpec(
        n_objects=rows,
        seed=seed,
        sky_region=htm.circle_to_region(180.0, 0.0, region_radius),
    )
    store = load_dataset_into_store(generate_dataset(spec))
    engine = QueryEngine(store)
    t0 = time.perf_counter()
    pairs = engine.build_neighbors()
    dt = time.perf_counter() - t0
    return {
        "rows": rows,
        "region_radius_deg": region_radius,
        "pairs": pairs,
        "seconds": dt,
        "mean_neighbors": pairs / rows if rows else 0.0,
    }
