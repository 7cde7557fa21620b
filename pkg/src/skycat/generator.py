"""Synthetic catalog generator.

Produces a deterministic, seed-driven dataset with the structural
features the catalog machinery exercises: duplicate detection groups
(one primary per group), deblended parents with child rows, spectra
grouped onto plates of 600 fibers, and ~30 spectral lines per spectrum.

The photometry itself (magnitudes, colors, profiles) is statistically
shaped but not physical: only the ranges and the primary/duplicate
fractions are contractual.

Row composition for n rows with primary fraction P and duplicate row
fraction D (fraction of rows belonging to a multi-detection group):

    blend families:   b = (1 - P - D/2) * n   (parent + 2 primary children)
    duplicate pairs:  d = D/2 * n             (one primary + one secondary)
    singles:          s = n - 3b - 2d

which yields primaries = 2b + d + s = P*n and duplicate rows = 2d = D*n.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import htm
from .errors import DomainError
from .loader import CSV_DIALECT
from .schema import (
    HTM_DEPTH,
    OBJ_TYPES,
    PHOTO_FLAGS,
    PROFILE_BINS,
    SPEC_CLASSES,
    TABLES,
)

SPECTRA_PER_PLATE = 600
MEAN_LINES_PER_SPECTRUM = 30

# Tables emitted by the generator, in FK-safe load order.
GENERATED_TABLES = (
    "Field",
    "Plate",
    "SpecObj",
    "PhotoObj",
    "SpecLine",
    "SpecLineIndex",
    "XCRedshift",
    "ElRedshift",
)

_LINE_INDEX_NAMES = ("CaII_K", "G_band", "Mg_b", "Na_D", "H_alpha")

_FIELD_GRID_DEG = 10.0


@dataclass
class GeneratorSpec:
    n_objects: int
    n_plates: int = 0
    seed: int = 0
    sky_region: htm.ConvexRegion | None = None
    duplicate_fraction: float = 0.11
    primary_fraction: float = 0.80

    def __post_init__(self):
        if self.n_objects < 0:
            raise DomainError("n_objects must be >= 0")
        if self.n_plates < 0:
            raise DomainError("n_plates must be >= 0")
        for name in ("duplicate_fraction", "primary_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError("%s must be in [0, 1]" % name)
        b = 1.0 - self.primary_fraction - self.duplicate_fraction / 2.0
        if b < -1e-12:
            raise DomainError(
                "infeasible mix: need duplicate_fraction <= 2*(1-primary_fraction)"
            )


def _counts(spec: GeneratorSpec) -> tuple[int, int, int]:
    n = spec.n_objects
    d = int(round(spec.duplicate_fraction * n / 2.0))
    b = int(round((1.0 - spec.primary_fraction - spec.duplicate_fraction / 2.0) * n))
    s = n - 3 * b - 2 * d
    while s < 0:  # tiny n with aggressive fractions: trade families for singles
        if b > 0:
            b -= 1
        elif d > 0:
            d -= 1
        s = n - 3 * b - 2 * d
    return b, d, s


def _sample_positions(rng, count, region):
    """Uniform directions on the sphere, restricted to `region` if given."""
    if count == 0:
        return np.empty(0), np.empty(0)
    ra = np.empty(count)
    dec = np.empty(count)
    got = 0
    while got < count:
        m = max(count - got, 256)
        cand_ra = rng.uniform(0.0, 360.0, m)
        cand_dec = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, m)))
        if region is not None:
            v = htm.radec_to_unit_batch(cand_ra, cand_dec)
            normals, offsets = region.arrays()
            ok = np.ones(m, dtype=bool)
            for nrm, off in zip(normals, offsets):
                ok &= v @ nrm >= off
            cand_ra, cand_dec = cand_ra[ok], cand_dec[ok]
        take = min(count - got, len(cand_ra))
        ra[got : got + take] = cand_ra[:take]
        dec[got : got + take] = cand_dec[:take]
        got += take
    return ra, dec


def _offset_positions(rng, ra, dec, sigma_arcsec):
    """Jitter positions by ~sigma arcsec (flat-sky approximation).

    dec stays strictly below +90 so each row falls in exactly one sky tile
    (tile rows are half-open at the top).
    """
    ddec = rng.normal(0.0, sigma_arcsec / 3600.0, len(ra))
    cosd = np.cos(np.radians(np.clip(dec, -89.9, 89.9)))
    dra = rng.normal(0.0, sigma_arcsec / 3600.0, len(ra)) / cosd
    return (ra + dra) % 360.0, np.clip(dec + ddec, -90.0, np.nextafter(90.0, 0.0))


def generate_dataset(spec: GeneratorSpec) -> dict:
    """Build the full dataset as column arrays.

    Returns {"tables": {name: {column: array}}, "manifest": {...}} where
    manifest carries row counts, load order, and duplicate-group ids.
    """
    rng = np.random.default_rng(np.random.PCG64(spec.seed))
    b, d, s = _counts(spec)
    n = spec.n_objects

    # --- photometric rows -------------------------------------------------
    # source positions: families and dup pairs cluster around one spot
    fam_ra, fam_dec = _sample_positions(rng, b, spec.sky_region)
    dup_ra, dup_dec = _sample_positions(rng, d, spec.sky_region)
    sin_ra, sin_dec = _sample_positions(rng, s, spec.sky_region)

    ra_parts, dec_parts = [], []
    is_primary, flags_extra, parent_slot, dup_group = [], [], [], []

    # blend families: parent (not primary) then two primary children
    for j in range(b):
        c_ra, c_dec = _offset_positions(
            rng, np.full(2, fam_ra[j]), np.full(2, fam_dec[j]), 2.0
        )
        ra_parts += [fam_ra[j], c_ra[0], c_ra[1]]
        dec_parts += [fam_dec[j], c_dec[0], c_dec[1]]
        is_primary += [0, 1, 1]
        flags_extra += [PHOTO_FLAGS["BLENDED"], PHOTO_FLAGS["CHILD"], PHOTO_FLAGS["CHILD"]]
        parent_slot += [-1, j, j]  # resolved to objIDs below
        dup_group += [0, 0, 0]

    # duplicate pairs: primary then a slightly offset secondary
    for j in range(d):
        o_ra, o_dec = _offset_positions(
            rng, np.array([dup_ra[j]]), np.array([dup_dec[j]]), 1.0
        )
        ra_parts += [dup_ra[j], o_ra[0]]
        dec_parts += [dup_dec[j], o_dec[0]]
        is_primary += [1, 0]
        flags_extra += [0, PHOTO_FLAGS["SECONDARY"]]
        parent_slot += [-1, -1]
        dup_group += [j + 1, j + 1]

    ra = np.concatenate([np.asarray(ra_parts, dtype=float), sin_ra])
    dec = np.concatenate([np.asarray(dec_parts, dtype=float), sin_dec])
    is_primary = np.concatenate(
        [np.asarray(is_primary, dtype=np.uint8), np.ones(s, dtype=np.uint8)]
    )
    flags = np.concatenate(
        [np.asarray(flags_extra, dtype=np.int64), np.zeros(s, dtype=np.int64)]
    )
    dup_group = np.concatenate(
        [np.asarray(dup_group, dtype=np.int64), np.zeros(s, dtype=np.int64)]
    )
    parent_slot = np.asarray(parent_slot + [-1] * s, dtype=np.int64)

    obj_id = np.arange(1, n + 1, dtype=np.int64)
    parent_obj = np.where(parent_slot >= 0, parent_slot * 3 + 1, 0).astype(np.int64)

    flags = flags | np.where(is_primary != 0, PHOTO_FLAGS["PRIMARY"], 0)
    flags |= np.where(rng.random(n) < 0.02, PHOTO_FLAGS["SATURATED"], 0)
    flags |= np.where(rng.random(n) < 0.03, PHOTO_FLAGS["EDGE"], 0)
    status = rng.integers(0, 4, n).astype(np.int64)

    # object classes; blend parents lean galaxy, rare junk detections
    type_draw = rng.random(n)
    obj_type = np.where(
        type_draw < 0.49,
        0,
        np.where(type_draw < 0.98, 1, np.where(type_draw < 0.99, 2, 3)),
    ).astype(np.int8)
    is_parent = (flags & PHOTO_FLAGS["BLENDED"]) != 0
    obj_type[is_parent] = np.where(
        rng.random(int(is_parent.sum())) < 0.7, 1, 0
    )

    mags, errs = _magnitudes(rng, obj_type)
    petro = np.where(
        obj_type == 1,
        0.5 + np.abs(rng.normal(4.0, 2.0, n)),
        0.3 + np.abs(rng.normal(1.2, 0.3, n)),
    )
    profile = _profiles(rng, mags["r"], n)

    # fields: fixed 10-degree grid over the whole sky
    field_id = _field_of(ra, dec)

    photo = {
        "objID": obj_id,
        "fieldID": field_id,
        "ra": ra,
        "dec": dec,
        "objType": obj_type,
        "flags": flags,
        "status": status,
        "parentID": parent_obj,
        "isPrimary": is_primary,
    }
    for band in "ugriz":
        photo["modelMag_%s" % band] = mags[band]
        photo["modelMagErr_%s" % band] = errs[band]
    photo["petroRad_r"] = petro
    for i in range(PROFILE_BINS):
        photo["profile_%d" % i] = profile[:, i]

    # --- spectra ------------------------------------------------------------
    eligible = np.flatnonzero((is_primary != 0) & (obj_type <= 1))
    n_spec = min(spec.n_plates * SPECTRA_PER_PLATE, len(eligible))
    targets = rng.choice(eligible, size=n_spec, replace=False) if n_spec else np.empty(0, dtype=np.int64)
    targets = np.sort(targets)
    spec_obj_id = np.zeros(n, dtype=np.int64)
    spec_obj_id[targets] = np.arange(1, n_spec + 1)
    photo["specObjID"] = spec_obj_id

    plates, spec_objs = _spectra(rng, spec, targets, ra, dec, obj_type)
    lines, line_index, xc, el = _line_products(rng, spec_objs)

    tables = {
        "Field": _field_table(),
        "Plate": plates,
        "SpecObj": spec_objs,
        "PhotoObj": photo,
        "SpecLine": lines,
        "SpecLineIndex": line_index,
        "XCRedshift": xc,
        "ElRedshift": el,
    }

    groups = {}
    for gid in np.unique(dup_group[dup_group > 0]):
        groups[str(int(gid))] = obj_id[dup_group == gid].tolist()

    manifest = {
        "seed": spec.seed,
        "nObjects": n,
        "nPlates": spec.n_plates,
        "duplicateFraction": spec.duplicate_fraction,
        "primaryFraction": spec.primary_fraction,
        "loadOrder": list(GENERATED_TABLES),
        "rowCounts": {
            name: int(len(next(iter(t.values())))) if t else 0
            for name, t in tables.items()
        },
        "duplicateGroups": groups,
    }
    return {"tables": tables, "manifest": manifest}


def _magnitudes(rng, obj_type):
    n = len(obj_type)
    r = rng.uniform(14.5, 23.5, n)
    color = np.where(
        obj_type == 0,
        rng.normal(0.45, 0.15, n),
        np.where(obj_type == 1, rng.normal(0.85, 0.25, n), rng.normal(0.6, 0.3, n)),
    )
    # a few percent of detections get wild colors (variables, artifacts),
    # so color-cut predicates select a real subset in both directions
    wild = rng.random(n) < 0.02
    color = np.where(wild, rng.normal(0.0, 1.5, n), color)
    g = r + color
    u = g + np.abs(rng.normal(0.8, 0.3, n))
    i = r - np.abs(rng.normal(0.3, 0.15, n))
    z = i - np.abs(rng.normal(0.2, 0.15, n))
    mags = {k: np.clip(v, 14.0, 24.0) for k, v in
            zip("ugriz", (u, g, r, i, z))}
    errs = {k: rng.uniform(0.01, 0.2, n) for k in "ugriz"}
    return mags, errs


def _profiles(rng, rmag, n):
    peak = np.power(10.0, (24.0 - rmag) / 2.5)
    ring = np.exp(-0.9 * np.arange(PROFILE_BINS))
    prof = peak[:, None] * ring[None, :]
    noise = 1.0 + 0.05 * rng.standard_normal((n, PROFILE_BINS))
    return np.abs(prof * noise)


def _field_of(ra, dec):
    nx = int(360 / _FIELD_GRID_DEG)
    ix = np.floor(ra / _FIELD_GRID_DEG).astype(np.int64) % nx
    iy = np.clip(
        np.floor((dec + 90.0) / _FIELD_GRID_DEG).astype(np.int64),
        0,
        int(180 / _FIELD_GRID_DEG) - 1,
    )
    return iy * nx + ix + 1


def _field_table():
    nx = int(360 / _FIELD_GRID_DEG)
    ny = int(180 / _FIELD_GRID_DEG)
    ids, runs, camcols, nums = [], [], [], []
    ra_min, ra_max, dec_min, dec_max = [], [], [], []
    for iy in range(ny):
        for ix in range(nx):
            ids.append(iy * nx + ix + 1)
            runs.append(94)
            camcols.append(ix % 6 + 1)
            nums.append(iy * nx + ix + 1)
            ra_min.append(ix * _FIELD_GRID_DEG)
            ra_max.append((ix + 1) * _FIELD_GRID_DEG)
            dec_min.append(iy * _FIELD_GRID_DEG - 90.0)
            dec_max.append((iy + 1) * _FIELD_GRID_DEG - 90.0)
    return {
        "fieldID": np.asarray(ids, dtype=np.int64),
        "run": np.asarray(runs, dtype=np.int64),
        "camcol": np.asarray(camcols, dtype=np.int64),
        "fieldNum": np.asarray(nums, dtype=np.int64),
        "raMin": np.asarray(ra_min, dtype=float),
        "raMax": np.asarray(ra_max, dtype=float),
        "decMin": np.asarray(dec_min, dtype=float),
        "decMax": np.asarray(dec_max, dtype=float),
    }


def _spectra(rng, spec, targets, ra, dec, obj_type):
    n_spec = len(targets)
    n_plates_used = (n_spec + SPECTRA_PER_PLATE - 1) // SPECTRA_PER_PLATE
    n_plates = max(spec.n_plates, n_plates_used)
    plate_of = np.arange(n_spec) // SPECTRA_PER_PLATE + 1
    fiber = np.arange(n_spec) % SPECTRA_PER_PLATE + 1

    plate_ra = np.zeros(n_plates)
    plate_dec = np.zeros(n_plates)
    for p in range(n_plates):
        members = targets[plate_of == p + 1]
        if len(members):
            v = htm.radec_to_unit_batch(ra[members], dec[members]).mean(axis=0)
            norm = np.linalg.norm(v)
            if norm > 1e-12:
                pra, pdec = htm.unit_to_radec(v / norm)
            else:
                pra, pdec = 0.0, 0.0
        else:
            pra = rng.uniform(0, 360)
            pdec = np.degrees(np.arcsin(rng.uniform(-1, 1)))
        plate_ra[p] = pra
        plate_dec[p] = pdec

    plates = {
        "plateID": np.arange(1, n_plates + 1, dtype=np.int64),
        "ra": plate_ra,
        "dec": plate_dec,
        "mjd": (51500 + np.arange(n_plates)).astype(np.int64),
    }

    t_type = obj_type[targets] if n_spec else np.empty(0, dtype=np.int8)
    cls = np.empty(n_spec, dtype=np.int8)
    z = np.empty(n_spec)
    stars = t_type == 0
    cls[stars] = SPEC_CLASSES.index("star")
    z[stars] = np.abs(rng.normal(0.0, 5e-4, int(stars.sum())))
    gals = ~stars
    qso_draw = rng.random(n_spec) < 0.1
    cls[gals & ~qso_draw] = SPEC_CLASSES.index("galaxy")
    cls[gals & qso_draw] = SPEC_CLASSES.index("qso")
    z[gals & ~qso_draw] = rng.uniform(0.02, 0.25, int((gals & ~qso_draw).sum()))
    z[gals & qso_draw] = rng.uniform(0.3, 2.5, int((gals & qso_draw).sum()))

    spec_objs = {
        "specObjID": np.arange(1, n_spec + 1, dtype=np.int64),
        "plateID": plate_of.astype(np.int64),
        "fiberID": fiber.astype(np.int64),
        "ra": ra[targets] if n_spec else np.empty(0),
        "dec": dec[targets] if n_spec else np.empty(0),
        "z": z,
        "zErr": rng.uniform(1e-4, 1e-3, n_spec),
        "specClass": cls,
    }
    return plates, spec_objs


def _line_products(rng, spec_objs):
    n_spec = len(spec_objs["specObjID"])
    counts = np.maximum(rng.poisson(MEAN_LINES_PER_SPECTRUM, n_spec), 1) if n_spec else np.empty(0, dtype=np.int64)
    total = int(counts.sum()) if n_spec else 0
    owner = np.repeat(spec_objs["specObjID"], counts) if n_spec else np.empty(0, dtype=np.int64)
    lines = {
        "lineID": np.arange(1, total + 1, dtype=np.int64),
        "specObjID": owner,
        "wavelength": rng.uniform(3800.0, 9200.0, total),
        "ew": rng.normal(5.0, 3.0, total),
        "height": np.abs(rng.normal(20.0, 10.0, total)),
    }

    k = len(_LINE_INDEX_NAMES)
    line_index = {
        "indexID": np.arange(1, n_spec * k + 1, dtype=np.int64),
        "specObjID": np.repeat(spec_objs["specObjID"], k),
        "name": [
            _LINE_INDEX_NAMES[i % k] for i in range(n_spec * k)
        ],
        "value": rng.normal(0.0, 2.0, n_spec * k),
    }

    xc = {
        "specObjID": spec_objs["specObjID"].copy(),
        "z": spec_objs["z"] + rng.normal(0.0, 1e-3, n_spec),
        "confidence": rng.uniform(0.5, 1.0, n_spec),
        "templateName": [
            SPEC_CLASSES[c] + "_template" for c in spec_objs["specClass"]
        ],
    }
    el = {
        "specObjID": spec_objs["specObjID"].copy(),
        "z": spec_objs["z"] + rng.normal(0.0, 2e-3, n_spec),
        "nLines": rng.poisson(6, n_spec).astype(np.int64),
    }
    return lines, line_index, xc, el


# ---------------------------------------------------------------------------
# CSV output

def _format_value(col, v):
    if col.kind == "float":
        return repr(float(v))
    if col.kind == "int":
        return str(int(v))
    if col.kind == "bool":
        return "1" if v else "0"
    if col.kind == "enum":
        return col.enum[int(v)]
    return str(v)


def write_csv(table: str, cols: dict, path: str) -> int:
    """Write one table's columns as CSV (no derived or loadTime columns)."""
    schema = TABLES[table]
    emit = [
        c
        for c in schema.loadable_columns
        if c.name not in schema.derived
    ]
    n = len(next(iter(cols.values()))) if cols else 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, **CSV_DIALECT)
        w.writerow([c.name for c in emit])
        for i in range(n):
            w.writerow([_format_value(c, cols[c.name][i]) for c in emit])
    return n


def generate_synthetic(spec: GeneratorSpec, out_dir: str) -> dict:
    """Generate CSV files plus manifest.json into out_dir.

    Deterministic: the same spec always produces byte-identical files.
    Returns the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    ds = generate_dataset(spec)
    files = {}
    for name in GENERATED_TABLES:
        fname = name.lower() + ".csv"
        write_csv(name, ds["tables"][name], os.path.join(out_dir, fname))
        files[name] = fname
    manifest = ds["manifest"]
    manifest["files"] = files
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
