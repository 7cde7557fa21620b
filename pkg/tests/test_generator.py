import json
import os

import numpy as np
import pytest

from skycat import htm
from skycat.bench import load_dataset_into_store
from skycat.errors import DomainError
from skycat.generator import (
    GeneratorSpec,
    SPECTRA_PER_PLATE,
    generate_dataset,
    generate_synthetic,
)
from skycat.schema import PHOTO_FLAGS


def test_zero_objects_yields_valid_empty_csvs(tmp_path):
    manifest = generate_synthetic(GeneratorSpec(n_objects=0, seed=1), str(tmp_path))
    assert manifest["rowCounts"]["PhotoObj"] == 0
    photo = (tmp_path / manifest["files"]["PhotoObj"]).read_text(encoding="utf-8")
    lines = photo.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("objID,")


def test_same_seed_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    spec = GeneratorSpec(n_objects=1500, n_plates=1, seed=99)
    ma = generate_synthetic(spec, str(a))
    mb = generate_synthetic(spec, str(b))
    for name, fn in ma["files"].items():
        assert (a / fn).read_bytes() == (b / fn).read_bytes(), name
    assert ma == mb


def test_different_seed_differs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_synthetic(GeneratorSpec(n_objects=500, seed=1), str(a))
    generate_synthetic(GeneratorSpec(n_objects=500, seed=2), str(b))
    assert (a / "photoobj.csv").read_bytes() != (b / "photoobj.csv").read_bytes()


def test_fraction_targets_and_flags():
    ds = generate_dataset(GeneratorSpec(n_objects=20000, n_plates=1, seed=5))
    photo = ds["tables"]["PhotoObj"]
    n = len(photo["objID"])
    primary = photo["isPrimary"].mean()
    dup_rows = sum(len(v) for v in ds["manifest"]["duplicateGroups"].values())
    assert primary == pytest.approx(0.80, abs=0.02)
    assert dup_rows / n == pytest.approx(0.11, abs=0.02)
    # flag bits mirror the booleans
    assert np.array_equal(
        (photo["flags"] & PHOTO_FLAGS["PRIMARY"]) != 0, photo["isPrimary"] != 0
    )
    # one primary per duplicate group
    by_id = {int(i): bool(p) for i, p in zip(photo["objID"], photo["isPrimary"])}
    for gid, members in ds["manifest"]["duplicateGroups"].items():
        assert sum(by_id[m] for m in members) == 1, gid
        assert len(members) == 2


def test_parents_never_primary_and_children_linked():
    ds = generate_dataset(GeneratorSpec(n_objects=5000, seed=6))
    photo = ds["tables"]["PhotoObj"]
    parents = set(photo["parentID"][photo["parentID"] != 0].tolist())
    assert parents
    idx = {int(i): k for k, i in enumerate(photo["objID"])}
    for p in parents:
        assert photo["isPrimary"][idx[p]] == 0
        assert photo["flags"][idx[p]] & PHOTO_FLAGS["BLENDED"]


def test_magnitude_ranges_and_color_correlation():
    ds = generate_dataset(GeneratorSpec(n_objects=20000, seed=7))
    photo = ds["tables"]["PhotoObj"]
    for b in "ugriz":
        m = photo["modelMag_%s" % b]
        assert m.min() >= 14.0 and m.max() <= 24.0
        assert (photo["modelMagErr_%s" % b] >= 0).all()
    gmr = photo["modelMag_g"] - photo["modelMag_r"]
    stars = photo["objType"] == 0
    gals = photo["objType"] == 1
    assert gmr[gals].mean() > gmr[stars].mean() + 0.2


def test_spectra_shape():
    ds = generate_dataset(GeneratorSpec(n_objects=5000, n_plates=2, seed=8))
    spec = ds["tables"]["SpecObj"]
    assert len(spec["specObjID"]) == 2 * SPECTRA_PER_PLATE
    assert spec["fiberID"].min() >= 1 and spec["fiberID"].max() <= 640
    # ~30 lines per spectrum
    lines = ds["tables"]["SpecLine"]
    per = len(lines["lineID"]) / len(spec["specObjID"])
    assert 25 <= per <= 35
    # spectra target primary objects only
    photo = ds["tables"]["PhotoObj"]
    with_spec = photo["specObjID"] != 0
    assert (photo["isPrimary"][with_spec] != 0).all()
    assert with_spec.sum() == len(spec["specObjID"])


def test_sky_region_restriction():
    region = htm.circle_to_region(180.0, 0.0, 3.0)
    ds = generate_dataset(GeneratorSpec(n_objects=2000, seed=9, sky_region=region))
    photo = ds["tables"]["PhotoObj"]
    v = htm.radec_to_unit_batch(photo["ra"], photo["dec"])
    center = np.asarray(htm.radec_to_unit(180.0, 0.0))
    d = htm.arc_angle_batch(v, np.broadcast_to(center, v.shape))
    # family/duplicate jitter is a few arcsec; allow a hair of slop
    assert d.max() <= 3.01


def test_generated_catalog_passes_store_audit():
    ds = generate_dataset(GeneratorSpec(n_objects=3000, n_plates=1, seed=10))
    store = load_dataset_into_store(ds)
    assert store.audit() == []


def test_infeasible_fractions_rejected():
    with pytest.raises(DomainError):
        GeneratorSpec(n_objects=100, primary_fraction=0.95, duplicate_fraction=0.2)
    with pytest.raises(DomainError):
        GeneratorSpec(n_objects=-1)


def test_manifest_written(tmp_path):
    manifest = generate_synthetic(GeneratorSpec(n_objects=300, seed=12), str(tmp_path))
    on_disk = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk["rowCounts"] == manifest["rowCounts"]
    assert on_disk["loadOrder"] == list(manifest["loadOrder"])
    assert set(on_disk["files"]) == set(manifest["rowCounts"])
