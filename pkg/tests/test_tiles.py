import io

import numpy as np
import pytest
from PIL import Image

from skycat import tiles
from skycat.bench import make_flat_catalog
from skycat.errors import DomainError
from skycat.store import CatalogStore


def test_grid_shapes():
    assert tiles.grid_shape(0) == (2, 1)
    assert tiles.grid_shape(1) == (4, 2)
    assert tiles.grid_shape(3) == (16, 8)
    with pytest.raises(DomainError):
        tiles.grid_shape(4)


def test_tile_bounds_formula():
    assert tiles.tile_bounds(0, 0, 0) == (0.0, 180.0, -90.0, 90.0)
    assert tiles.tile_bounds(0, 1, 0) == (180.0, 360.0, -90.0, 90.0)
    ra_lo, ra_hi, dec_lo, dec_hi = tiles.tile_bounds(2, 3, 1)
    assert ra_lo == 3 * 360 / 8 and ra_hi == 4 * 360 / 8
    assert dec_hi == 90 - 1 * 180 / 4 and dec_lo == 90 - 2 * 180 / 4
    assert not tiles.valid_address(1, 4, 0)
    assert not tiles.valid_address(1, 0, 2)
    assert tiles.valid_address(3, 15, 7)


def test_tile_for_matches_bounds():
    rng = np.random.default_rng(5)
    ra = rng.uniform(0, 360, 500)
    dec = rng.uniform(-90, 90, 500)
    for zoom in range(4):
        tx, ty = tiles.tile_for(zoom, ra, dec)
        for k in range(0, 500, 61):
            lo, hi, dlo, dhi = tiles.tile_bounds(zoom, int(tx[k]), int(ty[k]))
            assert lo <= ra[k] < hi
            assert dlo <= dec[k] < dhi or (dec[k] == -90 and dlo == -90)


def test_partition_across_zooms():
    store = make_flat_catalog(3000, seed=21)
    total = int(store.view_mask("PrimaryObjects")[1].sum())
    for zoom in range(4):
        nx, ny = tiles.grid_shape(zoom)
        seen = []
        for tx in range(nx):
            for ty in range(ny):
                seen.append(tiles.select_tile_objects(store, zoom, tx, ty))
        all_idx = np.concatenate(seen)
        assert len(all_idx) == total  # nothing lost
        assert len(np.unique(all_idx)) == total  # nothing doubled


def test_zoom_refinement_preserves_objects():
    store = make_flat_catalog(2000, seed=22)
    parent = set(tiles.select_tile_objects(store, 1, 1, 1).tolist())
    children = set()
    # zoom z tile (tx,ty) splits into the four zoom z+1 tiles (2tx..2tx+1, 2ty..2ty+1)
    for tx in (2, 3):
        for ty in (2, 3):
            children |= set(tiles.select_tile_objects(store, 2, tx, ty).tolist())
    assert children == parent


def test_render_empty_tile_black():
    img = tiles.render_tile(CatalogStore(), 0, 0, 0)
    assert img.size == (256, 256)
    assert img.getcolors() == [(256 * 256, (0, 0, 0))]


def test_render_object_at_center_lights_pixels():
    store = CatalogStore()
    store.insert_batch(
        "Field",
        [dict(fieldID=1, run=1, camcol=1, fieldNum=1,
              raMin=0.0, raMax=360.0, decMin=-90.0, decMax=90.0)],
    )
    from skycat import htm

    ra, dec = 90.0, 0.0  # center of zoom-0 tile (0, 0)
    v = htm.radec_to_unit(ra, dec)
    cols = dict(
        objID=[1], fieldID=[1], ra=[ra], dec=[dec],
        cx=[v[0]], cy=[v[1]], cz=[v[2]],
        htmID=[htm.htm_lookup(v, 20)],
        objType=["star"], flags=[1], status=[0], parentID=[0], isPrimary=[True],
        petroRad_r=[1.0], specObjID=[0],
    )
    for b in "ugriz":
        cols["modelMag_%s" % b] = [15.0]
        cols["modelMagErr_%s" % b] = [0.01]
    for i in range(8):
        cols["profile_%d" % i] = [1.0]
    store.insert_batch("PhotoObj", cols)
    img = tiles.render_tile(store, 0, 0, 0)
    px = np.asarray(img)
    y, x = 128, 128
    region = px[y - 4 : y + 4, x - 4 : x + 4]
    assert region.sum() > 0
    # bright blue-white star: blue channel dominates red
    ys, xs, _ = np.nonzero(px)
    assert px[..., 2].sum() >= px[..., 0].sum()


def test_render_deterministic_png():
    store = make_flat_catalog(500, seed=23)
    a = tiles.tile_png(store, 1, 2, 1)
    b = tiles.tile_png(store, 1, 2, 1)
    assert a == b
    img = Image.open(io.BytesIO(a))
    assert img.size == (256, 256)


def test_intensity_mapping_range():
    assert tiles.intensity_of(14.0) == 255.0
    assert tiles.intensity_of(24.0) == 0.0
    mid = tiles.intensity_of(19.0)
    assert 0 < mid < 255
    assert mid == pytest.approx(255 * np.sqrt(0.5))
