"""Sky tile pyramid rendered from catalog points.

Equirectangular (ra, dec) tiling: zoom 0 is a 2x1 grid of 256x256 tiles,
doubling each level through zoom 3.  A tile owns the half-open sky box

    ra  in [tx * 360 / 2^(zoom+1), (tx+1) * 360 / 2^(zoom+1))
    dec in [90 - (ty+1) * 180 / 2^zoom, 90 - ty * 180 / 2^zoom)

with ty = 0 the northernmost row, so every object lands in exactly one
tile per zoom.  Primary objects are drawn as small discs on black: the
intensity is a square-root stretch of the r magnitude over the catalog
range [14, 24], and the hue follows the g-r color.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw

from .errors import DomainError
from .store import CatalogStore

TILE_SIZE = 256
ZOOM_LEVELS = 4

MAG_BRIGHT = 14.0
MAG_FAINT = 24.0

# g-r color class boundaries and display colors
_BLUE_WHITE = (180, 200, 255)
_YELLOW = (255, 230, 150)
_RED = (255, 110, 80)


def grid_shape(zoom: int) -> tuple[int, int]:
    """(tiles across, tiles down) at a zoom level."""
    if not 0 <= zoom < ZOOM_LEVELS:
        raise DomainError("zoom must be in [0, %d]" % (ZOOM_LEVELS - 1))
    return 2 ** (zoom + 1), 2**zoom


def valid_address(zoom: int, tx: int, ty: int) -> bool:
    if not 0 <= zoom < ZOOM_LEVELS:
        return False
    nx, ny = grid_shape(zoom)
    return 0 <= tx < nx and 0 <= ty < ny


def tile_bounds(zoom: int, tx: int, ty: int):
    """(ra_lo, ra_hi, dec_lo, dec_hi); ra and dec intervals are half-open
    [lo, hi) with dec_hi at the top of the tile."""
    nx, ny = grid_shape(zoom)
    if not (0 <= tx < nx and 0 <= ty < ny):
        raise DomainError("tile (%d, %d) out of range at zoom %d" % (tx, ty, zoom))
    ra_w = 360.0 / nx
    dec_h = 180.0 / ny
    ra_lo = tx * ra_w
    dec_hi = 90.0 - ty * dec_h
    return ra_lo, ra_lo + ra_w, dec_hi - dec_h, dec_hi


def tile_for(zoom: int, ra, dec):
    """Tile address arithmetic: the unique (tx, ty) owning each position."""
    nx, ny = grid_shape(zoom)
    tx = np.minimum(np.floor(np.asarray(ra) % 360.0 / (360.0 / nx)), nx - 1)
    ty = np.floor((90.0 - np.asarray(dec)) / (180.0 / ny))
    ty = np.clip(ty, 0, ny - 1)  # dec = -90 sits on the bottom edge
    return tx.astype(np.int64), ty.astype(np.int64)


def intensity_of(r_mag):
    """Square-root brightness stretch mapped to 0..255."""
    lin = np.clip((MAG_FAINT - np.asarray(r_mag, dtype=float)) /
                  (MAG_FAINT - MAG_BRIGHT), 0.0, 1.0)
    return 255.0 * np.sqrt(lin)


def color_of(g_minus_r, scale):
    if g_minus_r <= 0.4:
        base = _BLUE_WHITE
    elif g_minus_r <= 0.8:
        base = _YELLOW
    else:
        base = _RED
    return tuple(int(round(c * scale)) for c in base)


def select_tile_objects(store: CatalogStore, zoom: int, tx: int, ty: int):
    """Row indices of PrimaryObjects inside the tile box, ordered by objID."""
    ra_lo, ra_hi, dec_lo, dec_hi = tile_bounds(zoom, tx, ty)
    snap = store.snapshot()
    _, primary_mask = store.view_mask("PrimaryObjects", snap)
    data = snap["PhotoObj"]
    ra = data["ra"]
    dec = data["dec"]
    inside = (
        primary_mask
        & (ra >= ra_lo)
        & (ra < ra_hi)
        & (dec >= dec_lo)
        & (dec < dec_hi)
    )
    idx = np.flatnonzero(inside)
    return idx[np.argsort(data["objID"][idx], kind="stable")]


def render_tile(store: CatalogStore, zoom: int, tx: int, ty: int) -> Image.Image:
    ra_lo, ra_hi, dec_lo, dec_hi = tile_bounds(zoom, tx, ty)
    img = Image.new("RGB", (TILE_SIZE, TILE_SIZE), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    idx = select_tile_objects(store, zoom, tx, ty)
    if len(idx) == 0:
        return img
    data = store.snapshot()["PhotoObj"]
    ra = data["ra"][idx]
    dec = data["dec"][idx]
    rmag = data["modelMag_r"][idx]
    gmr = data["modelMag_g"][idx] - rmag
    xs = np.floor((ra - ra_lo) / (ra_hi - ra_lo) * TILE_SIZE).astype(int)
    ys = np.floor((dec_hi - dec) / (dec_hi - dec_lo) * TILE_SIZE).astype(int)
    xs = np.clip(xs, 0, TILE_SIZE - 1)
    ys = np.clip(ys, 0, TILE_SIZE - 1)
    inten = intensity_of(rmag)
    radii = 1 + np.rint(2.0 * inten / 255.0).astype(int)
    for k in range(len(idx)):
        color = color_of(float(gmr[k]), float(inten[k]) / 255.0)
        r = int(radii[k])
        x, y = int(xs[k]), int(ys[k])
        draw.ellipse((x - r, y - r, x + r, y + r), fill=color)
    return img


def tile_png(store: CatalogStore, zoom: int, tx: int, ty: int) -> bytes:
    """Lossless PNG bytes; deterministic for a fixed store."""
    img = render_tile(store, zoom, tx, ty)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
