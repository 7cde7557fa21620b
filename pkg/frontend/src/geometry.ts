// Sky/tile/pixel geometry. Must mirror the server's tiling exactly:
// zoom z is a 2^(z+1) x 2^z grid of 256px tiles over an equirectangular
// (ra, dec) sky, tile (tx, ty) owning ra in [tx*w, (tx+1)*w) and
// dec in [90-(ty+1)*h, 90-ty*h), with ty=0 the northern row.

export const TILE_SIZE = 256;
export const MAX_ZOOM = 3;

export interface Viewport {
  centerRa: number; // degrees, [0, 360)
  centerDec: number; // degrees, [-90, 90]
  zoom: number; // 0..3
}

export interface TileAddress {
  zoom: number;
  tx: number;
  ty: number;
}

export function gridShape(zoom: number): { nx: number; ny: number } {
  return { nx: 2 ** (zoom + 1), ny: 2 ** zoom };
}

export function degPerPixel(zoom: number): number {
  // square pixels: 360 / (2^(z+1) * 256) == 180 / (2^z * 256)
  return 180 / (2 ** zoom * TILE_SIZE);
}

export function wrapRa(ra: number): number {
  return ((ra % 360) + 360) % 360;
}

export function clampDec(dec: number): number {
  return Math.max(-90, Math.min(90, dec));
}

export function normalizeViewport(v: Viewport): Viewport {
  return {
    centerRa: wrapRa(v.centerRa),
    centerDec: clampDec(v.centerDec),
    zoom: Math.max(0, Math.min(MAX_ZOOM, Math.round(v.zoom))),
  };
}

export function tileBounds(t: TileAddress): {
  raLo: number;
  raHi: number;
  decLo: number;
  decHi: number;
} {
  const { nx, ny } = gridShape(t.zoom);
  const w = 360 / nx;
  const h = 180 / ny;
  return {
    raLo: t.tx * w,
    raHi: (t.tx + 1) * w,
    decLo: 90 - (t.ty + 1) * h,
    decHi: 90 - t.ty * h,
  };
}

// screen x grows east (increasing ra), y grows south (decreasing dec)
export function skyToPixel(
  ra: number,
  dec: number,
  view: Viewport,
  width: number,
  height: number,
): { x: number; y: number } {
  const scale = degPerPixel(view.zoom);
  let dra = wrapRa(ra) - view.centerRa;
  if (dra > 180) dra -= 360;
  if (dra < -180) dra += 360;
  return {
    x: width / 2 + dra / scale,
    y: height / 2 + (view.centerDec - dec) / scale,
  };
}

export function pixelToSky(
  x: number,
  y: number,
  view: Viewport,
  width: number,
  height: number,
): { ra: number; dec: number } {
  const scale = degPerPixel(view.zoom);
  return {
    ra: wrapRa(view.centerRa + (x - width / 2) * scale),
    dec: clampDec(view.centerDec - (y - height / 2) * scale),
  };
}

// zooming keeps the sky position under the cursor fixed on screen
export function zoomAt(
  view: Viewport,
  newZoom: number,
  cursorX: number,
  cursorY: number,
  width: number,
  height: number,
): Viewport {
  const zoom = Math.max(0, Math.min(MAX_ZOOM, Math.round(newZoom)));
  if (zoom === view.zoom) return view;
  const anchor = pixelToSky(cursorX, cursorY, view, width, height);
  const scale = degPerPixel(zoom);
  let centerRa = anchor.ra - (cursorX - width / 2) * scale;
  let centerDec = anchor.dec + (cursorY - height / 2) * scale;
  return normalizeViewport({ centerRa, centerDec, zoom });
}

export function panBy(
  view: Viewport,
  dxPixels: number,
  dyPixels: number,
): Viewport {
  const scale = degPerPixel(view.zoom);
  return normalizeViewport({
    centerRa: view.centerRa - dxPixels * scale,
    centerDec: view.centerDec + dyPixels * scale,
    zoom: view.zoom,
  });
}

export interface PlacedTile extends TileAddress {
  screenX: number; // top-left corner on the canvas
  screenY: number;
}

// every tile whose sky box intersects the viewport rectangle, with its
// screen placement; ra wraps, dec rows outside the sky are dropped
export function visibleTiles(
  view: Viewport,
  width: number,
  height: number,
): PlacedTile[] {
  const { nx, ny } = gridShape(view.zoom);
  const scale = degPerPixel(view.zoom);
  // world-pixel position of the viewport's top-left corner
  const worldX0 = view.centerRa / scale - width / 2;
  const worldY0 = (90 - view.centerDec) / scale - height / 2;
  const tx0 = Math.floor(worldX0 / TILE_SIZE);
  const tx1 = Math.ceil((worldX0 + width) / TILE_SIZE);
  const ty0 = Math.floor(worldY0 / TILE_SIZE);
  const ty1 = Math.ceil((worldY0 + height) / TILE_SIZE);
  const out: PlacedTile[] = [];
  for (let ty = ty0; ty < ty1; ty++) {
    if (ty < 0 || ty >= ny) continue;
    for (let tx = tx0; tx < tx1; tx++) {
      const wrapped = ((tx % nx) + nx) % nx;
      out.push({
        zoom: view.zoom,
        tx: wrapped,
        ty,
        screenX: tx * TILE_SIZE - worldX0,
        screenY: ty * TILE_SIZE - worldY0,
      });
    }
  }
  return out;
}

// click tolerance: 2 screen pixels expressed in arcminutes
export function clickRadiusArcmin(zoom: number): number {
  return 2 * degPerPixel(zoom) * 60;
}
