// Canvas sky map: stitches tiles for the current viewport, pans with
// pointer drags, zooms on wheel/double-click anchored at the cursor.

import { SkyApi } from "./api.js";
import {
  PlacedTile,
  TILE_SIZE,
  Viewport,
  clickRadiusArcmin,
  pixelToSky,
  panBy,
  visibleTiles,
  zoomAt,
} from "./geometry.js";

type TileState = { img: ImageBitmap | null; failed: boolean };

class TileStore {
  private tiles = new Map<string, TileState>();
  private inflight = new Map<string, AbortController>();

  constructor(
    private api: SkyApi,
    private onLoad: () => void,
  ) {}

  get(t: PlacedTile): TileState | undefined {
    return this.tiles.get(`${t.zoom}/${t.tx}/${t.ty}`);
  }

  request(t: PlacedTile): void {
    const key = `${t.zoom}/${t.tx}/${t.ty}`;
    if (this.tiles.has(key) || this.inflight.has(key)) return;
    const ctl = new AbortController();
    this.inflight.set(key, ctl);
    fetch(this.api.tileUrl(t.zoom, t.tx, t.ty), { signal: ctl.signal })
      .then(async (res) => {
        if (!res.ok) throw new Error(`tile ${key}: ${res.status}`);
        const img = await createImageBitmap(await res.blob());
        this.tiles.set(key, { img, failed: false });
        this.onLoad();
      })
      .catch(() => {
        if (!ctl.signal.aborted) {
          this.tiles.set(key, { img: null, failed: true });
          this.onLoad();
          // drop the failure after a moment so a redraw retries it
          setTimeout(() => {
            this.tiles.delete(key);
          }, 2000);
        }
      })
      .finally(() => this.inflight.delete(key));
  }

  cancelOutside(wanted: Set<string>): void {
    for (const [key, ctl] of this.inflight) {
      if (!wanted.has(key)) {
        ctl.abort();
        this.inflight.delete(key);
      }
    }
  }
}

export class SkyMap {
  private store: TileStore;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;
  private moved = false;

  onViewportChange: (v: Viewport) => void = () => {};
  onPick: (ra: number, dec: number, radiusArcmin: number) => void = () => {};

  constructor(
    private canvas: HTMLCanvasElement,
    private api: SkyApi,
    public viewport: Viewport,
  ) {
    this.store = new TileStore(api, () => this.draw());
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    canvas.addEventListener("wheel", (e) => this.wheel(e), { passive: false });
    canvas.addEventListener("dblclick", (e) => this.dblClick(e));
  }

  setViewport(v: Viewport): void {
    this.viewport = v;
    this.onViewportChange(v);
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#000";
    ctx.fillRect(0, 0, width, height);
    const placed = visibleTiles(this.viewport, width, height);
    const wanted = new Set(placed.map((t) => `${t.zoom}/${t.tx}/${t.ty}`));
    this.store.cancelOutside(wanted);
    for (const t of placed) {
      const state = this.store.get(t);
      if (state?.img) {
        ctx.drawImage(state.img, t.screenX, t.screenY);
      } else {
        // placeholder until the fetch lands (or after a failure)
        ctx.fillStyle = state?.failed ? "#201010" : "#101018";
        ctx.fillRect(t.screenX, t.screenY, TILE_SIZE, TILE_SIZE);
        if (!state) this.store.request(t);
      }
    }
  }

  private pointerDown(e: PointerEvent): void {
    this.dragging = true;
    this.moved = false;
    this.lastX = e.offsetX;
    this.lastY = e.offsetY;
    this.canvas.setPointerCapture(e.pointerId);
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.dragging) return;
    const dx = e.offsetX - this.lastX;
    const dy = e.offsetY - this.lastY;
    if (Math.abs(dx) + Math.abs(dy) > 2) this.moved = true;
    this.lastX = e.offsetX;
    this.lastY = e.offsetY;
    this.setViewport(panBy(this.viewport, dx, dy));
  }

  private pointerUp(e: PointerEvent): void {
    this.canvas.releasePointerCapture(e.pointerId);
    this.dragging = false;
    if (!this.moved) {
      const sky = pixelToSky(
        e.offsetX, e.offsetY, this.viewport,
        this.canvas.width, this.canvas.height,
      );
      this.onPick(sky.ra, sky.dec, clickRadiusArcmin(this.viewport.zoom));
    }
  }

  private wheel(e: WheelEvent): void {
    e.preventDefault();
    const dz = e.deltaY < 0 ? 1 : -1;
    this.zoomAtCursor(this.viewport.zoom + dz, e.offsetX, e.offsetY);
  }

  private dblClick(e: WheelEvent | MouseEvent): void {
    this.zoomAtCursor(this.viewport.zoom + 1, e.offsetX, e.offsetY);
  }

  zoomAtCursor(newZoom: number, x: number, y: number): void {
    const next = zoomAt(
      this.viewport, newZoom, x, y, this.canvas.width, this.canvas.height,
    );
    if (next !== this.viewport) this.setViewport(next);
  }
}
