// Viewport <-> URL hash, so any view is shareable and reload-safe.
// Format: #ra=187.25&dec=2.05&zoom=3

import { normalizeViewport, Viewport } from "./geometry.js";

export const DEFAULT_VIEWPORT: Viewport = { centerRa: 180, centerDec: 0, zoom: 0 };

export function viewportToHash(v: Viewport): string {
  const ra = v.centerRa.toFixed(4);
  const dec = v.centerDec.toFixed(4);
  return `#ra=${ra}&dec=${dec}&zoom=${v.zoom}`;
}

export function viewportFromHash(hash: string): Viewport {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  if (!params.has("ra") || !params.has("dec") || !params.has("zoom")) {
    return DEFAULT_VIEWPORT;
  }
  const ra = Number(params.get("ra"));
  const dec = Number(params.get("dec"));
  const zoom = Number(params.get("zoom"));
  if (!isFinite(ra) || !isFinite(dec) || !isFinite(zoom)) {
    return DEFAULT_VIEWPORT;
  }
  return normalizeViewport({ centerRa: ra, centerDec: dec, zoom });
}
