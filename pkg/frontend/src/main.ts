import { ApiError, SkyApi } from "./api.js";
import { SkyMap } from "./map.js";
import { QueryForm } from "./queryform.js";
import {
  renderNoObject,
  renderObjectPanel,
  renderSummary,
} from "./render.js";
import { DEFAULT_VIEWPORT, viewportFromHash, viewportToHash } from "./state.js";

const api = new SkyApi("");

const canvas = document.getElementById("sky") as HTMLCanvasElement;
const panel = document.getElementById("panel") as HTMLElement;
const coords = document.getElementById("coords") as HTMLElement;

const initial = location.hash ? viewportFromHash(location.hash) : DEFAULT_VIEWPORT;
const map = new SkyMap(canvas, api, initial);

map.onViewportChange = (v) => {
  history.replaceState(null, "", viewportToHash(v));
  coords.textContent =
    `ra ${v.centerRa.toFixed(3)}  dec ${v.centerDec.toFixed(3)}  zoom ${v.zoom}`;
};

window.addEventListener("hashchange", () => {
  map.setViewport(viewportFromHash(location.hash));
});

map.onPick = async (ra, dec, radiusArcmin) => {
  panel.innerHTML = `<p class="notice">looking up (${ra.toFixed(4)}, ${dec.toFixed(4)})...</p>`;
  try {
    const res = await api.nearest(ra, dec, radiusArcmin);
    panel.innerHTML = res.found && res.object
      ? renderSummary(res.object)
      : renderNoObject();
  } catch (err) {
    const msg = err instanceof ApiError ? err.body.message : String(err);
    panel.innerHTML = `<p class="error">${msg}</p>`;
  }
};

panel.addEventListener("click", async (e) => {
  const btn = (e.target as HTMLElement).closest<HTMLButtonElement>("button.full-record");
  if (!btn) return;
  const objId = Number(btn.dataset.objid);
  panel.innerHTML = `<p class="notice">loading record ${objId}...</p>`;
  try {
    panel.innerHTML = renderObjectPanel(await api.object(objId));
  } catch (err) {
    const msg = err instanceof ApiError ? err.body.message : String(err);
    panel.innerHTML = `<p class="error">${msg}</p>`;
  }
});

document.getElementById("zoom-in")?.addEventListener("click", () => {
  map.zoomAtCursor(map.viewport.zoom + 1, canvas.width / 2, canvas.height / 2);
});
document.getElementById("zoom-out")?.addEventListener("click", () => {
  map.zoomAtCursor(map.viewport.zoom - 1, canvas.width / 2, canvas.height / 2);
});

new QueryForm(
  api,
  document.getElementById("query-form") as HTMLFormElement,
  document.getElementById("query-output") as HTMLElement,
);

map.setViewport(initial);
