// Pure HTML builders for the panels; the DOM glue just assigns
// innerHTML. Keeping these as string functions makes the display
// logic testable without a browser.

import { ObjectDocument, ResultDocument, ApiErrorBody } from "./api.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(v: number | string | boolean): string {
  if (typeof v === "number" && !Number.isInteger(v)) {
    return v.toPrecision(8).replace(/\.?0+$/, "");
  }
  return String(v);
}

export function renderSummary(obj: Record<string, number | string | boolean>): string {
  const keys = [
    "objID", "ra", "dec", "objType",
    "modelMag_u", "modelMag_g", "modelMag_r", "modelMag_i", "modelMag_z",
    "distance_arcmin",
  ];
  const rows = keys
    .filter((k) => k in obj)
    .map(
      (k) =>
        `<tr><th>${escapeHtml(k)}</th><td>${escapeHtml(fmt(obj[k]))}</td></tr>`,
    )
    .join("");
  return `<table class="summary">${rows}</table>` +
    `<button class="full-record" data-objid="${obj.objID}">full record</button>`;
}

export function renderNoObject(): string {
  return `<p class="notice">no object here</p>`;
}

export function renderObjectPanel(doc: ObjectDocument): string {
  const parts: string[] = [];
  const obj = doc.object;
  const objRows = Object.entries(obj)
    .map(
      ([k, v]) =>
        `<tr><th>${escapeHtml(k)}</th><td>${escapeHtml(fmt(v))}</td></tr>`,
    )
    .join("");
  parts.push(`<h3>object ${obj.objID}</h3><table class="record">${objRows}</table>`);
  if (doc.specObj) {
    parts.push(
      `<h4>spectrum ${doc.specObj.specObjID} (plate ${doc.specObj.plateID}, ` +
        `fiber ${doc.specObj.fiberID}, class ${doc.specObj.specClass}, ` +
        `z=${fmt(doc.specObj.z)})</h4>`,
    );
    const lines = doc.specLines
      .map(
        (ln) =>
          `<tr><td>${fmt(ln.wavelength)}</td><td>${fmt(ln.ew)}</td>` +
          `<td>${fmt(ln.height)}</td></tr>`,
      )
      .join("");
    parts.push(
      `<table class="spec-lines"><thead><tr><th>wavelength</th><th>ew</th>` +
        `<th>height</th></tr></thead><tbody>${lines}</tbody></table>`,
    );
    const zs = Object.entries(doc.redshifts)
      .map(([k, r]) => `${k}: z=${fmt(r.z)}`)
      .join(", ");
    if (zs) parts.push(`<p class="redshifts">${escapeHtml(zs)}</p>`);
  } else {
    parts.push(`<p class="notice">no spectrum for this object</p>`);
  }
  if (doc.neighbors.length) {
    const n = doc.neighbors
      .map((x) => `${x.neighborObjID} (${x.distance.toFixed(3)}&prime;)`)
      .join(", ");
    parts.push(`<p class="neighbors">neighbors: ${n}</p>`);
  }
  return parts.join("\n");
}

export function renderResultsGrid(doc: ResultDocument): string {
  const head = doc.columns
    .map((c) => `<th>${escapeHtml(c)}</th>`)
    .join("");
  const body = doc.rows
    .map(
      (row) =>
        `<tr>${row.map((v) => `<td>${escapeHtml(fmt(v))}</td>`).join("")}</tr>`,
    )
    .join("");
  const banners: string[] = [];
  if (doc.truncated) {
    banners.push(`<p class="banner truncated">results truncated at the row limit</p>`);
  }
  if (doc.timedOut) {
    banners.push(`<p class="banner timed-out">query timed out; showing partial results</p>`);
  }
  const stats = `<p class="stats">${doc.rows.length} rows, ${doc.rowsScanned} scanned, ` +
    `${doc.elapsed}s elapsed</p>`;
  return (
    banners.join("") +
    stats +
    `<table class="grid"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`
  );
}

// inline diagnostic with a caret under the offending column, e.g.
//   (r-g)>>1
//         ^ expected a number ...
export function renderInlineError(text: string, err: ApiErrorBody): string {
  const lines = text.split("\n");
  const line = Math.min(Math.max(err.line ?? 1, 1), lines.length);
  const col = Math.max(err.col ?? 1, 1);
  const src = lines[line - 1] ?? "";
  const caret = " ".repeat(col - 1) + "^";
  return (
    `<pre class="query-error"><code>${escapeHtml(src)}\n${escapeHtml(caret)}` +
    ` ${escapeHtml(err.message)}</code></pre>`
  );
}
