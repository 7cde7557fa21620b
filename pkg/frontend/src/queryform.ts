// The text query form: view picker, filter text, results grid with
// truncation/timeout banners, inline diagnostics, CSV download.

import { ApiError, SkyApi, ResultDocument } from "./api.js";
import { renderInlineError, renderResultsGrid } from "./render.js";

export class QueryForm {
  lastResult: ResultDocument | null = null;

  constructor(
    private api: SkyApi,
    private form: HTMLFormElement,
    private output: HTMLElement,
  ) {
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit();
    });
    const dl = form.querySelector<HTMLButtonElement>("button[data-csv]");
    dl?.addEventListener("click", (e) => {
      e.preventDefault();
      void this.downloadCsv();
    });
  }

  private readInputs(): { view: string; where?: string; limit: number } {
    const data = new FormData(this.form);
    const where = String(data.get("where") ?? "").trim();
    return {
      view: String(data.get("view") ?? "PrimaryObjects"),
      where: where || undefined,
      limit: Number(data.get("limit") ?? 100) || 100,
    };
  }

  async submit(): Promise<void> {
    const { view, where, limit } = this.readInputs();
    this.output.innerHTML = `<p class="notice">running...</p>`;
    try {
      const doc = await this.api.query({ view, where, limit });
      this.lastResult = doc;
      this.output.innerHTML = renderResultsGrid(doc);
    } catch (err) {
      this.lastResult = null;
      if (err instanceof ApiError && err.status === 422) {
        this.output.innerHTML = renderInlineError(where ?? "", err.body);
      } else {
        const msg = err instanceof Error ? err.message : String(err);
        this.output.innerHTML = `<p class="error">query failed: ${msg}</p>`;
      }
    }
  }

  async downloadCsv(): Promise<void> {
    const { view, where, limit } = this.readInputs();
    try {
      const csv = await this.api.queryCsv({ view, where, limit });
      const blob = new Blob([csv], { type: "text/csv" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = "query.csv";
      a.click();
      URL.revokeObjectURL(a.href);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.output.innerHTML = renderInlineError(where ?? "", err.body);
      }
    }
  }
}
