// Typed client for the catalog service. The navigator talks to the
// documented HTTP endpoints only; no other state source exists.

export interface ResultDocument {
  columns: string[];
  types: string[];
  rows: (number | string | boolean)[][];
  truncated: boolean;
  timedOut: boolean;
  elapsed: number;
  rowsScanned: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  line?: number;
  col?: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export interface NearestResponse {
  found: boolean;
  object?: Record<string, number | string | boolean>;
}

export interface ObjectDocument {
  object: Record<string, number | string | boolean>;
  field: Record<string, number | string | boolean> | null;
  specObj: Record<string, number | string | boolean> | null;
  specLines: Record<string, number | string | boolean>[];
  redshifts: Record<string, Record<string, number | string | boolean>>;
  neighbors: { neighborObjID: number; distance: number }[];
}

export interface QueryBody {
  view?: string;
  where?: string;
  select?: string[];
  limit?: number;
  timeout?: number;
  format?: "json" | "csv";
}

async function unwrap<T>(res: Response): Promise<T> {
  if (res.ok) return (await res.json()) as T;
  let body: ApiErrorBody;
  try {
    body = ((await res.json()) as { error: ApiErrorBody }).error;
  } catch {
    body = { code: "http_" + res.status, message: res.statusText };
  }
  throw new ApiError(res.status, body);
}

export class SkyApi {
  constructor(public baseUrl: string = "") {}

  tileUrl(zoom: number, tx: number, ty: number): string {
    return `${this.baseUrl}/tiles/${zoom}/${tx}/${ty}`;
  }

  async nearest(
    ra: number,
    dec: number,
    radiusArcmin: number,
  ): Promise<NearestResponse> {
    const q = new URLSearchParams({
      ra: String(ra),
      dec: String(dec),
      r: String(radiusArcmin),
    });
    return unwrap(await fetch(`${this.baseUrl}/nearest?${q}`));
  }

  async object(objId: number): Promise<ObjectDocument> {
    return unwrap(await fetch(`${this.baseUrl}/object/${objId}`));
  }

  async query(body: QueryBody): Promise<ResultDocument> {
    return unwrap(
      await fetch(`${this.baseUrl}/query`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async queryCsv(body: QueryBody): Promise<string> {
    const res = await fetch(`${this.baseUrl}/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...body, format: "csv" }),
    });
    if (!res.ok) await unwrap(res); // throws with the error body
    return res.text();
  }

  async cone(
    ra: number,
    dec: number,
    radius: number,
    view = "PrimaryObjects",
  ): Promise<ResultDocument> {
    const q = new URLSearchParams({
      ra: String(ra),
      dec: String(dec),
      radius: String(radius),
      view,
    });
    return unwrap(await fetch(`${this.baseUrl}/cone?${q}`));
  }
}
